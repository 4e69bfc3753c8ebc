//! First- and second-order response of expected utility to perturbing the
//! insider's rate along a direction beta: dX = (theta + eps beta) dt.
//!
//! Each path is run once under the feedback strategy, recording theta and
//! the noise draws. The perturbed runs use theta + eps beta as a fixed
//! control on the same draws, so J(eps) differences are free of noise
//! resampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{run_path, thread_pool, Capture, Control, Model};
use crate::stats::basic::{mean_se, MeanSe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Zero,
    /// beta = 1
    Constant,
    /// beta = t / T
    TimeRatio,
    /// beta = sign(V - P_t)
    SignGap,
    /// beta = (y*(V) - Y_t) / (T - t), the Gaussian bridge rate.
    Bridge,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "zero" => Direction::Zero,
            "constant" => Direction::Constant,
            "time_ratio" => Direction::TimeRatio,
            "sign_gap" => Direction::SignGap,
            "bridge" => Direction::Bridge,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Direction::Zero => "zero",
            Direction::Constant => "constant",
            Direction::TimeRatio => "time_ratio",
            Direction::SignGap => "sign_gap",
            Direction::Bridge => "bridge",
        }
    }

    pub const CANONICAL: [Direction; 3] = [Direction::Constant, Direction::TimeRatio, Direction::SignGap];
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationResult {
    pub direction: Direction,
    pub epsilon: f64,
    pub n_paths: usize,
    /// Per-path (U(eps) - U(-eps)) / (2 eps).
    pub derivative: MeanSe,
    /// Per-path (U(eps) - 2 U(0) + U(-eps)) / eps^2.
    pub curvature: MeanSe,
}

impl PerturbationResult {
    /// |dJ/deps| within `se_mult` standard errors of 0 and curvature not
    /// significantly positive.
    pub fn first_order_ok(&self, se_mult: f64) -> bool {
        self.derivative.mean.abs() <= se_mult * self.derivative.se
            && self.curvature.mean <= se_mult * self.curvature.se
    }
}

pub fn perturb_and_evaluate(
    model: &Model<'_>,
    directions: &[Direction],
    epsilon: f64,
    paths: usize,
    threads: Option<usize>,
) -> Result<Vec<PerturbationResult>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::config(format!("epsilon must be positive, got {epsilon}")));
    }
    let sc = model.scenario;
    if directions.contains(&Direction::Bridge) && sc.rule.terminal_demand(sc.fundamental.mean(), sc.horizon).is_none() {
        return Err(Error::config(format!(
            "bridge direction needs a rule with a terminal demand, not {}",
            sc.rule.name()
        )));
    }
    let g = model.grid;
    let n = g.n_steps();
    let pool = thread_pool(threads)?;
    type PathResult = (Option<String>, Vec<Option<(f64, f64)>>);
    let per_path: Vec<PathResult> = pool.install(|| {
        (0..paths as u64)
            .into_par_iter()
            .map(|i| {
                let cap = Capture {
                    dz: true,
                    nodes: true,
                    ..Capture::default()
                };
                let base = run_path(model, i, Control::Feedback, None, cap);
                let rec = base.record.as_ref().expect("record");
                if !rec.usable() {
                    return (rec.failed.clone(), vec![None; directions.len()]);
                }
                let v = rec.v;
                let y_star = sc.rule.terminal_demand(v, sc.horizon);
                let u0 = rec.utility;
                let mut rates = vec![0.0; n];
                let res = directions
                    .iter()
                    .map(|d| {
                        let beta = |k: usize| -> f64 {
                            let t = g.time(k);
                            match d {
                                Direction::Zero => 0.0,
                                Direction::Constant => 1.0,
                                Direction::TimeRatio => t / g.horizon(),
                                Direction::SignGap => {
                                    let gap = v - base.p[k];
                                    if gap > 0.0 {
                                        1.0
                                    } else if gap < 0.0 {
                                        -1.0
                                    } else {
                                        0.0
                                    }
                                }
                                Direction::Bridge => {
                                    (y_star.unwrap_or(f64::NAN) - base.y[k]) / (g.horizon() - t).max(g.dt())
                                }
                            }
                        };
                        let mut u = [0.0; 2];
                        for (j, s) in [1.0, -1.0].into_iter().enumerate() {
                            for (k, r) in rates.iter_mut().enumerate() {
                                *r = base.theta[k] + s * epsilon * beta(k);
                            }
                            let o = run_path(model, i, Control::Fixed(&rates), Some(&base.dz), Capture::default());
                            let r = o.record.expect("record");
                            if !r.usable() {
                                return None;
                            }
                            u[j] = r.utility;
                        }
                        Some((
                            (u[0] - u[1]) / (2.0 * epsilon),
                            (u[0] - 2.0 * u0 + u[1]) / (epsilon * epsilon),
                        ))
                    })
                    .collect();
                (None, res)
            })
            .collect()
    });
    let failed = per_path.iter().filter(|p| p.0.is_some()).count();
    if failed as f64 > sc.verify.thresholds.failed_frac * paths as f64 {
        let first = per_path.iter().find_map(|p| p.0.clone()).unwrap_or_default();
        return Err(Error::Abort(format!(
            "{failed} of {paths} base paths failed in the perturbation run; first: {first}"
        )));
    }
    Ok(directions
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let (ds, cs): (Vec<f64>, Vec<f64>) = per_path.iter().filter_map(|p| p.1[j]).unzip();
            PerturbationResult {
                direction: *d,
                epsilon,
                n_paths: ds.len(),
                derivative: mean_se(&ds),
                curvature: mean_se(&cs),
            }
        })
        .collect())
}
