//! Monte Carlo market: noise traders, the insider and the pricing rule run
//! forward path by path.

pub mod rng;
pub mod vlaw;

pub use vlaw::VLaw;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::insider::wealth::{certainty_equivalent, utility};
use crate::insider::{cap_rate, Observation, Strategy};
use crate::noise::NoiseVol;
use crate::path::{SamplePath, TimeGrid};
use crate::rules::{initial_state, price_step, PricingRule};
use crate::scenario::Scenario;
use crate::stats::basic::{correlation, mean_se, MeanSe};
use rng::{path_rng, Stream};

/// A scenario bound to one grid.
pub struct Model<'a> {
    pub scenario: &'a Scenario,
    pub grid: TimeGrid,
    pub strategy: Strategy,
    pub checkpoints: Vec<usize>,
}

impl<'a> Model<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        Self::with_steps(scenario, scenario.mc.steps)
    }

    pub fn with_steps(scenario: &'a Scenario, steps: usize) -> Result<Self> {
        let grid = TimeGrid::new(scenario.horizon, steps)?;
        let strategy = Strategy::prepare(&scenario.strategy, &scenario.rule, &grid, scenario.cap)?;
        let checkpoints = scenario
            .output
            .checkpoint_times
            .iter()
            .map(|&t| grid.nearest_index(t))
            .collect();
        Ok(Model {
            scenario,
            grid,
            strategy,
            checkpoints,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub path_id: u64,
    pub v: f64,
    pub y_t: f64,
    pub p_t: f64,
    pub w_t: f64,
    pub utility: f64,
    pub cap_events: u32,
    pub boundary_events: u32,
    /// Market-maker wealth -Y_T (V - P_T) - sum Y_k dP_k.
    pub wm: f64,
    pub z_t: f64,
    /// Realized quadratic variation of Y.
    pub qv: f64,
    /// Terminal price from the Euler scheme on the price SDE.
    pub p_sde_t: f64,
    pub overflow: bool,
    /// First time W touched the first-passage level.
    pub passage_time: Option<f64>,
    /// P at the checkpoint nodes.
    pub checkpoints: Vec<f64>,
    /// Sum and sum of squares of dZ / (sigma sqrt(dt)).
    pub dz_sum: f64,
    pub dz_sq: f64,
    pub failed: Option<String>,
}

impl PathRecord {
    /// Neither failed nor clipped at a price boundary.
    pub fn usable(&self) -> bool {
        self.failed.is_none() && self.boundary_events == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub z: f64,
    pub y: f64,
    pub p: f64,
    pub theta: f64,
    pub w: f64,
    pub boundary_events: u32,
}

#[derive(Debug, Clone, Copy)]
pub enum Control<'a> {
    Feedback,
    /// Pre-computed rates, one per step, capped before use.
    Fixed(&'a [f64]),
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Capture {
    /// Keep the standard normal draws behind dZ.
    pub dz: bool,
    pub nodes: bool,
    pub trace: bool,
    /// Keep every `thin`-th standardized Y increment; 0 keeps none.
    pub thin: usize,
    /// Increments from node `thin_end` on are not kept.
    pub thin_end: usize,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct PathOutput {
    pub record: Option<PathRecord>,
    pub dz: Vec<f64>,
    pub theta: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub increments: Vec<f64>,
}

/// Run one path. `noise` replays stored standard normal draws instead of
/// reading the Z stream.
pub(crate) fn run_path(
    model: &Model<'_>,
    idx: u64,
    control: Control<'_>,
    noise: Option<&[f64]>,
    cap: Capture,
) -> PathOutput {
    let sc = model.scenario;
    let rule = &sc.rule;
    let g = &model.grid;
    let n = g.n_steps();
    let dt = g.dt();
    let sqdt = dt.sqrt();
    let mut out = PathOutput::default();
    let mut zrng = path_rng(sc.mc.seed, idx, Stream::Z);
    let v = sc.fundamental.sample(&mut path_rng(sc.mc.seed, idx, Stream::V));

    let mut state = initial_state(rule);
    let (mut y, mut z, mut w, mut wealth, mut mm_int, mut qv) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut dz_sum, mut dz_sq) = (0.0, 0.0);
    let mut cap_events = 0u32;
    let mut checkpoints = Vec::with_capacity(model.checkpoints.len());
    let mut passage_time = None;
    let passage_level = match sc.strategy {
        crate::insider::StrategySpec::FirstPassage { level, .. } => Some(level),
        _ => None,
    };
    let mut failed = None;

    let target = model.strategy.target(rule, v);
    if cap.nodes {
        out.y.reserve(n + 1);
        out.p.reserve(n + 1);
        out.theta.reserve(n);
    }
    if cap.trace {
        out.trace.push(TraceRow {
            t: 0.0,
            z,
            y,
            p: state.p,
            theta: 0.0,
            w: 0.0,
            boundary_events: 0,
        });
    }
    let record_checkpoints = |k: usize, p: f64, cps: &mut Vec<f64>| {
        for &c in &model.checkpoints {
            if c == k {
                cps.push(p);
            }
        }
    };
    record_checkpoints(0, state.p, &mut checkpoints);

    match target {
        Err(e) => failed = Some(e.to_string()),
        Ok(target) => {
            for k in 0..n {
                let t = g.time(k);
                let sigma = rule.noise().sigma(t);
                let theta = match control {
                    Control::Feedback => {
                        let obs = Observation {
                            k,
                            t,
                            y,
                            p: state.p,
                            w,
                            hit: passage_time.is_some(),
                        };
                        match model.strategy.theta(rule, &obs, &target) {
                            Ok(th) => th,
                            Err(e) => {
                                failed = Some(format!("step {k}: {e}"));
                                break;
                            }
                        }
                    }
                    Control::Fixed(rates) => cap_rate(rates[k], model.strategy.cap()),
                };
                let (theta, capped) = theta;
                cap_events += capped as u32;
                let std_dz = match noise {
                    Some(draws) => draws[k],
                    None => zrng.sample::<f64, _>(StandardNormal),
                };
                let dz = sigma * sqdt * std_dz;
                let dy = theta * dt + dz;
                if cap.nodes {
                    out.y.push(y);
                    out.p.push(state.p);
                    out.theta.push(theta);
                }
                if cap.dz {
                    out.dz.push(std_dz);
                }
                if cap.thin > 0 && k % cap.thin == 0 && k < cap.thin_end {
                    out.increments.push(dy / (sigma * sqdt));
                }
                wealth += (v - state.p) * theta * dt;
                let next = match price_step(rule, &state, dy, dt) {
                    Ok(s) => s,
                    Err(e) => {
                        failed = Some(format!("step {k}: {e}"));
                        break;
                    }
                };
                mm_int += y * (next.p - state.p);
                state = next;
                state.t = g.time(k + 1);
                y += dy;
                z += dz;
                w += dy / sigma;
                qv += dy * dy;
                dz_sum += std_dz;
                dz_sq += std_dz * std_dz;
                if let Some(a) = passage_level {
                    if passage_time.is_none() && (w - a) * a.signum() >= 0.0 {
                        passage_time = Some(state.t);
                    }
                }
                record_checkpoints(k + 1, state.p, &mut checkpoints);
                if cap.trace {
                    out.trace.push(TraceRow {
                        t: state.t,
                        z,
                        y,
                        p: state.p,
                        theta,
                        w: wealth,
                        boundary_events: state.boundary_events,
                    });
                }
            }
        }
    }
    if cap.nodes && failed.is_none() {
        out.y.push(y);
        out.p.push(state.p);
    }
    let (u, overflow) = utility(wealth, sc.gamma);
    out.record = Some(PathRecord {
        path_id: idx,
        v,
        y_t: y,
        p_t: state.p,
        w_t: wealth,
        utility: u,
        cap_events,
        boundary_events: state.boundary_events,
        wm: -y * (v - state.p) - mm_int,
        z_t: z,
        qv,
        p_sde_t: state.p_sde,
        overflow,
        passage_time,
        checkpoints,
        dz_sum,
        dz_sq,
        failed,
    });
    out
}

/// Worker count from KYLESIM_THREADS; 0 or unset means one per core.
pub fn threads_from_env() -> usize {
    std::env::var("KYLESIM_THREADS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or_else(threads_from_env))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Worker count; None reads KYLESIM_THREADS.
    pub threads: Option<usize>,
    /// Keep thinned standardized Y increments for this many leading paths.
    pub increment_paths: usize,
    pub thinning: usize,
    /// Drop increments of the last `tail_steps` steps.
    pub tail_steps: usize,
    /// Keep whole Y paths for this many leading paths.
    pub y_paths: usize,
    /// Override the scenario path count.
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub n_paths: usize,
    pub n_failed: usize,
    pub n_boundary: usize,
    pub n_used: usize,
    pub cap_events: u64,
    pub cap_rate: f64,
    pub v: MeanSe,
    pub y_t: MeanSe,
    pub var_y_t: f64,
    pub p_t: MeanSe,
    pub w_t: MeanSe,
    pub utility: MeanSe,
    pub certainty_equivalent: f64,
    pub wm: MeanSe,
    pub terminal_gap: MeanSe,
    /// Mean and variance of the standardized noise increments.
    pub dz_mean: f64,
    pub dz_var: f64,
    pub corr_v_z: f64,
    /// Mean realized QV of Y over int sigma^2.
    pub qv_ratio: f64,
}

impl Summary {
    pub fn from_records(records: &[PathRecord], scenario: &Scenario, grid: &TimeGrid) -> Summary {
        let used: Vec<&PathRecord> = records.iter().filter(|r| r.usable()).collect();
        let col = |f: &dyn Fn(&PathRecord) -> f64| -> Vec<f64> { used.iter().map(|r| f(r)).collect() };
        let y_t = col(&|r| r.y_t);
        let ys = mean_se(&y_t);
        let cap_events: u64 = records.iter().map(|r| r.cap_events as u64).sum();
        let n = grid.n_steps() as f64;
        let (dz_s, dz_q): (f64, f64) = records
            .iter()
            .filter(|r| r.failed.is_none())
            .fold((0.0, 0.0), |(a, b), r| (a + r.dz_sum, b + r.dz_sq));
        let n_ok = records.iter().filter(|r| r.failed.is_none()).count() as f64;
        let dz_mean = dz_s / (n_ok * n);
        let total_var = scenario.rule.noise().integrated_variance(grid.horizon());
        Summary {
            n_paths: records.len(),
            n_failed: records.iter().filter(|r| r.failed.is_some()).count(),
            n_boundary: records.iter().filter(|r| r.boundary_events > 0).count(),
            n_used: used.len(),
            cap_events,
            cap_rate: cap_events as f64 / (records.len() as f64 * n),
            v: mean_se(&col(&|r| r.v)),
            var_y_t: ys.sd * ys.sd,
            y_t: ys,
            p_t: mean_se(&col(&|r| r.p_t)),
            w_t: mean_se(&col(&|r| r.w_t)),
            utility: mean_se(&col(&|r| r.utility)),
            certainty_equivalent: certainty_equivalent(&col(&|r| r.w_t), scenario.gamma),
            wm: mean_se(&col(&|r| r.wm)),
            terminal_gap: mean_se(&col(&|r| (r.p_t - r.v).abs())),
            dz_mean,
            dz_var: dz_q / (n_ok * n) - dz_mean * dz_mean,
            corr_v_z: correlation(&col(&|r| r.v), &col(&|r| r.z_t)),
            qv_ratio: col(&|r| r.qv).iter().sum::<f64>() / (used.len() as f64 * total_var),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub grid: TimeGrid,
    pub records: Vec<PathRecord>,
    /// Thinned standardized Y increments, one vector per kept path.
    pub increments: Vec<Vec<f64>>,
    pub y_paths: Vec<SamplePath>,
    pub summary: Summary,
}

/// Simulate every path of the model. Output does not depend on the worker count.
pub fn simulate(model: &Model<'_>, opts: &SimOptions) -> Result<SimulationResult> {
    let n_paths = opts.paths.unwrap_or(model.scenario.mc.paths);
    if n_paths == 0 {
        return Err(Error::config("paths must be positive"));
    }
    let pool = thread_pool(opts.threads)?;
    let outputs: Vec<PathOutput> = pool.install(|| {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let cap = Capture {
                    nodes: (i as usize) < opts.y_paths,
                    thin: if (i as usize) < opts.increment_paths {
                        opts.thinning.max(1)
                    } else {
                        0
                    },
                    thin_end: model.grid.n_steps().saturating_sub(opts.tail_steps),
                    ..Capture::default()
                };
                run_path(model, i, Control::Feedback, None, cap)
            })
            .collect()
    });
    let mut records = Vec::with_capacity(n_paths);
    let mut increments = Vec::new();
    let mut y_paths = Vec::new();
    for (i, o) in outputs.into_iter().enumerate() {
        let rec = o.record.expect("every run yields a record");
        if i < opts.increment_paths && rec.failed.is_none() {
            increments.push(o.increments);
        }
        if i < opts.y_paths && rec.usable() {
            y_paths.push(SamplePath::new(model.grid, o.y)?);
        }
        records.push(rec);
    }
    check_failures(&records, model.scenario.verify.thresholds.failed_frac)?;
    let summary = Summary::from_records(&records, model.scenario, &model.grid);
    Ok(SimulationResult {
        grid: model.grid,
        records,
        increments,
        y_paths,
        summary,
    })
}

pub(crate) fn check_failures(records: &[PathRecord], limit: f64) -> Result<()> {
    let failed: Vec<&PathRecord> = records.iter().filter(|r| r.failed.is_some()).collect();
    if failed.len() as f64 > limit * records.len() as f64 {
        let first = failed[0];
        return Err(Error::Abort(format!(
            "{} of {} paths failed (limit {:.2}%); first failure on path {}: {}",
            failed.len(),
            records.len(),
            100.0 * limit,
            first.path_id,
            first.failed.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub record: PathRecord,
    pub rows: Vec<TraceRow>,
}

/// Regenerate one path with its full trajectory.
pub fn replay(model: &Model<'_>, index: usize) -> Result<Replay> {
    if index >= model.scenario.mc.paths {
        return Err(Error::config(format!(
            "path index {index} out of range for {} paths",
            model.scenario.mc.paths
        )));
    }
    let out = run_path(
        model,
        index as u64,
        Control::Feedback,
        None,
        Capture {
            trace: true,
            ..Capture::default()
        },
    );
    Ok(Replay {
        record: out.record.expect("every run yields a record"),
        rows: out.trace,
    })
}

/// Demand paths Y = int sigma_Z dB with no insider, seeded per path, for the
/// residual checks on pricing rules.
pub fn demand_paths(noise: &NoiseVol, grid: TimeGrid, n: usize, seed: u64) -> Result<Vec<SamplePath>> {
    let sd: Vec<f64> = (0..grid.n_steps())
        .map(|k| noise.variance_between(grid.time(k), grid.time(k + 1)).sqrt())
        .collect();
    (0..n as u64)
        .map(|i| {
            let mut rng = path_rng(seed, i, Stream::Z);
            let inc: Vec<f64> = sd.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)).collect();
            SamplePath::from_increments(grid, 0.0, &inc)
        })
        .collect()
}
