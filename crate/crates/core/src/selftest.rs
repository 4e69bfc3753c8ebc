//! Oracle suite for the functional derivatives: six identities with known
//! closed forms, checked at every node of seeded Brownian paths.

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::library::{PathwiseIntegral, SpaceTime, TimeIntegral};
use crate::calculus::{Cursor, DerivativeConfig, PathFunctional};
use crate::error::Result;
use crate::path::{SamplePath, TimeGrid};
use crate::sim::rng::{path_rng, Stream};

#[derive(Debug, Clone, Copy)]
pub struct SelftestConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            paths: 100,
            steps: 4096,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResult {
    pub name: &'static str,
    /// Largest |computed - expected| over all paths and nodes.
    pub max_error: f64,
    /// Largest error as a fraction of its node tolerance; pass iff <= 1.
    pub worst_ratio: f64,
    pub tolerance: &'static str,
    pub nodes: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Horizontal,
    Vertical,
}

/// Which derivative to take, its expected value at (t, y) given the path
/// so far, and the allowed error at that node.
struct Identity<F> {
    name: &'static str,
    tolerance: &'static str,
    op: Op,
    f: F,
    expected: fn(f64, f64) -> f64,
    /// Tolerance as a function of (dt, y).
    tol: fn(f64, f64) -> f64,
}

fn run<F: PathFunctional + Sync>(id: &Identity<F>, paths: &[SamplePath]) -> Result<IdentityResult> {
    let cfg = DerivativeConfig::numeric();
    let per_path: Vec<Result<(f64, f64, usize)>> = paths
        .par_iter()
        .map(|path| {
            let g = *path.grid();
            let mut c = Cursor::new(&id.f, path);
            let (mut max_err, mut worst, mut nodes) = (0.0f64, 0.0f64, 0usize);
            // Horizontal derivatives need one step of room, vertical ones a
            // previous node to bump against.
            let (lo, hi) = match id.op {
                Op::Horizontal => (0, g.n_steps() - 1),
                Op::Vertical => (1, g.n_steps()),
            };
            for k in 0..=hi {
                if k > 0 {
                    c.advance()?;
                }
                if k < lo {
                    continue;
                }
                let (t, y) = (g.time(k), path.value(k));
                let d = match id.op {
                    Op::Horizontal => c.horizontal(&cfg)?,
                    Op::Vertical => c.vertical(&cfg)?,
                };
                let err = (d - (id.expected)(t, y)).abs();
                max_err = max_err.max(err);
                worst = worst.max(err / (id.tol)(g.dt(), y));
                nodes += 1;
            }
            Ok((max_err, worst, nodes))
        })
        .collect();
    let (mut max_error, mut worst_ratio, mut nodes) = (0.0f64, 0.0f64, 0usize);
    for r in per_path {
        let (e, w, n) = r?;
        max_error = max_error.max(e);
        worst_ratio = worst_ratio.max(w);
        nodes += n;
    }
    Ok(IdentityResult {
        name: id.name,
        max_error,
        worst_ratio,
        tolerance: id.tolerance,
        nodes,
        pass: worst_ratio <= 1.0,
    })
}

pub fn brownian_paths(cfg: &SelftestConfig) -> Result<Vec<SamplePath>> {
    let grid = TimeGrid::new(1.0, cfg.steps)?;
    Ok((0..cfg.paths)
        .map(|i| SamplePath::brownian(grid, 0.0, 1.0, &mut path_rng(cfg.seed, i as u64, Stream::Z)))
        .collect())
}

/// Runs all six identities. An evaluation error aborts the suite.
pub fn calculus_selftest(cfg: &SelftestConfig) -> Result<Vec<IdentityResult>> {
    let paths = brownian_paths(cfg)?;
    let exact = |_dt: f64, _y: f64| 1e-12;
    let mut out = Vec::new();
    out.push(run(
        &Identity {
            name: "horizontal G(Y_t) = 0",
            tolerance: "1e-12 abs",
            op: Op::Horizontal,
            f: SpaceTime::of_value(|y| y * y),
            expected: |_, _| 0.0,
            tol: exact,
        },
        &paths,
    )?);
    out.push(run(
        &Identity {
            name: "horizontal F(t, Y_t) = dF/dt",
            tolerance: "1e-8 * max(1, |y|)",
            op: Op::Horizontal,
            f: SpaceTime::new(|t, y| t * y),
            expected: |_, y| y,
            tol: |_, y| 1e-8 * y.abs().max(1.0),
        },
        &paths,
    )?);
    out.push(run(
        &Identity {
            name: "horizontal int h(Y_s) ds = h(Y_t)",
            tolerance: "dt abs",
            op: Op::Horizontal,
            f: TimeIntegral::new(|_s, y| y),
            expected: |_, y| y,
            tol: |dt, _| dt,
        },
        &paths,
    )?);
    out.push(run(
        &Identity {
            name: "vertical G(Y_t) = G'(Y_t)",
            tolerance: "1e-6 * max(1, |G'|)",
            op: Op::Vertical,
            f: SpaceTime::of_value(|y| y * y),
            expected: |_, y| 2.0 * y,
            tol: |_, y| 1e-6 * (2.0 * y).abs().max(1.0),
        },
        &paths,
    )?);
    out.push(run(
        &Identity {
            name: "vertical int h(Y_s) ds = 0",
            tolerance: "1e-12 abs",
            op: Op::Vertical,
            f: TimeIntegral::new(|_s, y| y.sin()),
            expected: |_, _| 0.0,
            tol: exact,
        },
        &paths,
    )?);
    out.push(run(
        &Identity {
            name: "vertical int f(s, W_s) dW_s = f(t, W_t)",
            tolerance: "2% rel",
            op: Op::Vertical,
            f: PathwiseIntegral::new(|_t, w| 0.5 * w * w, |_t, _w| 0.0, |_t, _w| 1.0, 1.0),
            expected: |_, w| w,
            tol: |_, w| 0.02 * w.abs() + 1e-9,
        },
        &paths,
    )?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let cfg = SelftestConfig {
            paths: 4,
            steps: 256,
            seed: 3,
        };
        let r = calculus_selftest(&cfg).unwrap();
        assert_eq!(r.len(), 6);
        for id in &r {
            assert!(id.pass, "{id:?}");
        }
        assert_eq!(r[0].nodes, 4 * 256);
        assert_eq!(r[3].nodes, 4 * 256);
    }
}
