//! Statistical certification of a (rule, strategy) pair.

pub mod basic;
pub mod blocks;
mod certify;
pub mod report;
pub mod tests;

pub use crate::insider::perturb::Direction;
pub use certify::certify;
pub use report::{Block, Check, EquilibriumReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pass thresholds. Every one is echoed in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Level for the KS and Ljung-Box tests.
    pub alpha: f64,
    /// Allowed |realized QV / model QV - 1|.
    pub qv_tol: f64,
    /// Accepted range for the terminal-gap log-log slope.
    pub slope_min: f64,
    pub slope_max: f64,
    /// Smallest-step mean gap must be below gap_frac * sd(V).
    pub gap_frac: f64,
    /// Standard errors allowed for zero-mean checks.
    pub se_mult: f64,
    /// Allowed fraction of capped (path, step) pairs.
    pub cap_rate: f64,
    /// Failed paths beyond this fraction abort the run.
    pub failed_frac: f64,
    /// Equilibrium-equation residuals.
    pub residual_tol: f64,
    /// Relative |K1 K2 - grad P| / grad P.
    pub kv_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            alpha: 0.01,
            qv_tol: 0.02,
            slope_min: 0.35,
            slope_max: 0.65,
            gap_frac: 0.05,
            se_mult: 3.0,
            cap_rate: 1e-3,
            failed_frac: 0.01,
            residual_tol: 1e-3,
            kv_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub thresholds: Thresholds,
    /// Keep every `thinning`-th increment for the martingale tests.
    pub thinning: usize,
    /// Steps before T left out of the martingale tests. Euler steps of a
    /// bridge drift inflate the increment variance by about dt / (T - t),
    /// so 100 keeps that below 1%.
    pub tail_steps: usize,
    pub lb_lags: usize,
    /// Quantile bins for the conditional-mean table.
    pub bins: usize,
    /// Leading paths whose increments enter the martingale tests.
    pub brownian_paths: usize,
    /// Paths per step size in the terminal block; 0 means mc.paths.
    pub terminal_paths: usize,
    /// Paths for the perturbation harness; 0 means mc.paths.
    pub optimality_paths: usize,
    /// Y paths fed to the functional residual checks.
    pub residual_paths: usize,
    pub epsilon: f64,
    pub directions: Vec<Direction>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            thresholds: Thresholds::default(),
            thinning: 8,
            tail_steps: 100,
            lb_lags: 10,
            bins: 10,
            brownian_paths: 10_000,
            terminal_paths: 0,
            optimality_paths: 0,
            residual_paths: 10,
            epsilon: 0.1,
            directions: Direction::CANONICAL.to_vec(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        let pos = [
            ("alpha", t.alpha),
            ("qv_tol", t.qv_tol),
            ("gap_frac", t.gap_frac),
            ("se_mult", t.se_mult),
            ("cap_rate", t.cap_rate),
            ("residual_tol", t.residual_tol),
            ("kv_tol", t.kv_tol),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("key 'verify.{name}' must be positive, got {v}")));
            }
        }
        if !(t.alpha < 1.0) {
            return Err(Error::config("key 'verify.alpha' must be below 1"));
        }
        if !(t.failed_frac >= 0.0 && t.failed_frac < 1.0) {
            return Err(Error::config("key 'verify.failed_frac' must lie in [0, 1)"));
        }
        if !(t.slope_min.is_finite() && t.slope_max.is_finite() && t.slope_min <= t.slope_max) {
            return Err(Error::config("verify.slope_min must not exceed verify.slope_max"));
        }
        if self.thinning == 0 || self.bins == 0 {
            return Err(Error::config("keys 'verify.thinning' and 'verify.bins' must be positive"));
        }
        Ok(())
    }
}
