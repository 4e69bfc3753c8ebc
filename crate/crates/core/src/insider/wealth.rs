use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::TimeGrid;

/// gamma * W beyond which exp(gamma W) is flagged as overflowing.
pub const UTILITY_EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WealthRecord {
    pub wealth: f64,
    pub utility: f64,
    pub overflow: bool,
    pub terminal_gap: f64,
    pub cap_events: u32,
}

/// U(W) = W for gamma = 0, gamma exp(gamma W) otherwise. The exponent is
/// clamped at the flag limit so the value stays finite.
pub fn utility(w: f64, gamma: f64) -> (f64, bool) {
    if gamma == 0.0 {
        return (w, false);
    }
    let e = gamma * w;
    if e > UTILITY_EXP_LIMIT {
        (gamma * UTILITY_EXP_LIMIT.exp(), true)
    } else {
        (gamma * e.exp(), false)
    }
}

/// log(mean exp(gamma W)) / gamma, via log-sum-exp.
pub fn certainty_equivalent(wealth: &[f64], gamma: f64) -> f64 {
    if wealth.is_empty() {
        return f64::NAN;
    }
    if gamma == 0.0 {
        return wealth.iter().sum::<f64>() / wealth.len() as f64;
    }
    let m = wealth.iter().map(|w| gamma * w).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = wealth.iter().map(|w| (gamma * w - m).exp()).sum();
    (m + (s / wealth.len() as f64).ln()) / gamma
}

/// Left-point wealth sum (V - P_k) theta_k dt over the grid. `prices` has one
/// entry per node, `theta` one per step.
pub fn wealth(v: f64, prices: &[f64], theta: &[f64], grid: &TimeGrid, gamma: f64) -> Result<WealthRecord> {
    let n = grid.n_steps();
    if prices.len() != n + 1 {
        return Err(Error::LengthMismatch {
            got: prices.len(),
            expected: n + 1,
        });
    }
    if theta.len() != n {
        return Err(Error::LengthMismatch {
            got: theta.len(),
            expected: n,
        });
    }
    let mut w = 0.0;
    for k in 0..n {
        w += (v - prices[k]) * theta[k] * grid.dt();
    }
    let (u, overflow) = utility(w, gamma);
    Ok(WealthRecord {
        wealth: w,
        utility: u,
        overflow,
        terminal_gap: (prices[n] - v).abs(),
        cap_events: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_strategy_zero_wealth() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let r = wealth(3.0, &[0.0, 1.0, -2.0, 5.0, 7.0], &[0.0; 4], &g, 0.0).unwrap();
        assert_eq!(r.wealth, 0.0);
        assert_eq!(r.utility, 0.0);
    }

    #[test]
    fn constant_rate() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let r = wealth(3.0, &[1.0; 9], &[1.0; 8], &g, 0.0).unwrap();
        assert!((r.wealth - 4.0).abs() < 1e-14);
    }

    #[test]
    fn utility_is_bounded_and_flagged() {
        let (u, f) = utility(-1e6, -1.0);
        assert!(u.is_finite() && f);
        let (u, f) = utility(1.0, -1.0);
        assert!((u + (-1.0f64).exp()).abs() < 1e-15 && !f);
    }

    #[test]
    fn certainty_equivalent_of_constant() {
        assert!((certainty_equivalent(&[2.0, 2.0], -3.0) - 2.0).abs() < 1e-14);
    }
}
