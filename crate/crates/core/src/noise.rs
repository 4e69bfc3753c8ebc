//! Noise-trader volatility sigma_Z(t).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant volatility, or a step table of `(start_time, sigma)` pairs whose
/// first entry starts at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseVol {
    Constant(f64),
    Steps(Vec<(f64, f64)>),
}

impl NoiseVol {
    pub fn constant(sigma: f64) -> Result<Self> {
        let v = NoiseVol::Constant(sigma);
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseVol::Constant(s) => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(Error::config(format!("sigma_Z must be positive, got {s}")));
                }
            }
            NoiseVol::Steps(table) => {
                if table.is_empty() || table[0].0 != 0.0 {
                    return Err(Error::config("sigma_Z table must start at t = 0"));
                }
                for w in table.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::config("sigma_Z table times must increase"));
                    }
                }
                for &(t, s) in table {
                    if !(t.is_finite() && s.is_finite() && s > 0.0) {
                        return Err(Error::config(format!(
                            "sigma_Z table entry ({t}, {s}) is not positive and finite"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sigma(&self, t: f64) -> f64 {
        match self {
            NoiseVol::Constant(s) => *s,
            NoiseVol::Steps(table) => {
                let i = table.partition_point(|&(start, _)| start <= t);
                table[i.saturating_sub(1)].1
            }
        }
    }

    pub fn sigma2(&self, t: f64) -> f64 {
        let s = self.sigma(t);
        s * s
    }

    /// int_0^t sigma^2(s) ds.
    pub fn integrated_variance(&self, t: f64) -> f64 {
        match self {
            NoiseVol::Constant(s) => s * s * t,
            NoiseVol::Steps(table) => {
                let mut acc = 0.0;
                for (i, &(start, s)) in table.iter().enumerate() {
                    if start >= t {
                        break;
                    }
                    let end = table.get(i + 1).map_or(t, |n| n.0.min(t));
                    acc += s * s * (end - start);
                }
                acc
            }
        }
    }

    pub fn variance_between(&self, t0: f64, t1: f64) -> f64 {
        self.integrated_variance(t1) - self.integrated_variance(t0)
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            NoiseVol::Constant(s) => Some(*s),
            NoiseVol::Steps(t) if t.len() == 1 => Some(t[0].1),
            NoiseVol::Steps(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_table() {
        let v = NoiseVol::Steps(vec![(0.0, 1.0), (0.5, 2.0)]);
        v.validate().unwrap();
        assert_eq!(v.sigma(0.2), 1.0);
        assert_eq!(v.sigma(0.5), 2.0);
        assert!((v.integrated_variance(1.0) - (0.5 + 4.0 * 0.5)).abs() < 1e-15);
        assert!((v.integrated_variance(0.25) - 0.25).abs() < 1e-15);
        assert!(NoiseVol::Steps(vec![(0.1, 1.0)]).validate().is_err());
        assert!(NoiseVol::constant(0.0).is_err());
    }
}
