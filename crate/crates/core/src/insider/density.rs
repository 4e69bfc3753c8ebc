//! Transition densities of the price under Brownian aggregate demand, and
//! their scores in the starting point.

use serde::{Deserialize, Serialize};

use crate::noise::NoiseVol;
use crate::rules::{logit, sigmoid};

pub trait TransitionDensity {
    /// log p_{t,T}(from, to).
    fn log_density(&self, t: f64, horizon: f64, from: f64, to: f64) -> f64;

    /// d/d(from) log p_{t,T}(from, to). Central difference unless overridden.
    fn score(&self, t: f64, horizon: f64, from: f64, to: f64) -> f64 {
        let h = 1e-5 * from.abs().max(1e-3);
        (self.log_density(t, horizon, from + h, to) - self.log_density(t, horizon, from - h, to))
            / (2.0 * h)
    }

    fn density(&self, t: f64, horizon: f64, from: f64, to: f64) -> f64 {
        self.log_density(t, horizon, from, to).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "density", rename_all = "snake_case")]
pub enum Density {
    /// P_T ~ N(P_t, scale^2 int sigma^2).
    Gaussian { scale: f64, noise: NoiseVol },
    /// log P_T ~ N(log P_t - s^2/2, s^2), s^2 = scale^2 int sigma^2.
    Lognormal { scale: f64, noise: NoiseVol },
    /// P_T ~ N(P_t, int lambda(s)^2 sigma^2(s) ds).
    DetLambda {
        lambda0: f64,
        gamma: f64,
        noise: NoiseVol,
    },
    /// Kimura diffusion dP = C P (1 - P) dY.
    Kimura { c: f64, noise: NoiseVol },
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

impl Density {
    /// Variance parameter between t and T: the Gaussian variance, the
    /// log-variance, or C^2 int sigma^2 for Kimura.
    pub fn variance(&self, t: f64, horizon: f64) -> f64 {
        match self {
            Density::Gaussian { scale, noise } | Density::Lognormal { scale, noise } => {
                scale * scale * noise.variance_between(t, horizon)
            }
            Density::DetLambda {
                lambda0,
                gamma,
                noise,
            } => {
                let lam = |s: f64| lambda0 / (1.0 - lambda0 * gamma * noise.integrated_variance(s));
                if *gamma == 0.0 {
                    lambda0 * lambda0 * noise.variance_between(t, horizon)
                } else {
                    (lam(horizon) - lam(t)) / gamma
                }
            }
            Density::Kimura { c, noise } => c * c * noise.variance_between(t, horizon),
        }
    }
}

impl TransitionDensity for Density {
    fn log_density(&self, t: f64, horizon: f64, from: f64, to: f64) -> f64 {
        let v = self.variance(t, horizon);
        if !(v > 0.0) {
            return f64::NAN;
        }
        match self {
            Density::Gaussian { .. } | Density::DetLambda { .. } => {
                -0.5 * (LN_2PI + v.ln()) - (to - from).powi(2) / (2.0 * v)
            }
            Density::Lognormal { .. } => {
                if !(to > 0.0 && from > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let m = to.ln() - from.ln() + 0.5 * v;
                -0.5 * (LN_2PI + v.ln()) - to.ln() - m * m / (2.0 * v)
            }
            Density::Kimura { .. } => {
                if !(to > 0.0 && to < 1.0 && from > 0.0 && from < 1.0) {
                    return f64::NEG_INFINITY;
                }
                let d = logit(to) - logit(from);
                -0.5 * (LN_2PI + v.ln()) + 0.5 * (from * (1.0 - from)).ln()
                    - 1.5 * (to * (1.0 - to)).ln()
                    - v / 8.0
                    - d * d / (2.0 * v)
            }
        }
    }

    fn score(&self, t: f64, horizon: f64, from: f64, to: f64) -> f64 {
        let v = self.variance(t, horizon);
        match self {
            Density::Gaussian { .. } | Density::DetLambda { .. } => (to - from) / v,
            Density::Lognormal { .. } => (to.ln() - from.ln() + 0.5 * v) / (v * from),
            Density::Kimura { .. } => {
                let q = from * (1.0 - from);
                0.5 * (1.0 - 2.0 * from) / q + (logit(to) - logit(from)) / (v * q)
            }
        }
    }
}

/// Exact draw from the time-T Kimura law started at `p0` with variance
/// parameter `v` = C^2 int sigma^2: logit P_T is Gaussian with variance v and
/// mean logit p0 + v/2 with probability p0, logit p0 - v/2 otherwise.
pub fn kimura_terminal_sample(p0: f64, v: f64, uniform: f64, normal: f64) -> f64 {
    let shift = if uniform < p0 { 0.5 * v } else { -0.5 * v };
    sigmoid(logit(p0) + shift + v.sqrt() * normal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma1() -> NoiseVol {
        NoiseVol::Constant(1.0)
    }

    #[test]
    fn analytic_scores_match_numeric() {
        let cases = [
            (Density::Gaussian { scale: 1.3, noise: sigma1() }, 0.2, 0.7),
            (Density::Lognormal { scale: 0.8, noise: sigma1() }, 1.1, 0.6),
            (
                Density::DetLambda {
                    lambda0: 1.0,
                    gamma: -1.0,
                    noise: sigma1(),
                },
                0.1,
                -0.4,
            ),
            (Density::Kimura { c: 1.5, noise: sigma1() }, 0.3, 0.8),
        ];
        for (d, from, to) in cases {
            let exact = d.score(0.25, 1.0, from, to);
            let h = 1e-6;
            let num = (d.log_density(0.25, 1.0, from + h, to) - d.log_density(0.25, 1.0, from - h, to))
                / (2.0 * h);
            assert!((exact - num).abs() < 1e-6 * exact.abs().max(1.0), "{d:?}: {exact} vs {num}");
        }
    }

    #[test]
    fn det_lambda_variance_closed_form() {
        let d = Density::DetLambda {
            lambda0: 1.0,
            gamma: -1.0,
            noise: sigma1(),
        };
        assert!((d.variance(0.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
