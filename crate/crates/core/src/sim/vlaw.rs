use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::insider::density::{kimura_terminal_sample, Density};
use crate::rules::{PricingRule, Rule};

/// Law of the fundamental value V.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum VLaw {
    Normal { mean: f64, sd: f64 },
    Lognormal { log_mean: f64, log_sd: f64 },
    /// Time-T law of dP = C P (1 - P) dB, `variance` = C^2 int sigma^2.
    KimuraTerminal { p0: f64, variance: f64 },
    Point { value: f64 },
}

impl VLaw {
    /// The law of P_T when Y is Brownian, which is what V must follow for the
    /// bridge strategy to leave Y Brownian.
    pub fn matched(rule: &Rule, horizon: f64) -> VLaw {
        let p0 = rule.p0();
        match rule.density() {
            Density::Gaussian { .. } | Density::DetLambda { .. } => VLaw::Normal {
                mean: p0,
                sd: rule.density().variance(0.0, horizon).sqrt(),
            },
            d @ Density::Lognormal { .. } => {
                let s2 = d.variance(0.0, horizon);
                VLaw::Lognormal {
                    log_mean: p0.ln() - 0.5 * s2,
                    log_sd: s2.sqrt(),
                }
            }
            d @ Density::Kimura { .. } => VLaw::KimuraTerminal {
                p0,
                variance: d.variance(0.0, horizon),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            VLaw::Normal { mean, sd } => mean.is_finite() && *sd > 0.0 && sd.is_finite(),
            VLaw::Lognormal { log_mean, log_sd } => {
                log_mean.is_finite() && *log_sd > 0.0 && log_sd.is_finite()
            }
            VLaw::KimuraTerminal { p0, variance } => {
                *p0 > 0.0 && *p0 < 1.0 && *variance > 0.0 && variance.is_finite()
            }
            VLaw::Point { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid fundamental law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            VLaw::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            VLaw::Lognormal { log_mean, log_sd } => {
                (log_mean + log_sd * rng.sample::<f64, _>(StandardNormal)).exp()
            }
            VLaw::KimuraTerminal { p0, variance } => {
                let u: f64 = rng.gen();
                let z: f64 = rng.sample(StandardNormal);
                kimura_terminal_sample(*p0, *variance, u, z)
            }
            VLaw::Point { value } => *value,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            VLaw::Normal { mean, .. } => *mean,
            VLaw::Lognormal { log_mean, log_sd } => (log_mean + 0.5 * log_sd * log_sd).exp(),
            VLaw::KimuraTerminal { p0, .. } => *p0,
            VLaw::Point { value } => *value,
        }
    }
}
