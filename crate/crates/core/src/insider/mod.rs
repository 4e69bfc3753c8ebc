//! Insider trading rates: bridge drifts that steer the price to the private
//! target, wealth and utility, the value functional and the perturbation
//! harness for the first-order condition.

pub mod density;
pub mod perturb;
pub mod table;
pub mod value;
pub mod wealth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::TimeGrid;
use crate::rules::{logit, PricingRule, Rule, RuleKind};
use density::TransitionDensity;
pub use table::DriftTable;

/// Strategy kinds. Drifts are in units of Y per unit time unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    None,
    /// theta = rate, whatever the target.
    Constant { rate: f64 },
    /// Brownian bridge of Y to y*(V) + offset.
    GaussianBridge { target_offset: f64 },
    /// Score of the rule's price transition density times its diffusion coefficient.
    DiffusionDensityBridge,
    DetLambdaBridge,
    KimuraBridge,
    /// Bessel-type bridge that makes W hit `level` at `target_time`.
    FirstPassage { level: f64, target_time: f64 },
    CustomTable { table: DriftTable },
}

impl StrategySpec {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::None => "none",
            StrategySpec::Constant { .. } => "constant",
            StrategySpec::GaussianBridge { .. } => "gaussian_bridge",
            StrategySpec::DiffusionDensityBridge => "diffusion_density_bridge",
            StrategySpec::DetLambdaBridge => "det_lambda_bridge",
            StrategySpec::KimuraBridge => "kimura_bridge",
            StrategySpec::FirstPassage { .. } => "first_passage",
            StrategySpec::CustomTable { .. } => "custom_table",
        }
    }

    /// Whether the strategy is meant to deliver P_T = V.
    pub fn is_bridge(&self) -> bool {
        matches!(
            self,
            StrategySpec::GaussianBridge { .. }
                | StrategySpec::DiffusionDensityBridge
                | StrategySpec::DetLambdaBridge
                | StrategySpec::KimuraBridge
        )
    }
}

/// What the strategy may read at node k: the public history summarised by
/// (t, Y_t, P_t), the driving-noise coordinate W_t = int dY / sigma, and
/// whether W has already touched the first-passage level.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub k: usize,
    pub t: f64,
    pub y: f64,
    pub p: f64,
    pub w: f64,
    pub hit: bool,
}

/// The insider's private information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub v: f64,
    /// Terminal demand delivering P_T = v, when the rule has one.
    pub y_star: Option<f64>,
}

/// Brownian bridge rate (y* - Y_t) / (T - t), with T - t floored at dt.
pub fn drift_gaussian_bridge(y_star: f64, y: f64, t: f64, horizon: f64, dt: f64) -> Result<f64> {
    if t >= horizon {
        return Err(Error::domain(format!("bridge drift evaluated at t = {t} >= T")));
    }
    Ok((y_star - y) / (horizon - t).max(dt))
}

/// d/dp log p_{t,T}(p, x) * g in units of the driving Brownian motion, with
/// T - t floored at dt.
pub fn drift_diffusion_density<D: TransitionDensity + ?Sized>(
    density: &D,
    t: f64,
    horizon: f64,
    dt: f64,
    p: f64,
    x: f64,
    g: f64,
) -> Result<f64> {
    if t >= horizon {
        return Err(Error::domain(format!("bridge drift evaluated at t = {t} >= T")));
    }
    let t_eff = horizon - (horizon - t).max(dt);
    let ld = density.log_density(t_eff, horizon, p, x);
    if !ld.is_finite() || ld < -700.0 {
        return Err(Error::Unreachable);
    }
    let a = density.score(t_eff, horizon, p, x) * g;
    if !a.is_finite() {
        return Err(Error::Unreachable);
    }
    Ok(a)
}

/// lambda(t) (x - p) / tail, tail = int_t^T lambda^2.
pub fn drift_det_lambda(x: f64, p: f64, lambda_t: f64, tail: f64) -> Result<f64> {
    if !(tail > 0.0) {
        return Err(Error::domain("empty tail integral at the horizon"));
    }
    Ok(lambda_t * (x - p) / tail)
}

/// Kimura bridge drift of the driving Brownian motion,
/// c (1 - 2p) / 2 + log[x (1 - p) / ((1 - x) p)] / (c tau), c = C sigma.
pub fn drift_kimura(x: f64, p: f64, c: f64, tau: f64) -> Result<f64> {
    let inside = |q: f64| q > 0.0 && q < 1.0;
    if !inside(x) || !inside(p) {
        return Err(Error::domain(format!("kimura drift needs p, x in (0, 1), got p = {p}, x = {x}")));
    }
    if !(tau > 0.0) {
        return Err(Error::domain("kimura drift evaluated at the horizon"));
    }
    Ok(0.5 * c * (1.0 - 2.0 * p) + (logit(x) - logit(p)) / (c * tau))
}

/// (1 / (W - a) - (W - a) / (u - t)) until W first touches a, then 0.
pub fn drift_first_passage(level: f64, target_time: f64, w: f64, t: f64, hit: bool, dt: f64) -> f64 {
    let d = w - level;
    if hit || d == 0.0 {
        return 0.0;
    }
    1.0 / d - d / (target_time - t).max(dt)
}

/// A strategy bound to a rule and a grid.
#[derive(Debug, Clone)]
pub struct Strategy {
    spec: StrategySpec,
    cap: f64,
    horizon: f64,
    dt: f64,
    /// int_{t_k}^T lambda^2 sigma^2 per node, for the deterministic-lambda bridge.
    tails: Vec<f64>,
}

impl Strategy {
    pub fn prepare(spec: &StrategySpec, rule: &Rule, grid: &TimeGrid, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::config(format!("insider.cap must be positive, got {cap}")));
        }
        let kind = rule.kind();
        let incompatible = || {
            Error::config(format!(
                "strategy {} cannot be used with rule {}",
                spec.name(),
                rule.name()
            ))
        };
        let mut tails = Vec::new();
        match spec {
            StrategySpec::GaussianBridge { target_offset } => {
                if !matches!(kind, RuleKind::Bachelier | RuleKind::BlackScholes) {
                    return Err(incompatible());
                }
                if !target_offset.is_finite() {
                    return Err(Error::config("insider.target_offset must be finite"));
                }
            }
            StrategySpec::DetLambdaBridge => {
                if !matches!(kind, RuleKind::Bachelier | RuleKind::DetLambda) {
                    return Err(incompatible());
                }
                let n = grid.n_steps();
                let f = |k: usize| {
                    let t = grid.time(k);
                    let l = rule.depth(t, 0.0);
                    l * l * rule.noise().sigma2(t)
                };
                tails = vec![0.0; n + 1];
                for k in (0..n).rev() {
                    tails[k] = tails[k + 1] + 0.5 * (f(k) + f(k + 1)) * grid.dt();
                }
            }
            StrategySpec::KimuraBridge => {
                if kind != RuleKind::Kimura {
                    return Err(incompatible());
                }
            }
            StrategySpec::FirstPassage { level, target_time } => {
                if !level.is_finite() || !(*target_time > 0.0 && *target_time <= grid.horizon()) {
                    return Err(Error::config(
                        "first_passage needs a finite level and 0 < target_time <= T",
                    ));
                }
                if *level == 0.0 {
                    return Err(Error::config("first_passage level must differ from W_0 = 0"));
                }
            }
            StrategySpec::Constant { rate } => {
                if !rate.is_finite() {
                    return Err(Error::config("insider.rate must be finite"));
                }
            }
            StrategySpec::None | StrategySpec::DiffusionDensityBridge | StrategySpec::CustomTable { .. } => {}
        }
        Ok(Strategy {
            spec: spec.clone(),
            cap,
            horizon: grid.horizon(),
            dt: grid.dt(),
            tails,
        })
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn target(&self, rule: &Rule, v: f64) -> Result<Target> {
        let y_star = match &self.spec {
            StrategySpec::GaussianBridge { target_offset } => Some(
                rule.terminal_demand(v, self.horizon)
                    .ok_or_else(|| Error::domain(format!("no terminal demand reaches V = {v}")))?
                    + target_offset,
            ),
            _ => None,
        };
        Ok(Target { v, y_star })
    }

    /// Uncapped rate in Y units.
    pub fn raw_theta(&self, rule: &Rule, obs: &Observation, target: &Target) -> Result<f64> {
        let (t, sigma) = (obs.t, rule.noise().sigma(obs.t));
        match &self.spec {
            StrategySpec::None => Ok(0.0),
            StrategySpec::Constant { rate } => Ok(*rate),
            StrategySpec::GaussianBridge { .. } => {
                let y_star = target.y_star.expect("gaussian bridge target has a terminal demand");
                drift_gaussian_bridge(y_star, obs.y, t, self.horizon, self.dt)
            }
            StrategySpec::DiffusionDensityBridge => {
                let g = rule.depth(t, obs.p) * sigma;
                let a = drift_diffusion_density(&rule.density(), t, self.horizon, self.dt, obs.p, target.v, g)?;
                Ok(sigma * a)
            }
            StrategySpec::DetLambdaBridge => {
                let lam = rule.depth(t, obs.p);
                let a = drift_det_lambda(target.v, obs.p, lam, self.tails[obs.k])?;
                Ok(rule.noise().sigma2(t) * a)
            }
            StrategySpec::KimuraBridge => {
                let Rule::Kimura { c, noise, .. } = rule else {
                    unreachable!("checked in prepare")
                };
                let c_eff = c * sigma;
                let t_eff = self.horizon - (self.horizon - t).max(self.dt);
                let tau = noise.variance_between(t_eff, self.horizon) / (sigma * sigma);
                Ok(sigma * drift_kimura(target.v, obs.p, c_eff, tau)?)
            }
            StrategySpec::FirstPassage { level, target_time } => {
                Ok(sigma * drift_first_passage(*level, *target_time, obs.w, t, obs.hit, self.dt))
            }
            StrategySpec::CustomTable { table } => Ok(table.eval(t, obs.y)),
        }
    }

    /// Capped rate and whether the cap bit.
    pub fn theta(&self, rule: &Rule, obs: &Observation, target: &Target) -> Result<(f64, bool)> {
        let raw = self.raw_theta(rule, obs, target)?;
        if !raw.is_finite() {
            return Err(Error::NonFinite(format!("insider rate at t = {}", obs.t)));
        }
        Ok(cap_rate(raw, self.cap))
    }
}

pub fn cap_rate(raw: f64, cap: f64) -> (f64, bool) {
    if raw.abs() > cap {
        (raw.signum() * cap, true)
    } else {
        (raw, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseVol;

    #[test]
    fn bridge_examples() {
        assert_eq!(drift_gaussian_bridge(1.0, 1.0, 0.3, 1.0, 0.01).unwrap(), 0.0);
        assert_eq!(drift_gaussian_bridge(1.0, 0.0, 0.5, 1.0, 0.01).unwrap(), 2.0);
        assert!(drift_gaussian_bridge(1.0, 0.0, 1.0, 1.0, 0.01).is_err());
        assert_eq!(drift_kimura(0.5, 0.5, 1.0, 0.3).unwrap(), 0.0);
        assert!(drift_kimura(1.0, 0.5, 1.0, 0.3).is_err());
        assert_eq!(drift_det_lambda(0.4, 0.4, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(drift_first_passage(1.0, 2.0, 0.0, 1.0, false, 1e-3), 0.0);
        assert_eq!(drift_first_passage(1.0, 2.0, 0.5, 1.0, true, 1e-3), 0.0);
    }

    #[test]
    fn kimura_first_term() {
        // Target equal to the price leaves only the drift correction.
        assert!((drift_kimura(0.25, 0.25, 1.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gaussian_density_drift_matches_bridge() {
        let d = density::Density::Gaussian {
            scale: 1.0,
            noise: NoiseVol::Constant(2.0),
        };
        let a = drift_diffusion_density(&d, 0.2, 1.0, 0.01, 0.3, 1.1, 2.0).unwrap();
        let expect = 2.0 * (1.1 - 0.3) / (4.0 * 0.8);
        assert!((a - expect).abs() < 1e-12);
    }

    #[test]
    fn det_lambda_tail_matches_quadrature() {
        let rule = Rule::DetLambda {
            p0: 0.0,
            lambda0: 1.0,
            gamma: -1.0,
            noise: NoiseVol::Constant(1.0),
        };
        let grid = TimeGrid::new(1.0, 10_000).unwrap();
        let s = Strategy::prepare(&StrategySpec::DetLambdaBridge, &rule, &grid, 1e3).unwrap();
        // int_0^1 (1 + t)^-2 dt = 1/2.
        assert!((s.tails[0] - 0.5).abs() < 1e-8);
        let obs = Observation {
            k: 0,
            t: 0.0,
            y: 0.0,
            p: 0.0,
            w: 0.0,
            hit: false,
        };
        let target = s.target(&rule, 1.0).unwrap();
        let th = s.raw_theta(&rule, &obs, &target).unwrap();
        assert!((th - 2.0).abs() < 1e-7);
    }
}
