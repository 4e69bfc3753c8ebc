//! Pricing rules of the form P_t = H(t, xi_t), xi_t = xi_0 + int lambda(s, P_s) dY_s.

mod checks;
mod functional;
mod kernel;
mod state;

pub use checks::{
    bracket_check, check_equilibrium_conditions, check_h_equation, check_lambda_equation,
    kv_check, solve_lambda_ode, two_history_check, BracketCheck, EquilibriumResiduals, RectGrid,
};
pub use functional::{RuleFunctional, RuleFunctionalState};
pub use kernel::{kernel_factors, KernelFactors};
pub use state::{initial_state, price_step, simulate_states, RuleState, BOUNDARY_EPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::insider::density::Density;
use crate::noise::NoiseVol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceDomain {
    Real,
    Positive,
    /// Open unit interval. Rules on this domain must use H(t, x) = x.
    Unit,
}

/// H and lambda with their partial derivatives.
pub trait PricingRule: Send + Sync {
    fn h(&self, t: f64, x: f64) -> f64;
    fn h_t(&self, t: f64, x: f64) -> f64;
    fn h_x(&self, t: f64, x: f64) -> f64;
    fn h_xx(&self, t: f64, x: f64) -> f64;

    fn lambda(&self, t: f64, p: f64) -> f64;
    fn lambda_t(&self, t: f64, p: f64) -> f64;
    fn lambda_p(&self, t: f64, p: f64) -> f64;
    fn lambda_pp(&self, t: f64, p: f64) -> f64;

    fn p0(&self) -> f64;
    fn xi0(&self) -> f64;
    fn noise(&self) -> &NoiseVol;

    fn domain(&self) -> PriceDomain {
        PriceDomain::Real
    }

    /// One step of xi. Euler by default.
    fn xi_step(&self, t: f64, xi: f64, p: f64, dy: f64, _dt: f64) -> f64 {
        xi + self.lambda(t, p) * dy
    }

    /// True when dH/dx * dlambda/dp is constant, so the stochastic
    /// exponential can be stepped exactly.
    fn eta_integrand_constant(&self) -> bool {
        false
    }
}

/// The four shipped rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// H(t, x) = P0 + x, lambda constant.
    Bachelier { p0: f64, lambda: f64, noise: NoiseVol },
    /// H(t, x) = x, lambda(t, x) = lambda * x.
    BlackScholes { p0: f64, lambda: f64, noise: NoiseVol },
    /// H(t, x) = P0 + x, lambda(t) = lambda0 / (1 - lambda0 * gamma * int_0^t sigma^2).
    DetLambda {
        p0: f64,
        lambda0: f64,
        gamma: f64,
        noise: NoiseVol,
    },
    /// H(t, x) = x, lambda(t, x) = C x (1 - x) on (0, 1).
    Kimura { p0: f64, c: f64, noise: NoiseVol },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Bachelier,
    BlackScholes,
    DetLambda,
    Kimura,
}

impl RuleKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bachelier" => Some(RuleKind::Bachelier),
            "black_scholes" => Some(RuleKind::BlackScholes),
            "det_lambda" => Some(RuleKind::DetLambda),
            "kimura" => Some(RuleKind::Kimura),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::Bachelier => "bachelier",
            RuleKind::BlackScholes => "black_scholes",
            RuleKind::DetLambda => "det_lambda",
            RuleKind::Kimura => "kimura",
        }
    }
}

pub(crate) fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl Rule {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        self.noise().validate()?;
        match self {
            Rule::Bachelier { p0, lambda, .. } => {
                positive("lambda", *lambda)?;
                if !p0.is_finite() {
                    return Err(Error::config("P0 must be finite"));
                }
            }
            Rule::BlackScholes { p0, lambda, .. } => {
                positive("lambda", *lambda)?;
                positive("P0", *p0)?;
            }
            Rule::DetLambda {
                p0, lambda0, gamma, ..
            } => {
                positive("lambda", *lambda0)?;
                if !p0.is_finite() {
                    return Err(Error::config("P0 must be finite"));
                }
                if !(gamma.is_finite() && *gamma <= 0.0) {
                    return Err(Error::config(format!("gamma must be <= 0, got {gamma}")));
                }
            }
            Rule::Kimura { p0, c, .. } => {
                positive("C", *c)?;
                if !(*p0 > 0.0 && *p0 < 1.0) {
                    return Err(Error::config(format!(
                        "P0 must lie in (0, 1) for the kimura rule, got {p0}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> RuleKind {
        match self {
            Rule::Bachelier { .. } => RuleKind::Bachelier,
            Rule::BlackScholes { .. } => RuleKind::BlackScholes,
            Rule::DetLambda { .. } => RuleKind::DetLambda,
            Rule::Kimura { .. } => RuleKind::Kimura,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// lambda(t) for the deterministic rule.
    fn det_lambda(lambda0: f64, gamma: f64, noise: &NoiseVol, t: f64) -> f64 {
        lambda0 / (1.0 - lambda0 * gamma * noise.integrated_variance(t))
    }

    /// Market depth g(t, p): the vertical derivative of the price written as
    /// a function of (t, P_t).
    pub fn depth(&self, t: f64, p: f64) -> f64 {
        match self {
            Rule::Bachelier { lambda, .. } => *lambda,
            Rule::BlackScholes { lambda, .. } => lambda * p,
            Rule::DetLambda {
                lambda0,
                gamma,
                noise,
                ..
            } => Self::det_lambda(*lambda0, *gamma, noise, t),
            Rule::Kimura { c, .. } => c * p * (1.0 - p),
        }
    }

    /// Aggregate demand Y_T that makes the terminal price equal `v`, for rules
    /// whose price at T is a function of Y_T alone (Y_0 = 0).
    pub fn terminal_demand(&self, v: f64, horizon: f64) -> Option<f64> {
        match self {
            Rule::Bachelier { p0, lambda, .. } => Some((v - p0) / lambda),
            Rule::BlackScholes {
                p0, lambda, noise, ..
            } => {
                if v <= 0.0 {
                    return None;
                }
                Some(((v / p0).ln() + 0.5 * lambda * lambda * noise.integrated_variance(horizon)) / lambda)
            }
            _ => None,
        }
    }

    /// Transition density of the price when Y is Brownian with volatility sigma_Z.
    pub fn density(&self) -> Density {
        match self {
            Rule::Bachelier { lambda, noise, .. } => Density::Gaussian {
                scale: *lambda,
                noise: noise.clone(),
            },
            Rule::BlackScholes { lambda, noise, .. } => Density::Lognormal {
                scale: *lambda,
                noise: noise.clone(),
            },
            Rule::DetLambda {
                lambda0,
                gamma,
                noise,
                ..
            } => Density::DetLambda {
                lambda0: *lambda0,
                gamma: *gamma,
                noise: noise.clone(),
            },
            Rule::Kimura { c, noise, .. } => Density::Kimura {
                c: *c,
                noise: noise.clone(),
            },
        }
    }

    pub fn functional(&self) -> RuleFunctional<'_> {
        RuleFunctional::new(self)
    }

    /// Default (t, x) grid for the analytic checks.
    pub fn default_grid(&self, horizon: f64) -> RectGrid {
        let x = match self {
            Rule::Bachelier { .. } | Rule::DetLambda { .. } => (-3.0, 3.0),
            Rule::BlackScholes { p0, .. } => (0.2 * p0, 5.0 * p0),
            Rule::Kimura { .. } => (0.02, 0.98),
        };
        RectGrid {
            t: (0.0, horizon, 11),
            x: (x.0, x.1, 41),
        }
    }
}

impl PricingRule for Rule {
    fn h(&self, _t: f64, x: f64) -> f64 {
        match self {
            Rule::Bachelier { p0, .. } | Rule::DetLambda { p0, .. } => p0 + x,
            Rule::BlackScholes { .. } | Rule::Kimura { .. } => x,
        }
    }

    fn h_t(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }

    fn h_x(&self, _t: f64, _x: f64) -> f64 {
        1.0
    }

    fn h_xx(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }

    fn lambda(&self, t: f64, p: f64) -> f64 {
        self.depth(t, p)
    }

    fn lambda_t(&self, t: f64, _p: f64) -> f64 {
        match self {
            Rule::DetLambda {
                lambda0,
                gamma,
                noise,
                ..
            } => {
                let l = Self::det_lambda(*lambda0, *gamma, noise, t);
                gamma * noise.sigma2(t) * l * l
            }
            _ => 0.0,
        }
    }

    fn lambda_p(&self, _t: f64, p: f64) -> f64 {
        match self {
            Rule::Bachelier { .. } | Rule::DetLambda { .. } => 0.0,
            Rule::BlackScholes { lambda, .. } => *lambda,
            Rule::Kimura { c, .. } => c * (1.0 - 2.0 * p),
        }
    }

    fn lambda_pp(&self, _t: f64, _p: f64) -> f64 {
        match self {
            Rule::Kimura { c, .. } => -2.0 * c,
            _ => 0.0,
        }
    }

    fn p0(&self) -> f64 {
        match self {
            Rule::Bachelier { p0, .. }
            | Rule::BlackScholes { p0, .. }
            | Rule::DetLambda { p0, .. }
            | Rule::Kimura { p0, .. } => *p0,
        }
    }

    fn xi0(&self) -> f64 {
        match self {
            Rule::Bachelier { .. } | Rule::DetLambda { .. } => 0.0,
            Rule::BlackScholes { p0, .. } | Rule::Kimura { p0, .. } => *p0,
        }
    }

    fn noise(&self) -> &NoiseVol {
        match self {
            Rule::Bachelier { noise, .. }
            | Rule::BlackScholes { noise, .. }
            | Rule::DetLambda { noise, .. }
            | Rule::Kimura { noise, .. } => noise,
        }
    }

    fn domain(&self) -> PriceDomain {
        match self {
            Rule::Bachelier { .. } | Rule::DetLambda { .. } => PriceDomain::Real,
            Rule::BlackScholes { .. } => PriceDomain::Positive,
            Rule::Kimura { .. } => PriceDomain::Unit,
        }
    }

    fn xi_step(&self, t: f64, xi: f64, p: f64, dy: f64, dt: f64) -> f64 {
        match self {
            // Exact: xi is a geometric Brownian motion in Y.
            Rule::BlackScholes { lambda, noise, .. } => {
                xi * (lambda * dy - 0.5 * lambda * lambda * noise.sigma2(t) * dt).exp()
            }
            // Euler on logit(xi), whose noise is additive.
            Rule::Kimura { c, noise, .. } => {
                let l = logit(xi) + c * dy - 0.5 * c * c * noise.sigma2(t) * (1.0 - 2.0 * p) * dt;
                sigmoid(l)
            }
            _ => xi + self.lambda(t, p) * dy,
        }
    }

    fn eta_integrand_constant(&self) -> bool {
        !matches!(self, Rule::Kimura { .. })
    }
}

/// A rule assembled from closures, for experimenting with H and lambda
/// outside the shipped family.
pub struct FnRule {
    pub h: [Box<dyn Fn(f64, f64) -> f64 + Send + Sync>; 4],
    pub lambda: [Box<dyn Fn(f64, f64) -> f64 + Send + Sync>; 4],
    pub p0: f64,
    pub xi0: f64,
    pub noise: NoiseVol,
}

impl PricingRule for FnRule {
    fn h(&self, t: f64, x: f64) -> f64 {
        (self.h[0])(t, x)
    }
    fn h_t(&self, t: f64, x: f64) -> f64 {
        (self.h[1])(t, x)
    }
    fn h_x(&self, t: f64, x: f64) -> f64 {
        (self.h[2])(t, x)
    }
    fn h_xx(&self, t: f64, x: f64) -> f64 {
        (self.h[3])(t, x)
    }
    fn lambda(&self, t: f64, p: f64) -> f64 {
        (self.lambda[0])(t, p)
    }
    fn lambda_t(&self, t: f64, p: f64) -> f64 {
        (self.lambda[1])(t, p)
    }
    fn lambda_p(&self, t: f64, p: f64) -> f64 {
        (self.lambda[2])(t, p)
    }
    fn lambda_pp(&self, t: f64, p: f64) -> f64 {
        (self.lambda[3])(t, p)
    }
    fn p0(&self) -> f64 {
        self.p0
    }
    fn xi0(&self) -> f64 {
        self.xi0
    }
    fn noise(&self) -> &NoiseVol {
        &self.noise
    }
}
