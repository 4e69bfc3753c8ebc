//! Each shipped rule written as a pathwise functional of Y.
//!
//! These closed forms are what the numeric path derivatives act on:
//!
//! - Bachelier: P = P0 + lambda Y_t
//! - Black-Scholes: P = P0 exp(lambda Y_t - 1/2 lambda^2 int sigma^2)
//! - deterministic lambda: P = P0 + lambda(t) Y_t - int lambda'(s) Y_s ds
//! - Kimura: logit P = logit P0 + C Y_t - 1/2 C^2 int sigma^2 (1 - 2 P_s) ds
//!
//! Demand starts at Y_0 = 0. The value at node 0 is read off the current
//! path value like any other node, so a bump at t = 0 moves the price.
//! Time integrals are left-point sums, so none of them reads Y_k when
//! stepping into node k and the vertical derivative sees only the explicit
//! Y_t dependence.

use super::{logit, sigmoid, PricingRule, Rule};
use crate::calculus::PathFunctional;

pub struct RuleFunctional<'a> {
    rule: &'a Rule,
}

#[derive(Debug, Clone, Copy)]
pub struct RuleFunctionalState {
    acc: f64,
}

impl<'a> RuleFunctional<'a> {
    pub fn new(rule: &'a Rule) -> Self {
        RuleFunctional { rule }
    }

    fn price(&self, s: &RuleFunctionalState, t: f64, y: f64) -> f64 {
        match self.rule {
            Rule::Bachelier { p0, lambda, .. } => p0 + lambda * y,
            Rule::BlackScholes {
                p0, lambda, noise, ..
            } => {
                p0 * (lambda * y - 0.5 * lambda * lambda * noise.integrated_variance(t))
                    .exp()
            }
            Rule::DetLambda { p0, .. } => {
                p0 + self.rule.depth(t, 0.0) * y - s.acc
            }
            Rule::Kimura { p0, c, .. } => sigmoid(logit(*p0) + c * y - 0.5 * c * c * s.acc),
        }
    }
}

impl PathFunctional for RuleFunctional<'_> {
    type State = RuleFunctionalState;

    fn init(&self, _t0: f64, _y0: f64) -> RuleFunctionalState {
        RuleFunctionalState { acc: 0.0 }
    }

    fn step(
        &self,
        s: &RuleFunctionalState,
        t: f64,
        dt: f64,
        y_from: f64,
        _y_to: f64,
    ) -> RuleFunctionalState {
        let acc = match self.rule {
            Rule::DetLambda { .. } => s.acc + self.rule.lambda_t(t, 0.0) * y_from * dt,
            Rule::Kimura { noise, .. } => {
                let p = self.price(s, t, y_from);
                s.acc + noise.sigma2(t) * (1.0 - 2.0 * p) * dt
            }
            _ => s.acc,
        };
        RuleFunctionalState { acc }
    }

    fn value(&self, s: &RuleFunctionalState, t: f64, y: f64) -> f64 {
        self.price(s, t, y)
    }

    fn vertical_exact(&self, s: &RuleFunctionalState, t: f64, y: f64) -> Option<f64> {
        Some(self.rule.depth(t, self.price(s, t, y)))
    }
}
