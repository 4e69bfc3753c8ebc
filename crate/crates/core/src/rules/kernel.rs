use super::{PricingRule, RuleState};
use crate::error::{Error, Result};

/// Impulse-response kernel K(s, t) = K1(s) K2(t) sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFactors {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
}

impl KernelFactors {
    pub fn diagonal(&self, k: usize) -> f64 {
        self.k1[k] * self.k2[k]
    }
}

/// K1(s) = lambda(s, P_s) / eta_s and K2(t) = H_x(t, xi_t) eta_t.
pub fn kernel_factors<R: PricingRule + ?Sized>(rule: &R, states: &[RuleState]) -> Result<KernelFactors> {
    let mut k1 = Vec::with_capacity(states.len());
    let mut k2 = Vec::with_capacity(states.len());
    for s in states {
        if !(s.eta > 0.0) {
            return Err(Error::domain(format!("eta = {} at node {}", s.eta, s.k)));
        }
        k1.push(rule.lambda(s.t, s.p) / s.eta);
        k2.push(rule.h_x(s.t, s.xi) * s.eta);
    }
    Ok(KernelFactors { k1, k2 })
}
