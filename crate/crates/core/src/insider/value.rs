//! The value functional I(t, y, v) = int_v^y (z - v) / g(t, z) dz and the
//! optimal-wealth identities built from it.

use crate::error::{Error, Result};
use crate::rules::{PricingRule, Rule};

pub struct ValueFunctionSpec<G: Fn(f64, f64) -> f64> {
    /// Market depth g(t, p).
    pub g: G,
    pub tol: f64,
}

impl Rule {
    pub fn value_spec(&self) -> ValueFunctionSpec<impl Fn(f64, f64) -> f64 + '_> {
        ValueFunctionSpec {
            g: move |t, p| self.depth(t, p),
            tol: 1e-12,
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adapt<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    Ok(adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson quadrature of a fallible integrand on [a, b].
pub fn integrate<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (fa, fm, fb) = (f(a)?, f(0.5 * (a + b))?, f(b)?);
    let whole = simpson(fa, fm, fb, a, b);
    adapt(&mut f, a, b, fa, fm, fb, whole, tol, 48)
}

pub fn value_function_i<G: Fn(f64, f64) -> f64>(
    t: f64,
    y: f64,
    v: f64,
    spec: &ValueFunctionSpec<G>,
) -> Result<f64> {
    if !(y.is_finite() && v.is_finite()) {
        return Err(Error::NonFinite("value functional argument".into()));
    }
    let integrand = |z: f64| -> Result<f64> {
        let g = (spec.g)(t, z);
        if !(g > 0.0) {
            return Err(Error::domain(format!("market depth g({t}, {z}) = {g} is not positive")));
        }
        Ok((z - v) / g)
    };
    integrate(integrand, v, y, spec.tol)
}

/// I(0, P0, v) + 1/2 int_0^T g(t, v) sigma^2(t) dt: the risk-neutral optimal
/// expected wealth given V = v.
pub fn optimal_wealth_given_v(rule: &Rule, v: f64, horizon: f64) -> Result<f64> {
    let spec = rule.value_spec();
    let i0 = value_function_i(0.0, rule.p0(), v, &spec)?;
    let drift = integrate(
        |t| Ok(rule.depth(t, v) * rule.noise().sigma2(t)),
        0.0,
        horizon,
        1e-12,
    )?;
    Ok(i0 + 0.5 * drift)
}

/// Optimal expected utility given V = v: the wealth above for gamma = 0,
/// gamma exp(gamma * wealth) otherwise.
pub fn optimal_utility_given_v(rule: &Rule, gamma: f64, v: f64, horizon: f64) -> Result<f64> {
    let w = optimal_wealth_given_v(rule, v, horizon)?;
    Ok(if gamma == 0.0 { w } else { gamma * (gamma * w).exp() })
}
