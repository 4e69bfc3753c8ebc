//! Residual checkers for the equilibrium conditions on pricing rules.

use serde::Serialize;

use super::{kernel_factors, simulate_states, PricingRule, Rule};
use crate::calculus::{Cursor, DerivativeConfig};
use crate::error::{Error, Result};
use crate::noise::NoiseVol;
use crate::path::{SamplePath, TimeGrid};

/// Rectangular (t, x) grid given as (lo, hi, count) per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectGrid {
    pub t: (f64, f64, usize),
    pub x: (f64, f64, usize),
}

fn axis(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    })
}

impl RectGrid {
    /// Parse `t0:t1:nt,x0:x1:nx`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::config(format!("grid spec '{spec}' must look like t0:t1:nt,x0:x1:nx"));
        let mut axes = spec.split(',');
        let mut one = |name: &str| -> Result<(f64, f64, usize)> {
            let part = axes.next().ok_or_else(bad)?;
            let f: Vec<&str> = part.trim().split(':').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let lo: f64 = f[0].trim().parse().map_err(|_| bad())?;
            let hi: f64 = f[1].trim().parse().map_err(|_| bad())?;
            let n: usize = f[2].trim().parse().map_err(|_| bad())?;
            if !(lo.is_finite() && hi.is_finite()) || hi < lo || n == 0 || n > 100_000 {
                return Err(Error::config(format!("grid axis {name} in '{spec}' is empty or invalid")));
            }
            Ok((lo, hi, n))
        };
        let t = one("t")?;
        let x = one("x")?;
        if axes.next().is_some() || t.0 < 0.0 {
            return Err(bad());
        }
        Ok(RectGrid { t, x })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        axis(self.t.0, self.t.1, self.t.2)
            .flat_map(move |t| axis(self.x.0, self.x.1, self.x.2).map(move |x| (t, x)))
    }
}

/// max |H_t + 1/2 H_xx lambda(t, H)^2 sigma^2| over the grid.
pub fn check_h_equation<R: PricingRule + ?Sized>(rule: &R, grid: &RectGrid) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, x) in grid.points() {
        let p = rule.h(t, x);
        let lam = rule.lambda(t, p);
        let r = rule.h_t(t, x) + 0.5 * rule.h_xx(t, x) * lam * lam * rule.noise().sigma2(t);
        worst = worst.max(r.abs());
    }
    worst
}

/// max residual of the lambda equation selected by `gamma`:
/// risk neutral  lambda_t + 1/2 sigma^2 (lambda H_x)^2 lambda_pp = 0,
/// risk averse   lambda_t / lambda^2 + 1/2 sigma^2 H_x^2 lambda_pp = gamma H_x sigma^2.
pub fn check_lambda_equation<R: PricingRule + ?Sized>(rule: &R, gamma: f64, grid: &RectGrid) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, x) in grid.points() {
        let p = rule.h(t, x);
        let s2 = rule.noise().sigma2(t);
        let lam = rule.lambda(t, p);
        let hx = rule.h_x(t, x);
        let r = if gamma == 0.0 {
            rule.lambda_t(t, p) + 0.5 * s2 * (lam * hx).powi(2) * rule.lambda_pp(t, p)
        } else {
            rule.lambda_t(t, p) / (lam * lam) + 0.5 * s2 * hx * hx * rule.lambda_pp(t, p)
                - gamma * hx * s2
        };
        worst = worst.max(r.abs());
    }
    worst
}

/// RK4 solution of d lambda / dt = gamma sigma^2(t) lambda^2 at the grid nodes.
pub fn solve_lambda_ode(lambda0: f64, gamma: f64, noise: &NoiseVol, grid: &TimeGrid) -> Vec<f64> {
    let f = |t: f64, l: f64| gamma * noise.sigma2(t) * l * l;
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut l = lambda0;
    out.push(l);
    for i in 0..grid.n_steps() {
        let t = grid.time(i);
        let k1 = f(t, l);
        let k2 = f(t + 0.5 * dt, l + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, l + 0.5 * dt * k2);
        let k4 = f(t + dt, l + dt * k3);
        l += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(l);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EquilibriumResiduals {
    /// max |D P + 1/2 grad^2 P sigma^2|
    pub drift: f64,
    /// max |L P - gamma sigma^2 (grad P)^2|
    pub commutator: f64,
    /// smallest numeric grad P seen
    pub min_gradient: f64,
    pub nodes: usize,
}

/// Both functional residuals over every node of every path, with numeric
/// path derivatives of the rule's pathwise functional.
pub fn check_equilibrium_conditions(
    rule: &Rule,
    gamma: f64,
    paths: &[SamplePath],
    cfg: &DerivativeConfig,
) -> Result<EquilibriumResiduals> {
    cfg.validate()?;
    let f = rule.functional();
    let mut out = EquilibriumResiduals {
        min_gradient: f64::INFINITY,
        ..Default::default()
    };
    for path in paths {
        let g = path.grid();
        let mut c = Cursor::new(&f, path);
        for k in 0..g.n_steps() {
            if k + cfg.horizontal_steps > g.n_steps() {
                break;
            }
            let s2 = rule.noise().sigma2(g.time(k));
            let grad = c.vertical(cfg)?;
            let r1 = c.horizontal(cfg)? + 0.5 * c.vertical_second(cfg)? * s2;
            let r2 = c.commutator(cfg)?.value - gamma * s2 * grad * grad;
            out.drift = out.drift.max(r1.abs());
            out.commutator = out.commutator.max(r2.abs());
            out.min_gradient = out.min_gradient.min(grad);
            out.nodes += 1;
            c.advance()?;
        }
    }
    Ok(out)
}

/// max |K1 K2 - grad P| / grad P along one Y path, with grad P the numeric
/// vertical derivative of the pathwise functional.
pub fn kv_check(rule: &Rule, y: &SamplePath, cfg: &DerivativeConfig) -> Result<f64> {
    let states = simulate_states(rule, y)?;
    let kf = kernel_factors(rule, &states)?;
    let f = rule.functional();
    let mut c = Cursor::new(&f, y);
    let mut worst: f64 = 0.0;
    for k in 0..=y.grid().n_steps() {
        let grad = c.vertical(cfg)?;
        if !(grad > 0.0) {
            return Err(Error::domain(format!("price not increasing in Y at node {k}")));
        }
        worst = worst.max((kf.diagonal(k) - grad).abs() / grad);
        if k < y.grid().n_steps() {
            c.advance()?;
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketCheck {
    /// int L P dt per window, summed over paths.
    pub lhs: Vec<f64>,
    /// sum K2 dK1 per window, summed over paths.
    pub rhs: Vec<f64>,
}

impl BracketCheck {
    pub fn max_relative_gap(&self, floor: f64) -> f64 {
        self.lhs
            .iter()
            .zip(&self.rhs)
            .filter(|(l, _)| l.abs() > floor)
            .map(|(l, r)| (l - r).abs() / l.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.lhs
            .iter()
            .chain(&self.rhs)
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Compare the commutator with K2 dK1/dt, both integrated over `windows`
/// equal time windows. Per-node differences of K1 carry O(dt) martingale
/// noise, so the comparison is made on window integrals.
pub fn bracket_check(
    rule: &Rule,
    paths: &[SamplePath],
    windows: usize,
    cfg: &DerivativeConfig,
) -> Result<BracketCheck> {
    let windows = windows.max(1);
    let mut lhs = vec![0.0; windows];
    let mut rhs = vec![0.0; windows];
    let f = rule.functional();
    for y in paths {
        let g = y.grid();
        let n = g.n_steps();
        let states = simulate_states(rule, y)?;
        let kf = kernel_factors(rule, &states)?;
        let mut c = Cursor::new(&f, y);
        for k in 0..n {
            let w = (k * windows / n).min(windows - 1);
            lhs[w] += c.commutator(cfg)?.value * g.dt();
            rhs[w] += kf.k2[k] * (kf.k1[k + 1] - kf.k1[k]);
            c.advance()?;
        }
    }
    Ok(BracketCheck { lhs, rhs })
}

/// Relative disagreement of grad P at node k between path `a` and a copy of
/// path `b` whose value at k is moved so that both share (t_k, P_k).
pub fn two_history_check(
    rule: &Rule,
    a: &SamplePath,
    b: &SamplePath,
    k: usize,
    cfg: &DerivativeConfig,
) -> Result<f64> {
    let f = rule.functional();
    let ca = Cursor::at(&f, a, k)?;
    let target = ca.value()?;
    let grad_a = ca.vertical(cfg)?;

    let base = b.stopped(k)?;
    let price_at = |shift: f64| -> Result<f64> {
        let p = base.vertical_bump(k, shift)?;
        Cursor::at(&f, &p, k)?.value()
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut tries = 0;
    while price_at(lo)? > target || price_at(hi)? < target {
        lo *= 2.0;
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::domain("could not match prices across histories"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if price_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    let matched = base.vertical_bump(k, 0.5 * (lo + hi))?;
    let grad_b = Cursor::at(&f, &matched, k)?.vertical(cfg)?;
    Ok((grad_a - grad_b).abs() / grad_a.abs())
}
