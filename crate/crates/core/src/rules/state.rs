use super::{PriceDomain, PricingRule};
use crate::error::{Error, Result};
use crate::path::SamplePath;

/// Clip distance from the boundary for rules on the unit interval.
pub const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleState {
    pub k: usize,
    pub t: f64,
    pub p: f64,
    pub xi: f64,
    /// Stochastic exponential of int dH/dx dlambda/dp dY.
    pub eta: f64,
    /// Price evolved by Euler on the SDE dP = H_x lambda dY + (H_t + 1/2 H_xx lambda^2 sigma^2) dt.
    pub p_sde: f64,
    pub boundary_events: u32,
}

pub fn initial_state<R: PricingRule + ?Sized>(rule: &R) -> RuleState {
    RuleState {
        k: 0,
        t: 0.0,
        p: rule.p0(),
        xi: rule.xi0(),
        eta: 1.0,
        p_sde: rule.p0(),
        boundary_events: 0,
    }
}

pub fn price_step<R: PricingRule + ?Sized>(
    rule: &R,
    state: &RuleState,
    dy: f64,
    dt: f64,
) -> Result<RuleState> {
    let RuleState { t, p, xi, .. } = *state;
    let sigma2 = rule.noise().sigma2(t);
    let hx = rule.h_x(t, xi);

    let mut xi_new = rule.xi_step(t, xi, p, dy, dt);
    let t_new = t + dt;
    let mut p_new = rule.h(t_new, xi_new);
    let mut boundary_events = state.boundary_events;
    match rule.domain() {
        PriceDomain::Unit => {
            if !(p_new >= BOUNDARY_EPS && p_new <= 1.0 - BOUNDARY_EPS) {
                p_new = if p_new.is_nan() {
                    p
                } else {
                    p_new.clamp(BOUNDARY_EPS, 1.0 - BOUNDARY_EPS)
                };
                xi_new = p_new;
                boundary_events += 1;
            }
        }
        PriceDomain::Positive => {
            if !(p_new > 0.0) {
                return Err(Error::domain(format!("price left (0, inf) at t = {t_new}")));
            }
        }
        PriceDomain::Real => {}
    }
    if !p_new.is_finite() {
        return Err(Error::NonFinite(format!("price at t = {t_new}")));
    }

    let a = hx * rule.lambda_p(t, p);
    let eta = if rule.eta_integrand_constant() {
        state.eta * (a * dy - 0.5 * a * a * sigma2 * dt).exp()
    } else {
        let factor = 1.0 + a * dy;
        if factor <= 0.0 {
            return Err(Error::domain(format!(
                "stochastic exponential factor {factor} at t = {t}"
            )));
        }
        state.eta * factor
    };

    let lam_sde = rule.lambda(t, state.p_sde);
    let p_sde = state.p_sde
        + hx * lam_sde * dy
        + (rule.h_t(t, xi) + 0.5 * rule.h_xx(t, xi) * lam_sde * lam_sde * sigma2) * dt;

    Ok(RuleState {
        k: state.k + 1,
        t: t_new,
        p: p_new,
        xi: xi_new,
        eta,
        p_sde,
        boundary_events,
    })
}

/// Run the rule along a whole Y path; returns one state per node.
pub fn simulate_states<R: PricingRule + ?Sized>(rule: &R, y: &SamplePath) -> Result<Vec<RuleState>> {
    let g = y.grid();
    let mut out = Vec::with_capacity(g.n_steps() + 1);
    let mut s = initial_state(rule);
    out.push(s);
    for (k, dy) in y.increments().enumerate() {
        s = price_step(rule, &s, dy, g.dt())?;
        s.t = g.time(k + 1);
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseVol;
    use crate::rules::Rule;

    fn sigma1() -> NoiseVol {
        NoiseVol::Constant(1.0)
    }

    #[test]
    fn bachelier_step() {
        let r = Rule::Bachelier {
            p0: 0.0,
            lambda: 2.0,
            noise: sigma1(),
        };
        let s = price_step(&r, &initial_state(&r), 0.1, 0.01).unwrap();
        assert!((s.p - 0.2).abs() < 1e-15);
        assert_eq!(s.eta, 1.0);
    }

    #[test]
    fn black_scholes_start() {
        let r = Rule::BlackScholes {
            p0: 3.0,
            lambda: 0.5,
            noise: sigma1(),
        };
        assert_eq!(initial_state(&r).p, 3.0);
    }

    #[test]
    fn kimura_driftless_at_half() {
        let r = Rule::Kimura {
            p0: 0.5,
            c: 1.0,
            noise: sigma1(),
        };
        let s = price_step(&r, &initial_state(&r), 0.0, 0.01).unwrap();
        assert_eq!(s.p, 0.5);
    }

    #[test]
    fn kimura_clips_and_flags() {
        let r = Rule::Kimura {
            p0: 0.5,
            c: 1.0,
            noise: sigma1(),
        };
        let s = price_step(&r, &initial_state(&r), 60.0, 0.01).unwrap();
        assert_eq!(s.boundary_events, 1);
        assert!(s.p <= 1.0 - BOUNDARY_EPS);
    }
}
