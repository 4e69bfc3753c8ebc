//! Standard functionals with known derivatives, used as oracles.

use super::PathFunctional;

pub type Fn2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// F = Y_t, with its exact derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl PathFunctional for Identity {
    type State = ();

    fn init(&self, _t0: f64, _y0: f64) {}

    fn step(&self, _s: &(), _t: f64, _dt: f64, _a: f64, _b: f64) {}

    fn value(&self, _s: &(), _t: f64, y: f64) -> f64 {
        y
    }

    fn vertical_exact(&self, _s: &(), _t: f64, _y: f64) -> Option<f64> {
        Some(1.0)
    }

    fn vertical_second_exact(&self, _s: &(), _t: f64, _y: f64) -> Option<f64> {
        Some(0.0)
    }

    fn horizontal_exact(&self, _s: &(), _t: f64, _y: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// F = F(t, Y_t).
pub struct SpaceTime {
    f: Fn2,
}

impl SpaceTime {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        SpaceTime { f: Box::new(f) }
    }

    /// F = G(Y_t).
    pub fn of_value(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SpaceTime::new(move |_t, y| g(y))
    }
}

impl PathFunctional for SpaceTime {
    type State = ();

    fn init(&self, _t0: f64, _y0: f64) {}

    fn step(&self, _s: &(), _t: f64, _dt: f64, _a: f64, _b: f64) {}

    fn value(&self, _s: &(), t: f64, y: f64) -> f64 {
        (self.f)(t, y)
    }
}

/// F = int_0^t h(s, Y_s) ds as a left-point Riemann sum.
pub struct TimeIntegral {
    h: Fn2,
}

impl TimeIntegral {
    pub fn new(h: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeIntegral { h: Box::new(h) }
    }
}

impl PathFunctional for TimeIntegral {
    type State = f64;

    fn init(&self, _t0: f64, _y0: f64) -> f64 {
        0.0
    }

    fn step(&self, acc: &f64, t: f64, dt: f64, y_from: f64, _y_to: f64) -> f64 {
        acc + (self.h)(t, y_from) * dt
    }

    fn value(&self, acc: &f64, _t: f64, _y: f64) -> f64 {
        *acc
    }
}

/// F = int_0^t f(s, Y_s) dY_s as a left-point (Ito) sum.
///
/// The last increment Y_k - Y_{k-1} is multiplied by f at node k-1, so a
/// vertical bump at node k returns f(t_{k-1}, Y_{k-1}), not f(t_k, Y_k).
/// The two differ by O(sqrt(dt)) on Brownian paths.
pub struct LeftPointIntegral {
    f: Fn2,
}

impl LeftPointIntegral {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        LeftPointIntegral { f: Box::new(f) }
    }
}

impl PathFunctional for LeftPointIntegral {
    type State = f64;

    fn init(&self, _t0: f64, _y0: f64) -> f64 {
        0.0
    }

    fn step(&self, acc: &f64, t: f64, _dt: f64, y_from: f64, y_to: f64) -> f64 {
        acc + (self.f)(t, y_from) * (y_to - y_from)
    }

    fn value(&self, acc: &f64, _t: f64, _y: f64) -> f64 {
        *acc
    }
}

/// F = int_0^t f(s, Y_s) dY_s written pathwise through an antiderivative A
/// with dA/dy = f:
///
///   F = A(t, Y_t) - A(0, Y_0) - int_0^t (dA/dt + 1/2 sigma^2 df/dy)(s, Y_s) ds.
///
/// On a path with quadratic variation sigma^2 t this agrees with the Ito
/// integral, and its derivatives are the continuous-time ones: the vertical
/// derivative is f(t, Y_t) and the horizontal one is -1/2 sigma^2 df/dy
/// when A has no explicit time dependence.
pub struct PathwiseIntegral {
    antiderivative: Fn2,
    a_t: Fn2,
    f_y: Fn2,
    sigma: f64,
}

impl PathwiseIntegral {
    pub fn new(
        antiderivative: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        a_t: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_y: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        sigma: f64,
    ) -> Self {
        PathwiseIntegral {
            antiderivative: Box::new(antiderivative),
            a_t: Box::new(a_t),
            f_y: Box::new(f_y),
            sigma,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PathwiseState {
    a0: f64,
    acc: f64,
}

impl PathFunctional for PathwiseIntegral {
    type State = PathwiseState;

    fn init(&self, t0: f64, y0: f64) -> PathwiseState {
        PathwiseState {
            a0: (self.antiderivative)(t0, y0),
            acc: 0.0,
        }
    }

    fn step(&self, s: &PathwiseState, t: f64, dt: f64, y_from: f64, _y_to: f64) -> PathwiseState {
        let g = (self.a_t)(t, y_from) + 0.5 * self.sigma * self.sigma * (self.f_y)(t, y_from);
        PathwiseState {
            a0: s.a0,
            acc: s.acc + g * dt,
        }
    }

    fn value(&self, s: &PathwiseState, t: f64, y: f64) -> f64 {
        (self.antiderivative)(t, y) - s.a0 - s.acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{evaluate, vertical_derivative, DerivativeConfig};
    use crate::path::{SamplePath, TimeGrid};

    #[test]
    fn left_point_lag_is_exact() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = SamplePath::new(g, vec![0.0, 0.3, -0.2, 0.5, 0.1]).unwrap();
        let f = LeftPointIntegral::new(|_t, w| w);
        let cfg = DerivativeConfig::numeric();
        for k in 1..=4 {
            let d = vertical_derivative(&f, &p, k, &cfg).unwrap();
            assert!((d - p.value(k - 1)).abs() < 1e-9, "k={k}: {d}");
        }
    }

    #[test]
    fn pathwise_matches_ito_sum_on_fine_path() {
        // int W dW = (W_t^2 - t)/2 exactly in the pathwise form when sigma = 1.
        let g = TimeGrid::new(1.0, 2).unwrap();
        let p = SamplePath::new(g, vec![0.0, 0.4, 1.1]).unwrap();
        let f = PathwiseIntegral::new(|_t, w| 0.5 * w * w, |_t, _w| 0.0, |_t, _w| 1.0, 1.0);
        let v = evaluate(&f, &p, 2).unwrap();
        assert!((v - (0.5 * 1.21 - 0.5)).abs() < 1e-15);
    }
}
