//! Numerical horizontal and vertical derivatives of non-anticipative path
//! functionals, the commutator of the two, and the discrete residual of the
//! functional Ito formula.
//!
//! A functional is written as a left-to-right recursion over the path: a state
//! is initialised at node 0 and advanced one grid step at a time, reading only
//! the two endpoints of the step. Evaluating at node `k` therefore touches
//! nodes `0..=k` and nothing else, which is what makes the functional
//! non-anticipative. The recursion also lets [`Cursor`] reuse the state at
//! `k - 1` for every bump, so a derivative costs O(m) instead of O(k).

pub mod library;

use crate::error::{finite, Error, Result};
use crate::path::SamplePath;

pub trait PathFunctional {
    type State: Clone;

    fn init(&self, t0: f64, y0: f64) -> Self::State;

    /// Advance over `[t, t + dt]` while the path moves from `y_from` to `y_to`.
    fn step(&self, state: &Self::State, t: f64, dt: f64, y_from: f64, y_to: f64) -> Self::State;

    /// Value at time `t` when the current path value is `y`.
    fn value(&self, state: &Self::State, t: f64, y: f64) -> f64;

    fn vertical_exact(&self, _state: &Self::State, _t: f64, _y: f64) -> Option<f64> {
        None
    }

    fn vertical_second_exact(&self, _state: &Self::State, _t: f64, _y: f64) -> Option<f64> {
        None
    }

    fn horizontal_exact(&self, _state: &Self::State, _t: f64, _y: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Central,
    Forward,
}

#[derive(Debug, Clone, Copy)]
pub struct DerivativeConfig {
    /// Relative vertical bump: h = h_rel * max(1, |y|).
    pub h_rel: f64,
    /// Horizontal extension in grid steps.
    pub horizontal_steps: usize,
    pub scheme: Scheme,
    /// Use analytic derivative rules when the functional supplies them.
    pub use_analytic: bool,
    /// Relative bump for the commutator; defaults to sqrt(h_rel).
    pub commutator_h_rel: Option<f64>,
}

impl Default for DerivativeConfig {
    fn default() -> Self {
        DerivativeConfig {
            h_rel: 1e-4,
            horizontal_steps: 1,
            scheme: Scheme::Central,
            use_analytic: true,
            commutator_h_rel: None,
        }
    }
}

impl DerivativeConfig {
    pub fn numeric() -> Self {
        DerivativeConfig {
            use_analytic: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_rel.is_finite() && self.h_rel > 0.0) {
            return Err(Error::config("vertical bump must be positive"));
        }
        if self.horizontal_steps == 0 {
            return Err(Error::config("horizontal step count must be positive"));
        }
        Ok(())
    }

    pub fn bump(&self, y: f64) -> f64 {
        self.h_rel * y.abs().max(1.0)
    }

    pub fn commutator_bump(&self, y: f64) -> f64 {
        self.commutator_h_rel.unwrap_or_else(|| self.h_rel.sqrt()) * y.abs().max(1.0)
    }
}

/// Commutator estimate with a rough floating point noise bound.
#[derive(Debug, Clone, Copy)]
pub struct CommutatorEstimate {
    pub value: f64,
    pub noise: f64,
}

/// Quadratic variation increment used by [`ito_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QvMode {
    /// Squared path increments.
    Realized,
    /// sigma^2 * dt for a constant model volatility.
    Model(f64),
}

/// Walks a path node by node, keeping the recursion state at `k - 1` and `k`.
pub struct Cursor<'a, F: PathFunctional> {
    f: &'a F,
    path: &'a SamplePath,
    k: usize,
    prev: Option<F::State>,
    state: F::State,
}

impl<'a, F: PathFunctional> Cursor<'a, F> {
    pub fn new(f: &'a F, path: &'a SamplePath) -> Self {
        let state = f.init(0.0, path.value(0));
        Cursor {
            f,
            path,
            k: 0,
            prev: None,
            state,
        }
    }

    pub fn at(f: &'a F, path: &'a SamplePath, k: usize) -> Result<Self> {
        path.grid().check_index(k)?;
        let mut c = Cursor::new(f, path);
        while c.k < k {
            c.advance()?;
        }
        Ok(c)
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn advance(&mut self) -> Result<()> {
        let g = self.path.grid();
        if self.k >= g.n_steps() {
            return Err(Error::IndexOutOfRange {
                index: self.k + 1,
                n_steps: g.n_steps(),
            });
        }
        let k = self.k;
        let next = self.f.step(
            &self.state,
            g.time(k),
            g.dt(),
            self.path.value(k),
            self.path.value(k + 1),
        );
        self.prev = Some(std::mem::replace(&mut self.state, next));
        self.k += 1;
        Ok(())
    }

    fn t(&self) -> f64 {
        self.path.grid().time(self.k)
    }

    fn y(&self) -> f64 {
        self.path.value(self.k)
    }

    pub fn state(&self) -> &F::State {
        &self.state
    }

    /// State at node k after replacing Y_k by Y_k + h.
    fn bumped_state(&self, h: f64) -> F::State {
        if h == 0.0 {
            return self.state.clone();
        }
        let y = self.y() + h;
        match &self.prev {
            None => self.f.init(0.0, y),
            Some(prev) => {
                let g = self.path.grid();
                let k = self.k - 1;
                self.f.step(prev, g.time(k), g.dt(), self.path.value(k), y)
            }
        }
    }

    /// Flat extension of `state` by `m` steps holding the path at `y`.
    fn extend(&self, mut state: F::State, y: f64, m: usize) -> F::State {
        let g = self.path.grid();
        for j in 0..m {
            state = self.f.step(&state, g.time(self.k + j), g.dt(), y, y);
        }
        state
    }

    fn room(&self, m: usize) -> Result<()> {
        if self.k + m > self.path.grid().n_steps() {
            Err(Error::NoHorizontalRoom(self.k))
        } else {
            Ok(())
        }
    }

    pub fn value(&self) -> Result<f64> {
        finite(self.f.value(&self.state, self.t(), self.y()), "functional value")
    }

    fn bumped_value(&self, h: f64) -> Result<f64> {
        let s = self.bumped_state(h);
        finite(self.f.value(&s, self.t(), self.y() + h), "functional value")
    }

    pub fn vertical(&self, cfg: &DerivativeConfig) -> Result<f64> {
        if cfg.use_analytic {
            if let Some(d) = self.f.vertical_exact(&self.state, self.t(), self.y()) {
                return finite(d, "vertical derivative");
            }
        }
        let h = cfg.bump(self.y());
        let d = match cfg.scheme {
            Scheme::Central => (self.bumped_value(h)? - self.bumped_value(-h)?) / (2.0 * h),
            Scheme::Forward => (self.bumped_value(h)? - self.value()?) / h,
        };
        finite(d, "vertical derivative")
    }

    pub fn vertical_second(&self, cfg: &DerivativeConfig) -> Result<f64> {
        if cfg.use_analytic {
            if let Some(d) = self.f.vertical_second_exact(&self.state, self.t(), self.y()) {
                return finite(d, "second vertical derivative");
            }
        }
        let h = cfg.bump(self.y());
        let d = (self.bumped_value(h)? - 2.0 * self.value()? + self.bumped_value(-h)?) / (h * h);
        finite(d, "second vertical derivative")
    }

    pub fn horizontal(&self, cfg: &DerivativeConfig) -> Result<f64> {
        if cfg.use_analytic {
            if let Some(d) = self.f.horizontal_exact(&self.state, self.t(), self.y()) {
                return finite(d, "horizontal derivative");
            }
        }
        let m = cfg.horizontal_steps;
        self.room(m)?;
        let ext = self.extend(self.state.clone(), self.y(), m);
        let t_ext = self.path.grid().time(self.k + m);
        let span = t_ext - self.t();
        let d = (self.f.value(&ext, t_ext, self.y()) - self.value()?) / span;
        finite(d, "horizontal derivative")
    }

    /// D(grad F) - grad(D F) at the current node.
    ///
    /// Expanding both nested differences, the terms evaluated at node k
    /// cancel exactly; what is left compares bumping the endpoint after the
    /// flat extension against bumping it before.
    pub fn commutator(&self, cfg: &DerivativeConfig) -> Result<CommutatorEstimate> {
        let m = cfg.horizontal_steps;
        self.room(m)?;
        let h = cfg.commutator_bump(self.y());
        let g = self.path.grid();
        let t_ext = g.time(self.k + m);
        let span = t_ext - self.t();
        let y = self.y();

        let late = |sign: f64| -> f64 {
            let s = if m == 0 {
                self.state.clone()
            } else {
                let s = self.extend(self.state.clone(), y, m - 1);
                self.f.step(&s, g.time(self.k + m - 1), g.dt(), y, y + sign * h)
            };
            self.f.value(&s, t_ext, y + sign * h)
        };
        let early = |sign: f64| -> f64 {
            let s = self.extend(self.bumped_state(sign * h), y + sign * h, m);
            self.f.value(&s, t_ext, y + sign * h)
        };
        let (lp, lm, ep, em) = (late(1.0), late(-1.0), early(1.0), early(-1.0));
        let value = ((lp - lm) - (ep - em)) / (2.0 * h * span);
        let scale = lp.abs().max(lm.abs()).max(ep.abs()).max(em.abs());
        let noise = 4.0 * f64::EPSILON * scale / (2.0 * h * span);
        Ok(CommutatorEstimate {
            value: finite(value, "commutator")?,
            noise,
        })
    }
}

pub fn evaluate<F: PathFunctional>(f: &F, path: &SamplePath, k: usize) -> Result<f64> {
    Cursor::at(f, path, k)?.value()
}

pub fn vertical_derivative<F: PathFunctional>(
    f: &F,
    path: &SamplePath,
    k: usize,
    cfg: &DerivativeConfig,
) -> Result<f64> {
    cfg.validate()?;
    Cursor::at(f, path, k)?.vertical(cfg)
}

pub fn vertical_second<F: PathFunctional>(
    f: &F,
    path: &SamplePath,
    k: usize,
    cfg: &DerivativeConfig,
) -> Result<f64> {
    cfg.validate()?;
    Cursor::at(f, path, k)?.vertical_second(cfg)
}

pub fn horizontal_derivative<F: PathFunctional>(
    f: &F,
    path: &SamplePath,
    k: usize,
    cfg: &DerivativeConfig,
) -> Result<f64> {
    cfg.validate()?;
    Cursor::at(f, path, k)?.horizontal(cfg)
}

pub fn commutator<F: PathFunctional>(
    f: &F,
    path: &SamplePath,
    k: usize,
    cfg: &DerivativeConfig,
) -> Result<CommutatorEstimate> {
    cfg.validate()?;
    Cursor::at(f, path, k)?.commutator(cfg)
}

/// F(T) - F(0) - sum D F dt - sum grad F dY - 1/2 sum grad^2 F d[Y]
/// with all derivatives taken at the left node of each step.
pub fn ito_residual<F: PathFunctional>(
    f: &F,
    path: &SamplePath,
    cfg: &DerivativeConfig,
    qv: QvMode,
) -> Result<f64> {
    cfg.validate()?;
    let g = *path.grid();
    let n = g.n_steps();
    let mut c = Cursor::new(f, path);
    let f0 = c.value()?;
    let mut drift = 0.0;
    let mut mart = 0.0;
    let mut second = 0.0;
    for k in 0..n {
        let local = DerivativeConfig {
            horizontal_steps: cfg.horizontal_steps.min(n - k),
            ..*cfg
        };
        let dy = path.value(k + 1) - path.value(k);
        let d_qv = match qv {
            QvMode::Realized => dy * dy,
            QvMode::Model(sigma) => sigma * sigma * g.dt(),
        };
        drift += c.horizontal(&local)? * g.dt();
        mart += c.vertical(&local)? * dy;
        second += 0.5 * c.vertical_second(&local)? * d_qv;
        c.advance()?;
    }
    let ft = c.value()?;
    finite(ft - f0 - drift - mart - second, "ito residual")
}
