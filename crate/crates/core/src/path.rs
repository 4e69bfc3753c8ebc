//! Uniform time grids and sample paths, with the path surgeries used by the
//! functional derivatives: stopping, vertical bumps and realized variation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    /// Grid with step as close to `dt` as the horizon allows.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {dt}")));
        }
        let n = (horizon / dt).round().max(1.0);
        if n > 1e9 {
            return Err(Error::InvalidGrid(format!("step {dt} too small")));
        }
        TimeGrid::new(horizon, n as usize)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Node time t_i. The last node is exactly the horizon.
    pub fn time(&self, i: usize) -> f64 {
        if i >= self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k > self.n_steps {
            Err(Error::IndexOutOfRange {
                index: k,
                n_steps: self.n_steps,
            })
        } else {
            Ok(())
        }
    }

    /// Node index closest to time `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = (t / self.dt()).round();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.n_steps)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps + 1 {
            return Err(Error::LengthMismatch {
                got: values.len(),
                expected: grid.n_steps + 1,
            });
        }
        Ok(SamplePath { grid, values })
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Self {
        SamplePath {
            grid,
            values: vec![c; grid.n_steps + 1],
        }
    }

    /// y0 + sigma * B on the grid, B a standard Brownian motion drawn from `rng`.
    pub fn brownian<R: rand::Rng + ?Sized>(grid: TimeGrid, y0: f64, sigma: f64, rng: &mut R) -> Self {
        let sd = sigma * grid.dt().sqrt();
        let mut values = Vec::with_capacity(grid.n_steps + 1);
        let mut y = y0;
        values.push(y);
        for _ in 0..grid.n_steps {
            y += sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
            values.push(y);
        }
        SamplePath { grid, values }
    }

    /// Cumulative sum of `increments` started from `y0`.
    pub fn from_increments(grid: TimeGrid, y0: f64, increments: &[f64]) -> Result<Self> {
        if increments.len() != grid.n_steps {
            return Err(Error::LengthMismatch {
                got: increments.len() + 1,
                expected: grid.n_steps + 1,
            });
        }
        let mut values = Vec::with_capacity(grid.n_steps + 1);
        let mut y = y0;
        values.push(y);
        for dy in increments {
            y += dy;
            values.push(y);
        }
        Ok(SamplePath { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn last(&self) -> f64 {
        self.values[self.grid.n_steps]
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// The path stopped at node `k`: unchanged up to `k`, frozen afterwards.
    pub fn stopped(&self, k: usize) -> Result<SamplePath> {
        self.grid.check_index(k)?;
        let mut values = self.values.clone();
        let tail = values[k];
        for v in &mut values[k + 1..] {
            *v = tail;
        }
        Ok(SamplePath {
            grid: self.grid,
            values,
        })
    }

    /// Stop at `k`, then add `h` from node `k` onwards.
    pub fn vertical_bump(&self, k: usize, h: f64) -> Result<SamplePath> {
        self.grid.check_index(k)?;
        let mut values = self.values.clone();
        let bumped = values[k] + h;
        for v in &mut values[k..] {
            *v = bumped;
        }
        Ok(SamplePath {
            grid: self.grid,
            values,
        })
    }

    /// Realized quadratic variation up to node `k`.
    pub fn quadratic_variation(&self, k: usize) -> Result<f64> {
        self.grid.check_index(k)?;
        Ok(self.values[..=k]
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .sum())
    }
}

/// Ensemble of paths on one grid, each tagged with the RNG stream it came from.
#[derive(Debug, Clone)]
pub struct PathBundle {
    grid: TimeGrid,
    paths: Vec<SamplePath>,
    streams: Vec<u64>,
}

impl PathBundle {
    pub fn new(grid: TimeGrid) -> Self {
        PathBundle {
            grid,
            paths: Vec::new(),
            streams: Vec::new(),
        }
    }

    pub fn push(&mut self, path: SamplePath, stream: u64) -> Result<()> {
        if path.grid != self.grid {
            return Err(Error::InvalidGrid(
                "bundle members must share one grid".into(),
            ));
        }
        self.paths.push(path);
        self.streams.push(stream);
        Ok(())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> &[SamplePath] {
        &self.paths
    }

    pub fn stream(&self, i: usize) -> u64 {
        self.streams[i]
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> TimeGrid {
        TimeGrid::new(1.0, 3).unwrap()
    }

    #[test]
    fn stop_and_bump_examples() {
        let p = SamplePath::new(grid3(), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.stopped(1).unwrap().values(), &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(p.stopped(3).unwrap(), p);
        let s = p.stopped(1).unwrap();
        assert_eq!(s.vertical_bump(1, 0.5).unwrap().values(), &[0.0, 1.5, 1.5, 1.5]);
        assert_eq!(s.vertical_bump(1, 0.0).unwrap(), s);
        let z = SamplePath::constant(grid3(), 0.0);
        assert_eq!(z.vertical_bump(0, 1.0).unwrap(), SamplePath::constant(grid3(), 1.0));
        assert!(p.stopped(4).is_err());
    }

    #[test]
    fn qv_examples() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let p = SamplePath::new(g, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p.quadratic_variation(2).unwrap(), 2.0);
        assert_eq!(SamplePath::constant(g, 4.0).quadratic_variation(2).unwrap(), 0.0);
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(8), 2.0);
        assert_eq!(g.dt(), 0.25);
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert_eq!(TimeGrid::with_step(1.0, 2.5e-3).unwrap().n_steps(), 400);
    }
}
