use crate::domain::grid::{SpatialGrid, TimeGrid};
use crate::error::{Error, Result};

/// Grid function at a single time (or time-independent).
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    grid: SpatialGrid,
    time: Option<f64>,
    values: Vec<f64>,
}

impl Snapshot {
    pub fn new(grid: SpatialGrid, time: Option<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} nodes", grid.n_nodes()),
                got: format!("{} values", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("snapshot values".into()));
        }
        Ok(Self { grid, time, values })
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self {
            values: vec![0.0; grid.n_nodes()],
            grid: grid.clone(),
            time: None,
        }
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.n_nodes()).map(|n| f(grid.coords(n))).collect();
        Self {
            grid: grid.clone(),
            time: None,
            values,
        }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_same_grid(&self, other: &Snapshot) -> Result<()> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} nodes", self.grid.n_nodes()),
                got: format!("{} nodes", other.grid.n_nodes()),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Snapshot {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v *= a);
        s
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, b: f64, other: &Snapshot) -> Result<Snapshot> {
        self.check_same_grid(other)?;
        let mut s = self.clone();
        for (v, w) in s.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        Ok(s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Space-time grid function with values indexed `(level, node)`, row-major
/// in time.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    times: TimeGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &SpatialGrid, times: &TimeGrid) -> Self {
        Self {
            values: vec![0.0; grid.n_nodes() * times.n_levels()],
            grid: grid.clone(),
            times: times.clone(),
        }
    }

    pub fn from_fn(grid: &SpatialGrid, times: &TimeGrid, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let nn = grid.n_nodes();
        let mut values = Vec::with_capacity(nn * times.n_levels());
        for level in 0..times.n_levels() {
            let t = times.t(level);
            values.extend((0..nn).map(|n| f(grid.coords(n), t)));
        }
        Self {
            grid: grid.clone(),
            times: times.clone(),
            values,
        }
    }

    pub fn from_values(grid: &SpatialGrid, times: &TimeGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n_nodes() * times.n_levels();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} values"),
                got: format!("{}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            times: times.clone(),
            values,
        })
    }

    /// Separated product `f(x) * r(x, t)` evaluated nodewise.
    pub fn separated(f: &Snapshot, r: &Field) -> Result<Field> {
        if !f.grid().same_shape(r.grid()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} nodes", r.grid().n_nodes()),
                got: format!("{} nodes", f.grid().n_nodes()),
            });
        }
        let mut out = r.clone();
        let nn = r.n_nodes();
        for (i, v) in out.values.iter_mut().enumerate() {
            *v *= f.values()[i % nn];
        }
        Ok(out)
    }

    /// The time-independent field equal to `s` at every level.
    pub fn constant_in_time(s: &Snapshot, times: &TimeGrid) -> Field {
        let mut values = Vec::with_capacity(s.values().len() * times.n_levels());
        for _ in 0..times.n_levels() {
            values.extend_from_slice(s.values());
        }
        Self {
            grid: s.grid().clone(),
            times: times.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn n_levels(&self) -> usize {
        self.times.n_levels()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let nn = self.n_nodes();
        &self.values[n * nn..(n + 1) * nn]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let nn = self.n_nodes();
        &mut self.values[n * nn..(n + 1) * nn]
    }

    pub fn at(&self, level: usize, node: usize) -> f64 {
        self.values[level * self.n_nodes() + node]
    }

    pub fn snapshot(&self, level: usize) -> Snapshot {
        Snapshot {
            grid: self.grid.clone(),
            time: Some(self.times.t(level)),
            values: self.level(level).to_vec(),
        }
    }

    /// Time series of one node.
    pub fn series(&self, node: usize) -> Vec<f64> {
        (0..self.n_levels()).map(|n| self.at(n, node)).collect()
    }

    pub fn check_same_shape(&self, other: &Field) -> Result<()> {
        if !self.grid.same_shape(&other.grid) || self.n_levels() != other.n_levels() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", self.n_levels(), self.n_nodes()),
                got: format!("{} x {}", other.n_levels(), other.n_nodes()),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, b: f64, other: &Field) -> Result<Field> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        Ok(out)
    }

    /// Nodewise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v *= w;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Build a field level by level from a closure producing each level.
    pub fn from_levels(
        grid: &SpatialGrid,
        times: &TimeGrid,
        mut level: impl FnMut(usize) -> Vec<f64>,
    ) -> Result<Field> {
        let nn = grid.n_nodes();
        let mut values = Vec::with_capacity(nn * times.n_levels());
        for n in 0..times.n_levels() {
            let l = level(n);
            if l.len() != nn {
                return Err(Error::ShapeMismatch {
                    expected: format!("{nn} nodes"),
                    got: format!("{}", l.len()),
                });
            }
            values.extend(l);
        }
        Ok(Self {
            grid: grid.clone(),
            times: times.clone(),
            values,
        })
    }

    /// Apply `op` to every level.
    pub fn map_levels(&self, mut op: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Result<Field> {
        Field::from_levels(&self.grid, &self.times, |n| op(n, self.level(n)))
    }

    /// Second-order time derivative: centred at interior levels, three-point
    /// one-sided at the first and last level.
    pub fn time_derivative(&self) -> Result<Field> {
        let nl = self.n_levels();
        if nl < 3 {
            return Err(Error::TooFewLevels { needed: 3, have: nl });
        }
        let dt = self.times.dt();
        let nn = self.n_nodes();
        let mut out = Field::zeros(&self.grid, &self.times);
        for n in 0..nl {
            let dst = &mut out.values[n * nn..(n + 1) * nn];
            for (i, d) in dst.iter_mut().enumerate() {
                let u = |l: usize| self.values[l * nn + i];
                *d = if n == 0 {
                    (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * dt)
                } else if n == nl - 1 {
                    (3.0 * u(n) - 4.0 * u(n - 1) + u(n - 2)) / (2.0 * dt)
                } else {
                    (u(n + 1) - u(n - 1)) / (2.0 * dt)
                };
            }
        }
        Ok(out)
    }

    /// First-order backward difference `(u_n - u_{n-1}) / dt`; level 0 uses
    /// the forward difference.
    pub fn backward_difference(&self) -> Result<Field> {
        let nl = self.n_levels();
        if nl < 2 {
            return Err(Error::TooFewLevels { needed: 2, have: nl });
        }
        let dt = self.times.dt();
        let nn = self.n_nodes();
        let mut out = Field::zeros(&self.grid, &self.times);
        for n in 0..nl {
            let (a, b) = if n == 0 { (1, 0) } else { (n, n - 1) };
            for i in 0..nn {
                out.values[n * nn + i] = (self.values[a * nn + i] - self.values[b * nn + i]) / dt;
            }
        }
        Ok(out)
    }
}
