//! Weight geometry: the extension `Omega_0`, the function `d`, and the
//! parameters `beta`, `mu_k` derived from it.

use serde::{Deserialize, Serialize};

use crate::domain::field::Snapshot;
use crate::domain::grid::{Face, NodeMask, SpatialGrid, TimeGrid};
use crate::domain::stencil::axis_derivative;
use crate::error::{Error, Result};

/// Tensor-product quadratic `d(x) = prod_a (x_a - l_a)(r_a - x_a)`, positive
/// in the open box `prod (l_a, r_a)` and zero on its boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceFunction {
    dim: usize,
    bounds: [(f64, f64); 2],
}

impl DistanceFunction {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 || bounds.iter().any(|(l, r)| !(r > l)) {
            return Err(Error::Geometry(format!("invalid bounds {bounds:?}")));
        }
        let mut b = [(0.0, 1.0); 2];
        b[..bounds.len()].copy_from_slice(bounds);
        Ok(Self {
            dim: bounds.len(),
            bounds: b,
        })
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        self.bounds[axis]
    }

    fn factor(&self, axis: usize, x: f64, order: usize) -> f64 {
        let (l, r) = self.bounds[axis];
        match order {
            0 => (x - l) * (r - x),
            1 => l + r - 2.0 * x,
            2 => -2.0,
            _ => 0.0,
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.derivative(x, [0, 0])
    }

    /// `d_x^alpha d` in closed form.
    pub fn derivative(&self, x: [f64; 2], alpha: [usize; 2]) -> f64 {
        (0..self.dim).map(|a| self.factor(a, x[a], alpha[a])).product()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate().take(self.dim) {
            let mut alpha = [0, 0];
            alpha[a] = 1;
            *ga = self.derivative(x, alpha);
        }
        g
    }

    /// `max d`, attained at the centre of the box.
    pub fn sup_norm(&self) -> f64 {
        (0..self.dim)
            .map(|a| {
                let (l, r) = self.bounds[a];
                0.25 * (r - l) * (r - l)
            })
            .product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanConfig {
    pub lambda: f64,
    pub epsilon: f64,
    /// Closed box `[omega_lo, omega_hi]` defining the interior region.
    pub omega_lo: [f64; 2],
    pub omega_hi: [f64; 2],
    /// Length of `Omega_0` along the axis normal to `gamma`, relative to
    /// the length of `Omega`.
    pub extension: f64,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epsilon: 0.5,
            omega_lo: [0.4, 0.25],
            omega_hi: [0.9, 0.75],
            extension: 2.4,
        }
    }
}

/// One named inequality or inclusion with its outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct CarlemanGeometry {
    grid: SpatialGrid,
    times: TimeGrid,
    d: DistanceFunction,
    extended_grid: SpatialGrid,
    d_values: Snapshot,
    d_extended: Snapshot,
    d_norm: f64,
    beta: f64,
    lambda: f64,
    epsilon: f64,
    epsilon0: f64,
    mu: [f64; 3],
    omega: NodeMask,
    gamma: Face,
}

/// Largest `epsilon` (up to bisection accuracy) with
/// `omega ⊂ {d > epsilon ||d||}`, or 0 if no positive value works.
pub fn find_epsilon0(grid: &SpatialGrid, d: &DistanceFunction, omega: &NodeMask) -> f64 {
    let norm = d.sup_norm();
    let holds = |eps: f64| omega.nodes().all(|n| d.value(grid.coords(n)) > eps * norm);
    if !holds(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if holds(hi) {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Builds `Omega_0`, `d`, `beta` (midpoint of the admissible interval) and
/// `mu_k`, and rejects the configuration if any invariant fails.
///
/// `Omega_0` shares every face of `Omega` except `gamma`, across which it
/// is extended so that the maximum of `d` lies outside `Omega`.
pub fn build_weight(grid: &SpatialGrid, times: &TimeGrid, cfg: &CarlemanConfig) -> Result<CarlemanGeometry> {
    if grid.gamma().len() != 1 {
        return Err(Error::Unsupported(format!(
            "weight construction needs gamma to be a single face, got {:?}",
            grid.gamma()
        )));
    }
    if !(cfg.lambda.is_finite() && cfg.lambda > 0.0) {
        return Err(Error::Geometry(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
        return Err(Error::Geometry(format!("epsilon must lie in (0, 1), got {}", cfg.epsilon)));
    }
    if !(cfg.extension > 2.0) {
        return Err(Error::Geometry(format!(
            "extension factor must exceed 2 so that the critical point of d lies outside Omega, got {}",
            cfg.extension
        )));
    }
    let gamma = grid.gamma()[0];
    let dim = grid.dim();
    let mut bounds = Vec::with_capacity(dim);
    let mut ext_extents = Vec::with_capacity(dim);
    let mut ext_cells = Vec::with_capacity(dim);
    for axis in 0..dim {
        let (lo, hi) = (grid.lo(axis), grid.hi(axis));
        let b = if axis == gamma.axis() {
            let len = cfg.extension * (hi - lo);
            if gamma.is_hi() {
                (lo, lo + len)
            } else {
                (hi - len, hi)
            }
        } else {
            (lo, hi)
        };
        bounds.push(b);
        ext_extents.push(b);
        let cells = ((b.1 - b.0) / grid.spacing(axis)).round() as usize;
        // even count so that the maximum of d is a node
        ext_cells.push(cells + cells % 2);
    }
    let d = DistanceFunction::new(&bounds)?;
    let extended_grid = SpatialGrid::new(&ext_extents, &ext_cells, &[gamma])?;
    let d_norm = d.sup_norm();
    let delta = times.delta();
    let beta_lo = d_norm / (4.0 * delta * delta);
    let beta_hi = d_norm / (3.0 * delta * delta);
    let beta = 0.5 * (beta_lo + beta_hi);
    let mu = [1.0, 2.0, 3.0].map(|k| cfg.epsilon * (k / 3.0 * d_norm - beta * delta * delta));
    let omega = grid.box_mask(cfg.omega_lo, cfg.omega_hi);
    if omega.count() == 0 {
        return Err(Error::Geometry("omega contains no grid node".into()));
    }
    let epsilon0 = find_epsilon0(grid, &d, &omega);
    let geom = CarlemanGeometry {
        grid: grid.clone(),
        times: times.clone(),
        d_values: Snapshot::from_fn(grid, |x| d.value(x)),
        d_extended: Snapshot::from_fn(&extended_grid, |x| d.value(x)),
        d,
        extended_grid,
        d_norm,
        beta,
        lambda: cfg.lambda,
        epsilon: cfg.epsilon,
        epsilon0,
        mu,
        omega,
        gamma,
    };
    if cfg.epsilon > epsilon0 {
        return Err(Error::Geometry(format!(
            "epsilon = {} exceeds epsilon0 = {epsilon0:.6}: omega is not inside {{d > epsilon ||d||}}",
            cfg.epsilon
        )));
    }
    if let Some(bad) = geom.invariants().into_iter().find(|c| !c.ok) {
        return Err(Error::Geometry(format!("{}: {}", bad.name, bad.detail)));
    }
    Ok(geom)
}

impl CarlemanGeometry {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn distance(&self) -> &DistanceFunction {
        &self.d
    }

    pub fn extended_grid(&self) -> &SpatialGrid {
        &self.extended_grid
    }

    /// `d` at the nodes of `Omega`.
    pub fn d(&self) -> &Snapshot {
        &self.d_values
    }

    /// `d` at the nodes of `Omega_0`.
    pub fn d_extended(&self) -> &Snapshot {
        &self.d_extended
    }

    pub fn d_norm(&self) -> f64 {
        self.d_norm
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Geometry(format!("lambda must be positive, got {lambda}")));
        }
        let mut g = self.clone();
        g.lambda = lambda;
        Ok(g)
    }

    pub fn t0(&self) -> f64 {
        self.times.t0()
    }

    pub fn delta(&self) -> f64 {
        self.times.delta()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn mu(&self) -> [f64; 3] {
        self.mu
    }

    pub fn omega(&self) -> &NodeMask {
        &self.omega
    }

    pub fn gamma(&self) -> Face {
        self.gamma
    }

    /// `psi = d(x) - beta (t - t0)^2`.
    pub fn psi(&self, x: [f64; 2], t: f64) -> f64 {
        let s = t - self.t0();
        self.d.value(x) - self.beta * s * s
    }

    /// `phi = exp(lambda psi)`.
    pub fn phi(&self, x: [f64; 2], t: f64) -> f64 {
        (self.lambda * self.psi(x, t)).exp()
    }

    /// `phi_0 = phi(., t0) = exp(lambda d)`.
    pub fn phi0(&self, x: [f64; 2]) -> f64 {
        (self.lambda * self.d.value(x)).exp()
    }

    /// Every invariant of the construction, each checked separately.
    pub fn invariants(&self) -> Vec<InvariantCheck> {
        let mut out = Vec::new();
        let ext = &self.extended_grid;
        let mut worst_in = f64::INFINITY;
        let mut worst_bd: f64 = 0.0;
        for n in 0..ext.n_nodes() {
            let v = self.d_extended.values()[n];
            if ext.is_boundary(n) {
                worst_bd = worst_bd.max(v.abs());
            } else {
                worst_in = worst_in.min(v);
            }
        }
        out.push(InvariantCheck {
            name: "d > 0 inside Omega_0",
            ok: worst_in > 0.0,
            detail: format!("min over interior nodes {worst_in:e}"),
        });
        out.push(InvariantCheck {
            name: "d = 0 on the boundary of Omega_0",
            ok: worst_bd <= 1e-12 * self.d_norm,
            detail: format!("max |d| on boundary nodes {worst_bd:e}"),
        });

        let grad = self.discrete_gradient_norm();
        let g = &self.grid;
        let far = self.gamma.opposite();
        // in 2D the two corners where the far face meets the side faces lie
        // on two zero sets of d at once, so grad d vanishes there for any d
        // with d = 0 on the far and side faces; those nodes are skipped
        let skip = |n: usize| g.dim() == 2 && g.on_face(n, far) && g.boundary_layer(n) == 0 && {
            let other = if far.axis() == 0 { [Face::YLo, Face::YHi] } else { [Face::XLo, Face::XHi] };
            other.iter().any(|&f| g.on_face(n, f))
        };
        let (min_grad, at) = (0..g.n_nodes())
            .filter(|&n| !skip(n))
            .map(|n| (grad[n], n))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        out.push(InvariantCheck {
            name: "|grad d| > 0 on the closure of Omega",
            ok: min_grad > 0.0,
            detail: format!("min discrete |grad d| = {min_grad:e} at x = {:?}", g.coords(at)),
        });

        let delta = self.delta();
        let lo = self.d_norm / (4.0 * delta * delta);
        let hi = self.d_norm / (3.0 * delta * delta);
        out.push(InvariantCheck {
            name: "||d|| / (4 delta^2) < beta < ||d|| / (3 delta^2)",
            ok: lo < self.beta && self.beta < hi,
            detail: format!("{lo} < {} < {hi}", self.beta),
        });
        out.push(InvariantCheck {
            name: "0 < mu_1 < mu_2 < mu_3",
            ok: 0.0 < self.mu[0] && self.mu[0] < self.mu[1] && self.mu[1] < self.mu[2],
            detail: format!("mu = {:?}", self.mu),
        });
        let thr = self.epsilon * self.d_norm;
        let (min_d, at) = self
            .omega
            .nodes()
            .map(|n| (self.d_values.values()[n], n))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        out.push(InvariantCheck {
            name: "omega inside {d > epsilon ||d||}",
            ok: min_d > thr,
            detail: format!("min d on omega = {min_d} at x = {:?}, threshold {thr}", g.coords(at)),
        });
        out
    }

    /// Centred-difference `|grad d|` on the nodes of `Omega`.
    pub fn discrete_gradient_norm(&self) -> Vec<f64> {
        let g = &self.grid;
        let comps: Vec<Vec<f64>> = (0..g.dim())
            .map(|a| axis_derivative(g, self.d_values.values(), a, 1).expect("grid has enough nodes"))
            .collect();
        (0..g.n_nodes())
            .map(|n| comps.iter().map(|c| c[n] * c[n]).sum::<f64>().sqrt())
            .collect()
    }
}
