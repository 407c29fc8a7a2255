use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One face of the computational box. In 1D only `XLo`/`XHi` exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    XLo,
    XHi,
    YLo,
    YHi,
}

impl Face {
    pub fn axis(self) -> usize {
        match self {
            Face::XLo | Face::XHi => 0,
            Face::YLo | Face::YHi => 1,
        }
    }

    pub fn is_hi(self) -> bool {
        matches!(self, Face::XHi | Face::YHi)
    }

    pub fn opposite(self) -> Face {
        match self {
            Face::XLo => Face::XHi,
            Face::XHi => Face::XLo,
            Face::YLo => Face::YHi,
            Face::YHi => Face::YLo,
        }
    }

    pub fn parse(s: &str) -> Option<Face> {
        match s {
            "x_lo" => Some(Face::XLo),
            "x_hi" => Some(Face::XHi),
            "y_lo" => Some(Face::YLo),
            "y_hi" => Some(Face::YHi),
            _ => None,
        }
    }
}

/// Uniform tensor-product grid on an interval or a rectangle.
///
/// Nodes include the boundary. Node `(ix, iy)` has flat index
/// `ix + (n_cells[0] + 1) * iy`, so `x` varies fastest. In 1D the second
/// axis is degenerate (`n_cells[1] == 0`, one node).
///
/// `gamma` lists the faces forming the observed sub-boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n_cells: [usize; 2],
    gamma: Vec<Face>,
}

impl SpatialGrid {
    pub fn new(extents: &[(f64, f64)], n_cells: &[usize], gamma: &[Face]) -> Result<Self> {
        let dim = extents.len();
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n_cells.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} cell counts given for a {dim}D grid",
                n_cells.len()
            )));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let mut cells = [0usize; 2];
        for axis in 0..dim {
            let (a, b) = extents[axis];
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: extent [{a}, {b}] must be finite with hi > lo"
                )));
            }
            if n_cells[axis] < 2 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: need at least 2 cells, got {}",
                    n_cells[axis]
                )));
            }
            lo[axis] = a;
            hi[axis] = b;
            cells[axis] = n_cells[axis];
        }
        if gamma.is_empty() {
            return Err(Error::InvalidGrid("observed boundary gamma is empty".into()));
        }
        let mut faces = gamma.to_vec();
        faces.sort();
        faces.dedup();
        if faces.iter().any(|f| f.axis() >= dim) {
            return Err(Error::InvalidGrid(format!("face outside a {dim}D grid in gamma")));
        }
        if dim == 1 && faces.len() != 1 {
            return Err(Error::InvalidGrid("in 1D gamma must be exactly one endpoint".into()));
        }
        Ok(Self {
            dim,
            lo,
            hi,
            n_cells: cells,
            gamma: faces,
        })
    }

    /// Interval `[lo, hi]` with `n` cells, observed at one endpoint.
    pub fn interval(lo: f64, hi: f64, n: usize, gamma: Face) -> Result<Self> {
        Self::new(&[(lo, hi)], &[n], &[gamma])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), n: [usize; 2], gamma: &[Face]) -> Result<Self> {
        Self::new(&[x, y], &n, gamma)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn n_cells(&self, axis: usize) -> usize {
        self.n_cells[axis]
    }

    pub fn gamma(&self) -> &[Face] {
        &self.gamma
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n_cells[axis] as f64
    }

    /// Number of nodes along `axis`, boundary included.
    pub fn axis_len(&self, axis: usize) -> usize {
        self.n_cells[axis] + 1
    }

    pub fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.n_cells[0] + 1
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.axis_len(0) * self.axis_len(1)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.stride(1) * iy
    }

    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let nx = self.axis_len(0);
        [node % nx, node / nx]
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let [ix, iy] = self.multi_index(node);
        let x = self.lo[0] + ix as f64 * self.spacing(0);
        let y = if self.dim == 2 {
            self.lo[1] + iy as f64 * self.spacing(1)
        } else {
            0.0
        };
        [x, y]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_layer(node) == 0
    }

    /// Number of node layers between `node` and the nearest boundary face
    /// (0 on the boundary).
    pub fn boundary_layer(&self, node: usize) -> usize {
        let idx = self.multi_index(node);
        (0..self.dim)
            .map(|a| idx[a].min(self.n_cells[a] - idx[a]))
            .min()
            .unwrap_or(0)
    }

    pub fn on_face(&self, node: usize, face: Face) -> bool {
        let a = face.axis();
        if a >= self.dim {
            return false;
        }
        let i = self.multi_index(node)[a];
        if face.is_hi() {
            i == self.n_cells[a]
        } else {
            i == 0
        }
    }

    pub fn on_gamma(&self, node: usize) -> bool {
        self.gamma.iter().any(|&f| self.on_face(node, f))
    }

    /// Trapezoidal quadrature weight for each node.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|node| {
                let idx = self.multi_index(node);
                (0..self.dim)
                    .map(|a| {
                        let h = self.spacing(a);
                        if idx[a] == 0 || idx[a] == self.n_cells[a] {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product()
            })
            .collect()
    }

    pub fn full_mask(&self) -> NodeMask {
        NodeMask(vec![true; self.n_nodes()])
    }

    pub fn interior_mask(&self) -> NodeMask {
        self.mask_where(|node, _| !self.is_boundary(node))
    }

    /// Nodes at least `layers` layers away from the boundary.
    pub fn inner_mask(&self, layers: usize) -> NodeMask {
        self.mask_where(|node, _| self.boundary_layer(node) >= layers)
    }

    pub fn mask_where(&self, mut pred: impl FnMut(usize, [f64; 2]) -> bool) -> NodeMask {
        NodeMask((0..self.n_nodes()).map(|n| pred(n, self.coords(n))).collect())
    }

    /// Nodes inside the closed box `[lo, hi]` (only the first `dim` axes are
    /// used), with a small tolerance so that grid-aligned bounds are kept.
    pub fn box_mask(&self, lo: [f64; 2], hi: [f64; 2]) -> NodeMask {
        let tol = 1e-9 * self.spacing(0);
        self.mask_where(|_, x| (0..self.dim).all(|a| x[a] >= lo[a] - tol && x[a] <= hi[a] + tol))
    }

    /// Same domain with every cell split `factor` times per axis.
    pub fn refined(&self, factor: usize) -> Self {
        let mut g = self.clone();
        for a in 0..self.dim {
            g.n_cells[a] *= factor;
        }
        g
    }

    pub fn same_shape(&self, other: &SpatialGrid) -> bool {
        self.dim == other.dim && self.n_cells == other.n_cells
    }
}

/// Boolean selection of spatial nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMask(pub Vec<bool>);

impl NodeMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, node: usize) -> bool {
        self.0[node]
    }

    pub fn is_subset_of(&self, other: &NodeMask) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }

    pub fn and(&self, other: &NodeMask) -> NodeMask {
        NodeMask(self.0.iter().zip(&other.0).map(|(&a, &b)| a && b).collect())
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// Uniform time levels `t_n = n * T / n_steps`, `n = 0..=n_steps`, with a
/// marked observation time `t0` and a half-width `delta` such that
/// `0 < t0 - 2 delta < t0 + 2 delta < T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
    t0_index: usize,
    delta: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize, t0_index: usize, delta: f64) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidTimeGrid(format!("T must be positive, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidTimeGrid("n_steps must be positive".into()));
        }
        if t0_index == 0 || t0_index >= n_steps {
            return Err(Error::InvalidTimeGrid(format!(
                "t0 must be interior to (0, T): t0_index = {t0_index}, n_steps = {n_steps}"
            )));
        }
        let t0 = t_final * t0_index as f64 / n_steps as f64;
        if !(delta > 0.0 && t0 - 2.0 * delta > 0.0 && t0 + 2.0 * delta < t_final) {
            return Err(Error::InvalidTimeGrid(format!(
                "delta = {delta} must satisfy 0 < t0 - 2 delta < t0 + 2 delta < T with t0 = {t0}, T = {t_final}"
            )));
        }
        Ok(Self {
            t_final,
            n_steps,
            t0_index,
            delta,
        })
    }

    /// Convenience grid with `t0 = T/2` and `delta = T/8`; `n_steps` must be
    /// even.
    pub fn uniform(t_final: f64, n_steps: usize) -> Result<Self> {
        if n_steps < 2 || n_steps % 2 != 0 {
            return Err(Error::InvalidTimeGrid(format!(
                "uniform grid needs an even n_steps >= 2, got {n_steps}"
            )));
        }
        Self::new(t_final, n_steps, n_steps / 2, t_final / 8.0)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn t(&self, level: usize) -> f64 {
        self.t_final * level as f64 / self.n_steps as f64
    }

    pub fn t0_index(&self) -> usize {
        self.t0_index
    }

    pub fn t0(&self) -> f64 {
        self.t(self.t0_index)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_levels()).map(move |n| self.t(n))
    }

    /// Same interval and observation time with `factor` times more steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            t_final: self.t_final,
            n_steps: self.n_steps * factor,
            t0_index: self.t0_index * factor,
            delta: self.delta,
        }
    }

    /// Copy of this grid ending at level `level` (inclusive), keeping `dt`.
    pub fn truncated(&self, level: usize) -> Result<Self> {
        let t_final = self.t(level);
        Self::new(t_final, level, self.t0_index, self.delta)
    }

    /// First level whose time is `>= t` (up to rounding).
    pub fn level_at_or_after(&self, t: f64) -> usize {
        let x = t / self.dt();
        let r = x.round();
        let n = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
        (n.max(0.0) as usize).min(self.n_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_indexing() {
        let g = SpatialGrid::rectangle((0.0, 2.0), (0.0, 1.0), [4, 2], &[Face::XHi]).unwrap();
        assert_eq!(g.n_nodes(), 15);
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.index(3, 2), 13);
        assert_eq!(g.multi_index(13), [3, 2]);
        assert_eq!(g.coords(13), [1.5, 1.0]);
        assert!(g.is_boundary(13));
        assert!(!g.is_boundary(g.index(2, 1)));
        assert!(g.on_gamma(g.index(4, 1)));
        assert!(!g.on_gamma(g.index(0, 1)));
    }

    #[test]
    fn trapezoid_weights_integrate_constants() {
        let g = SpatialGrid::rectangle((0.0, 2.0), (-1.0, 1.0), [5, 7], &[Face::YLo]).unwrap();
        let s: f64 = g.trapezoid_weights().iter().sum();
        assert!((s - 4.0).abs() < 1e-12);
        let g1 = SpatialGrid::interval(0.0, 1.0, 10, Face::XHi).unwrap();
        let s1: f64 = g1.trapezoid_weights().iter().sum();
        assert!((s1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpatialGrid::interval(1.0, 0.0, 4, Face::XHi).is_err());
        assert!(SpatialGrid::interval(0.0, 1.0, 1, Face::XHi).is_err());
        assert!(SpatialGrid::interval(0.0, 1.0, 4, Face::YHi).is_err());
        assert!(SpatialGrid::new(&[(0.0, 1.0)], &[4], &[]).is_err());
        assert!(SpatialGrid::new(&[(0.0, 1.0)], &[4], &[Face::XLo, Face::XHi]).is_err());
    }

    #[test]
    fn time_grid_invariants() {
        let tg = TimeGrid::new(1.0, 100, 50, 0.1).unwrap();
        assert_eq!(tg.dt(), 0.01);
        assert_eq!(tg.t0(), 0.5);
        assert!(TimeGrid::new(1.0, 100, 0, 0.1).is_err());
        assert!(TimeGrid::new(1.0, 100, 100, 0.1).is_err());
        assert!(TimeGrid::new(1.0, 100, 50, 0.3).is_err());
        assert!(TimeGrid::new(0.0, 100, 50, 0.1).is_err());
        let r = tg.refined(4);
        assert_eq!(r.t0(), 0.5);
        assert_eq!(r.level_at_or_after(0.0312), 13);
        assert_eq!(r.level_at_or_after(0.03), 12);
    }
}
