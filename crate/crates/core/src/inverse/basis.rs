use serde::{Deserialize, Serialize};

use crate::domain::field::Snapshot;
use crate::domain::grid::{NodeMask, SpatialGrid};
use crate::error::{Error, Result};

/// Tensor-product hat functions centred on grid nodes inside the box
/// `[lo, hi]`. With one centre per node the expansion is the nodal
/// interpolant, which keeps discrete derivative norms meaningful.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatBasis {
    pub centers: Vec<[f64; 2]>,
    pub widths: [f64; 2],
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    dim: usize,
}

impl HatBasis {
    /// `size` hats over the interior grid nodes of `[lo, hi]`, spaced by an
    /// integer number of cells. In 2D `size` must be a perfect square.
    pub fn over_box(grid: &SpatialGrid, lo: [f64; 2], hi: [f64; 2], size: usize) -> Result<Self> {
        let dim = grid.dim();
        if size == 0 {
            return Err(Error::InvalidArgument("basis size must be positive".into()));
        }
        let per_axis = if dim == 1 {
            size
        } else {
            let m = (size as f64).sqrt().round() as usize;
            if m * m != size {
                return Err(Error::InvalidArgument(format!("2D basis size must be a perfect square, got {size}")));
            }
            m
        };
        let mut axis_centers: Vec<Vec<f64>> = Vec::new();
        let mut widths = [0.0; 2];
        for a in 0..dim {
            let h = grid.spacing(a);
            let tol = 1e-9 * h;
            let nodes: Vec<f64> = (1..grid.n_cells(a))
                .map(|i| grid.lo(a) + i as f64 * h)
                .filter(|&x| x >= lo[a] - tol && x <= hi[a] + tol)
                .collect();
            if per_axis > nodes.len() {
                return Err(Error::InvalidArgument(format!(
                    "basis size {per_axis} per axis exceeds the {} interior nodes in the region",
                    nodes.len()
                )));
            }
            let stride = nodes.len() / per_axis;
            let offset = (nodes.len() - stride * (per_axis - 1) - 1) / 2;
            axis_centers.push((0..per_axis).map(|j| nodes[offset + j * stride]).collect());
            widths[a] = stride as f64 * h;
        }
        let centers = if dim == 1 {
            axis_centers[0].iter().map(|&x| [x, 0.0]).collect()
        } else {
            let mut c = Vec::with_capacity(size);
            for &y in &axis_centers[1] {
                for &x in &axis_centers[0] {
                    c.push([x, y]);
                }
            }
            c
        };
        Ok(Self {
            centers,
            widths,
            lo,
            hi,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, j: usize, x: [f64; 2]) -> f64 {
        let c = self.centers[j];
        (0..self.dim)
            .map(|a| (1.0 - (x[a] - c[a]).abs() / self.widths[a]).max(0.0))
            .product()
    }

    /// Hat `j` sampled on `grid`.
    pub fn function(&self, grid: &SpatialGrid, j: usize) -> Snapshot {
        Snapshot::from_fn(grid, |x| self.value(j, x))
    }

    /// `sum_j c_j phi_j` sampled on `grid`.
    pub fn expand(&self, grid: &SpatialGrid, coeffs: &[f64]) -> Result<Snapshot> {
        if coeffs.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coefficients", self.len()),
                got: format!("{}", coeffs.len()),
            });
        }
        Ok(Snapshot::from_fn(grid, |x| {
            coeffs.iter().enumerate().map(|(j, c)| c * self.value(j, x)).sum()
        }))
    }

    /// Interpolation coefficients `c_j = f(centre_j)`.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.centers.iter().map(|&c| f(c)).collect()
    }

    /// Closed box `[lo, hi]` as a node mask.
    pub fn region(&self, grid: &SpatialGrid) -> NodeMask {
        grid.box_mask(self.lo, self.hi)
    }
}
