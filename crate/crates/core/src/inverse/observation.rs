use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::elliptic::EllipticOperator;
use crate::domain::field::{Field, Snapshot};
use crate::domain::grid::{NodeMask, SpatialGrid, TimeGrid};
use crate::error::{Error, Result};
use crate::forward::equation::SourceSpec;
use crate::forward::solver::solve_forward_batch;

use super::basis::HatBasis;
use super::model::ForwardModel;

/// Linear map from basis coefficients of `f` to `u(., t0)` at the interior
/// nodes of the grid.
#[derive(Clone, Debug)]
pub struct ObservationMap {
    pub matrix: DMatrix<f64>,
    pub basis: HatBasis,
    /// Grid node of each matrix row.
    pub rows: Vec<usize>,
    grid: SpatialGrid,
    times: TimeGrid,
    model: ForwardModel,
    lop: EllipticOperator,
    r: Field,
}

/// `min |R(x, t0)|` over the nodes of the basis region.
pub fn r_min_on_region(model: &ForwardModel, grid: &SpatialGrid, tg: &TimeGrid, basis: &HatBasis) -> f64 {
    let t0 = tg.t0();
    basis
        .region(grid)
        .nodes()
        .map(|i| (model.r)(grid.coords(i), t0).abs())
        .fold(f64::INFINITY, f64::min)
}

impl ObservationMap {
    /// Assembles the map after checking `|R(., t0)| >= r_min` on the basis
    /// region.
    pub fn assemble(model: &ForwardModel, grid: &SpatialGrid, tg: &TimeGrid, basis: HatBasis, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) {
            return Err(Error::InvalidArgument(format!("r_min must be positive, got {r_min}")));
        }
        let min_abs = r_min_on_region(model, grid, tg, &basis);
        if !(min_abs >= r_min) {
            return Err(Error::SourceHypothesis { min_abs, r_min });
        }
        Self::assemble_unchecked(model, grid, tg, basis)
    }

    /// Assembly without the source hypothesis check.
    pub fn assemble_unchecked(model: &ForwardModel, grid: &SpatialGrid, tg: &TimeGrid, basis: HatBasis) -> Result<Self> {
        if basis.dim() != grid.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}D basis", grid.dim()),
                got: format!("{}D", basis.dim()),
            });
        }
        let lop = model.operator(grid)?;
        let r = model.r_field(grid, tg);
        let sources: Vec<SourceSpec> = (0..basis.len())
            .map(|j| SourceSpec::separated(basis.function(grid, j), r.clone()))
            .collect::<Result<_>>()?;
        let cols = solve_forward_batch(&model.coeffs, &lop, &sources, tg)?;
        let rows: Vec<usize> = grid.interior_mask().nodes().collect();
        let matrix = DMatrix::from_fn(rows.len(), basis.len(), |i, j| cols[j].values()[rows[i]]);
        Ok(Self {
            matrix,
            basis,
            rows,
            grid: grid.clone(),
            times: tg.clone(),
            model: model.clone(),
            lop,
            r,
        })
    }

    /// Keeps only the rows inside `region`, for data observed on a
    /// sub-domain.
    pub fn restrict_rows(mut self, region: &NodeMask) -> Result<Self> {
        if region.len() != self.grid.n_nodes() {
            return Err(Error::ShapeMismatch {
                expected: format!("mask over {} nodes", self.grid.n_nodes()),
                got: format!("{}", region.len()),
            });
        }
        let keep: Vec<usize> = (0..self.rows.len()).filter(|&k| region.get(self.rows[k])).collect();
        if keep.is_empty() {
            return Err(Error::EmptyRegion);
        }
        self.matrix = self.matrix.select_rows(keep.iter());
        self.rows = keep.iter().map(|&k| self.rows[k]).collect();
        Ok(self)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    /// Predicted data `u(., t0)` for coefficients `c`, zero on the boundary.
    pub fn apply(&self, c: &[f64]) -> Result<Snapshot> {
        if c.len() != self.basis.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coefficients", self.basis.len()),
                got: format!("{}", c.len()),
            });
        }
        let y = &self.matrix * DVector::from_column_slice(c);
        Ok(self.scatter(y.as_slice()))
    }

    /// Row values placed back on the grid.
    pub fn scatter(&self, rows: &[f64]) -> Snapshot {
        let mut v = vec![0.0; self.grid.n_nodes()];
        for (k, &i) in self.rows.iter().enumerate() {
            v[i] = rows[k];
        }
        Snapshot::new(self.grid.clone(), Some(self.times.t0()), v).expect("grid sized")
    }

    /// Data restricted to the matrix rows.
    pub fn gather(&self, data: &Snapshot) -> Result<Vec<f64>> {
        if !data.grid().same_shape(&self.grid) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} nodes", self.grid.n_nodes()),
                got: format!("{}", data.grid().n_nodes()),
            });
        }
        Ok(self.rows.iter().map(|&i| data.values()[i]).collect())
    }

    /// Fresh forward solve for `f` on the map's own grid.
    pub fn solve(&self, f: &Snapshot) -> Result<Snapshot> {
        self.model.observe(&self.lop, &self.r, f)
    }

    /// Ratio of extreme singular values (infinite if singular).
    pub fn condition_number(&self) -> f64 {
        let sv = self.matrix.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    /// Largest relative difference between `samples` random columns and
    /// fresh solves of the corresponding hat.
    pub fn verify_columns(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let j = rng.random_range(0..self.basis.len());
            let fresh = self.gather(&self.solve(&self.basis.function(&self.grid, j))?)?;
            let col = self.matrix.column(j);
            let scale = col.amax().max(f64::MIN_POSITIVE);
            let diff = fresh.iter().zip(col.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
        Ok(worst)
    }
}
