use std::fmt;
use std::sync::Arc;

use crate::domain::elliptic::{EllipticCoefficients, EllipticOperator};
use crate::domain::field::{Field, Snapshot};
use crate::domain::grid::{SpatialGrid, TimeGrid};
use crate::error::Result;
use crate::forward::equation::{EquationCoefficients, SourceSpec};
use crate::forward::solver::solve_forward;

pub type SpaceFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Closed-form description of the forward problem, so that it can be
/// discretized on any grid (used for finer-grid synthetic data).
#[derive(Clone)]
pub struct ForwardModel {
    pub coeffs: EquationCoefficients,
    pub a: TensorFn,
    pub b: VectorFn,
    pub c: SpaceFn,
    pub r: SpaceTimeFn,
}

impl fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ForwardModel").field("coeffs", &self.coeffs).finish_non_exhaustive()
    }
}

impl ForwardModel {
    /// `L = Laplacian` with the given time factor `R`.
    pub fn laplacian(coeffs: EquationCoefficients, r: SpaceTimeFn) -> Self {
        Self {
            coeffs,
            a: Arc::new(|_| [[1.0, 0.0], [0.0, 1.0]]),
            b: Arc::new(|_| [0.0, 0.0]),
            c: Arc::new(|_| 0.0),
            r,
        }
    }

    pub fn operator(&self, grid: &SpatialGrid) -> Result<EllipticOperator> {
        let co = EllipticCoefficients::from_fns(grid, &*self.a, &*self.b, &*self.c);
        EllipticOperator::assemble(grid, co, None)
    }

    pub fn r_field(&self, grid: &SpatialGrid, tg: &TimeGrid) -> Field {
        Field::from_fn(grid, tg, |x, t| (self.r)(x, t))
    }

    /// `u(., t0)` for the source `f R`.
    pub fn observe(&self, lop: &EllipticOperator, r: &Field, f: &Snapshot) -> Result<Snapshot> {
        let tg = r.times();
        let src = SourceSpec::separated(f.clone(), r.clone())?;
        Ok(solve_forward(&self.coeffs, lop, &src, tg)?.solution.snapshot(tg.t0_index()))
    }
}
