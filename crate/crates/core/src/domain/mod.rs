//! Grids, grid functions, stencils, norms and the elliptic operator.

pub mod elliptic;
pub mod field;
pub mod grid;
pub mod io;
pub mod norms;
pub mod sparse;
pub mod stencil;

pub use elliptic::{EllipticCoefficients, EllipticOperator};
pub use field::{Field, Snapshot};
pub use grid::{Face, NodeMask, SpatialGrid, TimeGrid};
pub use norms::discrete_sobolev_norm;
pub use sparse::CsrMatrix;
