//! Forward solver for the half-order time-fractional diffusion equation.

pub mod equation;
pub mod linsolve;
pub mod solver;

pub use equation::{EquationCoefficients, SourceSpec};
pub use solver::{solve_forward, solve_forward_batch, solve_forward_with, SolveOptions, SolveReport, TimeScheme};
