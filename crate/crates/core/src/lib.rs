//! Numerical laboratory for `rho1 d_t u + rho2 d_t^{1/2} u - L u = g` with
//! zero initial data.

pub mod carleman;
pub mod cli;
pub mod domain;
pub mod error;
pub mod forward;
pub mod fractional;
pub mod inverse;
pub mod reduction;

pub use error::{Error, Result};
