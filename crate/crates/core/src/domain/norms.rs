//! Discrete L² and Sobolev-type norms built from difference quotients.
//!
//! All norms use the trapezoidal weights of the full grid restricted to the
//! selected region, so `u = 1` on the unit interval has L² norm exactly 1.

use crate::domain::field::Snapshot;
use crate::domain::grid::{NodeMask, SpatialGrid};
use crate::domain::stencil::{mixed_derivative, multi_indices};
use crate::error::{Error, Result};

/// Orders for which a discrete Sobolev norm is defined.
pub const SUPPORTED_ORDERS: [usize; 4] = [0, 1, 2, 4];

/// Difference quotients `D^alpha u` for every `|alpha| <= order`.
pub fn derivative_components(grid: &SpatialGrid, u: &[f64], order: usize) -> Result<Vec<Vec<f64>>> {
    multi_indices(grid.dim(), order)
        .into_iter()
        .map(|alpha| mixed_derivative(grid, u, alpha))
        .collect()
}

/// `sum_i w_i * v_i^2` over the masked nodes.
pub fn weighted_sum_sq(weights: &[f64], v: &[f64], region: &NodeMask) -> f64 {
    region.nodes().map(|i| weights[i] * v[i] * v[i]).sum()
}

fn check_region(grid: &SpatialGrid, region: &NodeMask) -> Result<()> {
    if region.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch {
            expected: format!("mask over {} nodes", grid.n_nodes()),
            got: format!("{}", region.len()),
        });
    }
    if region.count() == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(())
}

/// Discrete `H^order` surrogate over `region`:
/// `sqrt(sum_{|alpha| <= order} sum_i w_i (D^alpha u)_i^2)`.
///
/// Derivatives are evaluated on the whole grid, with one-sided stencils in
/// the layers next to the boundary, and only then restricted.
pub fn discrete_sobolev_norm(u: &Snapshot, order: usize, region: &NodeMask) -> Result<f64> {
    sobolev_norm_values(u.grid(), u.values(), order, region)
}

pub fn sobolev_norm_values(grid: &SpatialGrid, u: &[f64], order: usize, region: &NodeMask) -> Result<f64> {
    if !SUPPORTED_ORDERS.contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "norm order must be one of {SUPPORTED_ORDERS:?}, got {order}"
        )));
    }
    check_region(grid, region)?;
    if u.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} nodes", grid.n_nodes()),
            got: format!("{}", u.len()),
        });
    }
    let w = grid.trapezoid_weights();
    let total: f64 = derivative_components(grid, u, order)?
        .iter()
        .map(|d| weighted_sum_sq(&w, d, region))
        .sum();
    Ok(total.sqrt())
}

/// Plain trapezoidal L² norm on the whole grid.
pub fn l2_norm(grid: &SpatialGrid, u: &[f64]) -> f64 {
    let w = grid.trapezoid_weights();
    u.iter().zip(&w).map(|(v, wi)| wi * v * v).sum::<f64>().sqrt()
}
