//! Reduction of the half-order equation to an integer-order one.
//!
//! If `rho1 d_t u + rho2 d^{1/2} u - L u = g` with `u(., 0) = 0`, then
//! `rho2^2 d_t u - (rho1 d_t - L)^2 u = G` where
//! `G = [rho2 d^{1/2} - (rho1 d_t - L)] g + rho2 g(., 0) / sqrt(pi t)`.
//! For a separated source `g = f R` the same right-hand side is written
//! out with the product rule as `F`.

use crate::domain::elliptic::EllipticOperator;
use crate::domain::field::{Field, Snapshot};
use crate::domain::stencil::axis_derivative;
use crate::error::{Error, Result};
use crate::forward::equation::EquationCoefficients;
use crate::fractional::{caputo_half, inv_sqrt_pi_t};

/// `G = regular + singular / sqrt(pi t)` for `t > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSource {
    pub regular: Field,
    pub singular: Snapshot,
}

impl ReducedSource {
    /// Full value at a level `n >= 1`.
    pub fn level(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::SingularTime);
        }
        let s = inv_sqrt_pi_t(self.regular.times().t(n));
        Ok(self
            .regular
            .level(n)
            .iter()
            .zip(self.singular.values())
            .map(|(r, a)| r + a * s)
            .collect())
    }
}

fn apply_levels(lop: &EllipticOperator, u: &Field) -> Result<Field> {
    u.map_levels(|_, lv| lop.matrix().matvec(lv))
}

fn check_grid(lop: &EllipticOperator, u: &Field) -> Result<()> {
    if !lop.grid().same_shape(u.grid()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} nodes", lop.grid().n_nodes()),
            got: format!("{} nodes", u.n_nodes()),
        });
    }
    Ok(())
}

/// `G` from a general source field.
pub fn compute_g(coeffs: &EquationCoefficients, lop: &EllipticOperator, g: &Field) -> Result<ReducedSource> {
    check_grid(lop, g)?;
    let frac = caputo_half(g)?;
    let dt = g.time_derivative()?;
    let lg = apply_levels(lop, g)?;
    let regular = frac
        .lin_comb(coeffs.rho2(), -coeffs.rho1(), &dt)?
        .lin_comb(1.0, 1.0, &lg)?;
    let singular = Snapshot::new(
        g.grid().clone(),
        None,
        g.level(0).iter().map(|v| coeffs.rho2() * v).collect(),
    )?;
    Ok(ReducedSource { regular, singular })
}

/// `F` for `g = f R`, assembled term by term:
/// `R div(a grad f) + sum_j (2 sum_i a_ij d_i R + b_j R) d_j f
///  + [rho2 d^{1/2} R - rho1 d_t R + L R] f`, singular part `rho2 f R(., 0)`.
pub fn compute_f(
    coeffs: &EquationCoefficients,
    lop: &EllipticOperator,
    f: &Snapshot,
    r: &Field,
) -> Result<ReducedSource> {
    check_grid(lop, r)?;
    if !f.grid().same_shape(r.grid()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} nodes", r.n_nodes()),
            got: format!("{} nodes", f.grid().n_nodes()),
        });
    }
    let grid = lop.grid();
    let dim = grid.dim();
    let co = lop.coefficients();
    let principal = lop.principal_part().matrix().matvec(f.values());
    let grad_f: Vec<Vec<f64>> = (0..dim)
        .map(|ax| axis_derivative(grid, f.values(), ax, 1))
        .collect::<Result<_>>()?;
    let bracket = caputo_half(r)?
        .lin_comb(coeffs.rho2(), -coeffs.rho1(), &r.time_derivative()?)?
        .lin_comb(1.0, 1.0, &apply_levels(lop, r)?)?;
    let interior = grid.interior_mask();
    let regular = r.map_levels(|n, rl| {
        let grad_r: Vec<Vec<f64>> = (0..dim)
            .map(|ax| axis_derivative(grid, rl, ax, 1).expect("grid checked above"))
            .collect();
        (0..rl.len())
            .map(|i| {
                if !interior.get(i) {
                    // L rows vanish on the boundary
                    return bracket.at(n, i) * f.values()[i];
                }
                let mut v = rl[i] * principal[i];
                for j in 0..dim {
                    let mut coef = co.b[i][j] * rl[i];
                    for (ii, gr) in grad_r.iter().enumerate() {
                        coef += 2.0 * co.a[i][ii][j] * gr[i];
                    }
                    v += coef * grad_f[j][i];
                }
                v + bracket.at(n, i) * f.values()[i]
            })
            .collect()
    })?;
    let singular = Snapshot::new(
        grid.clone(),
        None,
        f.values().iter().zip(r.level(0)).map(|(a, b)| coeffs.rho2() * a * b).collect(),
    )?;
    Ok(ReducedSource { regular, singular })
}

/// Options for [`check_reduced_equation`].
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualOptions {
    /// Levels with `t < t_cut` are excluded.
    pub t_cut: f64,
    /// Nodes closer than this many layers to the boundary are excluded.
    pub boundary_layers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedResidual {
    pub max: f64,
    /// Space-time L² norm with trapezoidal weights in space.
    pub l2: f64,
    pub first_level: usize,
    pub residual: Field,
}

/// Residual of `rho2^2 d_t u - (rho1 d_t w - L w) - G` with
/// `w = rho1 d_t u - L u` and centred time differences.
pub fn check_reduced_equation(
    u: &Field,
    g: &ReducedSource,
    coeffs: &EquationCoefficients,
    lop: &EllipticOperator,
    opts: &ResidualOptions,
) -> Result<ReducedResidual> {
    check_grid(lop, u)?;
    u.check_same_shape(&g.regular)?;
    let times = u.times();
    if !(opts.t_cut > 0.0 && opts.t_cut < times.t_final()) {
        return Err(Error::InvalidArgument(format!("t_cut must lie in (0, T), got {}", opts.t_cut)));
    }
    let (rho1, rho2) = (coeffs.rho1(), coeffs.rho2());
    let du = u.time_derivative()?;
    let w = du.lin_comb(rho1, -1.0, &apply_levels(lop, u)?)?;
    let op_w = w.time_derivative()?.lin_comb(rho1, -1.0, &apply_levels(lop, &w)?)?;
    let first_level = times.level_at_or_after(opts.t_cut).max(1);
    let residual = du.lin_comb(rho2 * rho2, -1.0, &op_w)?.map_levels(|n, lv| {
        if n < first_level {
            return vec![0.0; lv.len()];
        }
        let gl = g.level(n).expect("level >= 1");
        lv.iter().zip(&gl).map(|(a, b)| a - b).collect()
    })?;
    let mask = u.grid().inner_mask(opts.boundary_layers);
    let wts = u.grid().trapezoid_weights();
    let mut max: f64 = 0.0;
    let mut sq = 0.0;
    for n in first_level..u.n_levels() {
        let lv = residual.level(n);
        for i in mask.nodes() {
            max = max.max(lv[i].abs());
            sq += times.dt() * wts[i] * lv[i] * lv[i];
        }
    }
    Ok(ReducedResidual {
        max,
        l2: sq.sqrt(),
        first_level,
        residual,
    })
}
