//! Both sides of the parabolic, elliptic and combined weighted inequalities
//! evaluated by quadrature on compactly supported test fields.
//!
//! Every weighted integral is computed as `exp(M) * sum w q exp(2 s phi - M)`
//! with `M = max 2 s phi` over the support; only the shifted sums are
//! stored, and `M` is reported as `log_scale`.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::elliptic::EllipticOperator;
use crate::domain::field::{Field, Snapshot};
use crate::domain::grid::{NodeMask, SpatialGrid};
use crate::domain::stencil::axis_derivative;
use crate::error::{Error, Result};
use crate::forward::equation::EquationCoefficients;

use super::geometry::CarlemanGeometry;
use super::level_sets::build_level_sets;

/// Relative size below which a value counts as zero in the support check.
const SUPPORT_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub s: f64,
    pub lambda: f64,
    /// Left-hand side divided by `exp(log_scale)`.
    pub lhs: f64,
    /// Residual side divided by `exp(log_scale)`.
    pub residual: f64,
    /// `None` when both sides vanish (undefined by convention) or the
    /// residual side alone vanishes.
    pub ratio: Option<f64>,
    /// Unweighted sum of squares of the test field on the nodes of the
    /// integration domain that touch its complement.
    pub boundary_term: f64,
    pub log_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub points: Vec<SweepPoint>,
    /// Smallest `s` from which every further doubling of the sweep keeps
    /// the ratio within a factor 1.5.
    pub s_star: Option<f64>,
    /// Largest ratio over the upper half of the sweep.
    pub tail_constant: Option<f64>,
    /// Residual side zero while the left-hand side is not.
    pub violation_candidate: bool,
}

impl RatioReport {
    fn new(points: Vec<SweepPoint>) -> Self {
        let violation_candidate = points.iter().any(|p| p.ratio.is_none() && p.lhs > 0.0);
        let ratios: Option<Vec<f64>> = points.iter().map(|p| p.ratio).collect();
        let (s_star, tail_constant) = match ratios {
            Some(r) if !r.is_empty() => {
                let mut start = r.len() - 1;
                while start > 0 && r[start] <= 1.5 * r[start - 1] {
                    start -= 1;
                }
                let tail = r[r.len() / 2..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (Some(points[start].s), Some(tail))
            }
            _ => (None, None),
        };
        Self {
            points,
            s_star,
            tail_constant,
            violation_candidate,
        }
    }

    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.ratio).collect()
    }

    /// `true` unless the ratio grows by more than 50 % between any two of
    /// the final three sweep points (or is undefined there).
    pub fn tail_bounded(&self) -> bool {
        let n = self.points.len();
        let tail = &self.points[n.saturating_sub(3)..];
        tail.windows(2).all(|w| match (w[0].ratio, w[1].ratio) {
            (Some(a), Some(b)) => b.is_finite() && b <= 1.5 * a,
            _ => false,
        })
    }

    /// CSV with columns `s,lambda,lhs,residual_term,ratio,boundary_term,log_scale`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,lambda,lhs,residual_term,ratio,boundary_term,log_scale\n");
        for p in &self.points {
            let ratio = p.ratio.map(|r| format!("{r:e}")).unwrap_or_else(|| "nan".into());
            out.push_str(&format!(
                "{},{},{:e},{:e},{ratio},{:e},{}\n",
                p.s, p.lambda, p.lhs, p.residual, p.boundary_term, p.log_scale
            ));
        }
        out
    }
}

/// One left-hand-side block `s^power * coef * value`.
struct Block {
    power: i32,
    coef: f64,
    values: Vec<f64>,
}

/// Integrands restricted to the nodes of the integration domain.
struct Integrands {
    phi: Vec<f64>,
    quad: Vec<f64>,
    blocks: Vec<Block>,
    residual: Vec<f64>,
    boundary_term: f64,
    lambda: f64,
}

impl Integrands {
    fn sweep(&self, s_sweep: &[f64]) -> Result<RatioReport> {
        if let Some(&s) = s_sweep.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidArgument(format!("s must be positive, got {s}")));
        }
        let active: Vec<usize> = (0..self.phi.len())
            .filter(|&k| self.residual[k] != 0.0 || self.blocks.iter().any(|b| b.values[k] != 0.0))
            .collect();
        let phi_max = active.iter().map(|&k| self.phi[k]).fold(f64::NEG_INFINITY, f64::max);
        let points = s_sweep
            .par_iter()
            .map(|&s| {
                let m = if active.is_empty() { 0.0 } else { 2.0 * s * phi_max };
                let mut lhs = 0.0;
                let mut res = 0.0;
                let scale: Vec<f64> = self.blocks.iter().map(|b| s.powi(b.power) * b.coef).collect();
                for &k in &active {
                    let w = self.quad[k] * (2.0 * s * self.phi[k] - m).exp();
                    res += w * self.residual[k];
                    lhs += w * self.blocks.iter().zip(&scale).map(|(b, c)| c * b.values[k]).sum::<f64>();
                }
                let ratio = if res > 0.0 { Some(lhs / res) } else { None };
                SweepPoint {
                    s,
                    lambda: self.lambda,
                    lhs,
                    residual: res,
                    ratio,
                    boundary_term: self.boundary_term,
                    log_scale: m,
                }
            })
            .collect();
        Ok(RatioReport::new(points))
    }
}

fn sq(v: &[f64]) -> Vec<f64> {
    v.iter().map(|a| a * a).collect()
}

fn add_sq(acc: &mut [f64], v: &[f64], mult: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += mult * b * b;
    }
}

/// `|grad u|^2` at every node of a single level.
fn grad_sq(grid: &SpatialGrid, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for a in 0..grid.dim() {
        add_sq(&mut out, &axis_derivative(grid, u, a, 1).expect("valid axis"), 1.0);
    }
    out
}

/// `sum_ij |d_i d_j u|^2` at every node of a single level.
fn hess_sq(grid: &SpatialGrid, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for a in 0..grid.dim() {
        add_sq(&mut out, &axis_derivative(grid, u, a, 2).expect("valid axis"), 1.0);
    }
    if grid.dim() == 2 {
        let ux = axis_derivative(grid, u, 0, 1).expect("valid axis");
        add_sq(&mut out, &axis_derivative(grid, &ux, 1, 1).expect("valid axis"), 2.0);
    }
    out
}

fn per_level(u: &Field, op: impl Fn(&[f64]) -> Vec<f64> + Sync + Send) -> Vec<f64> {
    u.values()
        .par_chunks(u.n_nodes())
        .map(op)
        .collect::<Vec<_>>()
        .concat()
}

fn apply_levels(lop: &EllipticOperator, u: &Field) -> Result<Field> {
    u.map_levels(|_, lv| lop.matrix().matvec(lv))
}

/// Nodes of the domain with a grid neighbour (in space or time) outside it.
fn rim(mask: &[bool], grid: &SpatialGrid, n_levels: usize) -> Vec<usize> {
    let nn = grid.n_nodes();
    let mut out = Vec::new();
    for (k, &inside) in mask.iter().enumerate() {
        if !inside {
            continue;
        }
        let (n, i) = (k / nn, k % nn);
        let idx = grid.multi_index(i);
        let mut edge = grid.is_boundary(i) || ((n == 0 || n + 1 == n_levels) && n_levels > 1);
        for a in 0..grid.dim() {
            let st = grid.stride(a);
            if idx[a] > 0 && !mask[k - st] || idx[a] < grid.n_cells(a) && !mask[k + st] {
                edge = true;
            }
        }
        if n_levels > 1 && (n > 0 && !mask[k - nn] || n + 1 < n_levels && !mask[k + nn]) {
            edge = true;
        }
        if edge {
            out.push(k);
        }
    }
    out
}

fn check_support(values: &[f64], mask: &[bool], what: &str) -> Result<()> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let outside = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    if outside > SUPPORT_TOL * max {
        return Err(Error::NotCompactlySupported(format!(
            "test field reaches {outside:e} outside {what} (max {max:e})"
        )));
    }
    Ok(())
}

fn check_inputs(u: &Field, geom: &CarlemanGeometry, lop: &EllipticOperator) -> Result<()> {
    if !u.grid().same_shape(geom.grid()) || !lop.grid().same_shape(geom.grid()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} nodes", geom.grid().n_nodes()),
            got: format!("{} and {} nodes", u.n_nodes(), lop.grid().n_nodes()),
        });
    }
    if u.times() != geom.times() {
        return Err(Error::InvalidTimeGrid("test field and geometry use different time grids".into()));
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("test field".into()));
    }
    Ok(())
}

/// Space-time integration domain `V = Q_1` with quadrature and weights.
struct SpaceTimeDomain {
    nodes: Vec<usize>,
    phi: Vec<f64>,
    quad: Vec<f64>,
    rim: Vec<usize>,
}

fn space_time_domain(geom: &CarlemanGeometry, u: &Field) -> Result<SpaceTimeDomain> {
    let sets = build_level_sets(geom)?;
    let q1 = &sets.q[0];
    check_support(u.values(), q1.as_slice(), "Q_1")?;
    let grid = geom.grid();
    let tg = geom.times();
    let nn = grid.n_nodes();
    let wx = grid.trapezoid_weights();
    let nl = tg.n_levels();
    let nodes: Vec<usize> = (0..q1.as_slice().len()).filter(|&k| q1.as_slice()[k]).collect();
    let lambda = geom.lambda();
    let phi = nodes
        .iter()
        .map(|&k| (lambda * geom.psi(grid.coords(k % nn), tg.t(k / nn))).exp())
        .collect();
    let quad = nodes
        .iter()
        .map(|&k| {
            let n = k / nn;
            let wt = if n == 0 || n + 1 == nl { 0.5 } else { 1.0 } * tg.dt();
            wt * wx[k % nn]
        })
        .collect();
    Ok(SpaceTimeDomain {
        rim: rim(q1.as_slice(), grid, nl),
        nodes,
        phi,
        quad,
    })
}

fn gather(v: &[f64], nodes: &[usize]) -> Vec<f64> {
    nodes.iter().map(|&k| v[k]).collect()
}

/// Parabolic inequality: `s^-1 (|d_t v|^2 + sum |d_i d_j v|^2)
/// + s lambda^2 |grad v|^2 + s^3 lambda^4 |v|^2` against
/// `|(rho1 d_t - L) v|^2`, both weighted by `exp(2 s phi)` over `Q_1`.
pub fn check_parabolic_carleman(
    v: &Field,
    geom: &CarlemanGeometry,
    lop: &EllipticOperator,
    coeffs: &EquationCoefficients,
    s_sweep: &[f64],
) -> Result<RatioReport> {
    check_inputs(v, geom, lop)?;
    let dom = space_time_domain(geom, v)?;
    let grid = geom.grid();
    let lam = geom.lambda();
    let vt = v.time_derivative()?;
    let lv = apply_levels(lop, v)?;
    let res = vt.lin_comb(coeffs.rho1(), -1.0, &lv)?;
    let mut second = sq(vt.values());
    let h = per_level(v, |l| hess_sq(grid, l));
    second.iter_mut().zip(&h).for_each(|(a, b)| *a += b);
    let ints = Integrands {
        blocks: vec![
            Block {
                power: -1,
                coef: 1.0,
                values: gather(&second, &dom.nodes),
            },
            Block {
                power: 1,
                coef: lam.powi(2),
                values: gather(&per_level(v, |l| grad_sq(grid, l)), &dom.nodes),
            },
            Block {
                power: 3,
                coef: lam.powi(4),
                values: gather(&sq(v.values()), &dom.nodes),
            },
        ],
        residual: gather(&sq(res.values()), &dom.nodes),
        boundary_term: dom.rim.iter().map(|&k| v.values()[k].powi(2)).sum(),
        phi: dom.phi,
        quad: dom.quad,
        lambda: lam,
    };
    ints.sweep(s_sweep)
}

/// Combined inequality: all eight blocks
/// `s^-2 (|d_t^2 u|^2 + sum |d_t d_i d_j u|^2) + lambda^2 |grad d_t u|^2
/// + s^2 lambda^4 (|d_t u|^2 + sum |d_i d_j u|^2) + s^4 lambda^6 |grad u|^2
/// + s^6 lambda^8 |u|^2` against `|rho2^2 d_t u - (rho1 d_t - L)^2 u|^2`.
pub fn check_combined_carleman(
    u: &Field,
    geom: &CarlemanGeometry,
    lop: &EllipticOperator,
    coeffs: &EquationCoefficients,
    s_sweep: &[f64],
) -> Result<RatioReport> {
    check_inputs(u, geom, lop)?;
    let dom = space_time_domain(geom, u)?;
    let grid = geom.grid();
    let lam = geom.lambda();
    let (rho1, rho2) = (coeffs.rho1(), coeffs.rho2());
    let ut = u.time_derivative()?;
    let utt = ut.time_derivative()?;
    let w = ut.lin_comb(rho1, -1.0, &apply_levels(lop, u)?)?;
    let op_w = w.time_derivative()?.lin_comb(rho1, -1.0, &apply_levels(lop, &w)?)?;
    let res = ut.lin_comb(rho2 * rho2, -1.0, &op_w)?;

    let mut b1 = sq(utt.values());
    b1.iter_mut()
        .zip(per_level(&ut, |l| hess_sq(grid, l)))
        .for_each(|(a, b)| *a += b);
    let b2 = per_level(&ut, |l| grad_sq(grid, l));
    let mut b3 = sq(ut.values());
    b3.iter_mut()
        .zip(per_level(u, |l| hess_sq(grid, l)))
        .for_each(|(a, b)| *a += b);
    let b4 = per_level(u, |l| grad_sq(grid, l));
    let b5 = sq(u.values());
    let g = |v: &[f64]| gather(v, &dom.nodes);
    let ints = Integrands {
        blocks: vec![
            Block {
                power: -2,
                coef: 1.0,
                values: g(&b1),
            },
            Block {
                power: 0,
                coef: lam.powi(2),
                values: g(&b2),
            },
            Block {
                power: 2,
                coef: lam.powi(4),
                values: g(&b3),
            },
            Block {
                power: 4,
                coef: lam.powi(6),
                values: g(&b4),
            },
            Block {
                power: 6,
                coef: lam.powi(8),
                values: g(&b5),
            },
        ],
        residual: g(&sq(res.values())),
        boundary_term: dom.rim.iter().map(|&k| u.values()[k].powi(2)).sum(),
        phi: dom.phi,
        quad: dom.quad,
        lambda: lam,
    };
    ints.sweep(s_sweep)
}

/// Elliptic inequality on `Omega_1`: `s^-1 sum |d_i d_j v|^2
/// + s lambda^2 |grad v|^2 + s^3 lambda^4 |v|^2` against `|L v|^2`, both
/// weighted by `exp(2 s phi_0)` with `phi_0 = exp(lambda d)`.
pub fn check_elliptic_carleman(
    v: &Snapshot,
    geom: &CarlemanGeometry,
    lop: &EllipticOperator,
    s_sweep: &[f64],
) -> Result<RatioReport> {
    let grid = geom.grid();
    if !v.grid().same_shape(grid) || !lop.grid().same_shape(grid) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} nodes", grid.n_nodes()),
            got: format!("{} and {} nodes", v.grid().n_nodes(), lop.grid().n_nodes()),
        });
    }
    if v.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("test field".into()));
    }
    let omega1: NodeMask = build_level_sets(geom)?.omega[0].clone();
    check_support(v.values(), &omega1.0, "Omega_1")?;
    let nodes: Vec<usize> = omega1.nodes().collect();
    let lam = geom.lambda();
    let wx = grid.trapezoid_weights();
    let vals = v.values();
    let ints = Integrands {
        phi: nodes.iter().map(|&i| geom.phi0(grid.coords(i))).collect(),
        quad: nodes.iter().map(|&i| wx[i]).collect(),
        blocks: vec![
            Block {
                power: -1,
                coef: 1.0,
                values: gather(&hess_sq(grid, vals), &nodes),
            },
            Block {
                power: 1,
                coef: lam.powi(2),
                values: gather(&grad_sq(grid, vals), &nodes),
            },
            Block {
                power: 3,
                coef: lam.powi(4),
                values: gather(&sq(vals), &nodes),
            },
        ],
        residual: gather(&sq(&lop.matrix().matvec(vals)), &nodes),
        boundary_term: rim(&omega1.0, grid, 1).iter().map(|&i| vals[i].powi(2)).sum(),
        lambda: lam,
    };
    ints.sweep(s_sweep)
}
