//! Regularized reconstruction of the coefficients of `f` from `u(., t0)`.
//!
//! Tikhonov minimizes `|A c - d|_W^2 + alpha_abs |K c|^2`, where `|.|_W` is
//! the trapezoidal L² norm over the rows and `|K c|` is the discrete H²
//! norm of `sum c_j phi_j` over the basis region. `alpha` is given relative
//! to `alpha_scale = |W^{1/2} A|_F^2 / |K|_F^2`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::domain::field::Snapshot;
use crate::domain::norms::derivative_components;
use crate::error::{Error, Result};

use super::observation::ObservationMap;

/// Ratio `misfit / noise` targeted by the discrepancy principle.
pub const DEFAULT_TAU: f64 = 1.1;
const MOROZOV_RANGE: (f64, f64) = (1e-24, 1e2);
const MOROZOV_STEPS: usize = 80;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AlphaChoice {
    Fixed(f64),
    /// Largest `alpha` with `misfit <= tau * noise`, where `noise` is the
    /// weighted L² norm of the data error.
    Morozov { noise: f64, tau: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Method {
    Tikhonov(AlphaChoice),
    /// Landweber iteration stopped by the discrepancy principle (if a
    /// noise level is given) or after `max_iter` steps.
    Landweber { max_iter: usize, noise: Option<f64>, tau: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyStatus {
    NotUsed,
    Attained,
    /// The target misfit lies outside the searched range; the closest end
    /// was returned.
    Unattainable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub f_hat: Snapshot,
    pub coefficients: Vec<f64>,
    /// Relative regularization parameter (0 for Landweber).
    pub alpha: f64,
    pub alpha_abs: f64,
    pub misfit: f64,
    pub seminorm: f64,
    pub status: DiscrepancyStatus,
    /// `|N c - A^T W d| / |A^T W d|` with `N = A^T W A + alpha_abs K^T K`.
    pub normal_residual: f64,
    pub iterations: usize,
}

/// Prefactored pieces shared by every `alpha`.
pub struct Regularizer {
    aw: DMatrix<f64>,
    k: DMatrix<f64>,
    sqrt_w: DVector<f64>,
    alpha_scale: f64,
}

impl Regularizer {
    pub fn new(map: &ObservationMap) -> Result<Self> {
        let grid = map.grid();
        let w = grid.trapezoid_weights();
        let sqrt_w = DVector::from_iterator(map.rows.len(), map.rows.iter().map(|&i| w[i].sqrt()));
        let mut aw = map.matrix.clone();
        for (i, s) in sqrt_w.iter().enumerate() {
            aw.row_mut(i).scale_mut(*s);
        }
        let region: Vec<usize> = map.basis.region(grid).nodes().collect();
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let m = map.basis.len();
        let w = &w;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let phi = map.basis.function(grid, j);
            let comps = derivative_components(grid, phi.values(), 2)?;
            cols.push(
                comps
                    .iter()
                    .flat_map(|c| region.iter().map(move |&i| w[i].sqrt() * c[i]))
                    .collect(),
            );
        }
        let k = DMatrix::from_fn(cols[0].len(), m, |i, j| cols[j][i]);
        let alpha_scale = aw.norm_squared() / k.norm_squared();
        Ok(Self {
            aw,
            k,
            sqrt_w,
            alpha_scale,
        })
    }

    pub fn alpha_scale(&self) -> f64 {
        self.alpha_scale
    }

    fn weighted_data(&self, d: &[f64]) -> DVector<f64> {
        DVector::from_iterator(d.len(), d.iter().zip(self.sqrt_w.iter()).map(|(a, b)| a * b))
    }

    fn tikhonov(&self, dw: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
        let (n, m) = self.aw.shape();
        let nk = self.k.nrows();
        let sa = (alpha * self.alpha_scale).sqrt();
        let mut stacked = DMatrix::zeros(n + nk, m);
        stacked.rows_mut(0, n).copy_from(&self.aw);
        stacked.rows_mut(n, nk).copy_from(&(&self.k * sa));
        let mut rhs = DVector::zeros(n + nk);
        rhs.rows_mut(0, n).copy_from(dw);
        stacked
            .svd(true, true)
            .solve(&rhs, 0.0)
            .map_err(|e| Error::InvalidArgument(format!("least-squares solve failed: {e}")))
    }

    fn misfit(&self, dw: &DVector<f64>, c: &DVector<f64>) -> f64 {
        (&self.aw * c - dw).norm()
    }

    fn normal_residual(&self, dw: &DVector<f64>, c: &DVector<f64>, alpha_abs: f64) -> f64 {
        let rhs = self.aw.transpose() * dw;
        let lhs = self.aw.transpose() * (&self.aw * c) + (self.k.transpose() * (&self.k * c)) * alpha_abs;
        let r = rhs.norm();
        if r == 0.0 {
            lhs.norm()
        } else {
            (lhs - rhs).norm() / r
        }
    }
}

/// Reconstructs `f` from `data` (a snapshot on the map's grid).
pub fn reconstruct(map: &ObservationMap, data: &Snapshot, method: &Method) -> Result<ReconstructionResult> {
    let reg = Regularizer::new(map)?;
    reconstruct_with(map, &reg, data, method)
}

/// As [`reconstruct`] with a prebuilt [`Regularizer`].
pub fn reconstruct_with(
    map: &ObservationMap,
    reg: &Regularizer,
    data: &Snapshot,
    method: &Method,
) -> Result<ReconstructionResult> {
    let d = map.gather(data)?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation data".into()));
    }
    let dw = reg.weighted_data(&d);
    let (c, alpha, status, iterations) = match method {
        Method::Tikhonov(AlphaChoice::Fixed(a)) => {
            if !(*a > 0.0) {
                return Err(Error::NonPositiveAlpha(*a));
            }
            (reg.tikhonov(&dw, *a)?, *a, DiscrepancyStatus::NotUsed, 0)
        }
        Method::Tikhonov(AlphaChoice::Morozov { noise, tau }) => {
            if !(*noise >= 0.0 && *tau >= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "discrepancy principle needs noise >= 0 and tau >= 1, got {noise}, {tau}"
                )));
            }
            let (c, a, st) = morozov(reg, &dw, tau * noise)?;
            (c, a, st, 0)
        }
        Method::Landweber { max_iter, noise, tau } => {
            let (c, st, it) = landweber(reg, &dw, *max_iter, noise.map(|n| tau * n));
            (c, 0.0, st, it)
        }
    };
    let alpha_abs = alpha * reg.alpha_scale;
    let f_hat = map.basis.expand(map.grid(), c.as_slice())?;
    Ok(ReconstructionResult {
        misfit: reg.misfit(&dw, &c),
        seminorm: (&reg.k * &c).norm(),
        normal_residual: reg.normal_residual(&dw, &c, alpha_abs),
        coefficients: c.as_slice().to_vec(),
        f_hat,
        alpha,
        alpha_abs,
        status,
        iterations,
    })
}

fn morozov(reg: &Regularizer, dw: &DVector<f64>, target: f64) -> Result<(DVector<f64>, f64, DiscrepancyStatus)> {
    let (mut lo, mut hi) = (MOROZOV_RANGE.0.ln(), MOROZOV_RANGE.1.ln());
    let at = |la: f64| -> Result<(DVector<f64>, f64)> {
        let c = reg.tikhonov(dw, la.exp())?;
        let m = reg.misfit(dw, &c);
        Ok((c, m))
    };
    let (c_lo, m_lo) = at(lo)?;
    if m_lo > target {
        warn!("discrepancy target {target:e} below the smallest reachable misfit {m_lo:e}");
        return Ok((c_lo, lo.exp(), DiscrepancyStatus::Unattainable));
    }
    let (c_hi, m_hi) = at(hi)?;
    if m_hi <= target {
        warn!("discrepancy target {target:e} above the largest searched misfit {m_hi:e}");
        return Ok((c_hi, hi.exp(), DiscrepancyStatus::Unattainable));
    }
    let mut best = c_lo;
    for _ in 0..MOROZOV_STEPS {
        let mid = 0.5 * (lo + hi);
        let (c, m) = at(mid)?;
        if m <= target {
            lo = mid;
            best = c;
        } else {
            hi = mid;
        }
    }
    Ok((best, lo.exp(), DiscrepancyStatus::Attained))
}

fn landweber(reg: &Regularizer, dw: &DVector<f64>, max_iter: usize, target: Option<f64>) -> (DVector<f64>, DiscrepancyStatus, usize) {
    let a = &reg.aw;
    let smax = a.singular_values().max();
    let step = 1.0 / (smax * smax);
    let mut c = DVector::zeros(a.ncols());
    for it in 0..max_iter {
        let r = dw - a * &c;
        if let Some(t) = target {
            if r.norm() <= t {
                return (c, DiscrepancyStatus::Attained, it);
            }
        }
        c += a.transpose() * r * step;
    }
    let status = match target {
        Some(t) if reg.misfit(dw, &c) <= t => DiscrepancyStatus::Attained,
        Some(_) => {
            warn!("Landweber reached {max_iter} iterations before the discrepancy target");
            DiscrepancyStatus::Unattainable
        }
        None => DiscrepancyStatus::NotUsed,
    };
    (c, status, max_iter)
}

/// Weighted L² norm of a data vector on the map's rows, matching the
/// misfit norm.
pub fn data_norm(map: &ObservationMap, data: &Snapshot) -> Result<f64> {
    let w = map.grid().trapezoid_weights();
    Ok(map
        .rows
        .iter()
        .map(|&i| w[i] * data.values()[i] * data.values()[i])
        .sum::<f64>()
        .sqrt())
}
