//! Discrete half-order time derivatives (L1 scheme) and residual checks of
//! the composition and commutator identities they satisfy.
//!
//! Caputo: `d_t^{1/2} u(t) = 1/Gamma(1/2) int_0^t u'(s) (t - s)^{-1/2} ds`.
//! The L1 scheme integrates the kernel exactly against the piecewise-linear
//! interpolant of `u`, giving
//! `(d_t^{1/2} u)_n = sum_{k<n} w_k (u_{n-k} - u_{n-k-1})` with
//! `w_k = 2 dt^{-1/2} (sqrt(k+1) - sqrt(k)) / sqrt(pi)`.
//! Level 0 is set to 0 by convention.

use rayon::prelude::*;

use crate::domain::field::Field;
use crate::domain::grid::TimeGrid;
use crate::error::{Error, Result};

pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// `1 / sqrt(pi t)`, the singular factor relating the two derivatives.
pub fn inv_sqrt_pi_t(t: f64) -> f64 {
    1.0 / (std::f64::consts::PI * t).sqrt()
}

/// L1 convolution weights, including the `1/Gamma(1/2)` factor.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfDerivativeWeights {
    dt: f64,
    weights: Vec<f64>,
}

impl HalfDerivativeWeights {
    pub fn new(dt: f64, n: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let scale = 2.0 / (dt.sqrt() * SQRT_PI);
        let weights = (0..n)
            .map(|k| {
                let k = k as f64;
                // sqrt(k+1) - sqrt(k) without cancellation
                scale / ((k + 1.0).sqrt() + k.sqrt())
            })
            .collect();
        Ok(Self { dt, weights })
    }

    pub fn for_grid(times: &TimeGrid) -> Self {
        Self::new(times.dt(), times.n_steps()).expect("time grid has a positive step")
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Leading weight `w_0`, the implicit coefficient of `u_n`.
    pub fn leading(&self) -> f64 {
        self.weights[0]
    }

    /// `(d_t^{1/2} u)_n` for a scalar series.
    pub fn apply_at(&self, u: &[f64], n: usize) -> f64 {
        (0..n).map(|k| self.weights[k] * (u[n - k] - u[n - k - 1])).sum()
    }

    /// Memory part of level `n`, i.e. everything except `w_0 u_n`.
    pub fn history_at(&self, u: &[f64], n: usize) -> f64 {
        -self.weights[0] * u[n - 1] + (1..n).map(|k| self.weights[k] * (u[n - k] - u[n - k - 1])).sum::<f64>()
    }
}

/// Discrete Caputo half derivative of a scalar series on a uniform grid.
pub fn caputo_half_series(u: &[f64], dt: f64) -> Result<Vec<f64>> {
    if u.len() < 2 {
        return Err(Error::TooFewLevels { needed: 2, have: u.len() });
    }
    let w = HalfDerivativeWeights::new(dt, u.len() - 1)?;
    Ok((0..u.len()).map(|n| w.apply_at(u, n)).collect())
}

/// Discrete Caputo half derivative of every node's time series.
pub fn caputo_half(u: &Field) -> Result<Field> {
    let nl = u.n_levels();
    if nl < 2 {
        return Err(Error::TooFewLevels { needed: 2, have: nl });
    }
    let w = HalfDerivativeWeights::for_grid(u.times());
    let nn = u.n_nodes();
    let diffs: Vec<Vec<f64>> = (0..nl - 1)
        .map(|m| u.level(m + 1).iter().zip(u.level(m)).map(|(a, b)| a - b).collect())
        .collect();
    let levels: Vec<Vec<f64>> = (0..nl)
        .into_par_iter()
        .map(|n| {
            let mut acc = vec![0.0; nn];
            for k in 0..n {
                let wk = w.weights[k];
                for (a, d) in acc.iter_mut().zip(&diffs[n - 1 - k]) {
                    *a += wk * d;
                }
            }
            acc
        })
        .collect();
    Field::from_values(u.grid(), u.times(), levels.concat())
}

/// Riemann-Liouville half derivative `caputo + u(0) / sqrt(pi t)` at every
/// level `n >= 1`. Level 0 is singular; it is set to 0 and must be excluded
/// by callers (see [`riemann_liouville_half_at`]).
pub fn riemann_liouville_half(u: &Field) -> Result<Field> {
    let c = caputo_half(u)?;
    let u0 = u.level(0).to_vec();
    c.map_levels(|n, lv| {
        if n == 0 {
            return vec![0.0; lv.len()];
        }
        let s = inv_sqrt_pi_t(u.times().t(n));
        lv.iter().zip(&u0).map(|(c, a)| c + a * s).collect()
    })
}

/// Riemann-Liouville half derivative at one level; level 0 is rejected.
pub fn riemann_liouville_half_at(u: &Field, level: usize) -> Result<Vec<f64>> {
    if level == 0 {
        return Err(Error::SingularTime);
    }
    if level >= u.n_levels() {
        return Err(Error::InvalidArgument(format!(
            "level {level} outside 0..{}",
            u.n_levels()
        )));
    }
    let w = HalfDerivativeWeights::for_grid(u.times());
    let s = inv_sqrt_pi_t(u.times().t(level));
    Ok((0..u.n_nodes())
        .map(|i| w.apply_at(&u.series(i), level) + u.at(0, i) * s)
        .collect())
}

/// Norms of an identity residual over the levels with `t >= t_cut`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityResidual {
    pub max: f64,
    /// `sqrt(sum_n dt sum_i w_i r_{n,i}^2)` with trapezoidal space weights.
    pub l2: f64,
    pub t_cut: f64,
    pub first_level: usize,
    pub residual: Field,
}

impl IdentityResidual {
    fn from_field(residual: Field, t_cut: f64) -> Result<Self> {
        let times = residual.times().clone();
        if !(t_cut > 0.0 && t_cut < times.t_final()) {
            return Err(Error::InvalidArgument(format!(
                "t_cut must lie in (0, T), got {t_cut}"
            )));
        }
        let first_level = times.level_at_or_after(t_cut);
        let w = residual.grid().trapezoid_weights();
        let mut max: f64 = 0.0;
        let mut sq = 0.0;
        for n in first_level..residual.n_levels() {
            for (r, wi) in residual.level(n).iter().zip(&w) {
                max = max.max(r.abs());
                sq += times.dt() * wi * r * r;
            }
        }
        Ok(Self {
            max,
            l2: sq.sqrt(),
            t_cut,
            first_level,
            residual,
        })
    }
}

/// Default cut time: the first two time cells.
pub fn default_t_cut(times: &TimeGrid) -> f64 {
    2.0 * times.dt()
}

fn singular_term(u0: &[f64], times: &TimeGrid, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0; u0.len()];
    }
    let s = inv_sqrt_pi_t(times.t(n));
    u0.iter().map(|a| a * s).collect()
}

/// Residual of `d^{1/2} d^{1/2} u - [d_t u - (d^{1/2} u)(0) / sqrt(pi t)]`.
///
/// `d_t u` is the second-order difference quotient of
/// [`Field::time_derivative`].
pub fn check_composition_identity(u: &Field, t_cut: f64) -> Result<IdentityResidual> {
    if u.n_levels() < 3 {
        return Err(Error::TooFewLevels { needed: 3, have: u.n_levels() });
    }
    let v = caputo_half(u)?;
    let vv = caputo_half(&v)?;
    let du = u.time_derivative()?;
    let v0 = v.level(0).to_vec();
    let res = vv.map_levels(|n, lv| {
        let s = singular_term(&v0, u.times(), n);
        lv.iter()
            .zip(du.level(n))
            .zip(&s)
            .map(|((a, d), s)| a - (d - s))
            .collect()
    })?;
    IdentityResidual::from_field(res, t_cut)
}

/// Residual of `d^{1/2} d_t u - d_t d^{1/2} u + (d_t u)(0) / sqrt(pi t)`.
pub fn check_commutator_identity(u: &Field, t_cut: f64) -> Result<IdentityResidual> {
    if u.n_levels() < 4 {
        return Err(Error::TooFewLevels { needed: 4, have: u.n_levels() });
    }
    let du = u.time_derivative()?;
    let left = caputo_half(&du)?;
    let right = caputo_half(u)?.time_derivative()?;
    let d0 = du.level(0).to_vec();
    let res = left.map_levels(|n, lv| {
        let s = singular_term(&d0, u.times(), n);
        lv.iter()
            .zip(right.level(n))
            .zip(&s)
            .map(|((a, b), s)| a - b + s)
            .collect()
    })?;
    IdentityResidual::from_field(res, t_cut)
}

/// Residual of `D^{1/2} D^{1/2} u - d_t u` for `u(0) = 0`, with the
/// backward-difference `d_t u`.
pub fn check_rl_square_identity(u: &Field, t_cut: f64) -> Result<IdentityResidual> {
    let rl = riemann_liouville_half(u)?;
    let rl2 = riemann_liouville_half(&rl)?;
    let du = u.backward_difference()?;
    let res = rl2.lin_comb(1.0, -1.0, &du)?;
    IdentityResidual::from_field(res, t_cut)
}
