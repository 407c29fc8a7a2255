//! Empirical Hölder-stability experiment: perturb the data, reconstruct,
//! and fit `log error = log C + kappa log |perturbation|_{H^4}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::field::Snapshot;
use crate::domain::grid::NodeMask;
use crate::domain::norms::sobolev_norm_values;
use crate::error::{Error, Result};

use super::model::SpaceFn;
use super::observation::ObservationMap;
use super::reconstruct::{data_norm, reconstruct_with, AlphaChoice, Method, Regularizer, DEFAULT_TAU};

/// Relative `alpha` used for the noiseless reference reconstruction.
pub const NOISELESS_ALPHA: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOptions {
    /// Relative H⁴ sizes of the added noise, strictly decreasing.
    pub noise_levels: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Prior bound on the H² norm of the true source.
    pub prior_m: f64,
    /// Generate the synthetic data on a grid refined twice in space and
    /// time, then restrict by injection.
    pub mitigate_inverse_crime: bool,
    pub tau: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            noise_levels: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            trials: 8,
            seed: 0,
            prior_m: 1e3,
            mitigate_inverse_crime: true,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub noise_level: f64,
    pub trial: usize,
    /// H⁴ norm of the total data perturbation relative to the exact data of
    /// the discrete model (noise plus model error).
    pub data_norm_h4: f64,
    /// H² norm of `f_hat - f_true` over the basis region.
    pub err_h2_omega: f64,
    pub alpha: f64,
    /// Slope of the fit over all records up to this one (NaN while fewer
    /// than two noise levels are present).
    pub kappa_hat_running: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityExperimentReport {
    pub records: Vec<TrialRecord>,
    pub kappa_hat: f64,
    pub r_squared: f64,
    /// `max error / perturbation^kappa_hat` over all records.
    pub c_hat: f64,
    pub fit: LogLogFit,
    pub prior_m: f64,
    pub f_true_h2: f64,
    pub clean_data_h4: f64,
    /// Error of the noiseless reconstruction (not part of the fit).
    pub noiseless_error: f64,
    pub mitigated: bool,
}

impl StabilityExperimentReport {
    /// CSV with columns `noise_level,trial,data_norm_h4,err_h2_omega,alpha,kappa_hat_running`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("noise_level,trial,data_norm_h4,err_h2_omega,alpha,kappa_hat_running\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:e},{},{:e},{:e},{:e},{:e}\n",
                r.noise_level, r.trial, r.data_norm_h4, r.err_h2_omega, r.alpha, r.kappa_hat_running
            ));
        }
        out
    }
}

/// Least-squares line through `(x, y)`; `None` if all `x` coincide.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LogLogFit> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 1e-300 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        n_points: x.len(),
    })
}

/// Noise-free data for `f_true`, optionally from a grid refined twice in
/// space and time.
pub fn synthetic_data(map: &ObservationMap, f_true: &SpaceFn, mitigate: bool) -> Result<Snapshot> {
    let grid = map.grid();
    if !mitigate {
        return map.solve(&Snapshot::from_fn(grid, |x| f_true(x)));
    }
    let fine = grid.refined(2);
    let tg = map.times().refined(2);
    let model = map.model();
    let lop = model.operator(&fine)?;
    let r = model.r_field(&fine, &tg);
    let u = model.observe(&lop, &r, &Snapshot::from_fn(&fine, |x| f_true(x)))?;
    let values = (0..grid.n_nodes())
        .map(|i| {
            let [ix, iy] = grid.multi_index(i);
            u.values()[fine.index(2 * ix, 2 * iy)]
        })
        .collect();
    Snapshot::new(grid.clone(), Some(map.times().t0()), values)
}

/// Gaussian noise on the map's rows with H⁴ norm `size`, drawn from
/// stream `stream` of the generator seeded with `seed`.
pub fn white_noise(map: &ObservationMap, size: f64, seed: u64, stream: u64) -> Result<Snapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let z: Vec<f64> = (0..map.rows.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z = map.scatter(&z);
    Ok(z.scaled(size / h4(map, z.values())?))
}

/// Discrete H⁴ norm over the whole grid.
pub fn h4(map: &ObservationMap, v: &[f64]) -> Result<f64> {
    sobolev_norm_values(map.grid(), v, 4, &map.grid().full_mask())
}

/// H² norm of `f_hat - f_true` over `region`.
pub fn error_h2(map: &ObservationMap, region: &NodeMask, f_hat: &Snapshot, f_true: &Snapshot) -> Result<f64> {
    let diff: Vec<f64> = f_hat.values().iter().zip(f_true.values()).map(|(a, b)| a - b).collect();
    sobolev_norm_values(map.grid(), &diff, 2, region)
}

fn check_options(opts: &ExperimentOptions) -> Result<()> {
    if opts.noise_levels.len() < 3 {
        return Err(Error::FitRefused(format!(
            "at least 3 noise levels are needed, got {}",
            opts.noise_levels.len()
        )));
    }
    if opts.noise_levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidArgument("noise levels must be positive".into()));
    }
    if opts.noise_levels.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("noise levels must be strictly decreasing".into()));
    }
    if opts.trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if !(opts.tau >= 1.0) {
        return Err(Error::InvalidArgument(format!("tau must be >= 1, got {}", opts.tau)));
    }
    Ok(())
}

/// Runs every (noise level, trial) pair with its own random stream, so the
/// report does not depend on scheduling.
pub fn stability_experiment(map: &ObservationMap, f_true: &SpaceFn, opts: &ExperimentOptions) -> Result<StabilityExperimentReport> {
    check_options(opts)?;
    let grid = map.grid();
    let f_grid = Snapshot::from_fn(grid, |x| f_true(x));
    let f_true_h2 = sobolev_norm_values(grid, f_grid.values(), 2, &grid.full_mask())?;
    if !(f_true_h2 <= opts.prior_m) {
        return Err(Error::InvalidArgument(format!(
            "|f_true|_H2 = {f_true_h2} exceeds the prior bound M = {}",
            opts.prior_m
        )));
    }
    let region = map.basis.region(grid);
    let reg = Regularizer::new(map)?;
    let clean = synthetic_data(map, f_true, opts.mitigate_inverse_crime)?;
    let exact = map.apply(&map.basis.interpolate(|x| f_true(x)))?;
    let clean_h4 = h4(map, clean.values())?;
    let noiseless = reconstruct_with(map, &reg, &clean, &Method::Tikhonov(AlphaChoice::Fixed(NOISELESS_ALPHA)))?;
    let noiseless_error = error_h2(map, &region, &noiseless.f_hat, &f_grid)?;

    let jobs: Vec<(usize, usize)> = (0..opts.noise_levels.len())
        .flat_map(|l| (0..opts.trials).map(move |k| (l, k)))
        .collect();
    let results: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(l, k)| -> Result<(f64, f64, f64)> {
            let noise = white_noise(map, opts.noise_levels[l] * clean_h4, opts.seed, (l * opts.trials + k) as u64)?;
            let data = clean.lin_comb(1.0, 1.0, &noise)?;
            let method = Method::Tikhonov(AlphaChoice::Morozov {
                noise: data_norm(map, &noise)?,
                tau: opts.tau,
            });
            let rec = reconstruct_with(map, &reg, &data, &method)?;
            let pert = data.lin_comb(1.0, -1.0, &exact)?;
            Ok((h4(map, pert.values())?, error_h2(map, &region, &rec.f_hat, &f_grid)?, rec.alpha))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(jobs.len());
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&(l, k), &(p, e, a)) in jobs.iter().zip(&results) {
        xs.push(p.ln());
        ys.push(e.ln());
        let running = if l > 0 {
            fit_line(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        records.push(TrialRecord {
            noise_level: opts.noise_levels[l],
            trial: k,
            data_norm_h4: p,
            err_h2_omega: e,
            alpha: a,
            kappa_hat_running: running,
        });
    }
    if ys.iter().any(|y| !y.is_finite()) || xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::FitRefused("zero error or perturbation in a noisy trial".into()));
    }
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::FitRefused("all perturbation norms coincide".into()))?;
    let c_hat = records
        .iter()
        .map(|r| r.err_h2_omega / r.data_norm_h4.powf(fit.slope))
        .fold(0.0, f64::max);
    Ok(StabilityExperimentReport {
        records,
        kappa_hat: fit.slope,
        r_squared: fit.r_squared,
        c_hat,
        fit,
        prior_m: opts.prior_m,
        f_true_h2,
        clean_data_h4: clean_h4,
        noiseless_error,
        mitigated: opts.mitigate_inverse_crime,
    })
}
