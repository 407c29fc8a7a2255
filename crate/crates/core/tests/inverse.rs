use std::sync::Arc;

use halfdiff::domain::norms::sobolev_norm_values;
use halfdiff::domain::{Face, Snapshot, SpatialGrid, TimeGrid};
use halfdiff::forward::EquationCoefficients;
use halfdiff::inverse::*;
use halfdiff::Error;

fn grid() -> SpatialGrid {
    SpatialGrid::interval(0.0, 1.0, 64, Face::XHi).unwrap()
}

fn model() -> ForwardModel {
    ForwardModel::laplacian(
        EquationCoefficients::new(1.0, 1.0).unwrap(),
        Arc::new(|x: [f64; 2], t: f64| 1.0 + t + 0.5 * x[0]),
    )
}

fn f_true() -> SpaceFn {
    Arc::new(|x: [f64; 2]| {
        let z = (x[0] - 0.2) / 0.5;
        if z <= 0.0 || z >= 1.0 {
            0.0
        } else {
            (4.0 * z * (1.0 - z)).powi(4)
        }
    })
}

fn map(n_steps: usize) -> ObservationMap {
    let g = grid();
    let tg = TimeGrid::uniform(1.0, n_steps).unwrap();
    let basis = HatBasis::over_box(&g, [0.2, 0.0], [0.7, 0.0], 32).unwrap();
    ObservationMap::assemble(&model(), &g, &tg, basis, 1e-3).unwrap()
}

fn rel_error_h2(map: &ObservationMap, f_hat: &Snapshot, f: &SpaceFn) -> f64 {
    let g = map.grid();
    let region = map.basis.region(g);
    let fg = Snapshot::from_fn(g, |x| f(x));
    let diff: Vec<f64> = f_hat.values().iter().zip(fg.values()).map(|(a, b)| a - b).collect();
    sobolev_norm_values(g, &diff, 2, &region).unwrap() / sobolev_norm_values(g, fg.values(), 2, &region).unwrap()
}

#[test]
fn single_hat_column_is_a_forward_solve() {
    let g = grid();
    let tg = TimeGrid::uniform(1.0, 64).unwrap();
    let basis = HatBasis::over_box(&g, [0.2, 0.0], [0.7, 0.0], 1).unwrap();
    let m = ObservationMap::assemble(&model(), &g, &tg, basis, 1e-3).unwrap();
    assert_eq!(m.matrix.ncols(), 1);
    let direct = m.solve(&m.basis.function(&g, 0)).unwrap();
    let col = m.apply(&[1.0]).unwrap();
    assert_eq!(col.values(), direct.values());
    assert!(m.apply(&[0.0]).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn superposition_matches_direct_solve() {
    let m = map(128);
    let f = f_true();
    let c = m.basis.interpolate(|x| f(x));
    let via_matrix = m.apply(&c).unwrap();
    let direct = m.solve(&m.basis.expand(m.grid(), &c).unwrap()).unwrap();
    let scale = direct.max_abs();
    for (a, b) in via_matrix.values().iter().zip(direct.values()) {
        assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
    }
    assert!(m.verify_columns(3, 7).unwrap() < 1e-12);

    let d1 = m.apply(&c).unwrap();
    let c2: Vec<f64> = c.iter().enumerate().map(|(j, v)| v * (j as f64).cos()).collect();
    let d2 = m.apply(&c2).unwrap();
    let sum: Vec<f64> = c.iter().zip(&c2).map(|(a, b)| a + b).collect();
    let d12 = m.apply(&sum).unwrap();
    for i in 0..d12.values().len() {
        assert!((d12.values()[i] - d1.values()[i] - d2.values()[i]).abs() <= 1e-14 * scale);
    }
}

#[test]
fn inverse_crime_round_trip() {
    let m = map(128);
    let f = f_true();
    let data = m.apply(&m.basis.interpolate(|x| f(x))).unwrap();
    let r = reconstruct(&m, &data, &Method::Tikhonov(AlphaChoice::Fixed(1e-12))).unwrap();
    assert!(rel_error_h2(&m, &r.f_hat, &f) <= 1e-3);
    assert!(r.normal_residual <= 1e-10, "normal residual {}", r.normal_residual);
    assert_eq!(r.status, DiscrepancyStatus::NotUsed);
}

#[test]
fn round_trip_improves_as_alpha_shrinks() {
    let m = map(128);
    let f = f_true();
    let data = synthetic_data(&m, &f, false).unwrap();
    let errs: Vec<f64> = [1e-4, 1e-7, 1e-10]
        .iter()
        .map(|&a| rel_error_h2(&m, &reconstruct(&m, &data, &Method::Tikhonov(AlphaChoice::Fixed(a))).unwrap().f_hat, &f))
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn mitigated_error_decreases_with_time_refinement() {
    let f = f_true();
    let errs: Vec<f64> = [128, 512]
        .iter()
        .map(|&n| {
            let m = map(n);
            let data = synthetic_data(&m, &f, true).unwrap();
            let r = reconstruct(&m, &data, &Method::Tikhonov(AlphaChoice::Fixed(NOISELESS_ALPHA))).unwrap();
            rel_error_h2(&m, &r.f_hat, &f)
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[1] <= 1e-2, "{errs:?}");
}

#[test]
fn tikhonov_is_linear_in_the_data() {
    let m = map(64);
    let f = f_true();
    let data = synthetic_data(&m, &f, false).unwrap();
    let method = Method::Tikhonov(AlphaChoice::Fixed(1e-6));
    let zero = reconstruct(&m, &Snapshot::zeros(m.grid()), &method).unwrap();
    assert!(zero.f_hat.values().iter().all(|v| *v == 0.0));
    let one = reconstruct(&m, &data, &method).unwrap();
    let two = reconstruct(&m, &data.scaled(2.0), &method).unwrap();
    let scale = one.f_hat.max_abs();
    for (a, b) in one.f_hat.values().iter().zip(two.f_hat.values()) {
        assert!((2.0 * a - b).abs() <= 1e-10 * scale);
    }
    assert!(matches!(
        reconstruct(&m, &data, &Method::Tikhonov(AlphaChoice::Fixed(0.0))),
        Err(Error::NonPositiveAlpha(_))
    ));
}

#[test]
fn discrepancy_principle_hits_its_target() {
    let m = map(64);
    let f = f_true();
    let clean = synthetic_data(&m, &f, false).unwrap();
    let noise = Snapshot::from_fn(m.grid(), |x| 1e-4 * (37.0 * x[0]).sin());
    let noise = m.scatter(&m.gather(&noise).unwrap());
    let data = clean.lin_comb(1.0, 1.0, &noise).unwrap();
    let delta = data_norm(&m, &noise).unwrap();
    let r = reconstruct(&m, &data, &Method::Tikhonov(AlphaChoice::Morozov { noise: delta, tau: DEFAULT_TAU })).unwrap();
    assert_eq!(r.status, DiscrepancyStatus::Attained);
    assert!(r.misfit <= DEFAULT_TAU * delta * (1.0 + 1e-9));
    assert!(r.misfit >= 0.9 * DEFAULT_TAU * delta);

    let tiny = reconstruct(&m, &data, &Method::Tikhonov(AlphaChoice::Morozov { noise: 1e-30, tau: DEFAULT_TAU })).unwrap();
    assert_eq!(tiny.status, DiscrepancyStatus::Unattainable);
}

#[test]
fn landweber_reaches_the_discrepancy_level() {
    let m = map(64);
    let f = f_true();
    let clean = synthetic_data(&m, &f, false).unwrap();
    let noise = m.scatter(&m.gather(&Snapshot::from_fn(m.grid(), |x| 1e-3 * (23.0 * x[0]).cos())).unwrap());
    let data = clean.lin_comb(1.0, 1.0, &noise).unwrap();
    let delta = data_norm(&m, &noise).unwrap();
    let r = reconstruct(
        &m,
        &data,
        &Method::Landweber {
            max_iter: 200_000,
            noise: Some(delta),
            tau: 2.0,
        },
    )
    .unwrap();
    assert_eq!(r.status, DiscrepancyStatus::Attained);
    assert!(r.misfit <= 2.0 * delta);
    assert!(r.iterations > 0);
}

#[test]
fn observation_on_a_subdomain() {
    let m = map(64);
    let n_all = m.rows.len();
    let g = m.grid().clone();
    let sub = m.clone().restrict_rows(&g.box_mask([0.1, 0.0], [0.8, 0.0])).unwrap();
    assert!(sub.rows.len() < n_all);
    let f = f_true();
    let data = sub.apply(&sub.basis.interpolate(|x| f(x))).unwrap();
    let r = reconstruct(&sub, &data, &Method::Tikhonov(AlphaChoice::Fixed(1e-12))).unwrap();
    assert!(rel_error_h2(&sub, &r.f_hat, &f) <= 1e-3);
    assert!(matches!(m.restrict_rows(&g.box_mask([2.0, 0.0], [3.0, 0.0])), Err(Error::EmptyRegion)));
}

#[test]
fn vanishing_r_is_rejected_and_ill_conditioned() {
    let g = grid();
    let tg = TimeGrid::uniform(1.0, 128).unwrap();
    let t0 = tg.t0();
    let bad = ForwardModel::laplacian(
        EquationCoefficients::new(1.0, 1.0).unwrap(),
        Arc::new(move |x: [f64; 2], t: f64| (1.0 + t) * (x[0] - 0.45).max(0.0) + (t - t0).powi(2)),
    );
    let basis = HatBasis::over_box(&g, [0.2, 0.0], [0.7, 0.0], 32).unwrap();
    assert!(matches!(
        ObservationMap::assemble(&bad, &g, &tg, basis.clone(), 1e-3),
        Err(Error::SourceHypothesis { .. })
    ));
    let forced = ObservationMap::assemble_unchecked(&bad, &g, &tg, basis).unwrap();
    let good = map(128);
    assert!(forced.condition_number() >= 10.0 * good.condition_number());
}

fn small_options() -> ExperimentOptions {
    ExperimentOptions {
        noise_levels: vec![1e-2, 1e-3, 1e-4],
        trials: 3,
        seed: 11,
        mitigate_inverse_crime: false,
        ..Default::default()
    }
}

#[test]
fn experiment_is_reproducible_and_scale_invariant() {
    let m = map(64);
    let f = f_true();
    let opts = small_options();
    let a = stability_experiment(&m, &f, &opts).unwrap();
    let b = stability_experiment(&m, &f, &opts).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.records.len(), 9);
    assert!(a.kappa_hat > 0.0 && a.kappa_hat <= 1.2 && a.c_hat.is_finite());
    assert!(a.noiseless_error < 1e-6);
    assert!(a.records.iter().all(|r| r.data_norm_h4 >= 0.0 && r.err_h2_omega >= 0.0));

    let f_small: SpaceFn = Arc::new(move |x| 0.1 * f(x));
    let s = stability_experiment(&m, &f_small, &opts).unwrap();
    assert!((s.kappa_hat - a.kappa_hat).abs() < 1e-6, "{} vs {}", s.kappa_hat, a.kappa_hat);

    let other = stability_experiment(&m, &f_true(), &ExperimentOptions { seed: 12, ..opts }).unwrap();
    assert_ne!(other.to_csv(), a.to_csv());
}

#[test]
fn error_grows_with_noise() {
    let m = map(64);
    let r = stability_experiment(&m, &f_true(), &small_options()).unwrap();
    let stats: Vec<(f64, f64)> = r
        .records
        .chunks(3)
        .map(|c| {
            let n = c.len() as f64;
            let mean = c.iter().map(|r| r.err_h2_omega).sum::<f64>() / n;
            let var = c.iter().map(|r| (r.err_h2_omega - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        })
        .collect();
    for w in stats.windows(2) {
        assert!(w[0].0 + w[0].1 >= w[1].0 - w[1].1, "{stats:?}");
    }
}

#[test]
fn experiment_option_errors() {
    let m = map(64);
    let f = f_true();
    let few = ExperimentOptions {
        noise_levels: vec![1e-2, 1e-3],
        ..small_options()
    };
    assert!(matches!(stability_experiment(&m, &f, &few), Err(Error::FitRefused(_))));
    let rising = ExperimentOptions {
        noise_levels: vec![1e-4, 1e-3, 1e-2],
        ..small_options()
    };
    assert!(stability_experiment(&m, &f, &rising).is_err());
    let tight = ExperimentOptions {
        prior_m: 1e-3,
        ..small_options()
    };
    assert!(stability_experiment(&m, &f, &tight).is_err());
}

#[test]
fn csv_header() {
    let m = map(64);
    let r = stability_experiment(&m, &f_true(), &small_options()).unwrap();
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "noise_level,trial,data_norm_h4,err_h2_omega,alpha,kappa_hat_running"
    );
    assert_eq!(lines.count(), 9);
}

#[test]
fn fit_line_recovers_a_slope() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let y: Vec<f64> = x.iter().map(|v| 0.5 - 0.75 * v).collect();
    let fit = fit_line(&x, &y).unwrap();
    assert!((fit.slope + 0.75).abs() < 1e-14 && (fit.r_squared - 1.0).abs() < 1e-14);
    assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
}
