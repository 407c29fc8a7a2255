use proptest::prelude::*;

use halfdiff::carleman::{build_weight, check_parabolic_carleman, random_space_time_field, CarlemanConfig};
use halfdiff::domain::{discrete_sobolev_norm, EllipticCoefficients, EllipticOperator, Face, Field, Snapshot, SpatialGrid, TimeGrid};
use halfdiff::forward::{solve_forward, EquationCoefficients, SourceSpec};
use halfdiff::fractional::caputo_half_series;
use halfdiff::Error;

fn grid_1d(n: usize) -> SpatialGrid {
    SpatialGrid::interval(0.0, 1.0, n, Face::XHi).unwrap()
}

fn variable_operator(grid: &SpatialGrid, k: f64) -> EllipticOperator {
    let co = EllipticCoefficients::from_fns(
        grid,
        |x| {
            let p = 1.5 + 0.5 * (k * x[0]).sin();
            let r = 1.2 + 0.3 * (k * x[1]).cos();
            let q = 0.2 * (x[0] - x[1]);
            [[p, q], [q, r]]
        },
        |x| [0.3 * x[1], -0.2 * x[0]],
        |x| -1.0 + x[0] * x[1],
    );
    EllipticOperator::assemble(grid, co, None).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_linear(
        nx in 3usize..9, ny in 3usize..9, k in 0.5f64..4.0,
        a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>(),
    ) {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 2.0), [nx, ny], &[Face::XHi]).unwrap();
        let lop = variable_operator(&g, k);
        let n = g.n_nodes();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let u: Vec<f64> = (0..n).map(|_| next()).collect();
        let v: Vec<f64> = (0..n).map(|_| next()).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
        let lu = lop.apply_slice(&u).unwrap();
        let lv = lop.apply_slice(&v).unwrap();
        let lw = lop.apply_slice(&w).unwrap();
        let scale = (1.0 + a.abs() + b.abs()) * max_abs(&lu).max(max_abs(&lv)).max(1.0);
        for i in 0..n {
            prop_assert!((lw[i] - a * lu[i] - b * lv[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn sobolev_norms_are_homogeneous(
        n in 10usize..40, order in prop::sample::select(vec![0usize, 1, 2, 4]),
        c in -10.0f64..10.0, j in -20i32..20, k in 1.0f64..6.0,
    ) {
        let g = grid_1d(n);
        let u = Snapshot::from_fn(&g, |x| (k * x[0]).sin() + x[0] * x[0]);
        let region = g.full_mask();
        let base = discrete_sobolev_norm(&u, order, &region).unwrap();
        prop_assert!(base >= 0.0);
        // powers of two scale every difference exactly
        let p = 2f64.powi(j);
        prop_assert_eq!(discrete_sobolev_norm(&u.scaled(-p), order, &region).unwrap(), p * base);
        // otherwise rounding in the difference stencils grows like n^order
        let scaled = discrete_sobolev_norm(&u.scaled(c), order, &region).unwrap();
        let tol = 64.0 * f64::EPSILON * (n as f64).powi(order as i32);
        prop_assert!((scaled - c.abs() * base).abs() <= tol * c.abs() * base);
    }

    #[test]
    fn ellipticity_holds_for_random_directions(
        entries in prop::collection::vec((0.5f64..3.0, 0.5f64..3.0, -0.6f64..0.6), 36),
        angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 100),
    ) {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), [5, 5], &[Face::XHi]).unwrap();
        let a: Vec<[[f64; 2]; 2]> = entries
            .iter()
            .map(|&(p, r, t)| {
                let q = t * (p * r).sqrt();
                [[p, q], [q, r]]
            })
            .collect();
        let co = EllipticCoefficients { a: a.clone(), b: vec![[0.0; 2]; 36], c: vec![0.0; 36] };
        let lop = EllipticOperator::assemble(&g, co, None).unwrap();
        let m = lop.ellipticity();
        for node in a {
            for th in &angles {
                let xi = [th.cos(), th.sin()];
                let q = node[0][0] * xi[0] * xi[0] + 2.0 * node[0][1] * xi[0] * xi[1] + node[1][1] * xi[1] * xi[1];
                prop_assert!(q >= (1.0 - 1e-12) / m && q <= m * (1.0 + 1e-12), "q = {q}, m = {m}");
            }
        }
    }

    #[test]
    fn indefinite_coefficient_is_rejected(p in 0.5f64..3.0, r in 0.5f64..3.0, extra in 0.01f64..1.0, node in 0usize..36) {
        let g = SpatialGrid::rectangle((0.0, 1.0), (0.0, 1.0), [5, 5], &[Face::XHi]).unwrap();
        let mut a = vec![[[1.0, 0.0], [0.0, 1.0]]; 36];
        let q = (p * r).sqrt() + extra;
        a[node] = [[p, q], [q, r]];
        let co = EllipticCoefficients { a, b: vec![[0.0; 2]; 36], c: vec![0.0; 36] };
        let is_not_elliptic = matches!(EllipticOperator::assemble(&g, co, None), Err(Error::NotElliptic { .. }));
        prop_assert!(is_not_elliptic);
    }

    #[test]
    fn half_derivative_is_linear(
        u in prop::collection::vec(-1.0f64..1.0, 2..64),
        a in -5.0f64..5.0, b in -5.0f64..5.0, c in -2.0f64..2.0, dt in 1e-3f64..0.5,
    ) {
        let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| (i as f64 * 0.3).sin() + x * x).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
        let du = caputo_half_series(&u, dt).unwrap();
        let dv = caputo_half_series(&v, dt).unwrap();
        let dw = caputo_half_series(&w, dt).unwrap();
        let scale = (1.0 + a.abs() + b.abs()) * max_abs(&du).max(max_abs(&dv)).max(1.0);
        for i in 0..u.len() {
            prop_assert!((dw[i] - a * du[i] - b * dv[i]).abs() <= 1e-12 * scale);
        }
        let constant = vec![c; u.len()];
        prop_assert!(max_abs(&caputo_half_series(&constant, dt).unwrap()) == 0.0);
    }
}

fn random_source(g: &SpatialGrid, tg: &TimeGrid, k: f64, phase: f64) -> Field {
    Field::from_fn(g, tg, |x, t| (k * x[0] + phase).sin() * (1.0 + t * (phase + t).cos()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_solve_is_linear(
        n in 4usize..24, steps in 2usize..24, rho2 in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        k1 in 0.5f64..8.0, k2 in 0.5f64..8.0, p1 in 0.0f64..3.0, p2 in 0.0f64..3.0, a in -2.0f64..2.0,
    ) {
        let g = grid_1d(n);
        let tg = TimeGrid::new(1.0, 4 * steps, 2 * steps, 0.2).unwrap();
        let lop = variable_operator(&g, 2.0);
        let co = EquationCoefficients::new(1.0, rho2).unwrap();
        let g1 = random_source(&g, &tg, k1, p1);
        let g2 = random_source(&g, &tg, k2, p2);
        let g12 = g1.lin_comb(a, 1.0, &g2).unwrap();
        let u1 = solve_forward(&co, &lop, &SourceSpec::general(g1), &tg).unwrap().solution;
        let u2 = solve_forward(&co, &lop, &SourceSpec::general(g2), &tg).unwrap().solution;
        let u12 = solve_forward(&co, &lop, &SourceSpec::general(g12), &tg).unwrap().solution;
        let expect = u1.lin_comb(a, 1.0, &u2).unwrap();
        let scale = (1.0 + a.abs()) * u1.max_abs().max(u2.max_abs()).max(1e-300);
        prop_assert!(u12.lin_comb(1.0, -1.0, &expect).unwrap().max_abs() <= 1e-10 * scale);
    }

    #[test]
    fn forward_solve_is_causal(n in 4usize..24, steps in 2usize..16, cut_frac in 0.0f64..1.0, bump in 0.1f64..10.0) {
        let g = grid_1d(n);
        let tg = TimeGrid::new(1.0, 4 * steps, 2 * steps, 0.2).unwrap();
        let lop = EllipticOperator::laplacian(&g);
        let co = EquationCoefficients::new(1.0, 0.7).unwrap();
        let cut = 1 + ((tg.n_steps() - 1) as f64 * cut_frac) as usize;
        let base = random_source(&g, &tg, 3.0, 0.5);
        let late = Field::from_fn(&g, &tg, |x, t| if t > tg.t(cut) { bump * x[0] } else { 0.0 });
        let changed = base.lin_comb(1.0, 1.0, &late).unwrap();
        let u = solve_forward(&co, &lop, &SourceSpec::general(base), &tg).unwrap().solution;
        let v = solve_forward(&co, &lop, &SourceSpec::general(changed), &tg).unwrap().solution;
        for level in 0..=cut {
            prop_assert_eq!(u.level(level), v.level(level));
        }
        if cut < tg.n_steps() {
            prop_assert!(u.level(cut + 1) != v.level(cut + 1));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn carleman_ratios_are_scale_invariant(seed in any::<u64>(), log_scale in -6.0f64..6.0) {
        let g = grid_1d(64);
        let tg = TimeGrid::new(1.0, 128, 64, 0.1).unwrap();
        let cfg = CarlemanConfig { omega_lo: [0.4, 0.0], omega_hi: [0.9, 0.0], ..Default::default() };
        let geom = build_weight(&g, &tg, &cfg).unwrap();
        let lop = EllipticOperator::laplacian(&g);
        let co = EquationCoefficients::new(1.0, 1.0).unwrap();
        let sweep = [2.0, 8.0, 32.0];
        let v = random_space_time_field(&geom, seed).unwrap();
        let c = 10f64.powf(log_scale);
        let a = check_parabolic_carleman(&v, &geom, &lop, &co, &sweep).unwrap();
        let b = check_parabolic_carleman(&v.scaled(c), &geom, &lop, &co, &sweep).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            let (p, q) = (p.ratio.unwrap(), q.ratio.unwrap());
            prop_assert!((p - q).abs() <= 1e-10 * p.abs(), "{p} vs {q}");
        }
    }
}
