//! Property tests for the invariants of each module.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use swdgp::bench::{aggregate_smse, region_of, run_benchmark, BenchConfig, Method, SyntheticFunction};
use swdgp::kernel::{alpha_from_ratio, AxisKernel, BandedMatrix};
use swdgp::linalg::Cholesky;
use swdgp::swd::{eigenvector_transform, eigenvector_transform_direct};
use swdgp::{
    banded_grid_kernel, exact_fit, exact_fit_banded, exact_predict, grid_fit, grid_predict, latent_fit, latent_predict,
    max_length_scale_ratio, se_kernel, sparse_cross_kernel, BandOrder, GridSpec, KernelParams, PairSolution,
    PerturbationOrder, SwdEigensystem,
};

fn band_strategy() -> impl Strategy<Value = BandOrder> {
    prop_oneof![Just(BandOrder::Tridiagonal), Just(BandOrder::Pentadiagonal)]
}

/// Admissible grid model: `(band, M, ratio, sigma^2)`.
fn admissible(max_m: usize) -> impl Strategy<Value = (BandOrder, usize, f64, f64)> {
    (band_strategy(), 1..=max_m, 0.02f64..0.97, 0.1f64..3.0).prop_map(|(band, m, fraction, s2)| {
        let ratio = fraction * max_length_scale_ratio(band, m).min(2.5);
        (band, m, ratio, s2)
    })
}

fn unit_grid(m: usize) -> GridSpec {
    GridSpec::unit_interval(m).unwrap()
}

fn length_scale(grid: &GridSpec, ratio: f64) -> f64 {
    ratio * grid.axis(0).spacing()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn banded_kernel_is_positive_definite((band, m, ratio, s2) in admissible(200)) {
        let grid = unit_grid(m);
        let p = KernelParams::isotropic(s2, length_scale(&grid, ratio), 0.0).unwrap();
        let k = banded_grid_kernel(&grid, &p, band).unwrap();
        prop_assert!(Cholesky::factor(&k.to_dense()).is_ok());
    }

    #[test]
    fn banded_entries_match_se_kernel((band, m, ratio, s2) in admissible(60)) {
        let grid = unit_grid(m);
        let p = KernelParams::isotropic(s2, length_scale(&grid, ratio), 0.0).unwrap();
        let k = banded_grid_kernel(&grid, &p, band).unwrap();
        let pts = grid.axis(0).points();
        for i in 0..m {
            for j in 0..m {
                let d = i.abs_diff(j);
                let corner = band == BandOrder::Pentadiagonal && i == j && (i == 0 || i == m - 1);
                let expected = if d <= band.half_width() && !corner {
                    se_kernel(&[pts[i]], &[pts[j]], &p).unwrap()
                } else if corner {
                    s2 * (1.0 - alpha_from_ratio(ratio).powi(4))
                } else {
                    0.0
                };
                prop_assert!((k.get(i, j) - expected).abs() <= 1e-14 * s2, "{} {} {} {}", i, j, k.get(i, j), expected);
            }
        }
    }

    #[test]
    fn cross_kernel_on_grid_equals_banded_rows((band, m, ratio, s2) in admissible(60)) {
        let grid = unit_grid(m);
        let p = KernelParams::isotropic(s2, length_scale(&grid, ratio), 0.0).unwrap();
        let k = banded_grid_kernel(&grid, &p, band).unwrap().to_dense();
        let cross = sparse_cross_kernel(&grid.axis(0).points(), &grid, &p, band).unwrap().to_dense();
        prop_assert!((cross - k).amax() <= 1e-14 * s2);
    }

    #[test]
    fn standing_waves_are_orthonormal_eigenvectors((band, m, ratio, s2) in admissible(200)) {
        let eig = SwdEigensystem::from_alpha(m, s2, alpha_from_ratio(ratio), band).unwrap();
        let v = DMatrix::from_fn(m, m, |j, k| eig.component(k + 1, j + 1));
        let gram = v.transpose() * &v - DMatrix::identity(m, m);
        prop_assert!(gram.amax() < 1e-10);
        let k = BandedMatrix::from_alpha(m, s2, eig.alpha(), band).to_dense();
        let residual = &k * &v - &v * DMatrix::from_diagonal(&DVector::from_column_slice(eig.eigenvalues()));
        prop_assert!(residual.amax() < 1e-10);
    }

    #[test]
    fn pair_symmetry_is_exact(m in 1usize..=200) {
        let eig = SwdEigensystem::from_alpha(m, 1.0, 0.3, BandOrder::Tridiagonal).unwrap();
        for k in 1..=m {
            for j in 1..=m {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                prop_assert_eq!(eig.component(k, j), sign * eig.component(m + 1 - k, j));
            }
        }
    }

    #[test]
    fn fast_and_direct_transforms_agree(m in 1usize..=4096, seed in 0u64..1000) {
        let y: Vec<f64> = (0..m).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 500.0 - 1.0).collect();
        let fast = eigenvector_transform(&y, m).unwrap();
        let direct = eigenvector_transform_direct(&y, m).unwrap();
        let scale = direct.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        for (a, b) in fast.iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_gp_invariants(n in 2usize..40, seed in 0u64..1000, noise in prop_oneof![Just(0.0), 1e-4f64..0.1]) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 + ((seed + i as u64 * 7) % 13) as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (5.0 * x).sin()).collect();
        let p = KernelParams::isotropic(0.7, 0.5 / n as f64, noise).unwrap();
        let inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let model = exact_fit(&inputs, &ys, &p).unwrap();
        let test: Vec<Vec<f64>> = (0..50).map(|i| vec![-0.1 + 1.2 * i as f64 / 49.0]).collect();
        let r = exact_predict(&model, &test).unwrap();
        prop_assert!(r.variance.iter().all(|v| *v >= 0.0 && *v <= 0.7 + 1e-10));
        if noise == 0.0 {
            let at = exact_predict(&model, &inputs).unwrap();
            for (mu, y) in at.mean.iter().zip(&ys) {
                prop_assert!((mu - y).abs() < 1e-8);
            }
        }
        // exchangeability
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % n).collect();
        let mut seen = vec![false; n];
        if perm.iter().all(|&i| !std::mem::replace(&mut seen[i], true)) {
            let pin: Vec<Vec<f64>> = perm.iter().map(|&i| inputs[i].clone()).collect();
            let pys: Vec<f64> = perm.iter().map(|&i| ys[i]).collect();
            let r2 = exact_predict(&exact_fit(&pin, &pys, &p).unwrap(), &test).unwrap();
            for (a, b) in r.mean.iter().zip(&r2.mean).chain(r.variance.iter().zip(&r2.variance)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_gp_matches_banded_oracle((band, m, ratio, s2) in admissible(120), noise in prop_oneof![Just(0.0), 1e-3f64..0.2]) {
        let grid = unit_grid(m);
        let p = KernelParams::isotropic(s2, length_scale(&grid, ratio), noise).unwrap();
        let ys: Vec<f64> = grid.axis(0).points().iter().map(|x| (9.0 * x).cos()).collect();
        let test: Vec<Vec<f64>> = (0..40).map(|i| vec![-0.05 + 1.1 * i as f64 / 39.0]).collect();
        let a = grid_predict(&grid_fit(&grid, &ys, &p, band).unwrap(), &test).unwrap();
        let b = exact_predict(&exact_fit_banded(&grid, &ys, &p, band).unwrap(), &test).unwrap();
        for i in 0..test.len() {
            prop_assert!((a.mean[i] - b.mean[i]).abs() < 1e-8);
            prop_assert!((a.variance[i] - b.variance[i]).abs() < 1e-8);
            prop_assert!(a.variance[i] >= 0.0 && a.variance[i] <= s2 + 1e-10);
        }
    }

    #[test]
    fn latent_pair_structure(m in 2usize..40, n in 0usize..300, band in band_strategy(), seed in 0u64..100) {
        let grid = unit_grid(m);
        let l = 0.6 * max_length_scale_ratio(band, m).min(2.0) * grid.axis(0).spacing();
        let p = KernelParams::isotropic(0.5, l, 0.01).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed * 104729) % 10007) as f64 / 10006.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x - 0.3).collect();
        let first = latent_fit(&xs, &ys, &grid, &p, band, PerturbationOrder::First).unwrap();
        let second = latent_fit(&xs, &ys, &grid, &p, band, PerturbationOrder::Second).unwrap();
        prop_assert_eq!(second.pairs().len(), m.div_ceil(2));
        let eig = second.eigensystem();
        for pair in second.pairs() {
            match pair.partner {
                Some(partner) => {
                    prop_assert_eq!(partner, m + 1 - pair.mode);
                    let (s, c) = pair.phi.sin_cos();
                    let v = DVector::from_vec(eig.eigenvector(pair.mode));
                    let vb = DVector::from_vec(eig.eigenvector(partner));
                    let up = &v * c + &vb * s;
                    let um = -&v * s + &vb * c;
                    prop_assert!(up.dot(&um).abs() < 1e-12);
                    prop_assert!((up.norm() - 1.0).abs() < 1e-12 && (um.norm() - 1.0).abs() < 1e-12);
                }
                None => {
                    prop_assert_eq!(2 * pair.mode, m + 1);
                    prop_assert_eq!(pair.chi_plus, pair.lambda + pair.epsilon);
                }
            }
        }
        // the second-order solver with delta = 0 reproduces the first-order pairs bit for bit
        for pair in first.pairs() {
            if let Some(partner) = pair.partner {
                let again = PairSolution::solve(
                    pair.mode,
                    partner,
                    [pair.lambda, pair.lambda_partner],
                    [pair.epsilon, pair.epsilon_partner],
                    0.0,
                );
                prop_assert_eq!(&again, pair);
            }
        }
        let test: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let r = latent_predict(&second, &test);
        prop_assert!(r.variance.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn bound_is_nonincreasing_in_grid_size() {
    let mut previous = f64::INFINITY;
    for m in 1..=400 {
        let b = max_length_scale_ratio(BandOrder::Tridiagonal, m);
        assert!(b <= previous, "M = {m}");
        previous = b;
    }
    let limit = 1.0 / (2.0 * 2f64.ln()).sqrt();
    assert!((max_length_scale_ratio(BandOrder::Tridiagonal, 100) - limit).abs() < 1e-3);
}

#[test]
fn grid_oracle_at_five_hundred_points() {
    let grid = unit_grid(500);
    let p = KernelParams::isotropic(1.0, 0.8 * grid.axis(0).spacing(), 0.0).unwrap();
    let ys: Vec<f64> = grid.axis(0).points().iter().map(|x| (30.0 * x).sin()).collect();
    let test: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.3]).collect();
    let a = grid_predict(&grid_fit(&grid, &ys, &p, BandOrder::Tridiagonal).unwrap(), &test).unwrap();
    let b = exact_predict(
        &exact_fit_banded(&grid, &ys, &p, BandOrder::Tridiagonal).unwrap(),
        &test,
    )
    .unwrap();
    for i in 0..test.len() {
        assert!((a.mean[i] - b.mean[i]).abs() < 1e-8);
        assert!((a.variance[i] - b.variance[i]).abs() < 1e-8);
    }
}

#[test]
fn latent_on_grid_data_approaches_interpolation() {
    // every grid node observed 20 times without noise spread: Q commutes with K
    for band in [BandOrder::Tridiagonal, BandOrder::Pentadiagonal] {
        let grid = unit_grid(15);
        let nodes = grid.axis(0).points();
        let xs: Vec<f64> = nodes.iter().flat_map(|&x| std::iter::repeat_n(x, 20)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin()).collect();
        let node_ys: Vec<f64> = nodes.iter().map(|x| (6.0 * x).sin()).collect();
        let l = 0.6 * max_length_scale_ratio(band, 15) * grid.axis(0).spacing();
        let mut previous = f64::INFINITY;
        for noise_std in [1e-1, 1e-2, 1e-3] {
            let p = KernelParams::isotropic(1.0, l, noise_std * noise_std).unwrap();
            let model = latent_fit(&xs, &ys, &grid, &p, band, PerturbationOrder::Second).unwrap();
            let r = latent_predict(&model, &nodes);
            let err = r
                .mean
                .iter()
                .zip(&node_ys)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < previous);
            previous = err;
        }
        assert!(previous < 1e-5, "{previous}");
        let on_grid = grid_predict(
            &grid_fit(&grid, &node_ys, &KernelParams::isotropic(1.0, l, 0.0).unwrap(), band).unwrap(),
            &nodes.iter().map(|&x| vec![x]).collect::<Vec<_>>(),
        )
        .unwrap();
        for (a, b) in on_grid.mean.iter().zip(&node_ys) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn benchmark_reports_are_reproducible_and_consistent() {
    let config = BenchConfig {
        function: SyntheticFunction::Sim7,
        methods: vec![Method::Exact, Method::SwdGrid, Method::Lgswd3, Method::Lgswd5],
        sizes: vec![150, 400],
        seeds: vec![3, 4],
        grid_size: 60,
        deterministic: true,
        ..BenchConfig::default()
    };
    let a = run_benchmark(&config).unwrap();
    let b = run_benchmark(&config).unwrap();
    assert_eq!(a.len(), 16);
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    swdgp::bench::write_csv(&mut csv_a, &config, &a).unwrap();
    swdgp::bench::write_csv(&mut csv_b, &config, &b).unwrap();
    assert_eq!(csv_a, csv_b);

    for report in &a {
        assert!(report.smse >= 0.0);
        let spec = swdgp::bench::SyntheticSpec {
            design: if report.method == Method::SwdGrid {
                swdgp::bench::Design::Grid
            } else {
                swdgp::bench::Design::Uniform
            },
            ..swdgp::bench::SyntheticSpec::new(config.function, config.noise_std, report.n, report.seed)
        };
        let data = swdgp::bench::generate(&spec).unwrap();
        let rebuilt = aggregate_smse(&report.regions, &data.test_truth);
        assert!((rebuilt - report.smse).abs() < 1e-12 * report.smse.max(1.0));
        for region in &report.regions {
            let count = data.inputs.iter().filter(|&&x| region_of(x) == region.index).count();
            assert_eq!(region.n_train, count);
        }
        assert_eq!(report.regions.iter().map(|r| r.n_train).sum::<usize>(), report.n);
        assert_eq!(report.regions.iter().map(|r| r.n_test).sum::<usize>(), 500);
    }
}

#[test]
fn axis_kernel_self_value_is_prior_off_grid() {
    let grid = unit_grid(10);
    let k = AxisKernel::new(*grid.axis(0), 0.05, BandOrder::Pentadiagonal).unwrap();
    assert_eq!(k.self_value(5.0), 1.0);
    assert!(k.self_value(0.0) < 1.0);
}
