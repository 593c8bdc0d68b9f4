use super::*;
use crate::limit_gauss::{prefactor, sample_limit_paths, uniform_grid, CovarianceModel};
use crate::mass_laws::stable_coefficient;
use crate::stats::{fit_exponent, gaussianity, gaussianity_test, ks_two_sample, msd, Averaging};

fn degenerate(a: f64, h: f64) -> MixingLaw {
    MixingLaw { amplitude: ALaw::Degenerate { value: a }, hurst: HLaw::Degenerate { h } }
}

fn exp_a(hurst: HLaw) -> MixingLaw {
    MixingLaw { amplitude: ALaw::Exponential { mean: 1.0 }, hurst }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn degenerate_draws_are_constant() {
    let draws = sample_mixing(&degenerate(1.0, 0.75), 50, 1).unwrap();
    assert!(draws.iter().all(|d| d.amplitude == 1.0 && d.hurst == vec![0.75]));
}

#[test]
fn exponential_amplitude_mean() {
    let draws = sample_mixing(&exp_a(HLaw::Degenerate { h: 0.75 }), 100_000, 2).unwrap();
    let (m, se) = mean_se(&draws.iter().map(|d| d.amplitude).collect::<Vec<_>>());
    assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn uniform_hurst_support() {
    let draws = sample_mixing(&exp_a(HLaw::Uniform { lo: 0.55, hi: 0.95 }), 20_000, 3).unwrap();
    assert!(draws.iter().all(|d| d.hurst[0] > 0.55 && d.hurst[0] < 0.95));
}

#[test]
fn invalid_mixing_is_refused() {
    assert!(sample_mixing(&degenerate(-1.0, 0.75), 1, 0).is_err());
    assert!(sample_mixing(&degenerate(1.0, 0.45), 1, 0).is_err());
}

#[test]
fn conditional_variance_values() {
    let model = SuperstatModel::unit(degenerate(1.0, 0.75));
    assert_eq!(conditional_variance(&model, &[0.75], 0.0), 0.0);
    let expected = 2.0 * std::f64::consts::PI.sqrt() / 0.75;
    assert!((conditional_variance(&model, &[0.75], 1.0) - expected).abs() < 1e-5);
    assert!((expected - 4.72654).abs() < 1e-5);
}

#[test]
fn amplitude_rule_matches_fbm_closed_form() {
    let mut model = SuperstatModel::unit(degenerate(1.7, 0.65));
    model.sigma = 0.7;
    model.gamma = 3.0;
    model.drive_scale = 1.4;
    model.limit_constant = 0.9;
    for (h, t) in [(0.65, 1.0), (0.8, 0.3), (0.95, 2.0)] {
        let scale2 = 2.0 * model.sigma * model.drive_scale.powi(2) * model.limit_constant * 1.7 * stable_coefficient(h)
            * model.gamma.powf(2.0 * h - 3.0);
        let got = conditional_variance(&model, &[h], t);
        assert!((got / (scale2 * t.powf(2.0 * h)) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn total_variance_reductions() {
    let model = SuperstatModel::unit(degenerate(1.0, 0.7));
    for t in [0.0, 0.5, 1.0] {
        assert!((total_variance(&model, t) - conditional_variance(&model, &[0.7], t)).abs() < 1e-14);
    }
    let mixed = SuperstatModel::unit(MixingLaw {
        amplitude: ALaw::Degenerate { value: 1.0 },
        hurst: HLaw::Discrete { points: vec![0.6, 0.9], weights: vec![0.5, 0.5] },
    });
    let expected = 0.5 * (conditional_variance(&mixed, &[0.6], 1.0) + conditional_variance(&mixed, &[0.9], 1.0));
    assert!((total_variance(&mixed, 1.0) - expected).abs() < 1e-13);
}

#[test]
fn total_variance_of_uniform_law_matches_fine_quadrature() {
    let model = SuperstatModel::unit(exp_a(HLaw::Uniform { lo: 0.55, hi: 0.95 }));
    let fine = crate::quad::integrate(|h| conditional_variance(&model, &[h], 1.3) / 0.4, 0.55, 0.95, 1e-12).unwrap();
    assert!((total_variance(&model, 1.3) - fine).abs() < 1e-8 * fine);
}

#[test]
fn total_variance_is_a_pure_function() {
    let model = SuperstatModel::unit(exp_a(HLaw::Uniform { lo: 0.55, hi: 0.95 }));
    assert_eq!(total_variance(&model, 0.8).to_bits(), total_variance(&model, 0.8).to_bits());
}

#[test]
fn degenerate_mixing_reduces_to_limit_sampler() {
    let grid = uniform_grid(1.0, 16);
    let model = SuperstatModel::unit(degenerate(1.0, 0.75));
    let (ens, _) = sample_superstat_paths(&model, &grid, 10_000, 4, Exec::Parallel).unwrap();
    let k = prefactor(1.0, 1.0, 1.0, 1.0, 1.0);
    let cov = CovarianceModel::new(VarianceFn::fbm(0.75, 1.0).unwrap(), k, grid.clone()).unwrap();
    let lim = sample_limit_paths(&cov, 10_000, 5, Exec::Parallel).unwrap();
    let ks = ks_two_sample(&ens.primary().column(16), &lim.primary().column(16)).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn exponential_amplitude_gives_kurtosis_six() {
    let grid = uniform_grid(1.0, 8);
    let model = SuperstatModel::unit(exp_a(HLaw::Degenerate { h: 0.75 }));
    let (ens, _) = sample_superstat_paths(&model, &grid, 10_000, 6, Exec::Parallel).unwrap();
    let report = gaussianity_test(ens.primary(), &ens.grid, 1.0).unwrap();
    let expected = model.mixing.amplitude.mixture_kurtosis();
    assert!((report.kurtosis - expected).abs() < 3.0 * report.kurtosis_se, "{report:?}");
    assert!(report.rejected_at(0.01));
}

#[test]
fn degenerate_mixing_is_gaussian() {
    let grid = uniform_grid(1.0, 8);
    let model = SuperstatModel::unit(degenerate(2.0, 0.6));
    let (ens, _) = sample_superstat_paths(&model, &grid, 10_000, 7, Exec::Parallel).unwrap();
    assert!(!gaussianity_test(ens.primary(), &ens.grid, 1.0).unwrap().rejected_at(0.01));
}

#[test]
fn variance_at_fixed_hurst_matches_conditional_variance() {
    let grid = uniform_grid(1.0, 8);
    let model = SuperstatModel::unit(exp_a(HLaw::Degenerate { h: 0.8 }));
    let (ens, _) = sample_superstat_paths(&model, &grid, 10_000, 8, Exec::Parallel).unwrap();
    let sq: Vec<f64> = ens.primary().column(8).iter().map(|z| z * z).collect();
    let (m, se) = mean_se(&sq);
    let expected = conditional_variance(&model, &[0.8], 1.0);
    assert!((m - expected).abs() < 3.0 * se, "{m} ± {se} vs {expected}");
}

#[test]
fn total_variance_matches_monte_carlo() {
    let grid = uniform_grid(1.0, 8);
    let model = SuperstatModel::unit(exp_a(HLaw::Uniform { lo: 0.55, hi: 0.95 }));
    let (ens, draws) = sample_superstat_paths(&model, &grid, 10_000, 9, Exec::Parallel).unwrap();
    let sq: Vec<f64> = ens.primary().column(8).iter().map(|z| z * z).collect();
    let (m, se) = mean_se(&sq);
    let expected = total_variance(&model, 1.0);
    assert!((m - expected).abs() < 3.0 * se, "{m} ± {se} vs {expected}");
    assert_eq!(draws.len(), 10_000);
}

#[test]
fn fixed_stratum_is_conditionally_gaussian() {
    let grid = uniform_grid(1.0, 8);
    let model = SuperstatModel::unit(exp_a(HLaw::Discrete { points: vec![0.6, 0.9], weights: vec![0.5, 0.5] }));
    let (ens, draws) = sample_superstat_paths(&model, &grid, 8_000, 10, Exec::Parallel).unwrap();
    for h in [0.6, 0.9] {
        let standardized: Vec<f64> = draws
            .iter()
            .enumerate()
            .filter(|(_, d)| d.hurst[0] == h)
            .map(|(i, d)| ens.primary().get(i, 8) / d.amplitude.sqrt())
            .collect();
        let report = gaussianity(&standardized).unwrap();
        assert!(!report.rejected_at(0.01), "h={h}: {report:?}");
    }
}

#[test]
fn per_path_exponents_cluster_at_twice_hurst() {
    let grid = uniform_grid(1.0, 512);
    let model = SuperstatModel::unit(exp_a(HLaw::Discrete { points: vec![0.6, 0.9], weights: vec![0.5, 0.5] }));
    let (ens, draws) = sample_superstat_paths(&model, &grid, 200, 11, Exec::Parallel).unwrap();
    let lags: Vec<f64> = (1..=16).map(|k| grid[0] * k as f64).collect();
    for h in [0.6, 0.9] {
        let mut slopes: Vec<f64> = (0..draws.len())
            .filter(|&i| draws[i].hurst[0] == h)
            .map(|i| {
                let one = PathMatrix::from_rows(513, [ens.primary().row(i).to_vec()]).unwrap();
                let curve = msd(&one, &ens.grid, &lags, Averaging::TimeAndEnsemble).unwrap();
                fit_exponent(&curve, (lags[0], lags[15])).unwrap().slope
            })
            .collect();
        slopes.sort_by(f64::total_cmp);
        let median = slopes[slopes.len() / 2];
        assert!((median - 2.0 * h).abs() < 0.1, "h={h}: median slope {median}");
    }
}

#[test]
fn bucketing_caches_and_stays_close_to_exact() {
    let grid = uniform_grid(1.0, 8);
    let mut model = SuperstatModel::unit(exp_a(HLaw::Uniform { lo: 0.55, hi: 0.95 }));
    let mut run = |bucket: Option<f64>| {
        model.bucket = bucket;
        sample_superstat_paths(&model, &grid, 2_000, 12, Exec::Parallel).unwrap().0
    };
    let (coarse, fine, exact) = (run(Some(1e-3)), run(Some(1e-4)), run(None));
    let count = |e: &TrajectoryEnsemble| e.snapshot.iter().find(|(k, _)| k == "factorizations").unwrap().1.parse::<usize>().unwrap();
    assert!(count(&coarse) <= 401);
    assert_eq!(count(&exact), 2_000);
    let worst = |e: &TrajectoryEnsemble| {
        e.primary()
            .as_slice()
            .iter()
            .zip(exact.primary().as_slice())
            .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max)
    };
    let (wc, wf) = (worst(&coarse), worst(&fine));
    assert!(wc < 2e-2, "{wc}");
    // The error is first order in the bucket width.
    assert!(wf < wc / 5.0, "{wf} vs {wc}");
}

#[test]
fn serial_and_parallel_agree() {
    let grid = uniform_grid(1.0, 16);
    let model = SuperstatModel::unit(exp_a(HLaw::Uniform { lo: 0.55, hi: 0.95 }));
    let (a, da) = sample_superstat_paths(&model, &grid, 300, 13, Exec::Serial).unwrap();
    let (b, db) = sample_superstat_paths(&model, &grid, 300, 13, Exec::Parallel).unwrap();
    assert_eq!(a.primary(), b.primary());
    assert_eq!(da, db);
}

#[test]
fn vector_hurst_kernel_adds_components() {
    let model = SuperstatModel::unit(MixingLaw {
        amplitude: ALaw::Degenerate { value: 1.0 },
        hurst: HLaw::ProductOfK {
            marginals: vec![HMarginal::Degenerate { h: 0.6 }, HMarginal::Degenerate { h: 0.9 }],
            shared_latent: false,
        },
    });
    let sum = conditional_variance(&model, &[0.6], 1.0) + conditional_variance(&model, &[0.9], 1.0);
    assert!((total_variance(&model, 1.0) - sum).abs() < 1e-13);
    let grid = uniform_grid(1.0, 8);
    let (ens, _) = sample_superstat_paths(&model, &grid, 10_000, 14, Exec::Parallel).unwrap();
    let (m, se) = mean_se(&ens.primary().column(8).iter().map(|z| z * z).collect::<Vec<_>>());
    assert!((m - sum).abs() < 3.0 * se);
}
