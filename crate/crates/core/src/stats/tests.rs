use super::*;
use proptest::prelude::*;

fn synthetic(values: impl Fn(f64) -> f64, lags: &[f64]) -> MsdCurve {
    MsdCurve { lags: lags.to_vec(), values: lags.iter().map(|&l| values(l)).collect(), stderr: vec![0.0; lags.len()], n_traj: 1 }
}

#[test]
fn exact_power_law_slope() {
    let lags: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let fit = fit_exponent(&synthetic(|l| l.powf(1.5), &lags), (0.05, 1.0)).unwrap();
    assert!((fit.slope - 1.5).abs() < 1e-12);
    assert!(fit.stderr < 1e-10);
}

#[test]
fn fit_rejects_small_or_bad_windows() {
    let lags = [0.1, 0.2, 0.3, 0.4, 0.5];
    assert!(fit_exponent(&synthetic(|l| l, &lags), (0.1, 0.3)).is_err());
    assert!(fit_exponent(&synthetic(|l| l - 0.3, &lags), (0.1, 0.5)).is_err());
}

#[test]
fn constant_path_has_zero_msd() {
    let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
    let paths = PathMatrix::from_rows(11, [vec![2.5; 11]]).unwrap();
    for avg in [Averaging::TimeAndEnsemble, Averaging::EnsembleOnly] {
        let c = msd(&paths, &grid, &[0.0, 0.1, 0.5, 1.0], avg).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn msd_of_a_line_is_quadratic() {
    let grid: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
    let rows: Vec<Vec<f64>> = [1.0, -2.0].iter().map(|s| grid.iter().map(|t| s * t).collect()).collect();
    let paths = PathMatrix::from_rows(101, rows).unwrap();
    let c = msd(&paths, &grid, &[0.1, 0.2], Averaging::TimeAndEnsemble).unwrap();
    assert!((c.values[0] - 2.5 * 0.01).abs() < 1e-12);
    assert!(msd(&paths, &grid, &[0.105], Averaging::TimeAndEnsemble).is_err());
    let e = msd(&paths, &grid, &[0.2], Averaging::EnsembleOnly).unwrap();
    assert!((e.values[0] - 2.5 * 0.04).abs() < 1e-12);
}

#[test]
fn empty_and_tiny_ensembles_are_errors() {
    let grid = vec![0.0, 1.0];
    let empty = PathMatrix::zeros(0, 2);
    assert!(msd(&empty, &grid, &[1.0], Averaging::EnsembleOnly).is_err());
    let one = PathMatrix::zeros(1, 2);
    assert!(empirical_cov(&one, &grid, &[1.0]).is_err());
}

#[test]
fn zero_ensemble_has_zero_covariance() {
    let grid: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let z = PathMatrix::zeros(10, 5);
    let c = empirical_cov(&z, &grid, &[1.0, 2.0, 4.0]).unwrap();
    assert!(c.cov.iter().all(|&v| v == 0.0));
    assert_eq!(c.max_z(&[0.0; 9]), 0.0);
}

#[test]
fn gap_statistics() {
    let a = PathMatrix::from_rows(3, [[0.0, 1.0, 2.0], [0.0, 0.0, 0.0]]).unwrap();
    let b = PathMatrix::zeros(2, 3);
    let (m, _) = mean_sup_square_gap(&a, &b).unwrap();
    assert_eq!(m, 2.0);
    let (s, _) = sup_mean_square_gap(&a, &b).unwrap();
    assert_eq!(s, 2.0);
}

#[test]
fn loglog_fit() {
    let x = [1.0, 2.0, 4.0, 8.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.7)).collect();
    let (s, se) = fit_loglog(&x, &y).unwrap();
    assert!((s + 0.7).abs() < 1e-12 && se < 1e-10);
}

proptest! {
    #[test]
    fn fit_is_scale_invariant(c in 1e-6f64..1e6, h in 0.55f64..0.95, noise in proptest::collection::vec(0.9f64..1.1, 12)) {
        let lags: Vec<f64> = (1..=12).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = lags.iter().zip(&noise).map(|(l, n)| l.powf(2.0 * h) * n).collect();
        let stderr: Vec<f64> = values.iter().map(|v| 0.01 * v).collect();
        let base = MsdCurve { lags: lags.clone(), values: values.clone(), stderr: stderr.clone(), n_traj: 10 };
        let scaled = MsdCurve {
            lags,
            values: values.iter().map(|v| v * c).collect(),
            stderr: stderr.iter().map(|v| v * c).collect(),
            n_traj: 10,
        };
        let a = fit_exponent(&base, (0.1, 1.2)).unwrap();
        let b = fit_exponent(&scaled, (0.1, 1.2)).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 1e-12);
    }

    #[test]
    fn estimators_are_deterministic(seed in 0u64..1000) {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, crate::rng::Purpose::Auxiliary, 0, 0);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| {
            let mut x = 0.0;
            (0..9).map(|i| { if i > 0 { x += rng.random::<f64>() - 0.5; } x }).collect()
        }).collect();
        let grid: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let p = PathMatrix::from_rows(9, rows).unwrap();
        let a = msd(&p, &grid, &[1.0, 2.0, 3.0], Averaging::TimeAndEnsemble).unwrap();
        let b = msd(&p, &grid, &[1.0, 2.0, 3.0], Averaging::TimeAndEnsemble).unwrap();
        prop_assert_eq!(a, b);
        let c1 = empirical_cov(&p, &grid, &[2.0, 5.0]).unwrap();
        let c2 = empirical_cov(&p, &grid, &[2.0, 5.0]).unwrap();
        prop_assert_eq!(c1, c2);
    }
}
