use super::*;
use crate::mass_laws::LevyCouple;
use crate::stats::{gaussianity, msd, Averaging};

fn fbm_model(grid: Vec<f64>) -> CovarianceModel {
    CovarianceModel::new(VarianceFn::fbm(0.75, 1.0).unwrap(), 2.0, grid).unwrap()
}

fn var_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (v, v * (2.0 / (n - 1.0)).sqrt())
}

#[test]
fn single_point_covariance() {
    let c = fbm_model(vec![1.0]).covariance_matrix();
    assert!((c[0] - 2.0 * std::f64::consts::PI.sqrt() / 0.75).abs() < 1e-12);
    assert!((c[0] - 4.726_54).abs() < 1e-5);
    assert!((prefactor(1.0, 1.0, 1.0, 1.0, 1.0) - 2.0).abs() < 1e-15);
}

#[test]
fn wiener_covariance_is_min_kernel() {
    let grid = uniform_grid(2.0, 16);
    let model = CovarianceModel::new(VarianceFn::new(LevyCouple::Saturated, 1.0).unwrap(), 3.0, grid.clone()).unwrap();
    let c = model.covariance_matrix();
    for (i, t) in grid.iter().enumerate() {
        for (j, s) in grid.iter().enumerate() {
            assert!((c[i * 16 + j] - 3.0 * t.min(*s)).abs() < 1e-14);
        }
    }
}

#[test]
fn stable_covariance_is_scaled_fbm_kernel() {
    for (h, gamma) in [(0.75, 1.0), (0.6, 2.5), (0.9, 0.3)] {
        let grid = uniform_grid(3.0, 24);
        let model = CovarianceModel::new(VarianceFn::fbm(h, gamma).unwrap(), 1.7, grid.clone()).unwrap();
        let scale = 1.7 / 2.0 * stable_coefficient(h) * gamma.powf(2.0 * h - 1.0);
        for &t in &grid {
            for &s in &grid {
                let direct = scale * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h));
                assert!((model.covariance(t, s) - direct).abs() < 1e-12 * direct.abs().max(1.0));
            }
        }
    }
}

#[test]
fn fbm_covariance_is_self_similar() {
    let model = fbm_model(uniform_grid(1.0, 16));
    for c in [0.5, 2.0] {
        for &t in &model.grid {
            for &s in &model.grid {
                let lhs = model.covariance(c * t, c * s);
                let rhs = c.powf(1.5) * model.covariance(t, s);
                assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
            }
        }
    }
}

#[test]
fn every_catalogued_kernel_factorizes_on_fine_grids() {
    let couples = [
        LevyCouple::Stable { hurst: 0.75 },
        LevyCouple::Stable { hurst: 0.51 },
        LevyCouple::Stable { hurst: 0.99 },
        LevyCouple::StableSum { hursts: vec![0.6, 0.9] },
        LevyCouple::Tempered { hurst: 0.75 },
        LevyCouple::Exponential { rate: 1.0 },
        LevyCouple::Saturated,
        LevyCouple::UnitJump,
        LevyCouple::SqrtExp,
        LevyCouple::LogRatio,
        LevyCouple::GammaProcess,
        LevyCouple::GammaCompound { alpha: 0.5 },
    ];
    for couple in couples {
        let model = CovarianceModel::new(VarianceFn::new(couple.clone(), 1.0).unwrap(), 2.0, uniform_grid(1.0, 512)).unwrap();
        let trace_mean = model.covariance_matrix().iter().step_by(513).sum::<f64>() / 512.0;
        let f = model.factor().unwrap_or_else(|e| panic!("{couple:?}: {e}"));
        assert!(f.jitter <= JITTER_MAX * trace_mean);
    }
}

#[test]
fn indefinite_matrix_is_rejected() {
    let err = Cholesky::new(vec![1.0, 2.0, 2.0, 1.0], 2).unwrap_err();
    assert!(matches!(err, Error::Factorization { pivot: 1, .. }));
}

#[test]
fn grid_must_be_open_and_increasing() {
    let v = VarianceFn::fbm(0.75, 1.0).unwrap();
    assert!(CovarianceModel::new(v.clone(), 2.0, vec![0.0, 1.0]).is_err());
    assert!(CovarianceModel::new(v.clone(), 2.0, vec![0.5, 0.5]).is_err());
    assert!(CovarianceModel::new(v, 2.0, vec![]).is_err());
}

#[test]
fn increments_are_stationary() {
    let model = fbm_model(uniform_grid(1.0, 20));
    let ens = sample_limit_paths(&model, 10_000, 31, Exec::Parallel).unwrap();
    let p = ens.primary();
    let h = 0.05;
    let expected = 2.0 * model.variance.value(h);
    for start in [0usize, 5, 10, 19] {
        let incs: Vec<f64> = p.rows().map(|r| r[start + 1] - r[start]).collect();
        let (v, se) = var_se(&incs);
        assert!((v - expected).abs() < 3.0 * se, "start {start}: {v} vs {expected}");
    }
}

#[test]
fn marginals_are_gaussian() {
    let model = fbm_model(uniform_grid(1.0, 8));
    let ens = sample_limit_paths(&model, 10_000, 32, Exec::Parallel).unwrap();
    for j in [1usize, 4, 8] {
        let r = gaussianity(&ens.primary().column(j)).unwrap();
        assert!(r.excess_kurtosis().abs() < 3.0 * r.kurtosis_se, "t index {j}: {r:?}");
        assert!(!r.rejected_at(0.01));
    }
}

#[test]
fn brownian_direct_sampler_has_uncorrelated_increments() {
    let grid = uniform_grid(1.0, 16);
    let ens = sample_fbm_direct(0.5, &grid, 10_000, 33, Exec::Parallel).unwrap();
    let p = ens.primary();
    let a: Vec<f64> = p.rows().map(|r| r[6] - r[5]).collect();
    let b: Vec<f64> = p.rows().map(|r| r[7] - r[6]).collect();
    let n = a.len() as f64;
    let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let m = prods.iter().sum::<f64>() / n;
    let se = (prods.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(m.abs() < 3.0 * se);
}

#[test]
fn direct_fbm_marginal_variance() {
    let grid = uniform_grid(2.0, 8);
    let ens = sample_fbm_direct(0.75, &grid, 10_000, 34, Exec::Parallel).unwrap();
    for (j, t) in grid.iter().enumerate() {
        let (v, se) = var_se(&ens.primary().column(j + 1));
        assert!((v - t.powf(1.5)).abs() < 3.0 * se, "t={t}: {v}");
    }
    assert!(sample_fbm_direct(1.0, &grid, 1, 0, Exec::Serial).is_err());
}

#[test]
fn wiener_msd_is_linear() {
    let model = CovarianceModel::new(VarianceFn::new(LevyCouple::Saturated, 1.0).unwrap(), 2.0, uniform_grid(1.0, 50)).unwrap();
    let ens = sample_limit_paths(&model, 4000, 35, Exec::Parallel).unwrap();
    let lags = [0.02, 0.1, 0.2];
    let c = msd(ens.primary(), &ens.grid, &lags, Averaging::EnsembleOnly).unwrap();
    for i in 0..3 {
        assert!((c.values[i] - 2.0 * lags[i]).abs() < 3.0 * c.stderr[i]);
    }
}
