//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use anodiff::SystemConfig;

type M3 = [[f64; 3]; 3];

fn lyapunov_rhs(b: &M3, q: &M3, p: &M3) -> M3 {
    let mut out = *q;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += b[i][k] * p[k][j] + p[i][k] * b[j][k];
            }
        }
    }
    out
}

fn axpy(p: &M3, h: f64, k: &M3) -> M3 {
    let mut out = *p;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += h * k[i][j];
        }
    }
    out
}

/// Covariance of `(X, V, ΣU)` for the continuous-time system with every
/// surround mass equal to `m` and stationary surround velocities at time 0,
/// from the Lyapunov equation `P' = BP + PBᵀ + Q` integrated by RK4.
pub fn point_mass_covariance(cfg: &SystemConfig, m: f64, t: f64, h: f64) -> M3 {
    let n = cfg.particles as f64;
    let alpha = cfg.friction_scale * n.powf(-cfg.friction_exponent);
    let beta = cfg.drive_scale * n.powf(-cfg.drive_exponent);
    let total = alpha * n;
    let kappa = cfg.gamma * m;
    let b: M3 = [
        [0.0, 1.0, 0.0],
        [0.0, -total / cfg.test_mass, beta / cfg.test_mass],
        [0.0, n * alpha / m, -kappa],
    ];
    let mut q: M3 = [[0.0; 3]; 3];
    q[2][2] = 2.0 * cfg.sigma * n;
    let mut p: M3 = [[0.0; 3]; 3];
    p[2][2] = n * cfg.sigma / kappa;
    let steps = (t / h).ceil() as usize;
    let h = t / steps as f64;
    for _ in 0..steps {
        let k1 = lyapunov_rhs(&b, &q, &p);
        let k2 = lyapunov_rhs(&b, &q, &axpy(&p, h / 2.0, &k1));
        let k3 = lyapunov_rhs(&b, &q, &axpy(&p, h / 2.0, &k2));
        let k4 = lyapunov_rhs(&b, &q, &axpy(&p, h, &k3));
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
            }
        }
    }
    p
}

/// `Var X_t` of the continuous point-mass system.
pub fn point_mass_position_variance(cfg: &SystemConfig, m: f64, t: f64) -> f64 {
    point_mass_covariance(cfg, m, t, 1e-5)[0][0]
}

/// Test-particle system in the classical-diffusion regime: point masses at `N^{δ/2}`.
pub fn wiener_config(particles: usize) -> SystemConfig {
    SystemConfig {
        test_mass: 1e-3,
        sigma: 1.0,
        gamma: 10.0,
        friction_scale: 1.0,
        drive_scale: 7.0,
        friction_exponent: 0.8,
        drive_exponent: 0.25,
        floor_exponent: -0.05,
        normalizer_exponent: 0.1,
        limit_constant: 1.0,
        particles,
        horizon: 1.0,
        n_steps: 512,
        seed: 2024,
    }
}

pub fn sample_mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}
