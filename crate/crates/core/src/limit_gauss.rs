//! Exact sampling of the centred Gaussian limit process with covariance
//! `K · ½(v(t) + v(s) − v(|t − s|))` on a finite grid.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ensemble::{PathMatrix, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mass_laws::{stable_coefficient, VarianceFn};
use crate::rng::{stream, Purpose};

/// First jitter tried, relative to the mean diagonal entry.
pub const JITTER_START: f64 = 1e-14;
/// Largest jitter tolerated before the model is rejected.
pub const JITTER_MAX: f64 = 1e-10;

pub const LIMIT: &str = "Z";

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub variance: VarianceFn,
    /// Covariance prefactor `K`.
    pub prefactor: f64,
    /// Strictly increasing positive times; the origin is implicit.
    pub grid: Vec<f64>,
}

/// Checks that `grid` is strictly increasing and starts after 0.
pub fn check_open_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if !(grid[0] > 0.0) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("time grid must start after 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` equally spaced times ending at `horizon`, excluding 0.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Logarithmically spaced times between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `2σ C_β² C_δ / (γ² C_α²)`.
pub fn prefactor(sigma: f64, gamma: f64, friction_scale: f64, drive_scale: f64, limit_constant: f64) -> f64 {
    2.0 * sigma * drive_scale * drive_scale * limit_constant / (gamma * gamma * friction_scale * friction_scale)
}

impl CovarianceModel {
    pub fn new(variance: VarianceFn, prefactor: f64, grid: Vec<f64>) -> Result<Self> {
        check_open_grid(&grid)?;
        if !(prefactor > 0.0 && prefactor.is_finite()) {
            return Err(Error::param("K", format!("must be positive, got {prefactor}")));
        }
        Ok(Self { variance, prefactor, grid })
    }

    pub fn covariance(&self, t: f64, s: f64) -> f64 {
        self.prefactor * self.variance.kernel(t, s)
    }

    /// Dense row-major covariance matrix on the grid; `v` is evaluated once per distinct lag.
    pub fn covariance_matrix(&self) -> Vec<f64> {
        let mut memo: HashMap<u64, f64> = HashMap::new();
        let mut v = |x: f64| *memo.entry(x.abs().to_bits()).or_insert_with(|| self.variance.value(x));
        kernel_matrix(&self.grid, |t, s| 0.5 * self.prefactor * (v(t) + v(s) - v(t - s)))
    }

    pub fn factor(&self) -> Result<Cholesky> {
        Cholesky::new(self.covariance_matrix(), self.grid.len())
    }
}

pub fn kernel_matrix(grid: &[f64], mut k: impl FnMut(f64, f64) -> f64) -> Vec<f64> {
    let n = grid.len();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = k(grid[i], grid[j]);
            c[i * n + j] = v;
            c[j * n + i] = v;
        }
    }
    c
}

/// Lower-triangular factor `L` with `L Lᵀ = C + jitter · I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    pub jitter: f64,
}

impl Cholesky {
    /// Factors a symmetric matrix, adding a doubling diagonal jitter on failure.
    pub fn new(matrix: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(matrix.len(), n * n, "matrix is not n x n");
        let scale = (0..n).map(|i| matrix[i * n + i]).sum::<f64>() / n as f64;
        let mut jitter = 0.0;
        loop {
            match try_cholesky(&matrix, n, jitter) {
                Ok(lower) => return Ok(Self { n, lower, jitter }),
                Err(pivot) => {
                    jitter = if jitter == 0.0 { JITTER_START * scale } else { 2.0 * jitter };
                    if !(jitter <= JITTER_MAX * scale) || !scale.is_finite() {
                        return Err(Error::Factorization { pivot, jitter });
                    }
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `out = L z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = &self.lower[i * self.n..i * self.n + i + 1];
            *o = row.iter().zip(z).map(|(l, x)| l * x).sum();
        }
    }

    /// One path starting at the origin: `(0, L ξ)`.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        let mut path = vec![0.0; self.n + 1];
        self.apply(&z, &mut path[1..]);
        path
    }
}

fn try_cholesky(a: &[f64], n: usize, jitter: f64) -> std::result::Result<Vec<f64>, usize> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j] + jitter;
        d -= l[j * n..j * n + j].iter().map(|x| x * x).sum::<f64>();
        if !(d > 0.0) {
            return Err(j);
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let dot: f64 = l[i * n..i * n + j].iter().zip(&l[j * n..j * n + j]).map(|(x, y)| x * y).sum();
            l[i * n + j] = (a[i * n + j] - dot) / d;
        }
    }
    Ok(l)
}

fn with_origin(grid: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(grid.iter().copied()).collect()
}

fn sample_factored(
    factor: &Cholesky,
    grid: &[f64],
    n_traj: usize,
    seed: u64,
    purpose: Purpose,
    exec: Exec,
) -> Result<TrajectoryEnsemble> {
    let rows = exec.map(n_traj, |i| factor.sample_path(&mut stream(seed, purpose, i as u64, 0)));
    let paths = PathMatrix::from_rows(grid.len() + 1, rows)?;
    TrajectoryEnsemble::new(with_origin(grid))?.with(LIMIT, paths)
}

/// Samples `n_traj` exact paths of the limit process, with `Z₀ = 0` prepended.
pub fn sample_limit_paths(model: &CovarianceModel, n_traj: usize, seed: u64, exec: Exec) -> Result<TrajectoryEnsemble> {
    let factor = model.factor()?;
    Ok(sample_factored(&factor, &model.grid, n_traj, seed, Purpose::LimitPath, exec)?
        .note("prefactor", model.prefactor)
        .note("seed", seed)
        .note("jitter", factor.jitter))
}

/// `½(t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn fbm_kernel(hurst: f64, t: f64, s: f64) -> f64 {
    let p = 2.0 * hurst;
    0.5 * (t.abs().powf(p) + s.abs().powf(p) - (t - s).abs().powf(p))
}

/// Multiplier turning unit fBm into the limit process of the stable family.
pub fn fbm_scale(hurst: f64, gamma: f64, prefactor: f64) -> f64 {
    (prefactor * stable_coefficient(hurst) * gamma.powf(2.0 * hurst - 1.0)).sqrt()
}

/// Unit-scale fractional Brownian motion from its own kernel.
pub fn sample_fbm_direct(hurst: f64, grid: &[f64], n_traj: usize, seed: u64, exec: Exec) -> Result<TrajectoryEnsemble> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::param("H", format!("must lie in (0, 1), got {hurst}")));
    }
    check_open_grid(grid)?;
    let factor = Cholesky::new(kernel_matrix(grid, |t, s| fbm_kernel(hurst, t, s)), grid.len())?;
    Ok(sample_factored(&factor, grid, n_traj, seed, Purpose::DirectFbm, exec)?.note("hurst", hurst).note("seed", seed))
}

#[cfg(test)]
mod tests;
