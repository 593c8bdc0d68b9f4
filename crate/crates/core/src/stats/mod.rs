//! Estimators on ensembles and the N-sweep that confronts the particle system
//! with its limit.

mod sweep;
mod tests_dist;

pub use sweep::{convergence_sweep, ScalingReport, ScalingRow, SlopeFit};
pub use tests_dist::{
    gaussianity, kolmogorov_q, ks_one_sample, ks_two_sample, normal_cdf, GaussianityReport, KsResult,
};

use crate::ensemble::PathMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Average over trajectories and over all admissible start times.
    #[default]
    TimeAndEnsemble,
    /// Displacements from the origin only; for processes without stationary increments.
    EnsembleOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdCurve {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_traj: usize,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn index_of(grid: &[f64], t: f64) -> Option<usize> {
    let tol = 1e-9 * grid.last().copied().unwrap_or(1.0).abs().max(1.0);
    grid.iter().position(|&g| (g - t).abs() <= tol)
}

/// Mean squared displacement at the given lags.
pub fn msd(paths: &PathMatrix, grid: &[f64], lags: &[f64], averaging: Averaging) -> Result<MsdCurve> {
    let n_traj = paths.n_paths();
    if n_traj == 0 {
        return Err(Error::Domain("empty ensemble".into()));
    }
    if grid.len() != paths.n_times() {
        return Err(Error::Domain("grid does not match the paths".into()));
    }
    let mut values = Vec::with_capacity(lags.len());
    let mut stderr = Vec::with_capacity(lags.len());
    match averaging {
        Averaging::TimeAndEnsemble => {
            let dt = grid[1] - grid[0];
            let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
            if !uniform {
                return Err(Error::Domain("time averaging needs a uniform grid".into()));
            }
            for &lag in lags {
                let k = (lag / dt).round() as usize;
                if ((k as f64) * dt - lag).abs() > 1e-9 * dt.max(lag) || k >= grid.len() {
                    return Err(Error::Domain(format!("lag {lag} is not a grid difference")));
                }
                if k == 0 {
                    values.push(0.0);
                    stderr.push(0.0);
                    continue;
                }
                let per_path: Vec<f64> = paths
                    .rows()
                    .map(|r| r.iter().zip(&r[k..]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>() / (r.len() - k) as f64)
                    .collect();
                let (m, se) = mean_and_se(&per_path);
                values.push(m);
                stderr.push(se);
            }
        }
        Averaging::EnsembleOnly => {
            for &lag in lags {
                let j = index_of(grid, grid[0] + lag)
                    .ok_or_else(|| Error::Domain(format!("lag {lag} is not a grid time")))?;
                let sq: Vec<f64> = paths.rows().map(|r| (r[j] - r[0]).powi(2)).collect();
                let (m, se) = mean_and_se(&sq);
                values.push(m);
                stderr.push(se);
            }
        }
    }
    Ok(MsdCurve { lags: lags.to_vec(), values, stderr, n_traj })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)` with weights `w`.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let slope = sxy / sxx;
    (slope, ym - slope * xm, sxx)
}

/// Ordinary least-squares slope of `ln y` against `ln x`, with its standard error.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Domain("need at least three points for a slope".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let w = vec![1.0; x.len()];
    let (slope, icpt, sxx) = weighted_line(&lx, &ly, &w);
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    Ok((slope, (rss / (x.len() - 2) as f64 / sxx).sqrt()))
}

/// Weighted least-squares slope of `ln MSD` against `ln lag` inside `window`.
pub fn fit_exponent(curve: &MsdCurve, window: (f64, f64)) -> Result<ExponentFit> {
    let (lo, hi) = window;
    let tol = 1e-9;
    let picked: Vec<usize> = (0..curve.lags.len())
        .filter(|&i| curve.lags[i] > 0.0 && curve.lags[i] >= lo * (1.0 - tol) && curve.lags[i] <= hi * (1.0 + tol))
        .collect();
    if picked.len() < 4 {
        return Err(Error::Domain(format!("only {} lags inside [{lo}, {hi}]", picked.len())));
    }
    if picked.iter().any(|&i| !(curve.values[i] > 0.0)) {
        return Err(Error::Domain("non-positive MSD value inside the fit window".into()));
    }
    let x: Vec<f64> = picked.iter().map(|&i| curve.lags[i].ln()).collect();
    let y: Vec<f64> = picked.iter().map(|&i| curve.values[i].ln()).collect();
    let weighted = picked.iter().all(|&i| curve.stderr[i] > 0.0);
    let w: Vec<f64> = if weighted {
        picked.iter().map(|&i| (curve.values[i] / curve.stderr[i]).powi(2)).collect()
    } else {
        vec![1.0; picked.len()]
    };
    let (slope, intercept, sxx) = weighted_line(&x, &y, &w);
    let stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (picked.len() - 2) as f64 / sxx).sqrt()
    };
    Ok(ExponentFit { slope, stderr, intercept, points: picked.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub times: Vec<f64>,
    /// Row-major sample covariance.
    pub cov: Vec<f64>,
    /// Standard error of each entry.
    pub stderr: Vec<f64>,
}

impl CovEstimate {
    /// Largest `|estimate − reference| / s.e.` over all entries.
    pub fn max_z(&self, reference: &[f64]) -> f64 {
        self.cov
            .iter()
            .zip(reference)
            .zip(&self.stderr)
            .map(|((c, r), s)| if *s > 0.0 { (c - r).abs() / s } else if c == r { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Sample covariance of the paths at the given grid times.
pub fn empirical_cov(paths: &PathMatrix, grid: &[f64], times: &[f64]) -> Result<CovEstimate> {
    let n = paths.n_paths();
    if n < 2 {
        return Err(Error::Domain("covariance needs at least two trajectories".into()));
    }
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| index_of(grid, t).ok_or_else(|| Error::Domain(format!("time {t} is not on the grid"))))
        .collect::<Result<_>>()?;
    let cols: Vec<Vec<f64>> = idx.iter().map(|&j| paths.column(j)).collect();
    let centred: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|x| x - m).collect()
        })
        .collect();
    let k = idx.len();
    let mut cov = vec![0.0; k * k];
    let mut stderr = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..=a {
            let prods: Vec<f64> = centred[a].iter().zip(&centred[b]).map(|(x, y)| x * y).collect();
            let (m, se) = mean_and_se(&prods);
            let c = m * n as f64 / (n - 1) as f64;
            cov[a * k + b] = c;
            cov[b * k + a] = c;
            stderr[a * k + b] = se;
            stderr[b * k + a] = se;
        }
    }
    Ok(CovEstimate { times: times.to_vec(), cov, stderr })
}

/// Moments and normality test of the marginal at time `t`.
pub fn gaussianity_test(paths: &PathMatrix, grid: &[f64], t: f64) -> Result<GaussianityReport> {
    let j = index_of(grid, t).ok_or_else(|| Error::Domain(format!("time {t} is not on the grid")))?;
    gaussianity(&paths.column(j))
}

/// `E sup_t |a − b|²` with its standard error.
pub fn mean_sup_square_gap(a: &PathMatrix, b: &PathMatrix) -> Result<(f64, f64)> {
    let d = a.minus(b)?;
    let sups: Vec<f64> = d.rows().map(|r| r.iter().map(|x| x * x).fold(0.0, f64::max)).collect();
    Ok(mean_and_se(&sups))
}

/// `sup_t E|a − b|²` with its standard error at the maximizing time.
pub fn sup_mean_square_gap(a: &PathMatrix, b: &PathMatrix) -> Result<(f64, f64)> {
    let d = a.minus(b)?;
    let best = (0..d.n_times())
        .map(|j| mean_and_se(&d.column(j).iter().map(|x| x * x).collect::<Vec<_>>()))
        .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(best)
}

#[cfg(test)]
mod tests;
