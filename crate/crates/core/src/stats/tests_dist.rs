//! Kolmogorov–Smirnov tests and moment diagnostics.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' finite-sample correction.
fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample test of `samples` against the continuous distribution function `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult { statistic: d, p_value: ks_p(d, n) })
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    let (xa, xb) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, p_value: ks_p(d, na * nb / (na + nb)) })
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianityReport {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Fourth standardized moment; 3 for a Gaussian.
    pub kurtosis: f64,
    pub kurtosis_se: f64,
    pub ks: KsResult,
}

impl GaussianityReport {
    pub fn excess_kurtosis(&self) -> f64 {
        self.kurtosis - 3.0
    }

    /// Normality is rejected when the KS test against the fitted normal fails at `alpha`.
    pub fn rejected_at(&self, alpha: f64) -> bool {
        self.ks.p_value < alpha
    }
}

/// Moments and a KS test against the normal law with matched mean and variance.
pub fn gaussianity(values: &[f64]) -> Result<GaussianityReport> {
    let n = values.len();
    if n < 100 {
        return Err(Error::Domain(format!("need at least 100 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let central = |p: i32| values.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / nf;
    let (m2, m3, m4) = (central(2), central(3), central(4));
    if !(m2 > 0.0) {
        return Err(Error::Domain("degenerate variance".into()));
    }
    let kurtosis = m4 / (m2 * m2);
    // Influence function of m4 / m2², including the effect of the estimated mean.
    let influence: Vec<f64> = values
        .iter()
        .map(|x| {
            let d = x - mean;
            (d.powi(4) - m4 - 4.0 * m3 * d) / (m2 * m2) - 2.0 * m4 * (d * d - m2) / (m2 * m2 * m2)
        })
        .collect();
    let var_if = influence.iter().map(|v| v * v).sum::<f64>() / (nf - 1.0);
    let sd = m2.sqrt();
    let ks = ks_one_sample(values, |x| normal_cdf((x - mean) / sd))?;
    Ok(GaussianityReport { n, mean, variance: m2 * nf / (nf - 1.0), kurtosis, kurtosis_se: (var_if / nf).sqrt(), ks })
}
