//! Superstatistical limit: `Z = √A · G^{(H)}` with a random amplitude `A` and
//! a random Hurst element `H` drawn once per trajectory.

mod laws;

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use laws::{ALaw, HLaw, HMarginal};

use crate::ensemble::{PathMatrix, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::limit_gauss::{check_open_grid, kernel_matrix, Cholesky, LIMIT};
use crate::mass_laws::{LevyCouple, VarianceFn};
use crate::rng::{stream, Purpose};

/// Default resolution in `h` for caching factorizations of continuous H laws.
pub const DEFAULT_BUCKET: f64 = 1e-3;

/// Joint law of `(A, H)`; the two are independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingLaw {
    pub amplitude: ALaw,
    pub hurst: HLaw,
}

impl MixingLaw {
    pub fn validate(&self) -> Result<()> {
        self.amplitude.validate()?;
        self.hurst.validate()
    }
}

/// Which variance function a Hurst component selects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HurstFamily {
    #[default]
    Stable,
    Tempered,
}

impl HurstFamily {
    fn couple(self, hurst: f64) -> LevyCouple {
        match self {
            HurstFamily::Stable => LevyCouple::Stable { hurst },
            HurstFamily::Tempered => LevyCouple::Tempered { hurst },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingDraw {
    pub amplitude: f64,
    pub hurst: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperstatModel {
    pub mixing: MixingLaw,
    pub sigma: f64,
    pub gamma: f64,
    pub drive_scale: f64,
    pub limit_constant: f64,
    pub family: HurstFamily,
    /// Resolution in `h` for continuous H laws; `None` factors every draw exactly.
    pub bucket: Option<f64>,
}

impl SuperstatModel {
    /// All-ones constants around the given mixing law.
    pub fn unit(mixing: MixingLaw) -> Self {
        Self {
            mixing,
            sigma: 1.0,
            gamma: 1.0,
            drive_scale: 1.0,
            limit_constant: 1.0,
            family: HurstFamily::Stable,
            bucket: Some(DEFAULT_BUCKET),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("C_beta", self.drive_scale),
            ("C_delta", self.limit_constant),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(b) = self.bucket {
            if !(b > 0.0 && b < 0.5) {
                return Err(Error::param("bucket", format!("must lie in (0, 1/2), got {b}")));
            }
        }
        self.mixing.validate()
    }

    /// `D = 2σ C_β² C_δ / γ²`.
    pub fn diffusivity(&self) -> f64 {
        2.0 * self.sigma * self.drive_scale.powi(2) * self.limit_constant / self.gamma.powi(2)
    }

    fn components(&self, hurst: &[f64]) -> Vec<VarianceFn> {
        hurst
            .iter()
            .map(|&h| VarianceFn::new(self.family.couple(h), self.gamma).expect("validated Hurst component"))
            .collect()
    }

    /// `Σ_k v_{h_k}(t)`.
    pub fn variance(&self, hurst: &[f64], t: f64) -> f64 {
        self.components(hurst).iter().map(|v| v.value(t)).sum()
    }

    /// `Σ_k v̇_{h_k}(t)`.
    pub fn variance_rate(&self, hurst: &[f64], t: f64) -> f64 {
        self.components(hurst).iter().map(|v| v.rate(t)).sum()
    }

    /// Factorization key: exact for atomic H laws, rounded to the bucket otherwise.
    fn cache_key(&self, hurst: &[f64]) -> Vec<u64> {
        self.representative(hurst).iter().map(|h| h.to_bits()).collect()
    }

    fn representative(&self, hurst: &[f64]) -> Vec<f64> {
        match self.bucket {
            Some(b) if !self.mixing.hurst.is_atomic() => hurst.iter().map(|h| (h / b).round() * b).collect(),
            _ => hurst.to_vec(),
        }
    }
}

/// `n` independent `(A, H)` pairs.
pub fn sample_mixing(mixing: &MixingLaw, n: usize, seed: u64) -> Result<Vec<MixingDraw>> {
    mixing.validate()?;
    Ok((0..n).map(|i| draw(mixing, seed, i)).collect())
}

fn draw(mixing: &MixingLaw, seed: u64, index: usize) -> MixingDraw {
    let mut rng = stream(seed, Purpose::Mixing, index as u64, 0);
    let amplitude = mixing.amplitude.sample(&mut rng);
    let hurst = mixing.hurst.sample(&mut rng);
    MixingDraw { amplitude, hurst }
}

/// Samples `n_traj` paths on `grid` (origin prepended) with their `(A, H)` draws.
pub fn sample_superstat_paths(
    model: &SuperstatModel,
    grid: &[f64],
    n_traj: usize,
    seed: u64,
    exec: Exec,
) -> Result<(TrajectoryEnsemble, Vec<MixingDraw>)> {
    model.validate()?;
    check_open_grid(grid)?;
    let draws: Vec<MixingDraw> = (0..n_traj).map(|i| draw(&model.mixing, seed, i)).collect();

    let mut keys: BTreeMap<Vec<u64>, Vec<f64>> = BTreeMap::new();
    for d in &draws {
        keys.entry(model.cache_key(&d.hurst)).or_insert_with(|| model.representative(&d.hurst));
    }
    let distinct: Vec<(&Vec<u64>, &Vec<f64>)> = keys.iter().collect();
    let d = model.diffusivity();
    let factors = exec.try_map(distinct.len(), |i| {
        let parts = model.components(distinct[i].1);
        let k = |t: f64, s: f64| d * parts.iter().map(|v| v.kernel(t, s)).sum::<f64>();
        Cholesky::new(kernel_matrix(grid, k), grid.len())
    })?;
    let cache: BTreeMap<&Vec<u64>, &Cholesky> = distinct.iter().map(|(k, _)| *k).zip(&factors).collect();

    let rows = exec.map(n_traj, |i| {
        let factor = cache[&model.cache_key(&draws[i].hurst)];
        let mut rng = stream(seed, Purpose::MixedPath, i as u64, 0);
        let z: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut path = vec![0.0; grid.len() + 1];
        factor.apply(&z, &mut path[1..]);
        let scale = draws[i].amplitude.sqrt();
        path.iter_mut().for_each(|x| *x *= scale);
        path
    });
    let paths = PathMatrix::from_rows(grid.len() + 1, rows)?;
    let grid0: Vec<f64> = std::iter::once(0.0).chain(grid.iter().copied()).collect();
    let ensemble = TrajectoryEnsemble::new(grid0)?
        .with(LIMIT, paths)?
        .note("seed", seed)
        .note("factorizations", factors.len())
        .note("bucket", model.bucket.map_or("exact".to_string(), |b| b.to_string()));
    Ok((ensemble, draws))
}

/// `D · E[A] · Σ_k v_{h_k}(t)`.
pub fn conditional_variance(model: &SuperstatModel, hurst: &[f64], t: f64) -> f64 {
    model.diffusivity() * model.mixing.amplitude.mean() * model.variance(hurst, t)
}

/// `Var Z_t`: the conditional variance averaged over the H law.
pub fn total_variance(model: &SuperstatModel, t: f64) -> f64 {
    model.mixing.hurst.rule().iter().map(|(w, h)| w * conditional_variance(model, h, t)).sum()
}

#[cfg(test)]
mod tests;
