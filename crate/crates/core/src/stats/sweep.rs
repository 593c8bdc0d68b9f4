use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::manifest::config_hash;
use crate::mass_laws::{MassFamily, MassLaw};
use crate::params::SystemConfig;
use crate::particle_sim::{
    conditional_cov_check, simulate_chain, trajectory_masses, CHAIN_LIMIT, CHAIN_POSITION, POSITION,
};

use super::{fit_loglog, mean_sup_square_gap, sup_mean_square_gap};

/// Allowed excess of a fitted rate over its bound.
pub const SLOPE_TOLERANCE: f64 = 0.15;
/// Mass environments drawn per N for the conditional-covariance error.
pub const MASS_RESAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub particles: usize,
    /// `E sup_t |X − X̃|²`.
    pub full_gap: f64,
    pub full_gap_se: f64,
    /// `sup_t E|X̃ − Z̃|²`.
    pub chain_gap: f64,
    pub chain_gap_se: f64,
    /// Median over mass environments of `|ξ / limit − 1|` at the horizon.
    pub covariance_error: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    /// Theoretical exponent the slope is compared with.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub full_gap_slope: SlopeFit,
    pub chain_gap_slope: SlopeFit,
}

impl ScalingReport {
    /// Upper-bound consistency of the full-system gap with `N^{−2(b−d)}`.
    pub fn full_gap_consistent(&self) -> bool {
        self.full_gap_slope.slope <= self.full_gap_slope.reference + SLOPE_TOLERANCE
    }

    /// Agreement of the chain gap rate with `N^{a−1}`.
    pub fn chain_gap_consistent(&self) -> bool {
        (self.chain_gap_slope.slope - self.chain_gap_slope.reference).abs() <= SLOPE_TOLERANCE
    }

    pub fn covariance_error_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].covariance_error <= w[0].covariance_error)
    }
}

fn sweep_point(
    template: &SystemConfig,
    family: &MassFamily,
    particles: usize,
    n_traj: usize,
    seed: u64,
    exec: Exec,
) -> Result<ScalingRow> {
    let law = MassLaw::new(family.clone(), particles, template.floor_exponent, template.normalizer_exponent)?;
    let mut cfg = template.clone();
    cfg.particles = particles;
    cfg.floor_exponent = law.meta.floor_exponent;
    cfg.limit_constant = law.meta.limit_constant;
    let ens = simulate_chain(&cfg, &law, n_traj, seed, exec)?;
    let x = ens.get(POSITION).expect("chain ensemble has X");
    let xt = ens.get(CHAIN_POSITION).expect("chain ensemble has Xtilde");
    let zt = ens.get(CHAIN_LIMIT).expect("chain ensemble has Ztilde");
    let (full_gap, full_gap_se) = mean_sup_square_gap(x, xt)?;
    let (chain_gap, chain_gap_se) = sup_mean_square_gap(xt, zt)?;
    let mut errors = exec.try_map(MASS_RESAMPLES, |r| {
        let masses = trajectory_masses(&law, particles, seed ^ 0x6d61_7373, r);
        let (xi, limit) = conditional_cov_check(&cfg, &law, &masses, cfg.horizon, cfg.horizon)?;
        Ok((xi / limit - 1.0).abs())
    })?;
    errors.sort_by(f64::total_cmp);
    let covariance_error = 0.5 * (errors[(MASS_RESAMPLES - 1) / 2] + errors[MASS_RESAMPLES / 2]);
    Ok(ScalingRow { particles, full_gap, full_gap_se, chain_gap, chain_gap_se, covariance_error, config_hash: config_hash(&cfg) })
}

/// Runs the approximation chain for every N and fits the decay rates of its gaps.
pub fn convergence_sweep(
    template: &SystemConfig,
    family: &MassFamily,
    n_list: &[usize],
    n_traj: usize,
    seed: u64,
    exec: Exec,
) -> Result<ScalingReport> {
    if n_list.len() < 4 {
        return Err(Error::Domain(format!("need at least four particle counts, got {}", n_list.len())));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("particle counts must be strictly ascending".into()));
    }
    let rows = n_list
        .iter()
        .map(|&n| {
            sweep_point(template, family, n, n_traj, seed, exec)
                .map_err(|e| Error::Sweep { particles: n, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = rows.iter().map(|r| r.particles as f64).collect();
    let full: Vec<f64> = rows.iter().map(|r| r.full_gap).collect();
    let chain: Vec<f64> = rows.iter().map(|r| r.chain_gap).collect();
    let (fs, fse) = fit_loglog(&ns, &full)?;
    let (cs, cse) = fit_loglog(&ns, &chain)?;
    let law = MassLaw::new(family.clone(), n_list[0], template.floor_exponent, template.normalizer_exponent)?;
    let d = law.meta.floor_exponent;
    Ok(ScalingReport {
        rows,
        full_gap_slope: SlopeFit { slope: fs, stderr: fse, reference: -2.0 * (template.drive_exponent - d) },
        chain_gap_slope: SlopeFit { slope: cs, stderr: cse, reference: template.friction_exponent - 1.0 },
    })
}
