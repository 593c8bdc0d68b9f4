//! Named self-checks: the reduction and plumbing examples of every module plus
//! the module invariants, each cheap enough for a serial run in minutes.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use crate::config::parse_config_str;
use crate::ensemble::PathMatrix;
use crate::error::Error;
use crate::exec::Exec;
use crate::io::{write_paths_csv, OutputHeader};
use crate::kfp::{self, evolve_density, evolve_gaussian, kernel_symbol, symbol_psi, DensityField};
use crate::limit_gauss::{prefactor, sample_fbm_direct, sample_limit_paths, uniform_grid, CovarianceModel, JITTER_MAX};
use crate::mass_laws::{LevyCouple, MassFamily, MassLaw, VarianceFn};
use crate::params::{validate_regime, MassLawMeta, SystemConfig};
use crate::particle_sim::{
    conditional_cov_check, point_mass_scheme_variance, simulate_chain, simulate_chain_unchecked, simulate_full_system,
    step_ou_exact, CHAIN_LIMIT, CHAIN_POSITION, POSITION,
};
use crate::quad;
use crate::rng::{stream, Purpose};
use crate::stats::{
    empirical_cov, fit_exponent, gaussianity, gaussianity_test, ks_one_sample, ks_two_sample, msd, Averaging, MsdCurve,
};
use crate::superstat::{
    conditional_variance, sample_mixing, sample_superstat_paths, total_variance, ALaw, HLaw, MixingLaw, SuperstatModel,
};

type Outcome = std::result::Result<String, String>;

pub struct Check {
    pub name: &'static str,
    run: fn(&Context) -> Outcome,
}

/// What every check may use: the execution mode and a scratch directory.
pub struct Context<'a> {
    pub exec: Exec,
    pub scratch: &'a Path,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} ({:.2} s): {}", self.name, self.seconds, self.detail)
    }
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: Error) -> String {
    format!("unexpected error: {e}")
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn catalogue() -> Vec<LevyCouple> {
    vec![
        LevyCouple::Stable { hurst: 0.75 },
        LevyCouple::StableSum { hursts: vec![0.6, 0.9] },
        LevyCouple::Tempered { hurst: 0.75 },
        LevyCouple::Exponential { rate: 1.0 },
        LevyCouple::Saturated,
        LevyCouple::UnitJump,
        LevyCouple::SqrtExp,
        LevyCouple::LogRatio,
        LevyCouple::GammaProcess,
        LevyCouple::GammaCompound { alpha: 0.5 },
    ]
}

fn wiener_cfg(particles: usize, n_steps: usize) -> SystemConfig {
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
        n_steps,
        seed: 1,
    }
}

fn wiener_law(particles: usize) -> MassLaw {
    MassLaw::new(MassFamily::DiracAtNPower, particles, 0.0, 0.1).expect("valid point-mass law")
}

fn unit_model(amplitude: ALaw, hurst: HLaw) -> SuperstatModel {
    SuperstatModel::unit(MixingLaw { amplitude, hurst })
}

const MINIMAL_CONFIG: &str = "schema_version = 1\n\n[system]\nM = 1.0\nsigma = 1.0\ngamma = 1.0\nC_alpha = 1.0\nC_beta = 1.0\na = 0.8\nb = 0.25\nd = 0.2\nN = 256\nt0 = 1.0\nn_steps = 32\nseed = 5\n\n[mass_law]\nfamily = \"fbm\"\nH = 0.75\n";

// ---- params ----

fn regime_closure_violation(_: &Context) -> Outcome {
    let cfg = SystemConfig::unit(0.5, 0.25, 100);
    let meta = MassLawMeta { floor_exponent: 0.1, moment_exponent: 0.2, normalizer_exponent: 0.1, limit_constant: 1.0 };
    let report = validate_regime(&cfg, &meta).map_err(fail)?;
    let failed: Vec<&str> = report.failures().map(|c| c.condition).collect();
    ensure(failed == ["2(a-b) - delta = 1"], format!("failed conditions {failed:?}"))
}

fn unit_constants(_: &Context) -> Outcome {
    let k = SystemConfig::unit(0.8, 0.25, 10_000).derive();
    let ok = (k.diffusivity - 1.0).abs() < 1e-15
        && (k.total_friction - 10_000f64.powf(0.2)).abs() < 1e-12
        && (k.beta0(1.0) - 0.9).abs() < 1e-12;
    ensure(ok, format!("D = {}, total friction = {:.4}, beta0(1) = {}", k.diffusivity, k.total_friction, k.beta0(1.0)))
}

fn regime_is_pure(_: &Context) -> Outcome {
    let cfg = SystemConfig::unit(0.8, 0.25, 1000);
    let meta = MassFamily::StablePower { hurst: 0.75 }.meta(0.2, 0.1);
    let a = validate_regime(&cfg, &meta).map_err(fail)?;
    let b = validate_regime(&cfg, &meta).map_err(fail)?;
    ensure(a == b && a.passed(), format!("{a}"))
}

fn fluctuation_dissipation(_: &Context) -> Outcome {
    let mut cfg = SystemConfig::unit(0.8, 0.25, 4096);
    cfg.sigma = 1.7;
    cfg.gamma = 2.3;
    let k = cfg.derive();
    let worst = [0.3, 1.0, 4.5]
        .iter()
        .map(|&m| ((k.sigma0(m) / (m * m) - cfg.sigma).abs()).max((k.beta0(m) + k.beta - cfg.gamma * m * m).abs()))
        .fold(0.0, f64::max);
    ensure(worst < 1e-12, format!("largest identity residual {worst:.2e}"))
}

// ---- mass_laws ----

fn dirac_draws(_: &Context) -> Outcome {
    let mut rng = stream(1, Purpose::Auxiliary, 0, 0);
    let n_power = wiener_law(1024);
    let one = MassLaw::new(MassFamily::DiracAtOne, 1024, 0.0, 0.0).map_err(fail)?;
    let target = 1024f64.powf(0.05);
    let ok = (0..1000).all(|_| n_power.sample(&mut rng) == target && one.sample(&mut rng) == 1.0);
    ensure(ok, format!("point masses {target} and 1"))
}

fn stable_support(_: &Context) -> Outcome {
    let law = MassLaw::new(MassFamily::StablePower { hurst: 0.75 }, 4096, 0.2, 0.1).map_err(fail)?;
    let mut rng = stream(2, Purpose::Auxiliary, 0, 0);
    let draws = law.sample_n(100_000, &mut rng);
    let ok = draws.iter().all(|&m| m > law.floor && m <= law.ceiling);
    ensure(ok, format!("support ({:.4}, {:.4}]", law.floor, law.ceiling))
}

fn zero_arguments(_: &Context) -> Outcome {
    let law = MassLaw::new(MassFamily::StablePower { hurst: 0.75 }, 1024, 0.2, 0.1).map_err(fail)?;
    let e0 = law.e_n(1.0, 0.0).map_err(fail)?;
    for c in catalogue() {
        let phi = c.phi(0.0).map_err(fail)?;
        let v = VarianceFn::new(c.clone(), 1.3).map_err(fail)?.value(0.0);
        if phi != 0.0 || v != 0.0 {
            return Err(format!("{c:?}: Phi(0) = {phi}, v(0) = {v}"));
        }
    }
    ensure(e0 == 0.0, format!("e_N(0) = {e0}; Phi(0) = v(0) = 0 for {} couples", catalogue().len()))
}

fn variance_is_integrated_rate(_: &Context) -> Outcome {
    let mut worst: f64 = 0.0;
    for c in catalogue() {
        let v = VarianceFn::new(c, 1.3).map_err(fail)?;
        for i in 1..=64 {
            let t = 2.0 * i as f64 / 64.0;
            let q = quad::integrate(|tau| v.rate(tau), 0.0, t, 1e-13).map_err(fail)?;
            worst = worst.max((q - v.value(t)).abs());
        }
    }
    ensure(worst < 1e-8, format!("largest |v - integral of rate| {worst:.2e}"))
}

fn normalized_integral_monotone(_: &Context) -> Outcome {
    let v = MassFamily::StablePower { hurst: 0.75 }.variance_fn(1.0).map_err(fail)?;
    for t in [0.1, 1.0] {
        let mut prev = 0.0;
        for k in 6..=14 {
            let law = MassLaw::new(MassFamily::StablePower { hurst: 0.75 }, 1 << k, 0.2, 0.1).map_err(fail)?;
            let r = law.e_n(1.0, t).map_err(fail)? / law.normalizer;
            if r < prev || r >= v.rate(t) {
                return Err(format!("t={t}, N=2^{k}: ratio {r} after {prev}, limit {}", v.rate(t)));
            }
            prev = r;
        }
    }
    Ok("nondecreasing in N and below the Laplace exponent for N = 2^6..2^14".into())
}

fn sampler_ks(_: &Context) -> Outcome {
    let law = MassLaw::new(MassFamily::StablePower { hurst: 0.75 }, 4096, 0.2, 0.1).map_err(fail)?;
    let mut rng = stream(3, Purpose::Auxiliary, 0, 0);
    let draws = law.sample_n(100_000, &mut rng);
    let ks = ks_one_sample(&draws, |y| law.cdf(y)).map_err(fail)?;
    ensure(ks.p_value > 0.01, format!("D = {:.4e}, p = {:.3}", ks.statistic, ks.p_value))
}

fn inverse_fourth_moment_bounded(_: &Context) -> Outcome {
    let cases = [
        (MassFamily::StablePower { hurst: 0.75 }, 0.2, 0.1),
        (MassFamily::TemperedStable { hurst: 0.75 }, 0.1, 0.0),
    ];
    let mut detail = Vec::new();
    for (family, d, delta) in cases {
        let mut ratios = Vec::new();
        for k in 6..=14 {
            let law = MassLaw::new(family.clone(), 1 << k, d, delta).map_err(fail)?;
            ratios.push(law.inverse_fourth_moment().map_err(fail)? / ((1u64 << k) as f64).powf(law.meta.moment_exponent));
        }
        let max = ratios.iter().copied().fold(0.0, f64::max);
        if max > 1.5 * ratios[0] {
            return Err(format!("{}: ratios {ratios:?}", family.name()));
        }
        detail.push(format!("{} max/first {:.3}", family.name(), max / ratios[0]));
    }
    Ok(detail.join(", "))
}

// ---- particle_sim ----

fn ou_zero_step(_: &Context) -> Outcome {
    let mut rng = stream(4, Purpose::Auxiliary, 0, 0);
    let ok = [-1.3, 0.0, 2.5].iter().all(|&u| step_ou_exact(u, 1.2, 0.7, 1.1, 0.0, &mut rng) == u);
    ensure(ok, "zero step returns its input".into())
}

fn ou_marginal_variance(_: &Context) -> Outcome {
    let (m, gamma, sigma, dt) = (0.8, 1.5, 1.2, 0.3);
    let stat: f64 = sigma / (gamma * m);
    let finals: Vec<f64> = (0..20_000)
        .map(|i| {
            let mut rng = stream(5, Purpose::Auxiliary, i, 0);
            let mut u = stat.sqrt() * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal);
            for _ in 0..10 {
                u = step_ou_exact(u, m, gamma, sigma, dt, &mut rng);
            }
            u * u
        })
        .collect();
    let (v, se) = mean_se(&finals);
    ensure((v - stat).abs() < 3.0 * se, format!("variance {v:.4} ± {se:.4} vs {stat:.4}"))
}

fn decoupled_rest(_: &Context) -> Outcome {
    let mut cfg = wiener_cfg(32, 32);
    cfg.drive_scale = 0.0;
    let ens = simulate_chain_unchecked(&cfg, &wiener_law(32), 4, 1).map_err(fail)?;
    let still = [POSITION, CHAIN_POSITION].iter().all(|k| ens.get(k).is_some_and(|p| p.as_slice().iter().all(|&x| x == 0.0)));
    ensure(still, "X and Xtilde vanish identically without forcing".into())
}

fn light_particle_chain(ctx: &Context) -> Outcome {
    let mut cfg = wiener_cfg(64, 256);
    cfg.test_mass = 1e-12;
    let ens = simulate_chain(&cfg, &wiener_law(64), 8, 5, ctx.exec).map_err(fail)?;
    let (xt, zt) = (ens.get(CHAIN_POSITION).expect("chain"), ens.get(CHAIN_LIMIT).expect("chain"));
    let gap = xt.minus(zt).map_err(fail)?.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let scale = zt.as_slice().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    ensure(gap < 1e-9 * scale, format!("max |Xtilde - Ztilde| = {gap:.2e}, scale {scale:.2e}"))
}

fn conditional_cov_origin(_: &Context) -> Outcome {
    let cfg = wiener_cfg(64, 16);
    let r = conditional_cov_check(&cfg, &wiener_law(64), &[1.2; 64], 0.0, 0.0).map_err(fail)?;
    ensure(r == (0.0, 0.0), format!("{r:?}"))
}

fn noise_sharing(_: &Context) -> Outcome {
    let mut cfg = wiener_cfg(16, 64);
    cfg.friction_scale = 1e-300;
    let ens = simulate_chain_unchecked(&cfg, &wiener_law(16), 4, 9).map_err(fail)?;
    ensure(ens.get(POSITION) == ens.get(CHAIN_POSITION), "X equals Xtilde bitwise without back-reaction".into())
}

fn determinism(_: &Context) -> Outcome {
    let cfg = wiener_cfg(32, 32);
    let law = wiener_law(32);
    let a = simulate_chain(&cfg, &law, 6, 21, Exec::Serial).map_err(fail)?;
    let b = simulate_chain(&cfg, &law, 6, 21, Exec::Serial).map_err(fail)?;
    let c = simulate_chain(&cfg, &law, 6, 21, Exec::Parallel).map_err(fail)?;
    ensure(a == b && a == c, "serial reruns and parallel run agree bitwise".into())
}

fn dt_halving(_: &Context) -> Outcome {
    let mut detail = Vec::new();
    for particles in [256, 4096] {
        let law = wiener_law(particles);
        let coarse = point_mass_scheme_variance(&wiener_cfg(particles, 512), &law).map_err(fail)?;
        let fine = point_mass_scheme_variance(&wiener_cfg(particles, 1024), &law).map_err(fail)?;
        let change = (coarse / fine - 1.0).abs();
        if change >= 5e-3 {
            return Err(format!("N={particles}: relative change {change:.2e}"));
        }
        detail.push(format!("N={particles}: {change:.1e}"));
    }
    Ok(format!("relative change of Var X(1) under halving: {}", detail.join(", ")))
}

fn refusals(_: &Context) -> Outcome {
    let mut cfg = wiener_cfg(16, 16);
    cfg.drive_scale = 100.0;
    let friction = simulate_full_system(&cfg, &wiener_law(16), 2, 1, Exec::Serial);
    let mut cfg = wiener_cfg(16, 16);
    cfg.friction_exponent = 0.5;
    let regime = simulate_full_system(&cfg, &wiener_law(16), 2, 1, Exec::Serial);
    ensure(
        matches!(friction, Err(Error::NonPositiveFriction { .. })) && matches!(regime, Err(Error::Regime(_))),
        "non-positive friction and regime violations refuse to run".into(),
    )
}

// ---- limit_gauss ----

fn wiener_min_kernel(_: &Context) -> Outcome {
    let grid = uniform_grid(2.0, 16);
    let model = CovarianceModel::new(VarianceFn::new(LevyCouple::Saturated, 1.0).map_err(fail)?, 2.0, grid.clone())
        .map_err(fail)?;
    let worst = grid
        .iter()
        .flat_map(|&t| grid.iter().map(move |&s| (t, s)))
        .map(|(t, s)| (model.covariance(t, s) - 2.0 * t.min(s)).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-14, format!("max |Cov - K min(t,s)| {worst:.2e}"))
}

fn brownian_increments(ctx: &Context) -> Outcome {
    let grid = uniform_grid(1.0, 16);
    let ens = sample_fbm_direct(0.5, &grid, 10_000, 6, ctx.exec).map_err(fail)?;
    let p = ens.primary();
    let prods: Vec<f64> = p.rows().map(|r| (r[2] - r[1]) * (r[3] - r[2])).collect();
    let (m, se) = mean_se(&prods);
    ensure(m.abs() < 3.0 * se, format!("lag-1 increment covariance {m:.2e} ± {se:.2e}"))
}

fn positive_definite_catalogue(_: &Context) -> Outcome {
    for c in catalogue() {
        let model = CovarianceModel::new(VarianceFn::new(c.clone(), 1.0).map_err(fail)?, 2.0, uniform_grid(1.0, 512))
            .map_err(fail)?;
        let trace_mean = model.covariance_matrix().iter().step_by(513).sum::<f64>() / 512.0;
        let f = model.factor().map_err(|e| format!("{c:?}: {e}"))?;
        if f.jitter > JITTER_MAX * trace_mean {
            return Err(format!("{c:?}: jitter {}", f.jitter));
        }
    }
    Ok(format!("{} kernels factor on 512 points", catalogue().len()))
}

fn self_similarity(_: &Context) -> Outcome {
    let v = VarianceFn::fbm(0.75, 1.0).map_err(fail)?;
    let grid = uniform_grid(1.0, 12);
    let mut worst: f64 = 0.0;
    for c in [0.5, 2.0] {
        for &t in &grid {
            for &s in &grid {
                let lhs = v.kernel(c * t, c * s);
                let rhs = c.powf(1.5) * v.kernel(t, s);
                worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-300));
            }
        }
    }
    ensure(worst < 1e-12, format!("relative deviation {worst:.2e}"))
}

fn limit_marginals_gaussian(ctx: &Context) -> Outcome {
    let model = CovarianceModel::new(VarianceFn::fbm(0.75, 1.0).map_err(fail)?, 2.0, uniform_grid(1.0, 8)).map_err(fail)?;
    let ens = sample_limit_paths(&model, 10_000, 7, ctx.exec).map_err(fail)?;
    let r = gaussianity_test(ens.primary(), &ens.grid, 1.0).map_err(fail)?;
    ensure(
        r.excess_kurtosis().abs() < 3.0 * r.kurtosis_se && !r.rejected_at(0.01),
        format!("kurtosis {:.3} ± {:.3}, KS p = {:.3}", r.kurtosis, r.kurtosis_se, r.ks.p_value),
    )
}

// ---- superstat ----

fn degenerate_pairs(_: &Context) -> Outcome {
    let law = MixingLaw { amplitude: ALaw::Degenerate { value: 1.0 }, hurst: HLaw::Degenerate { h: 0.75 } };
    let draws = sample_mixing(&law, 1000, 8).map_err(fail)?;
    ensure(draws.iter().all(|d| d.amplitude == 1.0 && d.hurst == [0.75]), "all pairs equal (1, 0.75)".into())
}

fn uniform_hurst_support(_: &Context) -> Outcome {
    let law = MixingLaw { amplitude: ALaw::Exponential { mean: 1.0 }, hurst: HLaw::Uniform { lo: 0.55, hi: 0.95 } };
    let draws = sample_mixing(&law, 10_000, 9).map_err(fail)?;
    let (lo, hi) = draws.iter().fold((1.0f64, 0.0f64), |(a, b), d| (a.min(d.hurst[0]), b.max(d.hurst[0])));
    ensure(lo > 0.55 && hi < 0.95, format!("sample range [{lo:.4}, {hi:.4}]"))
}

fn degenerate_mixing_reduction(ctx: &Context) -> Outcome {
    let grid = uniform_grid(1.0, 8);
    let model = unit_model(ALaw::Degenerate { value: 1.0 }, HLaw::Degenerate { h: 0.75 });
    let (ens, _) = sample_superstat_paths(&model, &grid, 10_000, 10, ctx.exec).map_err(fail)?;
    let cov = CovarianceModel::new(VarianceFn::fbm(0.75, 1.0).map_err(fail)?, prefactor(1.0, 1.0, 1.0, 1.0, 1.0), grid)
        .map_err(fail)?;
    let lim = sample_limit_paths(&cov, 10_000, 11, ctx.exec).map_err(fail)?;
    let ks = ks_two_sample(&ens.primary().column(8), &lim.primary().column(8)).map_err(fail)?;
    ensure(ks.p_value > 0.01, format!("two-sample KS p = {:.3}", ks.p_value))
}

fn superstat_variances(_: &Context) -> Outcome {
    let model = unit_model(ALaw::Degenerate { value: 1.0 }, HLaw::Degenerate { h: 0.75 });
    let zero = conditional_variance(&model, &[0.75], 0.0);
    let gap = (total_variance(&model, 0.7) - conditional_variance(&model, &[0.75], 0.7)).abs();
    let mixed = unit_model(ALaw::Exponential { mean: 1.0 }, HLaw::Uniform { lo: 0.55, hi: 0.95 });
    let pure = total_variance(&mixed, 0.8).to_bits() == total_variance(&mixed, 0.8).to_bits();
    ensure(zero == 0.0 && gap < 1e-14 && pure, format!("Var(0) = {zero}, degenerate-H gap {gap:.1e}, pure {pure}"))
}

fn mixture_kurtosis(ctx: &Context) -> Outcome {
    let model = unit_model(ALaw::Exponential { mean: 1.0 }, HLaw::Degenerate { h: 0.75 });
    let (ens, _) = sample_superstat_paths(&model, &uniform_grid(1.0, 4), 10_000, 12, ctx.exec).map_err(fail)?;
    let r = gaussianity_test(ens.primary(), &ens.grid, 1.0).map_err(fail)?;
    let want = model.mixing.amplitude.mixture_kurtosis();
    ensure(
        (r.kurtosis - want).abs() < 3.0 * r.kurtosis_se && r.rejected_at(0.01),
        format!("kurtosis {:.3} ± {:.3} vs {want}, KS p = {:.1e}", r.kurtosis, r.kurtosis_se, r.ks.p_value),
    )
}

fn conditional_gaussianity(ctx: &Context) -> Outcome {
    let model = unit_model(ALaw::Exponential { mean: 1.0 }, HLaw::Discrete { points: vec![0.6, 0.9], weights: vec![0.5, 0.5] });
    let (ens, draws) = sample_superstat_paths(&model, &uniform_grid(1.0, 4), 6_000, 13, ctx.exec).map_err(fail)?;
    let mut detail = Vec::new();
    for h in [0.6, 0.9] {
        let z: Vec<f64> = draws
            .iter()
            .enumerate()
            .filter(|(_, d)| d.hurst[0] == h)
            .map(|(i, d)| ens.primary().get(i, 4) / d.amplitude.sqrt())
            .collect();
        let r = gaussianity(&z).map_err(fail)?;
        if r.rejected_at(0.01) {
            return Err(format!("h = {h}: KS p = {:.4}", r.ks.p_value));
        }
        detail.push(format!("h={h}: p={:.3}", r.ks.p_value));
    }
    Ok(detail.join(", "))
}

// ---- kfp ----

fn symbol_reductions(_: &Context) -> Outcome {
    let model = unit_model(ALaw::Degenerate { value: 1.5 }, HLaw::Degenerate { h: 0.75 });
    let at_zero = symbol_psi(&model, 0.8, 0.0).map_err(fail)?;
    let k_zero = kernel_symbol(&model, 0.8, 0.0).map_err(fail)?;
    let p = 1.3;
    let closed = (-1.5 * model.diffusivity() * model.variance(&[0.75], 0.8) * p * p / 2.0).exp();
    let gap = (symbol_psi(&model, 0.8, p).map_err(fail)? - closed).abs();
    ensure(at_zero == 1.0 && k_zero == 0.0 && gap < 1e-15, format!("Psi(t,0) = {at_zero}, K(s,0) = {k_zero}, gap {gap:.1e}"))
}

fn zero_time_identity(_: &Context) -> Outcome {
    let model = unit_model(ALaw::Exponential { mean: 1.0 }, HLaw::Degenerate { h: 0.75 });
    let u0 = DensityField::gaussian(0.3, 2048, 12.0).map_err(fail)?;
    let u = evolve_density(&model, &u0, 0.0).map_err(fail)?;
    let worst = u.values.iter().zip(&u0.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(worst < 1e-14, format!("max change {worst:.1e}"))
}

fn density_invariants(ctx: &Context) -> Outcome {
    let model = unit_model(ALaw::Exponential { mean: 1.0 }, HLaw::Uniform { lo: 0.55, hi: 0.95 });
    let var0 = 0.1;
    let outs = evolve_gaussian(&model, var0, &[1.0], kfp::DEFAULT_POINTS, 3, ctx.exec).map_err(fail)?;
    let u = &outs[0];
    let n = u.values.len();
    let u0 = DensityField::gaussian(var0, n, -u.x_grid[0]).map_err(fail)?;
    let mass = (u.mass() - u0.mass()).abs();
    let asym = (1..n / 2).map(|j| (u.values[j] - u.values[n - j]).abs()).fold(0.0, f64::max);
    let growth = u.second_moment() - u0.second_moment();
    let want = total_variance(&model, 1.0);
    ensure(
        mass < 1e-8 && asym < 1e-12 && (growth - want).abs() < 1e-4,
        format!("mass change {mass:.1e}, asymmetry {asym:.1e}, variance growth {growth:.6} vs {want:.6}"),
    )
}

fn one_shot_evolution(_: &Context) -> Outcome {
    let model = unit_model(ALaw::Exponential { mean: 1.0 }, HLaw::Degenerate { h: 0.75 });
    let u0 = DensityField::gaussian(0.1, 8192, 60.0).map_err(fail)?;
    let a = evolve_density(&model, &u0, 1.0).map_err(fail)?;
    let b = evolve_density(&model, &u0, 0.5 + 0.5).map_err(fail)?;
    let composed = evolve_density(&model, &evolve_density(&model, &u0, 0.5).map_err(fail)?, 0.5).map_err(fail)?;
    let gap: f64 = composed.values.iter().zip(&a.values).map(|(x, y)| (x - y).abs()).sum::<f64>() * u0.dx();
    ensure(a == b && gap > 1e-3, format!("one-shot reproducible; composition differs by L1 {gap:.3}"))
}

// ---- stats ----

fn constant_path_msd(_: &Context) -> Outcome {
    let grid = uniform_grid(1.0, 10);
    let grid0: Vec<f64> = std::iter::once(0.0).chain(grid.iter().copied()).collect();
    let paths = PathMatrix::from_rows(11, [vec![2.5; 11]]).map_err(fail)?;
    let curve = msd(&paths, &grid0, &grid[..5], Averaging::TimeAndEnsemble).map_err(fail)?;
    ensure(curve.values.iter().all(|&v| v == 0.0), format!("{:?}", curve.values))
}

fn exact_power_slope(_: &Context) -> Outcome {
    let lags: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
    let curve = MsdCurve {
        values: lags.iter().map(|l: &f64| l.powf(1.5)).collect(),
        stderr: lags.iter().map(|l: &f64| 0.01 * l.powf(1.5)).collect(),
        lags,
        n_traj: 1,
    };
    let fit = fit_exponent(&curve, (0.05, 1.0)).map_err(fail)?;
    let mut scaled = curve.clone();
    scaled.values.iter_mut().for_each(|v| *v *= 7.3);
    scaled.stderr.iter_mut().for_each(|v| *v *= 7.3);
    let refit = fit_exponent(&scaled, (0.05, 1.0)).map_err(fail)?;
    ensure(
        (fit.slope - 1.5).abs() < 1e-12 && (refit.slope - fit.slope).abs() < 1e-12,
        format!("slope {:.15}, rescaled {:.15}", fit.slope, refit.slope),
    )
}

fn zero_ensemble_cov(_: &Context) -> Outcome {
    let grid = vec![0.0, 0.5, 1.0];
    let est = empirical_cov(&PathMatrix::zeros(10, 3), &grid, &[0.5, 1.0]).map_err(fail)?;
    ensure(est.cov.iter().all(|&c| c == 0.0), format!("{:?}", est.cov))
}

fn estimators_deterministic(ctx: &Context) -> Outcome {
    let model = CovarianceModel::new(VarianceFn::fbm(0.75, 1.0).map_err(fail)?, 2.0, uniform_grid(1.0, 32)).map_err(fail)?;
    let ens = sample_limit_paths(&model, 500, 14, ctx.exec).map_err(fail)?;
    let lags: Vec<f64> = ens.grid[1..9].to_vec();
    let a = msd(ens.primary(), &ens.grid, &lags, Averaging::TimeAndEnsemble).map_err(fail)?;
    let b = msd(ens.primary(), &ens.grid, &lags, Averaging::TimeAndEnsemble).map_err(fail)?;
    let ga = gaussianity_test(ens.primary(), &ens.grid, 1.0).map_err(fail)?;
    let gb = gaussianity_test(ens.primary(), &ens.grid, 1.0).map_err(fail)?;
    ensure(a == b && ga == gb, "repeated estimates are identical".into())
}

fn limit_and_particle_msd_agree(ctx: &Context) -> Outcome {
    let particles = 4096;
    // Fast surround relaxation so that the inertial layer is far below the lags.
    let mut cfg = wiener_cfg(particles, 128);
    cfg.gamma = 100.0;
    cfg.drive_scale = 70.0;
    let law = wiener_law(particles);
    let sim = simulate_full_system(&cfg, &law, 400, 15, ctx.exec).map_err(fail)?;
    let k = cfg.derive().limit_prefactor;
    let model = CovarianceModel::new(VarianceFn::new(LevyCouple::Saturated, 1.0).map_err(fail)?, k, cfg.grid()[1..].to_vec())
        .map_err(fail)?;
    let lim = sample_limit_paths(&model, 4000, 16, ctx.exec).map_err(fail)?;
    let lags: Vec<f64> = [16, 32, 64, 128].iter().map(|&j| sim.grid[j]).collect();
    let a = msd(sim.primary(), &sim.grid, &lags, Averaging::EnsembleOnly).map_err(fail)?;
    let b = msd(lim.primary(), &lim.grid, &lags, Averaging::EnsembleOnly).map_err(fail)?;
    let worst = (0..lags.len())
        .map(|i| (a.values[i] - b.values[i]).abs() / a.stderr[i].hypot(b.stderr[i]))
        .fold(0.0, f64::max);
    ensure(worst < 3.0, format!("largest MSD gap {worst:.2} combined s.e."))
}

// ---- cli_io ----

fn config_examples(_: &Context) -> Outcome {
    let ok = parse_config_str(MINIMAL_CONFIG).map_err(fail)?;
    let regime = parse_config_str(&MINIMAL_CONFIG.replace("a = 0.8", "a = 0.3"));
    let unknown = parse_config_str(&MINIMAL_CONFIG.replace("H = 0.75", "H = 0.75\nhurst = 0.7"));
    let regime_ok = matches!(&regime, Err(Error::Regime(m)) if m.contains("2(a-b) - delta = 1") || m.contains("delta >= 0"));
    let unknown_ok = matches!(&unknown, Err(Error::Config(e)) if e.len() == 1 && e[0].message.contains("valid keys"));
    ensure(
        ok.report.passed() && regime_ok && unknown_ok,
        format!("minimal parses (delta = {}), a = 0.3 and `hurst` rejected", ok.system.normalizer_exponent),
    )
}

fn csv_byte_identical(ctx: &Context) -> Outcome {
    // Heavy enough friction that every sampled mass keeps a positive bare friction.
    let cfg = parse_config_str(&MINIMAL_CONFIG.replace("gamma = 1.0", "gamma = 20.0")).map_err(fail)?;
    let law = cfg.mass_law().map_err(fail)?;
    let write = |name: &str| -> std::result::Result<Vec<u8>, String> {
        let ens = simulate_full_system(&cfg.system, &law, 3, cfg.system.seed, Exec::Serial).map_err(fail)?;
        let header = OutputHeader::new(crate::manifest::config_hash(&cfg), cfg.system.seed).with(cfg.echo());
        let path = ctx.scratch.join(name);
        write_paths_csv(&path, &ens.grid, ens.primary(), &header).map_err(fail)?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        std::fs::remove_file(&path).map_err(|e| e.to_string())?;
        Ok(bytes)
    };
    let (a, b) = (write("selftest_a.csv")?, write("selftest_b.csv")?);
    ensure(a == b && a.starts_with(b"# config_hash="), format!("{} identical bytes", a.len()))
}

pub fn checks() -> Vec<Check> {
    macro_rules! list {
        ($($name:literal => $f:ident),* $(,)?) => { vec![$(Check { name: $name, run: $f }),*] };
    }
    list![
        "params.closure_violation_named" => regime_closure_violation,
        "params.unit_constants" => unit_constants,
        "params.regime_check_is_pure" => regime_is_pure,
        "params.fluctuation_dissipation" => fluctuation_dissipation,
        "mass_laws.dirac_draws" => dirac_draws,
        "mass_laws.stable_support" => stable_support,
        "mass_laws.zero_arguments" => zero_arguments,
        "mass_laws.variance_integrates_rate" => variance_is_integrated_rate,
        "mass_laws.normalized_integral_monotone" => normalized_integral_monotone,
        "mass_laws.sampler_ks" => sampler_ks,
        "mass_laws.inverse_fourth_moment_bounded" => inverse_fourth_moment_bounded,
        "particle_sim.ou_zero_step" => ou_zero_step,
        "particle_sim.ou_marginal_variance" => ou_marginal_variance,
        "particle_sim.decoupled_rest" => decoupled_rest,
        "particle_sim.light_particle_chain" => light_particle_chain,
        "particle_sim.conditional_cov_origin" => conditional_cov_origin,
        "particle_sim.noise_sharing" => noise_sharing,
        "particle_sim.determinism" => determinism,
        "particle_sim.dt_halving" => dt_halving,
        "particle_sim.refusals" => refusals,
        "limit_gauss.wiener_min_kernel" => wiener_min_kernel,
        "limit_gauss.brownian_increments" => brownian_increments,
        "limit_gauss.positive_definite_catalogue" => positive_definite_catalogue,
        "limit_gauss.self_similarity" => self_similarity,
        "limit_gauss.gaussian_marginals" => limit_marginals_gaussian,
        "superstat.degenerate_pairs" => degenerate_pairs,
        "superstat.uniform_support" => uniform_hurst_support,
        "superstat.degenerate_reduction" => degenerate_mixing_reduction,
        "superstat.variances" => superstat_variances,
        "superstat.mixture_kurtosis" => mixture_kurtosis,
        "superstat.conditional_gaussianity" => conditional_gaussianity,
        "kfp.symbol_reductions" => symbol_reductions,
        "kfp.zero_time_identity" => zero_time_identity,
        "kfp.density_invariants" => density_invariants,
        "kfp.one_shot_evolution" => one_shot_evolution,
        "stats.constant_path_msd" => constant_path_msd,
        "stats.exact_power_slope" => exact_power_slope,
        "stats.zero_ensemble_cov" => zero_ensemble_cov,
        "stats.estimators_deterministic" => estimators_deterministic,
        "stats.limit_and_particle_msd_agree" => limit_and_particle_msd_agree,
        "cli_io.config_examples" => config_examples,
        "cli_io.csv_byte_identical" => csv_byte_identical,
    ]
}

/// Runs every check whose name contains `filter`; panics count as failures.
pub fn run(ctx: &Context, filter: Option<&str>) -> Vec<CheckResult> {
    checks()
        .into_iter()
        .filter(|c| filter.map_or(true, |f| c.name.contains(f)))
        .map(|c| {
            let start = Instant::now();
            let outcome = catch_unwind(AssertUnwindSafe(|| (c.run)(ctx)))
                .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
            let (passed, detail) = match outcome {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult { name: c.name, passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}
