use std::fmt;
use std::path::Path;

use anodiff::config::{parse_a_law, parse_config, parse_h_law, RunConfig};
use anodiff::io::{read_paths_bin, read_paths_csv, scaling_summary, write_density_csv, write_mixing_csv, write_msd_csv, write_scaling_csv, OutputHeader};
use anodiff::kfp::evolve_gaussian;
use anodiff::limit_gauss::{log_grid, prefactor, sample_limit_paths, uniform_grid, CovarianceModel};
use anodiff::manifest::config_hash;
use anodiff::particle_sim::{simulate_chain, simulate_full_system, CHAIN_LIMIT, CHAIN_POSITION, POSITION};
use anodiff::selftest::{self, Context};
use anodiff::stats::{convergence_sweep, fit_exponent, gaussianity_test, msd, Averaging};
use anodiff::superstat::{sample_superstat_paths, HurstFamily, MixingLaw, SuperstatModel, DEFAULT_BUCKET};
use anodiff::{Exec, LevyCouple, VarianceFn};
use anyhow::{anyhow, bail, Context as _, Result};
use serde_json::json;

use crate::output::OutputDir;
use crate::{AveragingArg, Command, Common, Format, HurstFamilyArg, LimitArgs, SuperstatArgs};

/// Some self-checks failed.
#[derive(Debug)]
pub struct ChecksFailed(pub usize);

impl fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} self-check(s) failed", self.0)
    }
}

impl std::error::Error for ChecksFailed {}

/// Resolved execution settings: flags win over the configuration file.
struct Run {
    exec: Exec,
    seed: u64,
}

fn resolve(common: &Common, cfg: Option<&RunConfig>) -> Result<Run> {
    let serial = common.serial || cfg.is_some_and(|c| c.run.serial);
    let threads = common.threads.or(cfg.and_then(|c| c.run.threads));
    if let Some(n) = threads {
        if n == 0 {
            bail!(anodiff::Error::InvalidParameter { name: "threads", reason: "must be positive".into() });
        }
        set_threads(n)?;
    }
    let seed = common.seed.or(cfg.map(|c| c.system.seed)).unwrap_or(0);
    Ok(Run { exec: Exec::from_serial_flag(serial), seed })
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot size the worker pool")
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) -> Result<()> {
    Ok(())
}

fn header(inputs: serde_json::Value, seed: u64) -> OutputHeader {
    OutputHeader::new(config_hash(&json!({ "inputs": inputs, "seed": seed })), seed)
}

pub fn dispatch(common: &Common, command: Command, argv: Vec<String>) -> Result<()> {
    match command {
        Command::Simulate { config, observables, n_traj, format } => simulate(common, &config, &observables, n_traj, format, argv),
        Command::LimitSample(args) => limit_sample(common, &args, argv),
        Command::Superstat(args) => superstat(common, &args, argv),
        Command::Kfp { config, times, u0, points, max_doublings } => kfp(common, &config, &times, &u0, points, max_doublings, argv),
        Command::Estimate { input, lags, averaging, window, at } => estimate(common, &input, lags, averaging, window, at, argv),
        Command::Converge { config, n_list, n_traj } => converge(common, &config, &n_list, n_traj, argv),
        Command::Selftest { filter } => run_selftest(common, filter.as_deref(), argv),
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    parse_config(path).map_err(anyhow::Error::from).with_context(|| format!("reading {}", path.display()))
}

fn simulate(common: &Common, path: &Path, observables: &[String], n_traj: Option<usize>, format: Format, argv: Vec<String>) -> Result<()> {
    let cfg = load(path)?;
    let run = resolve(common, Some(&cfg))?;
    for o in observables {
        if ![POSITION, CHAIN_POSITION, CHAIN_LIMIT].contains(&o.as_str()) {
            bail!(anodiff::Error::Format(format!("unknown observable {o:?}; valid: X, Xtilde, Ztilde")));
        }
    }
    let n_traj = n_traj.unwrap_or(cfg.run.n_traj);
    let mut system = cfg.system.clone();
    system.seed = run.seed;
    let law = cfg.mass_law()?;
    log::info!("simulating {n_traj} trajectories with N = {} ({} steps)", system.particles, system.n_steps);
    let chain = observables.iter().any(|o| o != POSITION);
    let ens = if chain {
        simulate_chain(&system, &law, n_traj, run.seed, run.exec)?
    } else {
        simulate_full_system(&system, &law, n_traj, run.seed, run.exec)?
    };
    let inputs = json!({ "command": "simulate", "system": system, "mass_law": cfg.mass_family, "n_traj": n_traj });
    let mut h = header(inputs, run.seed);
    h.entries = cfg.echo();
    let mut out = OutputDir::create(&common.out, argv, h, run.exec == Exec::Serial)?;
    for o in observables {
        let paths = ens.get(o).ok_or_else(|| anyhow!("observable {o} was not simulated"))?;
        out.write_paths(o, format, &ens.grid, paths, &ens.snapshot)?;
    }
    out.finish()
}

fn limit_couple(args: &LimitArgs) -> Result<LevyCouple> {
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| anyhow!(anodiff::Error::Format(format!("family {} needs --{key}", args.family))));
    Ok(match args.family.as_str() {
        "fbm" | "stable" => LevyCouple::Stable { hurst: need(args.hurst, "H")? },
        "stable-sum" => LevyCouple::StableSum {
            hursts: args.hursts.clone().ok_or_else(|| anyhow!(anodiff::Error::Format("stable-sum needs --Hs".into())))?,
        },
        "tempered" => LevyCouple::Tempered { hurst: need(args.hurst, "H")? },
        "exponential" => LevyCouple::Exponential { rate: need(args.rate, "rate")? },
        "wiener" => LevyCouple::Saturated,
        "unit-jump" => LevyCouple::UnitJump,
        "sqrt-exp" => LevyCouple::SqrtExp,
        "log-ratio" => LevyCouple::LogRatio,
        "gamma" => LevyCouple::GammaProcess,
        "gamma-compound" => LevyCouple::GammaCompound { alpha: need(args.alpha, "alpha")? },
        other => bail!(anodiff::Error::Format(format!(
            "unknown family {other:?}; valid: fbm, stable-sum, tempered, exponential, wiener, unit-jump, sqrt-exp, log-ratio, gamma, gamma-compound"
        ))),
    })
}

fn time_grid(horizon: f64, n_steps: usize, log: Option<&[f64]>) -> Result<Vec<f64>> {
    match log {
        Some([lo, hi, n]) => {
            if !(*lo > 0.0 && hi > lo && *n >= 2.0 && n.fract() == 0.0) {
                bail!(anodiff::Error::Format(format!("log grid needs 0 < lo < hi and an integer n >= 2, got {lo},{hi},{n}")));
            }
            Ok(log_grid(*lo, *hi, *n as usize))
        }
        Some(_) => bail!(anodiff::Error::Format("log grid takes lo,hi,n".into())),
        None => {
            if n_steps == 0 || !(horizon > 0.0) {
                bail!(anodiff::Error::Format("the time grid needs a positive horizon and step count".into()));
            }
            Ok(uniform_grid(horizon, n_steps))
        }
    }
}

fn limit_sample(common: &Common, args: &LimitArgs, argv: Vec<String>) -> Result<()> {
    let run = resolve(common, None)?;
    let couple = limit_couple(args)?;
    let variance = VarianceFn::new(couple.clone(), args.gamma)?;
    let k = prefactor(args.sigma, args.gamma, args.friction_scale, args.drive_scale, args.limit_constant);
    let grid = time_grid(args.horizon, args.n_steps, args.log_grid.as_deref())?;
    let model = CovarianceModel::new(variance, k, grid.clone())?;
    log::info!("sampling {} limit paths on {} times", args.n_traj, grid.len());
    let ens = sample_limit_paths(&model, args.n_traj, run.seed, run.exec)?;
    let inputs = json!({ "command": "limit-sample", "couple": couple, "gamma": args.gamma, "K": k, "grid": grid, "n_traj": args.n_traj });
    let h = header(inputs, run.seed).with([
        ("family".to_string(), serde_json::to_string(&couple)?),
        ("gamma".to_string(), args.gamma.to_string()),
        ("K".to_string(), k.to_string()),
    ]);
    let mut out = OutputDir::create(&common.out, argv, h, run.exec == Exec::Serial)?;
    out.write_paths(anodiff::limit_gauss::LIMIT, args.format, &ens.grid, ens.primary(), &ens.snapshot)?;
    out.finish()
}

fn superstat(common: &Common, args: &SuperstatArgs, argv: Vec<String>) -> Result<()> {
    let cfg = args.config.as_deref().map(load).transpose()?;
    let run = resolve(common, cfg.as_ref())?;
    let from_cfg = cfg.as_ref().and_then(RunConfig::superstat_model);
    let mut model = match (&args.a_law, &args.h_law, from_cfg) {
        (Some(a), Some(h), base) => {
            let mixing = MixingLaw { amplitude: parse_a_law(a)?, hurst: parse_h_law(h)? };
            match base {
                Some(m) => SuperstatModel { mixing, ..m },
                None => {
                    let mut m = SuperstatModel::unit(mixing);
                    if let Some(c) = &cfg {
                        m.sigma = c.system.sigma;
                        m.gamma = c.system.gamma;
                        m.drive_scale = c.system.drive_scale;
                        m.limit_constant = c.system.limit_constant;
                    }
                    m
                }
            }
        }
        (None, None, Some(m)) => m,
        _ => bail!(anodiff::Error::Format("give both --A-law and --H-law, or a config with a [mixing] section".into())),
    };
    if let Some(f) = args.family {
        model.family = match f {
            HurstFamilyArg::Stable => HurstFamily::Stable,
            HurstFamilyArg::Tempered => HurstFamily::Tempered,
        };
    }
    if let Some(b) = &args.bucket {
        model.bucket = if b == "exact" {
            None
        } else {
            Some(b.parse().map_err(|_| anodiff::Error::Format(format!("bucket {b:?} is neither a number nor `exact`")))?)
        };
    } else if cfg.is_none() {
        model.bucket = Some(DEFAULT_BUCKET);
    }
    let n_traj = args.n_traj.or(cfg.as_ref().map(|c| c.run.n_traj)).unwrap_or(1000);
    let grid = time_grid(args.horizon, args.n_steps, None)?;
    log::info!("sampling {n_traj} superstatistical paths on {} times", grid.len());
    let (ens, draws) = sample_superstat_paths(&model, &grid, n_traj, run.seed, run.exec)?;
    let inputs = json!({ "command": "superstat", "model": model, "grid": grid, "n_traj": n_traj });
    let h = header(inputs, run.seed).with([("model".to_string(), serde_json::to_string(&model)?)]);
    let mut out = OutputDir::create(&common.out, argv, h, run.exec == Exec::Serial)?;
    out.write_paths(anodiff::limit_gauss::LIMIT, args.format, &ens.grid, ens.primary(), &ens.snapshot)?;
    let path = out.file("mixing.csv")?;
    write_mixing_csv(&path, &draws, &out.header)?;
    out.finish()
}

fn initial_variance(u0: &str) -> Result<f64> {
    let v = u0
        .strip_prefix("gaussian:")
        .and_then(|s| s.trim().parse::<f64>().ok())
        .ok_or_else(|| anodiff::Error::Format(format!("initial density {u0:?} must read gaussian:<variance>")))?;
    if !(v > 0.0 && v.is_finite()) {
        bail!(anodiff::Error::InvalidParameter { name: "u0", reason: format!("variance must be positive, got {v}") });
    }
    Ok(v)
}

fn kfp(common: &Common, path: &Path, times: &[f64], u0: &str, points: usize, max_doublings: u32, argv: Vec<String>) -> Result<()> {
    let cfg = load(path)?;
    let run = resolve(common, Some(&cfg))?;
    let model = cfg
        .superstat_model()
        .ok_or_else(|| anodiff::Error::Format(format!("{} has no [mixing] section", path.display())))?;
    let var0 = initial_variance(u0)?;
    let fields = evolve_gaussian(&model, var0, times, points, max_doublings, run.exec)?;
    let inputs = json!({ "command": "kfp", "model": model, "u0": var0, "times": times, "points": points });
    let mut h = header(inputs, run.seed);
    h.entries = cfg.echo();
    h.entries.push(("u0".into(), u0.into()));
    let mut out = OutputDir::create(&common.out, argv, h, run.exec == Exec::Serial)?;
    for f in &fields {
        log::info!("t = {}: mass {:.12}, second moment {:.6e}", f.t, f.mass(), f.second_moment());
        let path = out.file(&format!("density_t{}.csv", f.t))?;
        write_density_csv(&path, f, &out.header)?;
    }
    out.finish()
}

fn estimate(
    common: &Common,
    input: &Path,
    lags: Option<Vec<f64>>,
    averaging: AveragingArg,
    window: Option<Vec<f64>>,
    at: Option<f64>,
    argv: Vec<String>,
) -> Result<()> {
    let run = resolve(common, None)?;
    let table = match input.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_paths_bin(input)?,
        _ => read_paths_csv(input)?,
    };
    let grid = &table.grid;
    if grid.len() < 3 {
        bail!(anodiff::Error::Format("need at least three grid times".into()));
    }
    let averaging = match averaging {
        AveragingArg::Time => Averaging::TimeAndEnsemble,
        AveragingArg::Ensemble => Averaging::EnsembleOnly,
    };
    let lags = lags.unwrap_or_else(|| match averaging {
        Averaging::TimeAndEnsemble => {
            let dt = grid[1] - grid[0];
            (1..grid.len() / 2).map(|k| k as f64 * dt).collect()
        }
        Averaging::EnsembleOnly => grid[1..].iter().map(|t| t - grid[0]).collect(),
    });
    let curve = msd(&table.paths, grid, &lags, averaging)?;
    let mut summary = format!("input: {}\ntrajectories: {}\n", input.display(), curve.n_traj);
    if let Some(w) = window {
        let fit = fit_exponent(&curve, (w[0], w[1]))?;
        summary.push_str(&format!(
            "MSD exponent on [{}, {}]: {:.4} ± {:.4} ({} lags)\n",
            w[0], w[1], fit.slope, fit.stderr, fit.points
        ));
    }
    let t = at.unwrap_or(grid[grid.len() - 1]);
    let g = gaussianity_test(&table.paths, grid, t)?;
    summary.push_str(&format!(
        "marginal at t = {t}: variance {:.6e}, kurtosis {:.4} ± {:.4}, KS p-value {:.4}\n",
        g.variance, g.kurtosis, g.kurtosis_se, g.ks.p_value
    ));
    let inputs = json!({ "command": "estimate", "source_hash": table.header.config_hash, "lags": lags, "at": t });
    let h = header(inputs, run.seed).with([("source".to_string(), input.display().to_string())]);
    let mut out = OutputDir::create(&common.out, argv, h, run.exec == Exec::Serial)?;
    let path = out.file("msd.csv")?;
    write_msd_csv(&path, &curve, &out.header)?;
    out.write_text("summary.txt", &summary)?;
    print!("{summary}");
    out.finish()
}

fn converge(common: &Common, path: &Path, n_list: &[usize], n_traj: Option<usize>, argv: Vec<String>) -> Result<()> {
    let cfg = load(path)?;
    let run = resolve(common, Some(&cfg))?;
    let n_traj = n_traj.unwrap_or(cfg.run.n_traj);
    log::info!("sweeping N over {n_list:?} with {n_traj} trajectories each");
    let report = convergence_sweep(&cfg.system, &cfg.mass_family, n_list, n_traj, run.seed, run.exec)?;
    let inputs = json!({ "command": "converge", "system": cfg.system, "mass_law": cfg.mass_family, "n_list": n_list, "n_traj": n_traj });
    let mut h = header(inputs, run.seed);
    h.entries = cfg.echo();
    let mut out = OutputDir::create(&common.out, argv, h, run.exec == Exec::Serial)?;
    let csv = out.file("scaling.csv")?;
    write_scaling_csv(&csv, &report, &out.header)?;
    let summary = scaling_summary(&report);
    out.write_text("summary.txt", &summary)?;
    print!("{summary}");
    out.finish()
}

fn run_selftest(common: &Common, filter: Option<&str>, argv: Vec<String>) -> Result<()> {
    let run = resolve(common, None)?;
    let h = header(json!({ "command": "selftest", "filter": filter }), run.seed);
    let mut out = OutputDir::create(&common.out, argv, h, run.exec == Exec::Serial)?;
    let scratch = out.root().join("selftest-scratch");
    std::fs::create_dir_all(&scratch)?;
    let results = selftest::run(&Context { exec: run.exec, scratch: &scratch }, filter);
    std::fs::remove_dir_all(&scratch)?;
    let report: String = results.iter().map(|r| format!("{r}\n")).collect();
    print!("{report}");
    out.write_text("selftest.txt", &report)?;
    out.finish()?;
    let failed = results.iter().filter(|r| !r.passed).count();
    log::info!("{} of {} checks passed", results.len() - failed, results.len());
    if failed > 0 {
        return Err(ChecksFailed(failed).into());
    }
    Ok(())
}
