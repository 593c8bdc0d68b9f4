//! TOML run configuration: one file fixes the system, the mass law, the
//! optional mixing law and run options.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SchemaError};
use crate::mass_laws::{MassFamily, MassLaw};
use crate::params::{validate_regime, SystemConfig, ValidationReport, CLOSURE_TOL};
use crate::superstat::{ALaw, HLaw, HMarginal, HurstFamily, MixingLaw, SuperstatModel, DEFAULT_BUCKET};

pub const SCHEMA_VERSION: u32 = 1;

const TOP_KEYS: &[&str] = &["schema_version", "system", "mass_law", "mixing", "run"];
const SYSTEM_KEYS: &[&str] =
    &["M", "sigma", "gamma", "C_alpha", "C_beta", "a", "b", "d", "delta", "C_delta", "N", "t0", "n_steps", "seed"];
const MASS_KEYS: &[&str] = &["family", "H", "Hs", "rate"];
const MIXING_KEYS: &[&str] = &["A_law", "H_law", "family", "bucket"];
const RUN_KEYS: &[&str] = &["n_traj", "serial", "threads"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    system: RawSystem,
    mass_law: RawMassLaw,
    mixing: Option<RawMixing>,
    #[serde(default)]
    run: RunOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(rename = "M")]
    test_mass: f64,
    sigma: f64,
    gamma: f64,
    #[serde(rename = "C_alpha")]
    friction_scale: f64,
    #[serde(rename = "C_beta")]
    drive_scale: f64,
    a: f64,
    b: f64,
    d: Option<f64>,
    delta: Option<f64>,
    #[serde(rename = "C_delta")]
    limit_constant: Option<f64>,
    #[serde(rename = "N")]
    particles: usize,
    t0: f64,
    n_steps: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMassLaw {
    family: String,
    #[serde(rename = "H")]
    hurst: Option<f64>,
    #[serde(rename = "Hs")]
    hursts: Option<Vec<f64>>,
    rate: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixing {
    #[serde(rename = "A_law")]
    amplitude: String,
    #[serde(rename = "H_law")]
    hurst: String,
    #[serde(default)]
    family: HurstFamily,
    bucket: Option<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub serial: bool,
    pub threads: Option<usize>,
}

fn default_n_traj() -> usize {
    1000
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { n_traj: default_n_traj(), serial: false, threads: None }
    }
}

/// Mixing section: the law of `(A, H)` and how paths are built from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub law: MixingLaw,
    pub family: HurstFamily,
    pub bucket: Option<f64>,
}

/// A fully validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub mass_family: MassFamily,
    pub mixing: Option<MixingSpec>,
    pub run: RunOptions,
    #[serde(skip)]
    pub report: ValidationReport,
}

impl RunConfig {
    /// The mass law at the configured particle count.
    pub fn mass_law(&self) -> Result<MassLaw> {
        self.mass_law_at(self.system.particles)
    }

    pub fn mass_law_at(&self, particles: usize) -> Result<MassLaw> {
        MassLaw::new(self.mass_family.clone(), particles, self.system.floor_exponent, self.system.normalizer_exponent)
    }

    /// The superstatistical model; `None` without a `[mixing]` section.
    pub fn superstat_model(&self) -> Option<SuperstatModel> {
        self.mixing.as_ref().map(|m| SuperstatModel {
            mixing: m.law.clone(),
            sigma: self.system.sigma,
            gamma: self.system.gamma,
            drive_scale: self.system.drive_scale,
            limit_constant: self.system.limit_constant,
            family: m.family,
            bucket: m.bucket,
        })
    }

    /// `key = value` lines echoing every input, for output headers.
    pub fn echo(&self) -> Vec<(String, String)> {
        let s = &self.system;
        let mut out: Vec<(String, String)> = [
            ("M", s.test_mass.to_string()),
            ("sigma", s.sigma.to_string()),
            ("gamma", s.gamma.to_string()),
            ("C_alpha", s.friction_scale.to_string()),
            ("C_beta", s.drive_scale.to_string()),
            ("a", s.friction_exponent.to_string()),
            ("b", s.drive_exponent.to_string()),
            ("d", s.floor_exponent.to_string()),
            ("delta", s.normalizer_exponent.to_string()),
            ("C_delta", s.limit_constant.to_string()),
            ("N", s.particles.to_string()),
            ("t0", s.horizon.to_string()),
            ("n_steps", s.n_steps.to_string()),
            ("seed", s.seed.to_string()),
            ("mass_law", serde_json::to_string(&self.mass_family).unwrap_or_default()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        if let Some(m) = &self.mixing {
            out.push(("mixing".into(), serde_json::to_string(m).unwrap_or_default()));
        }
        out
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

/// Parses and validates a configuration; schema problems are collected with
/// line numbers, regime violations are reported as [`Error::Regime`].
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(vec![toml_error(text, &e)]))?;
    let unknown = unknown_keys(text, &table);
    if !unknown.is_empty() {
        return Err(Error::Config(unknown));
    }
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Config(vec![toml_error(text, &e)]))?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(vec![SchemaError {
            line: find_line(text, None, "schema_version"),
            message: format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        }]));
    }
    let mut errors = Vec::new();
    let family = mass_family(text, &raw.mass_law, &mut errors);
    let mixing = raw.mixing.as_ref().and_then(|m| mixing_spec(text, m, &mut errors));
    if raw.run.n_traj == 0 {
        errors.push(SchemaError { line: find_line(text, Some("run"), "n_traj"), message: "n_traj must be positive".into() });
    }
    let Some(family) = family else {
        return Err(Error::Config(errors));
    };
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }

    let s = &raw.system;
    let delta = s.delta.unwrap_or(2.0 * (s.a - s.b) - 1.0);
    let meta = family.meta(s.d.unwrap_or(0.0), delta);
    if let Some(c) = s.limit_constant {
        if (c - meta.limit_constant).abs() > 1e-9 * meta.limit_constant {
            return Err(Error::Config(vec![SchemaError {
                line: find_line(text, Some("system"), "C_delta"),
                message: format!("C_delta = {c} disagrees with the mass law's limit constant {}", meta.limit_constant),
            }]));
        }
    }
    if s.d.is_none() && !matches!(family, MassFamily::DiracAtNPower | MassFamily::DiracAtOne) {
        return Err(Error::Config(vec![SchemaError {
            line: find_line(text, None, "[system]"),
            message: format!("family {} needs the floor exponent d", family.name()),
        }]));
    }
    let system = SystemConfig {
        test_mass: s.test_mass,
        sigma: s.sigma,
        gamma: s.gamma,
        friction_scale: s.friction_scale,
        drive_scale: s.drive_scale,
        friction_exponent: s.a,
        drive_exponent: s.b,
        floor_exponent: meta.floor_exponent,
        normalizer_exponent: if delta.abs() <= CLOSURE_TOL { 0.0 } else { delta },
        limit_constant: meta.limit_constant,
        particles: s.particles,
        horizon: s.t0,
        n_steps: s.n_steps,
        seed: s.seed,
    };
    if system.n_steps == 0 {
        return Err(Error::param("n_steps", "must be positive"));
    }
    let report = validate_regime(&system, &meta)?.into_result()?;
    let cfg = RunConfig { system, mass_family: family, mixing, run: raw.run, report };
    cfg.mass_law()?;
    if let Some(model) = cfg.superstat_model() {
        model.validate()?;
    }
    Ok(cfg)
}

fn mass_family(text: &str, raw: &RawMassLaw, errors: &mut Vec<SchemaError>) -> Option<MassFamily> {
    let mut need = |key: &str, v: Option<f64>| {
        if v.is_none() {
            errors.push(SchemaError {
                line: find_line(text, None, "[mass_law]"),
                message: format!("family {} needs key {key}", raw.family),
            });
        }
        v.unwrap_or(f64::NAN)
    };
    let family = match raw.family.as_str() {
        "stable_power" | "fbm" => MassFamily::StablePower { hurst: need("H", raw.hurst) },
        "tempered_stable" => MassFamily::TemperedStable { hurst: need("H", raw.hurst) },
        "exponential_levy" => MassFamily::ExponentialLevy { rate: need("rate", raw.rate) },
        "power_mixture" => match &raw.hursts {
            Some(h) if !h.is_empty() => MassFamily::PowerMixture { hursts: h.clone() },
            _ => {
                need("Hs", None);
                return None;
            }
        },
        "dirac_n_power" => MassFamily::DiracAtNPower,
        "dirac_one" => MassFamily::DiracAtOne,
        other => {
            errors.push(SchemaError {
                line: find_line(text, Some("mass_law"), "family"),
                message: format!(
                    "unknown family {other:?}; valid: stable_power (fbm), power_mixture, tempered_stable, exponential_levy, dirac_n_power, dirac_one"
                ),
            });
            return None;
        }
    };
    if let Err(e) = family.couple().validate() {
        errors.push(SchemaError { line: find_line(text, None, "[mass_law]"), message: e.to_string() });
    }
    Some(family)
}

fn mixing_spec(text: &str, raw: &RawMixing, errors: &mut Vec<SchemaError>) -> Option<MixingSpec> {
    let mut fail = |key: &str, message: String| {
        errors.push(SchemaError { line: find_line(text, Some("mixing"), key), message });
    };
    let amplitude = parse_a_law(&raw.amplitude).map_err(|e| fail("A_law", e.to_string())).ok();
    let hurst = parse_h_law(&raw.hurst).map_err(|e| fail("H_law", e.to_string())).ok();
    let bucket = match &raw.bucket {
        None => Some(DEFAULT_BUCKET),
        Some(toml::Value::String(s)) if s == "exact" => None,
        Some(toml::Value::Float(b)) => Some(*b),
        Some(other) => {
            fail("bucket", format!("bucket must be a number or \"exact\", got {other}"));
            None
        }
    };
    Some(MixingSpec { law: MixingLaw { amplitude: amplitude?, hurst: hurst? }, family: raw.family, bucket })
}

fn numbers(args: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Format(format!("{what}: cannot parse {s:?} as a number"))))
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Format(format!("{what} takes {expected} parameter(s), got {}", values.len())));
    }
    Ok(values)
}

/// `degenerate:a`, `exp:θ`, `lognormal:μ,s`, `gengamma:p,q,r` or `sqweibull:k,λ`.
pub fn parse_a_law(spec: &str) -> Result<ALaw> {
    let (name, args) = spec.split_once(':').ok_or_else(|| Error::Format(format!("A law {spec:?} lacks ':'")))?;
    let law = match name.trim() {
        "degenerate" | "const" => ALaw::Degenerate { value: numbers(args, 1, name)?[0] },
        "exp" | "exponential" => ALaw::Exponential { mean: numbers(args, 1, name)?[0] },
        "lognormal" => {
            let v = numbers(args, 2, name)?;
            ALaw::LogNormal { mu: v[0], s: v[1] }
        }
        "gengamma" => {
            let v = numbers(args, 3, name)?;
            ALaw::GeneralizedGamma { power: v[0], shape: v[1], scale: v[2] }
        }
        "sqweibull" => {
            let v = numbers(args, 2, name)?;
            ALaw::SquaredWeibull { shape: v[0], scale: v[1] }
        }
        other => {
            return Err(Error::Format(format!(
                "unknown A law {other:?}; valid: degenerate, exp, lognormal, gengamma, sqweibull"
            )))
        }
    };
    law.validate()?;
    Ok(law)
}

fn parse_marginal(spec: &str) -> Result<HMarginal> {
    let (name, args) = spec.split_once(':').ok_or_else(|| Error::Format(format!("H law {spec:?} lacks ':'")))?;
    Ok(match name.trim() {
        "degenerate" | "const" => HMarginal::Degenerate { h: numbers(args, 1, name)?[0] },
        "uniform" => {
            let v = numbers(args, 2, name)?;
            HMarginal::Uniform { lo: v[0], hi: v[1] }
        }
        "discrete" => {
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for item in args.split(',') {
                let (h, w) = item
                    .split_once('@')
                    .ok_or_else(|| Error::Format(format!("discrete atom {item:?} must read h@weight")))?;
                points.push(numbers(h, 1, "discrete point")?[0]);
                weights.push(numbers(w, 1, "discrete weight")?[0]);
            }
            HMarginal::Discrete { points, weights }
        }
        other => {
            return Err(Error::Format(format!("unknown H law {other:?}; valid: degenerate, uniform, discrete, product")))
        }
    })
}

/// `degenerate:h`, `uniform:lo,hi`, `discrete:h1@w1,h2@w2`, or
/// `product:<law>|<law>` (`product-shared:` couples the components).
pub fn parse_h_law(spec: &str) -> Result<HLaw> {
    let law = if let Some(rest) = spec.strip_prefix("product:") {
        HLaw::ProductOfK { marginals: rest.split('|').map(parse_marginal).collect::<Result<_>>()?, shared_latent: false }
    } else if let Some(rest) = spec.strip_prefix("product-shared:") {
        HLaw::ProductOfK { marginals: rest.split('|').map(parse_marginal).collect::<Result<_>>()?, shared_latent: true }
    } else {
        match parse_marginal(spec)? {
            HMarginal::Degenerate { h } => HLaw::Degenerate { h },
            HMarginal::Uniform { lo, hi } => HLaw::Uniform { lo, hi },
            HMarginal::Discrete { points, weights } => HLaw::Discrete { points, weights },
        }
    };
    law.validate()?;
    Ok(law)
}

fn unknown_keys(text: &str, table: &toml::Table) -> Vec<SchemaError> {
    let mut errors = Vec::new();
    let mut check = |section: Option<&str>, keys: Vec<&String>, valid: &[&str]| {
        for k in keys {
            if !valid.contains(&k.as_str()) {
                let place = section.map_or("top level".to_string(), |s| format!("[{s}]"));
                errors.push(SchemaError {
                    line: find_line(text, section, k),
                    message: format!("unknown key {k:?} in {place}; valid keys: {}", valid.join(", ")),
                });
            }
        }
    };
    check(None, table.keys().collect(), TOP_KEYS);
    for (name, valid) in [("system", SYSTEM_KEYS), ("mass_law", MASS_KEYS), ("mixing", MIXING_KEYS), ("run", RUN_KEYS)] {
        if let Some(toml::Value::Table(t)) = table.get(name) {
            check(Some(name), t.keys().collect(), valid);
        }
    }
    errors
}

/// 1-based line of `key = ...` inside `[section]`, or of a literal line like `[system]`.
fn find_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t == key {
            return Some(i + 1);
        }
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let in_section = current.as_deref() == section;
        if in_section && t.split('=').next().map(str::trim) == Some(key) && t.contains('=') {
            return Some(i + 1);
        }
    }
    None
}

fn toml_error(text: &str, e: &toml::de::Error) -> SchemaError {
    let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    SchemaError { line, message: e.message().to_string() }
}
