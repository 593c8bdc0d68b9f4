//! Physical and scaling parameters, derived constants and the regime check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the closure relation between the coupling exponents.
pub const CLOSURE_TOL: f64 = 1e-12;

/// Every scalar input of the particle model, in reduced units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Mass of the test particle.
    pub test_mass: f64,
    /// Noise strength of the surround particles.
    pub sigma: f64,
    /// Friction per unit mass.
    pub gamma: f64,
    /// Prefactor of the friction coupling, scaled by `N^-friction_exponent`.
    pub friction_scale: f64,
    /// Prefactor of the drive coupling, scaled by `N^-drive_exponent`.
    pub drive_scale: f64,
    pub friction_exponent: f64,
    pub drive_exponent: f64,
    /// The smallest surround mass is `N^-floor_exponent`.
    pub floor_exponent: f64,
    /// The mass normalizer decays like `N^-normalizer_exponent`.
    pub normalizer_exponent: f64,
    /// Limit of `N^normalizer_exponent` times the mass normalizer.
    pub limit_constant: f64,
    pub particles: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl SystemConfig {
    /// All-ones constants with the given exponents; handy for tests and examples.
    pub fn unit(friction_exponent: f64, drive_exponent: f64, particles: usize) -> Self {
        Self {
            test_mass: 1.0,
            sigma: 1.0,
            gamma: 1.0,
            friction_scale: 1.0,
            drive_scale: 1.0,
            friction_exponent,
            drive_exponent,
            floor_exponent: 0.0,
            normalizer_exponent: 2.0 * (friction_exponent - drive_exponent) - 1.0,
            limit_constant: 1.0,
            particles,
            horizon: 1.0,
            n_steps: 1024,
            seed: 0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.n_steps).map(|i| i as f64 * dt).collect()
    }

    pub fn derive(&self) -> DerivedConstants {
        let n = self.particles as f64;
        let alpha = self.friction_scale * n.powf(-self.friction_exponent);
        let beta = self.drive_scale * n.powf(-self.drive_exponent);
        let diffusivity = self.sigma * self.drive_scale.powi(2) * self.limit_constant
            / (self.gamma.powi(2) * self.friction_scale.powi(2));
        DerivedConstants {
            alpha,
            beta,
            total_friction: alpha * n,
            diffusivity,
            limit_prefactor: 2.0 * diffusivity,
            gamma: self.gamma,
            sigma: self.sigma,
        }
    }

    fn check_positive(&self) -> Result<()> {
        let fields = [
            ("M", self.test_mass),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("C_alpha", self.friction_scale),
            ("C_beta", self.drive_scale),
            ("C_delta", self.limit_constant),
            ("t0", self.horizon),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(name, format!("must be finite and positive, got {value}")));
            }
        }
        if self.particles == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Constants derived from a [`SystemConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Per-particle friction coupling.
    pub alpha: f64,
    /// Per-particle drive coupling.
    pub beta: f64,
    /// Sum of all friction couplings.
    pub total_friction: f64,
    /// Diffusivity of the limit process.
    pub diffusivity: f64,
    /// Covariance prefactor of the limit process, twice the diffusivity.
    pub limit_prefactor: f64,
    gamma: f64,
    sigma: f64,
}

impl DerivedConstants {
    /// Bare friction of a surround particle of mass `m`, fixed by fluctuation–dissipation.
    pub fn beta0(&self, m: f64) -> f64 {
        self.gamma * m * m - self.beta
    }

    /// Bare noise amplitude of a surround particle of mass `m`.
    pub fn sigma0(&self, m: f64) -> f64 {
        self.sigma * m * m
    }

    /// Refuses masses whose bare friction would not be positive.
    pub fn check_friction(&self, masses: &[f64]) -> Result<()> {
        match masses.iter().copied().find(|&m| self.beta0(m) <= 0.0) {
            Some(mass) => Err(Error::NonPositiveFriction { mass, beta0: self.beta0(mass) }),
            None => Ok(()),
        }
    }
}

/// Exponents and limit constant contributed by a mass law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassLawMeta {
    pub floor_exponent: f64,
    /// Growth exponent of the inverse fourth moment of the mass law.
    pub moment_exponent: f64,
    pub normalizer_exponent: f64,
    pub limit_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeCheck {
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<RegimeCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RegimeCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let names: Vec<String> = self
            .failures()
            .map(|c| format!("{} (lhs {:.6}, rhs {:.6})", c.condition, c.lhs, c.rhs))
            .collect();
        Err(Error::Regime(names.join("; ")))
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            writeln!(f, "{tag} {:<24} lhs={:.6} rhs={:.6}", c.condition, c.lhs, c.rhs)?;
        }
        Ok(())
    }
}

/// Checks the scaling regime. Non-positive physical constants are errors;
/// violated inequalities are reported, not raised.
pub fn validate_regime(cfg: &SystemConfig, law: &MassLawMeta) -> Result<ValidationReport> {
    cfg.check_positive()?;
    let (a, b) = (cfg.friction_exponent, cfg.drive_exponent);
    let (d, dp, delta) = (law.floor_exponent, law.moment_exponent, law.normalizer_exponent);
    let closure = 2.0 * (a - b) - delta;
    let derived = cfg.derive();
    let check = |condition, lhs: f64, rhs: f64, passed: bool| RegimeCheck { condition, lhs, rhs, passed };
    let checks = vec![
        check("a > 0", a, 0.0, a > 0.0),
        check("a < 1", a, 1.0, a < 1.0),
        check("b > 0", b, 0.0, b > 0.0),
        check("delta >= 0", delta, 0.0, delta >= 0.0),
        check("2(a-b) - delta = 1", closure, 1.0, (closure - 1.0).abs() <= CLOSURE_TOL),
        check("d' < 5 + 8(b-a)", dp, 5.0 + 8.0 * (b - a), dp < 5.0 + 8.0 * (b - a)),
        check("b > d", b, d, b > d),
        check(
            "couplings finite",
            derived.alpha.min(derived.beta),
            0.0,
            derived.alpha.is_finite() && derived.beta.is_finite() && derived.alpha > 0.0 && derived.beta > 0.0,
        ),
    ];
    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(d: f64, dp: f64, delta: f64) -> MassLawMeta {
        MassLawMeta { floor_exponent: d, moment_exponent: dp, normalizer_exponent: delta, limit_constant: 1.0 }
    }

    #[test]
    fn stable_power_regime_passes() {
        let cfg = SystemConfig::unit(0.8, 0.25, 1000);
        let r = validate_regime(&cfg, &meta(0.2, 0.5, 0.1)).unwrap();
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn tempered_regime_passes() {
        let cfg = SystemConfig::unit(0.75, 0.25, 1000);
        assert!(validate_regime(&cfg, &meta(0.1, 0.3, 0.0)).unwrap().passed());
    }

    #[test]
    fn closure_violation_is_named() {
        let cfg = SystemConfig::unit(0.5, 0.25, 1000);
        let r = validate_regime(&cfg, &meta(0.1, 0.3, 0.1)).unwrap();
        let failed: Vec<_> = r.failures().map(|c| c.condition).collect();
        assert_eq!(failed, vec!["2(a-b) - delta = 1"]);
        let msg = r.into_result().unwrap_err().to_string();
        assert!(msg.contains("2(a-b) - delta = 1"));
    }

    #[test]
    fn non_positive_constants_are_errors() {
        let mut cfg = SystemConfig::unit(0.8, 0.25, 10);
        cfg.gamma = 0.0;
        assert!(matches!(
            validate_regime(&cfg, &meta(0.2, 0.5, 0.1)),
            Err(Error::InvalidParameter { name: "gamma", .. })
        ));
        cfg.gamma = 1.0;
        cfg.test_mass = -1.0;
        assert!(validate_regime(&cfg, &meta(0.2, 0.5, 0.1)).is_err());
    }

    #[test]
    fn derived_constants() {
        let mut cfg = SystemConfig::unit(0.8, 0.25, 10_000);
        let k = cfg.derive();
        assert!((k.diffusivity - 1.0).abs() < 1e-15);
        assert!((k.limit_prefactor - 2.0).abs() < 1e-15);
        assert!((k.total_friction - 10_000f64.powf(0.2)).abs() < 1e-12);
        assert!((k.total_friction - 6.309_573_444_801_933).abs() < 1e-12);
        assert!((k.beta0(1.0) - 0.9).abs() < 1e-12);
        cfg.sigma = 2.0;
        cfg.drive_scale = 3.0;
        cfg.gamma = 1.5;
        cfg.friction_scale = 0.5;
        cfg.limit_constant = 0.7;
        let k = cfg.derive();
        assert!((k.diffusivity - 2.0 * 9.0 * 0.7 / (2.25 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn friction_check_refuses_light_masses() {
        let cfg = SystemConfig::unit(0.8, 0.25, 16);
        let k = cfg.derive();
        assert!(k.check_friction(&[1.0, 2.0]).is_ok());
        assert!(matches!(k.check_friction(&[1.0, 0.1]), Err(Error::NonPositiveFriction { .. })));
    }

    proptest! {
        #[test]
        fn fdt_identities(m in 1e-3f64..1e3, sigma in 1e-2f64..1e2, gamma in 1e-2f64..1e2, n in 1usize..100_000) {
            let mut cfg = SystemConfig::unit(0.8, 0.25, n);
            cfg.sigma = sigma;
            cfg.gamma = gamma;
            let k = cfg.derive();
            prop_assert!((k.sigma0(m) / (m * m) - sigma).abs() <= 1e-12 * sigma);
            let lhs = k.beta0(m) + k.beta;
            prop_assert!((lhs - gamma * m * m).abs() <= 1e-12 * gamma * m * m);
        }

        #[test]
        fn validation_is_pure(a in 0.01f64..0.99, b in 0.01f64..0.6, d in -0.5f64..0.5) {
            let cfg = SystemConfig::unit(a, b, 100);
            let m = meta(d, 3.0 * d, (2.0 * (a - b) - 1.0).max(0.0));
            let r1 = validate_regime(&cfg, &m).unwrap();
            let r2 = validate_regime(&cfg, &m).unwrap();
            prop_assert_eq!(r1, r2);
        }
    }
}
