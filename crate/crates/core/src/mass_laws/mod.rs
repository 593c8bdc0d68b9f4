//! Surround-mass distributions, their samplers and their limit functionals.

mod bernstein;

pub use bernstein::{stable_coefficient, LevyCouple, VarianceFn};

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::params::MassLawMeta;
use crate::quad;

/// Absolute tolerance of the mass integral.
pub const E_N_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MassFamily {
    /// Density `∝ y^{2-2H}` between a floor and a ceiling.
    StablePower { hurst: f64 },
    /// Mixture of power densities with exponents `2 - 2H_k`.
    PowerMixture { hursts: Vec<f64> },
    /// `Gamma(3 - 2H, 1)` conditioned to lie above the floor.
    TemperedStable { hurst: f64 },
    /// `Gamma(3, rate)` conditioned to lie above the floor.
    ExponentialLevy { rate: f64 },
    /// All masses equal `N^{δ/2}`.
    DiracAtNPower,
    /// All masses equal 1.
    DiracAtOne,
}

impl MassFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MassFamily::StablePower { .. } => "stable_power",
            MassFamily::PowerMixture { .. } => "power_mixture",
            MassFamily::TemperedStable { .. } => "tempered_stable",
            MassFamily::ExponentialLevy { .. } => "exponential_levy",
            MassFamily::DiracAtNPower => "dirac_n_power",
            MassFamily::DiracAtOne => "dirac_one",
        }
    }

    /// The couple whose Laplace exponent is the limit of the normalized mass integral.
    pub fn couple(&self) -> LevyCouple {
        match self {
            MassFamily::StablePower { hurst } => LevyCouple::Stable { hurst: *hurst },
            MassFamily::PowerMixture { hursts } => LevyCouple::StableSum { hursts: hursts.clone() },
            MassFamily::TemperedStable { hurst } => LevyCouple::Tempered { hurst: *hurst },
            MassFamily::ExponentialLevy { rate } => LevyCouple::Exponential { rate: *rate },
            MassFamily::DiracAtNPower => LevyCouple::Saturated,
            MassFamily::DiracAtOne => LevyCouple::UnitJump,
        }
    }

    pub fn variance_fn(&self, gamma: f64) -> Result<VarianceFn> {
        VarianceFn::new(self.couple(), gamma)
    }

    /// Exponents and limit constant of the family for floor exponent `d` and
    /// normalizer exponent `delta`; Dirac families fix their own `d`.
    pub fn meta(&self, d: f64, delta: f64) -> MassLawMeta {
        let (floor_exponent, moment_exponent, normalizer_exponent, limit_constant) = match self {
            MassFamily::StablePower { .. } | MassFamily::PowerMixture { .. } => (d, 3.0 * d - delta, delta, 1.0),
            MassFamily::TemperedStable { hurst } => (d, 3.0 * d, 0.0, 1.0 / ((2.0 * hurst - 1.0) * (2.0 - 2.0 * hurst))),
            MassFamily::ExponentialLevy { rate } => (d, 3.0 * d, 0.0, rate * rate / 2.0),
            MassFamily::DiracAtNPower => (-delta / 2.0, -2.0 * delta, delta, 1.0),
            MassFamily::DiracAtOne => (0.0, 0.0, 0.0, 1.0),
        };
        MassLawMeta { floor_exponent, moment_exponent, normalizer_exponent, limit_constant }
    }

    /// Whether the family is defined with a floor `N^-d`, `d > 0`.
    fn needs_floor(&self) -> bool {
        !matches!(self, MassFamily::DiracAtNPower | MassFamily::DiracAtOne)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PowerPiece {
    /// Exponent of the cumulative mass, `3 - 2H`.
    power: f64,
    weight: f64,
    lo_pow: f64,
    hi_pow: f64,
}

#[derive(Debug, Clone)]
enum Shape {
    Power(Vec<PowerPiece>),
    TruncatedGamma { shape: f64, rate: f64, tail: f64, dist: Gamma<f64> },
    Point(f64),
}

/// A surround-mass distribution at a fixed particle count.
#[derive(Debug, Clone)]
pub struct MassLaw {
    pub family: MassFamily,
    pub particles: usize,
    /// Smallest admissible mass.
    pub floor: f64,
    /// Largest admissible mass, infinite for untruncated tails.
    pub ceiling: f64,
    /// Normalizer turning `y² ν(dy)` into a probability law.
    pub normalizer: f64,
    pub meta: MassLawMeta,
    shape: Shape,
}

impl MassLaw {
    /// Builds the law for `particles` surround particles. Dirac families
    /// fix their own floor exponent and ignore `floor_exponent`.
    pub fn new(family: MassFamily, particles: usize, floor_exponent: f64, normalizer_exponent: f64) -> Result<Self> {
        family.couple().validate()?;
        if particles == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        let n = particles as f64;
        let d = floor_exponent;
        let delta = normalizer_exponent;
        if family.needs_floor() && !(d > 0.0 && d.is_finite()) {
            return Err(Error::param("d", format!("family {} needs d > 0, got {d}", family.name())));
        }
        let floor = n.powf(-d);
        match &family {
            MassFamily::StablePower { hurst } => Self::power(family.clone(), particles, &[*hurst], d, delta),
            MassFamily::PowerMixture { hursts } => Self::power(family.clone(), particles, hursts, d, delta),
            MassFamily::TemperedStable { hurst } => {
                require_zero_delta(&family, delta)?;
                let h = *hurst;
                let shape = 3.0 - 2.0 * h;
                let tail = gamma_ur(shape, floor);
                let levy_scale = (2.0 * h - 1.0) / gamma(2.0 - 2.0 * h);
                let normalizer = 1.0 / (levy_scale * gamma(shape) * tail);
                let meta = family.meta(d, delta);
                Self::gamma_law(family, particles, floor, normalizer, meta, shape, 1.0, tail)
            }
            MassFamily::ExponentialLevy { rate } => {
                require_zero_delta(&family, delta)?;
                let tail = gamma_ur(3.0, rate * floor);
                let meta = family.meta(d, delta);
                Self::gamma_law(family.clone(), particles, floor, rate * rate / (2.0 * tail), meta, 3.0, *rate, tail)
            }
            MassFamily::DiracAtNPower => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(Error::param("delta", format!("point mass at N^(delta/2) needs delta > 0, got {delta}")));
                }
                let m = n.powf(delta / 2.0);
                let meta = family.meta(d, delta);
                Ok(Self::point(family, particles, m, n.powf(-delta), meta))
            }
            MassFamily::DiracAtOne => {
                let meta = family.meta(d, delta);
                Ok(Self::point(family, particles, 1.0, 1.0, meta))
            }
        }
    }

    fn power(family: MassFamily, particles: usize, hursts: &[f64], d: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("family {} needs delta > 0, got {delta}", family.name())));
        }
        let n = particles as f64;
        let floor = n.powf(-d);
        let target = n.powf(delta);
        let powers: Vec<f64> = hursts.iter().map(|h| 3.0 - 2.0 * h).collect();
        let ceiling = if powers.len() == 1 {
            (powers[0] * target).powf(1.0 / powers[0])
        } else {
            solve_ceiling(&powers, target)
        };
        if ceiling <= floor {
            return Err(Error::param(
                "d",
                format!("mass floor {floor:.4e} is not below the ceiling {ceiling:.4e}; raise N or d"),
            ));
        }
        let masses: Vec<f64> = powers.iter().map(|p| (ceiling.powf(*p) - floor.powf(*p)) / p).collect();
        let total: f64 = masses.iter().sum();
        let pieces = powers
            .iter()
            .zip(&masses)
            .map(|(&p, &m)| PowerPiece { power: p, weight: m / total, lo_pow: floor.powf(p), hi_pow: ceiling.powf(p) })
            .collect();
        let meta = family.meta(d, delta);
        Ok(Self { family, particles, floor, ceiling, normalizer: 1.0 / total, meta, shape: Shape::Power(pieces) })
    }

    #[allow(clippy::too_many_arguments)]
    fn gamma_law(
        family: MassFamily,
        particles: usize,
        floor: f64,
        normalizer: f64,
        meta: MassLawMeta,
        shape: f64,
        rate: f64,
        tail: f64,
    ) -> Result<Self> {
        let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::param("rate", e.to_string()))?;
        Ok(Self {
            family,
            particles,
            floor,
            ceiling: f64::INFINITY,
            normalizer,
            meta,
            shape: Shape::TruncatedGamma { shape, rate, tail, dist },
        })
    }

    fn point(family: MassFamily, particles: usize, m: f64, normalizer: f64, meta: MassLawMeta) -> Self {
        Self { family, particles, floor: m, ceiling: m, normalizer, meta, shape: Shape::Point(m) }
    }

    pub fn variance_fn(&self, gamma: f64) -> Result<VarianceFn> {
        self.family.variance_fn(gamma)
    }

    pub fn point_mass(&self) -> Option<f64> {
        match self.shape {
            Shape::Point(m) => Some(m),
            _ => None,
        }
    }

    /// Probability that one proposal of the rejection sampler is accepted.
    pub fn acceptance_rate(&self) -> f64 {
        match self.shape {
            Shape::TruncatedGamma { tail, .. } => tail,
            _ => 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.shape {
            Shape::Point(m) => *m,
            Shape::Power(pieces) => {
                let piece = if pieces.len() == 1 {
                    &pieces[0]
                } else {
                    let mut u: f64 = rng.random();
                    pieces
                        .iter()
                        .find(|p| {
                            u -= p.weight;
                            u < 0.0
                        })
                        .unwrap_or(&pieces[pieces.len() - 1])
                };
                // 1 - U lies in (0, 1], so draws land in (floor, ceiling].
                let u = 1.0 - rng.random::<f64>();
                let y = (u * piece.hi_pow + (1.0 - u) * piece.lo_pow).powf(1.0 / piece.power);
                y.clamp(self.floor, self.ceiling)
            }
            Shape::TruncatedGamma { dist, .. } => loop {
                let y = dist.sample(rng);
                if y >= self.floor {
                    break y;
                }
            },
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// Probability density; `None` for point masses.
    pub fn density(&self, y: f64) -> Option<f64> {
        match &self.shape {
            Shape::Point(_) => None,
            _ if y < self.floor || y > self.ceiling => Some(0.0),
            Shape::Power(pieces) => Some(
                pieces.iter().map(|p| p.weight * p.power * y.powf(p.power - 1.0) / (p.hi_pow - p.lo_pow)).sum(),
            ),
            Shape::TruncatedGamma { shape, rate, tail, .. } => {
                let log = shape * rate.ln() + (shape - 1.0) * y.ln() - rate * y - statrs::function::gamma::ln_gamma(*shape);
                Some(log.exp() / tail)
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match &self.shape {
            Shape::Point(m) => {
                if y >= *m {
                    1.0
                } else {
                    0.0
                }
            }
            _ if y <= self.floor => 0.0,
            _ if y >= self.ceiling => 1.0,
            Shape::Power(pieces) => pieces
                .iter()
                .map(|p| p.weight * (y.powf(p.power) - p.lo_pow) / (p.hi_pow - p.lo_pow))
                .sum(),
            Shape::TruncatedGamma { shape, rate, tail, .. } => {
                ((gamma_lr(*shape, rate * y) - gamma_lr(*shape, rate * self.floor)) / tail).clamp(0.0, 1.0)
            }
        }
    }

    /// `∫ f(y) μ_N(dy)` by adaptive quadrature, or exactly for point masses.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, abs_tol: f64) -> Result<f64> {
        match &self.shape {
            Shape::Point(m) => Ok(f(*m)),
            Shape::Power(_) => {
                let density = |y: f64| self.density(y).unwrap_or(0.0);
                quad::integrate(|y| f(y) * density(y), self.floor, self.ceiling, abs_tol)
            }
            Shape::TruncatedGamma { .. } => {
                let density = |y: f64| self.density(y).unwrap_or(0.0);
                quad::integrate_to_infinity(|y| f(y) * density(y), self.floor, abs_tol)
            }
        }
    }

    /// The mass integral `∫ (1 − e^{−γyt}) / y² μ_N(dy)`.
    pub fn e_n(&self, gamma: f64, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("mass integral needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        self.expect(|y| -(-gamma * y * t).exp_m1() / (y * y), E_N_TOL)
    }

    /// `∫ y^{-4} μ_N(dy)`.
    pub fn inverse_fourth_moment(&self) -> Result<f64> {
        match &self.shape {
            Shape::Point(m) => Ok(m.powi(-4)),
            Shape::Power(pieces) => Ok(pieces
                .iter()
                .map(|p| {
                    let e = p.power - 4.0;
                    p.weight * p.power / (p.hi_pow - p.lo_pow) * (self.ceiling.powf(e) - self.floor.powf(e)) / e
                })
                .sum()),
            Shape::TruncatedGamma { .. } => {
                let scale = self.floor.powi(-4);
                self.expect(|y| y.powi(-4) / scale, 1e-12).map(|v| v * scale)
            }
        }
    }
}

fn require_zero_delta(family: &MassFamily, delta: f64) -> Result<()> {
    if delta.abs() > crate::params::CLOSURE_TOL {
        return Err(Error::param("delta", format!("family {} has delta = 0, got {delta}", family.name())));
    }
    Ok(())
}

/// Solves `Σ m^{p_k} / p_k = target` by bisection.
fn solve_ceiling(powers: &[f64], target: f64) -> f64 {
    let f = |m: f64| powers.iter().map(|p| m.powf(*p) / p).sum::<f64>() - target;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests;
