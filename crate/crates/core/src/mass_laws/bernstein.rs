//! Bernstein functions of the catalogued subordinators and the variance
//! functions they generate through `v(t) = ∫₀ᵗ Φ(γτ) dτ`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad;

/// A Lévy measure together with its Laplace exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyCouple {
    /// Stable subordinator of index `2H - 1`.
    Stable { hurst: f64 },
    /// Sum of independent stable subordinators.
    StableSum { hursts: Vec<f64> },
    /// Tempered stable subordinator with unit tempering.
    Tempered { hurst: f64 },
    /// Compound Poisson with exponential jumps of the given rate.
    Exponential { rate: f64 },
    /// `Φ = 1` on `(0, ∞)`: the classical-diffusion limit.
    Saturated,
    /// Unit jumps at unit rate, `Φ = 1 - e^{-λ}`.
    UnitJump,
    /// `Φ = √λ (1 - e^{-2√λ})`.
    SqrtExp,
    /// `Φ = λ log(1 + 1/λ)`.
    LogRatio,
    /// Gamma subordinator, `Φ = log(1 + λ)`.
    GammaProcess,
    /// Compound Poisson with Gamma jumps, `Φ = 1 - (1 + λ)^{α - 1}`.
    GammaCompound { alpha: f64 },
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.5 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::param("H", format!("must lie in (1/2, 1), got {h}")))
    }
}

/// `Σ_{k≥2} C(p, k) x^k` for `|x| < 1`, free of cancellation for small `x`.
fn binomial_tail(p: f64, x: f64) -> f64 {
    let mut term = p * x;
    let mut sum = 0.0;
    for k in 1..400 {
        term *= (p - k as f64) / (k as f64 + 1.0) * x;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `Σ_{k≥2} c_k x^k` with `c_k` given by `coef(k)`, for small `x`.
fn power_tail(x: f64, mut coef: impl FnMut(u32) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut xk = x;
    for k in 2..200 {
        xk *= x;
        let term = coef(k) * xk;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

const SERIES_CUTOFF: f64 = 0.25;

/// Prefactor of `t^{2H}` in the stable variance function at unit friction.
pub fn stable_coefficient(hurst: f64) -> f64 {
    gamma(2.0 - 2.0 * hurst) / (2.0 * hurst * (2.0 * hurst - 1.0))
}

impl LevyCouple {
    pub fn validate(&self) -> Result<()> {
        match self {
            LevyCouple::Stable { hurst } | LevyCouple::Tempered { hurst } => check_hurst(*hurst),
            LevyCouple::StableSum { hursts } => {
                if hursts.is_empty() {
                    return Err(Error::param("H", "mixture needs at least one component"));
                }
                hursts.iter().try_for_each(|&h| check_hurst(h))?;
                if hursts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::param("H", "mixture exponents must be strictly increasing"));
                }
                Ok(())
            }
            LevyCouple::Exponential { rate } if !(*rate > 0.0 && rate.is_finite()) => {
                Err(Error::param("rate", format!("must be positive, got {rate}")))
            }
            LevyCouple::GammaCompound { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => {
                Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// Laplace exponent `Φ(λ)`.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        if lambda < 0.0 || lambda.is_nan() {
            return Err(Error::Domain(format!("Laplace exponent needs lambda >= 0, got {lambda}")));
        }
        Ok(self.phi_unchecked(lambda))
    }

    pub(crate) fn phi_unchecked(&self, l: f64) -> f64 {
        if l == 0.0 {
            return 0.0;
        }
        match self {
            LevyCouple::Stable { hurst } => gamma(2.0 - 2.0 * hurst) * l.powf(2.0 * hurst - 1.0) / (2.0 * hurst - 1.0),
            LevyCouple::StableSum { hursts } => hursts
                .iter()
                .map(|h| gamma(2.0 - 2.0 * h) * l.powf(2.0 * h - 1.0) / (2.0 * h - 1.0))
                .sum(),
            LevyCouple::Tempered { hurst } => ((2.0 * hurst - 1.0) * l.ln_1p()).exp_m1(),
            LevyCouple::Exponential { rate } => l / (l + rate),
            LevyCouple::Saturated => 1.0,
            LevyCouple::UnitJump => -(-l).exp_m1(),
            LevyCouple::SqrtExp => {
                let r = l.sqrt();
                -r * (-2.0 * r).exp_m1()
            }
            LevyCouple::LogRatio => l * (1.0 / l).ln_1p(),
            LevyCouple::GammaProcess => l.ln_1p(),
            LevyCouple::GammaCompound { alpha } => -((alpha - 1.0) * l.ln_1p()).exp_m1(),
        }
    }
}

/// Limit variance function `v` for a couple and a friction `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFn {
    pub couple: LevyCouple,
    pub gamma: f64,
}

impl VarianceFn {
    pub fn new(couple: LevyCouple, gamma: f64) -> Result<Self> {
        couple.validate()?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(Self { couple, gamma })
    }

    /// Unit-scale stable variance function of exponent `2H`.
    pub fn fbm(hurst: f64, gamma: f64) -> Result<Self> {
        Self::new(LevyCouple::Stable { hurst }, gamma)
    }

    /// `v̇(t) = Φ(γ t)`.
    pub fn rate(&self, t: f64) -> f64 {
        self.couple.phi_unchecked(self.gamma * t.abs())
    }

    /// `v(t)`; even in `t` so that `v(|t - s|)` can be passed either way round.
    pub fn value(&self, t: f64) -> f64 {
        let t = t.abs();
        if t == 0.0 {
            return 0.0;
        }
        let g = self.gamma;
        let x = g * t;
        match &self.couple {
            LevyCouple::Stable { hurst } => stable_coefficient(*hurst) * g.powf(2.0 * hurst - 1.0) * t.powf(2.0 * hurst),
            LevyCouple::StableSum { hursts } => hursts
                .iter()
                .map(|h| stable_coefficient(*h) * g.powf(2.0 * h - 1.0) * t.powf(2.0 * h))
                .sum(),
            LevyCouple::Tempered { hurst } => {
                let p = 2.0 * hurst;
                if x < SERIES_CUTOFF {
                    binomial_tail(p, x) / (p * g)
                } else {
                    (p * x.ln_1p()).exp_m1() / (p * g) - t
                }
            }
            LevyCouple::Exponential { rate } => {
                let y = x / rate;
                let scaled = if y < SERIES_CUTOFF {
                    power_tail(y, |k| if k % 2 == 0 { 1.0 / k as f64 } else { -1.0 / k as f64 })
                } else {
                    y - y.ln_1p()
                };
                rate / g * scaled
            }
            LevyCouple::Saturated => t,
            LevyCouple::UnitJump => {
                let s = if x < SERIES_CUTOFF {
                    let mut fact = 1.0;
                    power_tail(x, |k| {
                        fact *= k as f64;
                        if k % 2 == 0 {
                            1.0 / fact
                        } else {
                            -1.0 / fact
                        }
                    })
                } else {
                    x + (-x).exp_m1()
                };
                s / g
            }
            LevyCouple::GammaProcess => {
                let s = if x < SERIES_CUTOFF {
                    power_tail(x, |k| {
                        let c = 1.0 / (k as f64 * (k as f64 - 1.0));
                        if k % 2 == 0 {
                            c
                        } else {
                            -c
                        }
                    })
                } else {
                    (1.0 + x) * x.ln_1p() - x
                };
                s / g
            }
            LevyCouple::GammaCompound { alpha } => {
                let s = if x < SERIES_CUTOFF {
                    -binomial_tail(*alpha, x)
                } else {
                    alpha * x - (alpha * x.ln_1p()).exp_m1()
                };
                s / (alpha * g)
            }
            LevyCouple::SqrtExp | LevyCouple::LogRatio => {
                quad::integrate_tol(|tau| self.rate(tau), 0.0, t, 1e-15, 1e-13)
                    .map(|e| e.value)
                    .unwrap_or(f64::NAN)
            }
        }
    }

    /// `½(v(t) + v(s) − v(|t − s|))`.
    pub fn kernel(&self, t: f64, s: f64) -> f64 {
        0.5 * (self.value(t) + self.value(s) - self.value(t - s))
    }
}
