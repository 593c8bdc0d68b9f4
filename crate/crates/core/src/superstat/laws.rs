//! Laws of the random amplitude `A` and of the random Hurst element `H`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{self, CompositeRule};

/// Tolerance of Laplace transforms evaluated by quadrature.
const LAPLACE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ALaw {
    Degenerate { value: f64 },
    /// Exponential with the given mean.
    Exponential { mean: f64 },
    /// `exp(mu + s Z)` with `Z` standard normal.
    LogNormal { mu: f64, s: f64 },
    /// Density `∝ a^{shape−1} exp(−(a/scale)^power)`.
    GeneralizedGamma { power: f64, shape: f64, scale: f64 },
    /// Square of a Weibull variable with the given shape and scale.
    SquaredWeibull { shape: f64, scale: f64 },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

impl ALaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ALaw::Degenerate { value } => positive("A", value),
            ALaw::Exponential { mean } => positive("theta", mean),
            ALaw::LogNormal { mu, s } => {
                if !mu.is_finite() {
                    return Err(Error::param("mu", "must be finite"));
                }
                positive("s", s)
            }
            ALaw::GeneralizedGamma { power, shape, scale } => {
                positive("p", power)?;
                positive("q", shape)?;
                positive("r", scale)
            }
            ALaw::SquaredWeibull { shape, scale } => {
                positive("k", shape)?;
                positive("lambda", scale)
            }
        }
    }

    /// `E[A^k]` in closed form.
    pub fn moment(&self, k: i32) -> f64 {
        let kf = k as f64;
        match *self {
            ALaw::Degenerate { value } => value.powi(k),
            ALaw::Exponential { mean } => mean.powi(k) * gamma(1.0 + kf),
            ALaw::LogNormal { mu, s } => (kf * mu + 0.5 * kf * kf * s * s).exp(),
            ALaw::GeneralizedGamma { power, shape, scale } => {
                scale.powi(k) * gamma((shape + kf) / power) / gamma(shape / power)
            }
            ALaw::SquaredWeibull { shape, scale } => scale.powi(2 * k) * gamma(1.0 + 2.0 * kf / shape),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `3 E[A²] / E[A]²`: kurtosis of `√A · G` for a centred Gaussian `G`.
    pub fn mixture_kurtosis(&self) -> f64 {
        3.0 * self.moment(2) / self.mean().powi(2)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ALaw::Degenerate { value } => value,
            ALaw::Exponential { mean } => mean * rng.sample::<f64, _>(Exp1),
            ALaw::LogNormal { mu, s } => (mu + s * rng.sample::<f64, _>(StandardNormal)).exp(),
            ALaw::GeneralizedGamma { power, shape, scale } => {
                let g = Gamma::new(shape / power, 1.0).expect("validated gamma shape");
                scale * g.sample(rng).powf(1.0 / power)
            }
            ALaw::SquaredWeibull { shape, scale } => {
                let e: f64 = rng.sample(Exp1);
                (scale * e.powf(1.0 / shape)).powi(2)
            }
        }
    }

    /// Laplace transform `E[e^{−uA}]` and its derivative `−E[A e^{−uA}]`.
    pub fn laplace(&self, u: f64) -> Result<(f64, f64)> {
        match *self {
            ALaw::Degenerate { value } => {
                let l = (-u * value).exp();
                Ok((l, -value * l))
            }
            ALaw::Exponential { mean } => {
                let d = 1.0 + mean * u;
                Ok((1.0 / d, -mean / (d * d)))
            }
            ALaw::LogNormal { mu, s } => {
                let rule = lognormal_rule();
                let (mut l, mut dl) = (0.0, 0.0);
                for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                    let a = (mu + s * z).exp();
                    let e = w * (-0.5 * z * z).exp() * (-u * a).exp();
                    l += e;
                    dl -= a * e;
                }
                let norm = (2.0 * std::f64::consts::PI).sqrt();
                Ok((l / norm, dl / norm))
            }
            ALaw::GeneralizedGamma { power, shape, scale } => {
                // In x = (a/scale)^power, x is Gamma(shape/power, 1).
                let k = shape / power;
                let lg = statrs::function::gamma::ln_gamma(k);
                let density = move |x: f64| ((k - 1.0) * x.ln() - x - lg).exp();
                let a_of = move |x: f64| scale * x.powf(1.0 / power);
                transform(density, a_of, u)
            }
            ALaw::SquaredWeibull { shape, scale } => {
                // In x = (w/scale)^shape, x is Exp(1) and a = w².
                let a_of = move |x: f64| (scale * x.powf(1.0 / shape)).powi(2);
                transform(|x: f64| (-x).exp(), a_of, u)
            }
        }
    }
}

fn lognormal_rule() -> &'static CompositeRule {
    static RULE: std::sync::OnceLock<CompositeRule> = std::sync::OnceLock::new();
    RULE.get_or_init(|| CompositeRule::new(-12.0, 12.0, 96, 10))
}

fn transform(density: impl Fn(f64) -> f64, a_of: impl Fn(f64) -> f64, u: f64) -> Result<(f64, f64)> {
    let l = quad::integrate_to_infinity(|x| density(x) * (-u * a_of(x)).exp(), 0.0, LAPLACE_TOL)?;
    let dl = quad::integrate_to_infinity(|x| -a_of(x) * density(x) * (-u * a_of(x)).exp(), 0.0, LAPLACE_TOL)?;
    Ok((l, dl))
}

/// One-dimensional law of a Hurst component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum HMarginal {
    Degenerate { h: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
}

/// Nodes of the fixed rule used for expectations over a uniform component.
const UNIFORM_PANELS: usize = 16;
const UNIFORM_ORDER: usize = 8;

impl HMarginal {
    fn validate(&self) -> Result<()> {
        let inside = |h: f64| h > 0.5 && h < 1.0;
        match self {
            HMarginal::Degenerate { h } if !inside(*h) => Err(Error::param("H", format!("{h} is outside (1/2, 1)"))),
            HMarginal::Uniform { lo, hi } if !(inside(*lo) && inside(*hi) && lo < hi) => {
                Err(Error::param("H", format!("uniform support [{lo}, {hi}] must be an interval inside (1/2, 1)")))
            }
            HMarginal::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::param("H", "discrete law needs matching non-empty points and weights"));
                }
                if let Some(h) = points.iter().find(|h| !inside(**h)) {
                    return Err(Error::param("H", format!("{h} is outside (1/2, 1)")));
                }
                if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::param("H", "discrete weights must be positive and sum to 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Quantile function on `(0, 1)`.
    fn quantile(&self, u: f64) -> f64 {
        match self {
            HMarginal::Degenerate { h } => *h,
            HMarginal::Uniform { lo, hi } => lo + (hi - lo) * u,
            HMarginal::Discrete { points, weights } => {
                let mut acc = 0.0;
                for (p, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *p;
                    }
                }
                points[points.len() - 1]
            }
        }
    }

    /// Jump locations of the distribution function inside `(0, 1)`.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            HMarginal::Discrete { weights, .. } => {
                let mut acc = 0.0;
                weights[..weights.len() - 1]
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Weighted nodes that integrate smooth functions of `h` against the law.
    fn rule(&self, panels: usize) -> Vec<(f64, f64)> {
        match self {
            HMarginal::Degenerate { h } => vec![(1.0, *h)],
            HMarginal::Discrete { points, weights } => weights.iter().copied().zip(points.iter().copied()).collect(),
            HMarginal::Uniform { lo, hi } => {
                let r = CompositeRule::new(*lo, *hi, panels, UNIFORM_ORDER);
                r.weights.iter().map(|w| w / (hi - lo)).zip(r.nodes.iter().copied()).collect()
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            HMarginal::Degenerate { h } => (*h, *h),
            HMarginal::Uniform { lo, hi } => (*lo, *hi),
            HMarginal::Discrete { points, .. } => {
                (points.iter().copied().fold(1.0, f64::min), points.iter().copied().fold(0.0, f64::max))
            }
        }
    }
}

/// Law of the Hurst element: a single component or a vector of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum HLaw {
    Degenerate { h: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    /// Vector of components; with `shared_latent` all components are driven
    /// by one uniform variable, otherwise they are independent.
    ProductOfK { marginals: Vec<HMarginal>, shared_latent: bool },
}

impl HLaw {
    fn marginals(&self) -> Vec<HMarginal> {
        match self {
            HLaw::Degenerate { h } => vec![HMarginal::Degenerate { h: *h }],
            HLaw::Uniform { lo, hi } => vec![HMarginal::Uniform { lo: *lo, hi: *hi }],
            HLaw::Discrete { points, weights } => {
                vec![HMarginal::Discrete { points: points.clone(), weights: weights.clone() }]
            }
            HLaw::ProductOfK { marginals, .. } => marginals.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let marginals = self.marginals();
        if marginals.is_empty() {
            return Err(Error::param("H", "product law needs at least one component"));
        }
        marginals.iter().try_for_each(HMarginal::validate)
    }

    /// True when every component takes finitely many values.
    pub fn is_atomic(&self) -> bool {
        self.marginals().iter().all(|m| !matches!(m, HMarginal::Uniform { .. }))
    }

    pub fn components(&self) -> usize {
        self.marginals().len()
    }

    /// Smallest and largest value any component can take.
    pub fn support(&self) -> (f64, f64) {
        self.marginals().iter().map(HMarginal::support).fold((1.0, 0.0), |(a, b), (c, d)| (a.min(c), b.max(d)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let marginals = self.marginals();
        let shared = matches!(self, HLaw::ProductOfK { shared_latent: true, .. });
        let latent: f64 = rng.random();
        marginals
            .iter()
            .map(|m| {
                let u = if shared { latent } else { rng.random() };
                m.quantile(u)
            })
            .collect()
    }

    /// Weighted nodes `(w, h)` such that `Σ w f(h)` approximates `E f(H)`;
    /// exact for discrete laws and Gauss–Legendre over continuous supports.
    pub fn rule(&self) -> Vec<(f64, Vec<f64>)> {
        let marginals = self.marginals();
        match self {
            HLaw::ProductOfK { shared_latent: true, .. } if marginals.len() > 1 => {
                let mut cuts: Vec<f64> = marginals.iter().flat_map(HMarginal::breakpoints).collect();
                cuts.push(0.0);
                cuts.push(1.0);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut nodes = Vec::new();
                for w in cuts.windows(2) {
                    let r = CompositeRule::new(w[0], w[1], UNIFORM_PANELS, UNIFORM_ORDER);
                    for (u, wt) in r.nodes.iter().zip(&r.weights) {
                        nodes.push((*wt, marginals.iter().map(|m| m.quantile(*u)).collect()));
                    }
                }
                nodes
            }
            _ => {
                let panels = if marginals.len() <= 2 { UNIFORM_PANELS } else { 4 };
                let mut nodes: Vec<(f64, Vec<f64>)> = vec![(1.0, Vec::new())];
                for m in &marginals {
                    let r = m.rule(panels);
                    nodes = nodes
                        .iter()
                        .flat_map(|(w, hs)| {
                            r.iter().map(move |(wm, h)| {
                                let mut v = hs.clone();
                                v.push(*h);
                                (w * wm, v)
                            })
                        })
                        .collect();
                }
                nodes
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    fn a_laws() -> Vec<ALaw> {
        vec![
            ALaw::Degenerate { value: 1.3 },
            ALaw::Exponential { mean: 1.0 },
            ALaw::LogNormal { mu: -0.2, s: 0.5 },
            ALaw::GeneralizedGamma { power: 1.5, shape: 2.0, scale: 0.8 },
            ALaw::SquaredWeibull { shape: 2.5, scale: 1.1 },
        ]
    }

    #[test]
    fn sample_moments_match_closed_forms() {
        for (i, law) in a_laws().iter().enumerate() {
            let mut rng = stream(40, Purpose::Mixing, i as u64, 0);
            let xs: Vec<f64> = (0..100_000).map(|_| law.sample(&mut rng)).collect();
            let (m, se) = mean_se(&xs);
            assert!((m - law.mean()).abs() <= 3.0 * se + 1e-10 * law.mean(), "{law:?}: {m} vs {}", law.mean());
        }
    }

    #[test]
    fn laplace_transforms_match_monte_carlo_and_derivative() {
        for (i, law) in a_laws().iter().enumerate() {
            let mut rng = stream(41, Purpose::Mixing, i as u64, 0);
            let xs: Vec<f64> = (0..100_000).map(|_| law.sample(&mut rng)).collect();
            for u in [0.0, 0.3, 2.0] {
                let (l, dl) = law.laplace(u).unwrap();
                let (m, se) = mean_se(&xs.iter().map(|a| (-u * a).exp()).collect::<Vec<_>>());
                assert!((l - m).abs() <= 3.0 * se + 1e-10 * l, "{law:?} u={u}: {l} vs {m}");
                if u == 0.0 {
                    continue;
                }
                let h = 1e-5;
                let fd = (law.laplace(u + h).unwrap().0 - law.laplace(u - h).unwrap().0) / (2.0 * h);
                assert!((fd - dl).abs() < 1e-6, "{law:?} u={u}: {fd} vs {dl}");
            }
            let (l0, dl0) = law.laplace(0.0).unwrap();
            assert!((l0 - 1.0).abs() < 1e-10);
            assert!((dl0 + law.mean()).abs() < 1e-9 * law.mean());
        }
    }

    #[test]
    fn exponential_mixture_kurtosis_is_six() {
        assert!((ALaw::Exponential { mean: 2.0 }.mixture_kurtosis() - 6.0).abs() < 1e-12);
        assert!((ALaw::Degenerate { value: 2.0 }.mixture_kurtosis() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(ALaw::Exponential { mean: 0.0 }.validate().is_err());
        assert!(HLaw::Uniform { lo: 0.4, hi: 0.9 }.validate().is_err());
        assert!(HLaw::Discrete { points: vec![0.6, 0.9], weights: vec![0.5, 0.4] }.validate().is_err());
        assert!(HLaw::ProductOfK { marginals: vec![], shared_latent: false }.validate().is_err());
        assert!(HLaw::Uniform { lo: 0.55, hi: 0.95 }.validate().is_ok());
    }

    #[test]
    fn uniform_draws_stay_inside() {
        let law = HLaw::Uniform { lo: 0.55, hi: 0.95 };
        let mut rng = stream(42, Purpose::Mixing, 0, 0);
        let hs: Vec<f64> = (0..10_000).map(|_| law.sample(&mut rng)[0]).collect();
        assert!(hs.iter().all(|&h| h > 0.55 && h < 0.95));
    }

    #[test]
    fn rules_integrate_polynomials_and_match_sampling() {
        let laws = [
            HLaw::Degenerate { h: 0.7 },
            HLaw::Uniform { lo: 0.55, hi: 0.95 },
            HLaw::Discrete { points: vec![0.6, 0.9], weights: vec![0.3, 0.7] },
            HLaw::ProductOfK {
                marginals: vec![HMarginal::Uniform { lo: 0.6, hi: 0.7 }, HMarginal::Discrete { points: vec![0.8, 0.9], weights: vec![0.5, 0.5] }],
                shared_latent: true,
            },
            HLaw::ProductOfK {
                marginals: vec![HMarginal::Uniform { lo: 0.6, hi: 0.7 }, HMarginal::Uniform { lo: 0.8, hi: 0.9 }],
                shared_latent: false,
            },
        ];
        for (i, law) in laws.iter().enumerate() {
            let f = |h: &[f64]| h.iter().map(|x| x.powi(3)).product::<f64>();
            let q: f64 = law.rule().iter().map(|(w, h)| w * f(h)).sum();
            let w: f64 = law.rule().iter().map(|(w, _)| w).sum();
            assert!((w - 1.0).abs() < 1e-12);
            let mut rng = stream(43, Purpose::Mixing, i as u64, 0);
            let xs: Vec<f64> = (0..100_000).map(|_| f(&law.sample(&mut rng))).collect();
            let (m, se) = mean_se(&xs);
            assert!((q - m).abs() <= 3.0 * se + 1e-10 * q.abs(), "{law:?}: rule {q} vs mc {m}");
        }
    }
}
