//! Spectral solver for `u(t, x) = E[u₀(x + Z_t)]` with `Z = √A · G^{(H)}`.
//!
//! The Fourier symbol `Ψ(t, p) = E exp(−A D v_H(t) p² / 2)` is known in closed
//! form up to the H-integral, so one multiplication in frequency space evolves
//! a density to any time.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::superstat::{total_variance, SuperstatModel};

/// Largest density tolerated at either end of the spatial grid.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Largest imaginary part tolerated after the inverse transform.
pub const IMAGINARY_TOL: f64 = 1e-10;
pub const DEFAULT_POINTS: usize = 4096;
/// Half-width of the default grid in standard deviations.
pub const DEFAULT_WIDTH: f64 = 12.0;

pub type SymbolModel = SuperstatModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub t: f64,
}

impl DensityField {
    /// Periodic grid of `n` points on `[−half_width, half_width)`.
    pub fn grid(n: usize, half_width: f64) -> Vec<f64> {
        let dx = 2.0 * half_width / n as f64;
        (0..n).map(|j| -half_width + j as f64 * dx).collect()
    }

    /// Centred Gaussian density with the given variance.
    pub fn gaussian(variance: f64, n: usize, half_width: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::param("u0", format!("variance must be positive, got {variance}")));
        }
        if n < 8 || !(half_width > 0.0) {
            return Err(Error::param("n_x", "grid needs at least 8 points and a positive width"));
        }
        let x_grid = Self::grid(n, half_width);
        let norm = (2.0 * std::f64::consts::PI * variance).sqrt();
        let values = x_grid.iter().map(|x| (-x * x / (2.0 * variance)).exp() / norm).collect();
        Ok(Self { x_grid, values, t: 0.0 })
    }

    pub fn dx(&self) -> f64 {
        self.x_grid[1] - self.x_grid[0]
    }

    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.x_grid.iter().zip(&self.values).map(|(x, u)| f(*x) * u).sum();
        let ends = 0.5 * (f(self.x_grid[0]) * self.values[0] + f(self.x_grid[n - 1]) * self.values[n - 1]);
        self.dx() * (inner - ends)
    }

    /// Trapezoidal mass.
    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn second_moment(&self) -> f64 {
        self.integrate(|x| x * x)
    }

    pub fn boundary(&self) -> f64 {
        self.values[0].abs().max(self.values[self.values.len() - 1].abs())
    }
}

/// `Ψ(t, p)`; equals 1 at `p = 0` and lies in `(0, 1]`.
pub fn symbol_psi(model: &SymbolModel, t: f64, p: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    if p == 0.0 || t == 0.0 {
        return Ok(1.0);
    }
    let d = model.diffusivity();
    model.mixing.hurst.rule().iter().try_fold(0.0, |acc, (w, h)| {
        let (l, _) = model.mixing.amplitude.laplace(d * model.variance(h, t) * p * p / 2.0)?;
        Ok(acc + w * l)
    })
}

/// `𝒦(s, p²/2) = ∂_s log Ψ(s, p)`, written through `ℒ[A]` and its derivative.
pub fn kernel_symbol(model: &SymbolModel, s: f64, p: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("kernel symbol needs s >= 0, got {s}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let d = model.diffusivity();
    let q = p * p / 2.0;
    let (mut num, mut den) = (0.0, 0.0);
    for (w, h) in model.mixing.hurst.rule() {
        let rate = model.variance_rate(&h, s);
        if !rate.is_finite() {
            return Err(Error::Domain(format!("variance rate diverges at s = {s}")));
        }
        let (l, dl) = model.mixing.amplitude.laplace(d * model.variance(&h, s) * q)?;
        num += w * rate * dl;
        den += w * l;
    }
    Ok(d * q * num / den)
}

/// Angular frequencies of the discrete transform on `n` points spaced `dx`.
fn frequencies(n: usize, dx: f64) -> impl Iterator<Item = f64> {
    let base = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    (0..n).map(move |k| if k <= n / 2 { k as f64 * base } else { (k as f64 - n as f64) * base })
}

/// `u(t, ·)` from `u₀` by one spectral multiplication.
pub fn evolve_density(model: &SymbolModel, u0: &DensityField, t: f64) -> Result<DensityField> {
    let n = u0.values.len();
    if n < 8 || u0.x_grid.len() != n {
        return Err(Error::Domain("density grid needs at least 8 matching points".into()));
    }
    let boundary = u0.boundary();
    if boundary >= BOUNDARY_TOL {
        return Err(Error::BoundaryMass { value: boundary, limit: BOUNDARY_TOL });
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = u0.values.iter().map(|&u| Complex::new(u, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);

    // Ψ is even in p, so the symbol is evaluated once per |p|.
    let mut symbol = vec![0.0; n / 2 + 1];
    for (k, p) in frequencies(n, u0.dx()).take(n / 2 + 1).enumerate() {
        symbol[k] = symbol_psi(model, t, p)?;
    }
    for (k, c) in buf.iter_mut().enumerate() {
        *c *= symbol[k.min(n - k)];
    }
    planner.plan_fft_inverse(n).process(&mut buf);

    let scale = 1.0 / n as f64;
    let peak = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max) * scale;
    let residue = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max) * scale;
    if residue > IMAGINARY_TOL * peak.max(1.0) {
        return Err(Error::ImaginaryResidue(residue));
    }
    let out = DensityField { x_grid: u0.x_grid.clone(), values: buf.iter().map(|c| c.re * scale).collect(), t: u0.t + t };
    let boundary = out.boundary();
    if boundary >= BOUNDARY_TOL {
        return Err(Error::BoundaryMass { value: boundary, limit: BOUNDARY_TOL });
    }
    Ok(out)
}

/// Evolves `u₀` to each time independently.
pub fn evolve_many(model: &SymbolModel, u0: &DensityField, times: &[f64], exec: Exec) -> Result<Vec<DensityField>> {
    exec.try_map(times.len(), |i| evolve_density(model, u0, times[i]))
}

/// Default half-width `12 · √(s₀² + max Var Z_t)` for a Gaussian start of variance `s₀²`.
pub fn default_half_width(model: &SymbolModel, initial_variance: f64, t_max: f64) -> f64 {
    DEFAULT_WIDTH * (initial_variance + total_variance(model, t_max)).sqrt()
}

/// Evolves a Gaussian start, widening the grid (at fixed spacing) until the
/// evolved density vanishes at the boundary; gives up after `max_doublings`.
pub fn evolve_gaussian(
    model: &SymbolModel,
    initial_variance: f64,
    times: &[f64],
    n_x: usize,
    max_doublings: u32,
    exec: Exec,
) -> Result<Vec<DensityField>> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let mut half_width = default_half_width(model, initial_variance, t_max);
    let mut n = n_x;
    let mut attempt = 0;
    loop {
        let u0 = DensityField::gaussian(initial_variance, n, half_width)?;
        match evolve_many(model, &u0, times, exec) {
            Err(Error::BoundaryMass { .. }) if attempt < max_doublings => {
                attempt += 1;
                half_width *= 2.0;
                n *= 2;
            }
            other => return other,
        }
    }
}
