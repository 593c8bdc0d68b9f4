//! Finite-N Langevin system of a test particle in a bath of surround particles,
//! and the approximation chain that leads to the Gaussian limit.
//!
//! Surround velocities are advanced with the exact Ornstein–Uhlenbeck
//! transition and the velocity feedback frozen over a step. The test-particle
//! velocity is advanced with its integrating factor against the surround
//! forcing, interpolated linearly across the step, and its position is the
//! exact integral of that same piecewise model. The limit-side `Z̃` is the
//! trapezoidal integral of the interpolated forcing, so `X̃ − Z̃ = −(M/A) Ṽ`
//! holds at every grid time. The decoupled bank of Ornstein–Uhlenbeck
//! velocities reuses the same Gaussian increments, so pathwise gaps between
//! the full system and the chain are meaningful.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::ensemble::{PathMatrix, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mass_laws::{LevyCouple, MassLaw, VarianceFn};
use crate::params::{validate_regime, DerivedConstants, SystemConfig};
use crate::rng::{stream, Purpose};

/// Largest allowed `γ · m_max · dt` before steps are subdivided.
pub const STABILITY_LIMIT: f64 = 0.5;

pub const POSITION: &str = "X";
pub const CHAIN_POSITION: &str = "Xtilde";
pub const CHAIN_LIMIT: &str = "Ztilde";

/// Exact transition of the Ornstein–Uhlenbeck velocity with rate `γm`
/// and stationary variance `σ/(γm)`.
pub fn step_ou_exact<R: Rng + ?Sized>(u: f64, m: f64, gamma: f64, sigma: f64, dt: f64, rng: &mut R) -> f64 {
    let k = gamma * m;
    let decay = (-k * dt).exp();
    let sd = ((sigma / k) * -(-2.0 * k * dt).exp_m1()).sqrt();
    let xi: f64 = rng.sample(StandardNormal);
    u * decay + sd * xi
}

/// `(1 − e^{−z})/z`, accurate near zero.
fn phi1(z: f64) -> f64 {
    if z < 1e-5 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `(1 − φ₁(z))/z`, accurate near zero.
fn phi2(z: f64) -> f64 {
    if z < 1e-4 {
        0.5 - z / 6.0 + z * z / 24.0
    } else {
        (1.0 - phi1(z)) / z
    }
}

/// `(1/2 − φ₂(z))/z`, accurate near zero.
fn phi3(z: f64) -> f64 {
    if z < 1e-2 {
        1.0 / 6.0 - z / 24.0 + z * z / 120.0 - z.powi(3) / 720.0 + z.powi(4) / 5040.0
    } else {
        (0.5 - phi2(z)) / z
    }
}

/// Integrating-factor weights for `dV = (−r V + F(t)) dt` with `F` linear over
/// the step, for the velocity and for its integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct VelocityWeights {
    pub decay: f64,
    /// Weight of the forcing at the start of the step.
    pub start: f64,
    /// Weight of the forcing at the end of the step.
    pub end: f64,
    /// Weight of the initial velocity in the displacement.
    pub shift: f64,
    pub shift_start: f64,
    pub shift_end: f64,
}

impl VelocityWeights {
    pub fn new(rate: f64, h: f64) -> Self {
        let z = rate * h;
        let end = h * phi2(z);
        let shift_end = h * h * phi3(z);
        Self {
            decay: (-z).exp(),
            start: h * phi1(z) - end,
            end,
            shift: h * phi1(z),
            shift_start: h * h * phi2(z) - shift_end,
            shift_end,
        }
    }
}

/// Per-particle coefficients of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SurroundStep {
    pub decay: f64,
    /// Response of the velocity to the test-particle velocity over the step.
    pub drift: f64,
    pub noise_sd: f64,
}

impl SurroundStep {
    pub fn new(m: f64, alpha: f64, gamma: f64, sigma: f64, h: f64) -> Self {
        let k = gamma * m;
        Self {
            decay: (-k * h).exp(),
            drift: alpha / m * h * phi1(k * h),
            noise_sd: ((sigma / k) * -(-2.0 * k * h).exp_m1()).sqrt(),
        }
    }
}

/// Number of internal substeps per output step so that the stiffest surround
/// particle satisfies the stability guard.
pub fn substeps(gamma: f64, max_mass: f64, dt: f64) -> usize {
    ((gamma * max_mass * dt / STABILITY_LIMIT).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Observe {
    Position,
    Chain,
}

struct Engine<'a> {
    cfg: &'a SystemConfig,
    law: &'a MassLaw,
    consts: DerivedConstants,
    seed: u64,
}

struct PathSet {
    x: Vec<f64>,
    chain: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Engine<'a> {
    fn checked(cfg: &'a SystemConfig, law: &'a MassLaw, seed: u64) -> Result<Self> {
        validate_regime(cfg, &law.meta)?.into_result()?;
        Ok(Self::unchecked(cfg, law, seed))
    }

    fn unchecked(cfg: &'a SystemConfig, law: &'a MassLaw, seed: u64) -> Self {
        Self { cfg, law, consts: cfg.derive(), seed }
    }

    fn trajectory(&self, index: usize, observe: Observe) -> Result<PathSet> {
        let cfg = self.cfg;
        let n = cfg.particles;
        let (gamma, sigma) = (cfg.gamma, cfg.sigma);
        let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|k| stream(self.seed, Purpose::Particle, index as u64, k as u64)).collect();
        let masses: Vec<f64> = rngs.iter_mut().map(|r| self.law.sample(r)).collect();
        if self.consts.beta > 0.0 {
            self.consts.check_friction(&masses)?;
        }
        let max_mass = masses.iter().copied().fold(0.0, f64::max);
        let sub = substeps(gamma, max_mass, cfg.dt());
        let h = cfg.dt() / sub as f64;
        let steps: Vec<SurroundStep> =
            masses.iter().map(|&m| SurroundStep::new(m, self.consts.alpha, gamma, sigma, h)).collect();
        let weights = VelocityWeights::new(self.consts.total_friction / cfg.test_mass, h);
        let force = self.consts.beta / cfg.test_mass;
        let average = self.consts.beta / self.consts.total_friction;

        let mut u: Vec<f64> = masses
            .iter()
            .zip(rngs.iter_mut())
            .map(|(&m, r)| (sigma / (gamma * m)).sqrt() * r.sample::<f64, _>(StandardNormal))
            .collect();
        let chain = observe == Observe::Chain;
        let mut ut = if chain { u.clone() } else { Vec::new() };

        let n_out = cfg.n_steps + 1;
        let mut xs = Vec::with_capacity(n_out);
        let mut xts = Vec::with_capacity(if chain { n_out } else { 0 });
        let mut zts = Vec::with_capacity(if chain { n_out } else { 0 });
        let (mut x, mut v, mut xt, mut vt, mut zt) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut sum: f64 = u.iter().sum();
        let mut sum_t = sum;
        xs.push(0.0);
        if chain {
            xts.push(0.0);
            zts.push(0.0);
        }

        for step in 0..cfg.n_steps {
            for _ in 0..sub {
                let mut next = 0.0;
                let mut next_t = 0.0;
                if chain {
                    for (((uk, utk), c), r) in u.iter_mut().zip(ut.iter_mut()).zip(&steps).zip(rngs.iter_mut()) {
                        let xi: f64 = r.sample(StandardNormal);
                        let noise = c.noise_sd * xi;
                        *uk = c.decay * *uk + c.drift * v + noise;
                        *utk = c.decay * *utk + noise;
                        next += *uk;
                        next_t += *utk;
                    }
                } else {
                    for ((uk, c), r) in u.iter_mut().zip(&steps).zip(rngs.iter_mut()) {
                        let xi: f64 = r.sample(StandardNormal);
                        *uk = c.decay * *uk + c.drift * v + c.noise_sd * xi;
                        next += *uk;
                    }
                }
                let v_next = weights.decay * v + force * (weights.start * sum + weights.end * next);
                x += weights.shift * v + force * (weights.shift_start * sum + weights.shift_end * next);
                v = v_next;
                sum = next;
                if chain {
                    let vt_next = weights.decay * vt + force * (weights.start * sum_t + weights.end * next_t);
                    xt += weights.shift * vt + force * (weights.shift_start * sum_t + weights.shift_end * next_t);
                    zt += 0.5 * h * average * (sum_t + next_t);
                    vt = vt_next;
                    sum_t = next_t;
                }
            }
            if !(x.is_finite() && v.is_finite() && xt.is_finite() && zt.is_finite()) {
                return Err(Error::NonFinite { trajectory: index, step: step + 1 });
            }
            xs.push(x);
            if chain {
                xts.push(xt);
                zts.push(zt);
            }
        }
        Ok(PathSet { x: xs, chain: chain.then_some((xts, zts)) })
    }

    fn run(&self, n_traj: usize, exec: Exec, observe: Observe) -> Result<TrajectoryEnsemble> {
        let sets = exec.try_map(n_traj, |i| self.trajectory(i, observe))?;
        let n_times = self.cfg.n_steps + 1;
        let x = PathMatrix::from_rows(n_times, sets.iter().map(|s| &s.x))?;
        let mut ens = TrajectoryEnsemble::new(self.cfg.grid())?.with(POSITION, x)?;
        if observe == Observe::Chain {
            let xt = PathMatrix::from_rows(n_times, sets.iter().map(|s| &s.chain.as_ref().expect("chain requested").0))?;
            let zt = PathMatrix::from_rows(n_times, sets.iter().map(|s| &s.chain.as_ref().expect("chain requested").1))?;
            ens = ens.with(CHAIN_POSITION, xt)?.with(CHAIN_LIMIT, zt)?;
        }
        Ok(ens
            .note("mass_law", self.law.family.name())
            .note("N", self.cfg.particles)
            .note("seed", self.seed)
            .note("n_traj", n_traj))
    }
}

/// Simulates the test-particle position `X` of the coupled system.
pub fn simulate_full_system(cfg: &SystemConfig, law: &MassLaw, n_traj: usize, seed: u64, exec: Exec) -> Result<TrajectoryEnsemble> {
    Engine::checked(cfg, law, seed)?.run(n_traj, exec, Observe::Position)
}

/// Simulates `X`, its decoupled approximation `X̃` and the limit-side `Z̃` on shared noise.
pub fn simulate_chain(cfg: &SystemConfig, law: &MassLaw, n_traj: usize, seed: u64, exec: Exec) -> Result<TrajectoryEnsemble> {
    Engine::checked(cfg, law, seed)?.run(n_traj, exec, Observe::Chain)
}

/// Runs the chain without the regime check, e.g. for a decoupled system.
pub(crate) fn simulate_chain_unchecked(cfg: &SystemConfig, law: &MassLaw, n_traj: usize, seed: u64) -> Result<TrajectoryEnsemble> {
    Engine::unchecked(cfg, law, seed).run(n_traj, Exec::Serial, Observe::Chain)
}

/// Masses of trajectory `index`, as drawn by the simulator.
pub fn trajectory_masses(law: &MassLaw, particles: usize, seed: u64, index: usize) -> Vec<f64> {
    (0..particles)
        .map(|k| law.sample(&mut stream(seed, Purpose::Particle, index as u64, k as u64)))
        .collect()
}

/// `∫₀ᵗ∫₀ˢ m^{−1} e^{−γm|τ−ρ|} dτ dρ`.
pub fn ou_double_integral(m: f64, gamma: f64, t: f64, s: f64) -> f64 {
    let k = gamma * m;
    let g = VarianceFn { couple: LevyCouple::UnitJump, gamma: k };
    // ∫₀ˣ∫₀ˣ e^{−k|τ−ρ|} = (2/k) (x − (1 − e^{−kx})/k).
    let square = |x: f64| 2.0 / k * g.value(x);
    (square(t) + square(s) - square(t - s)) / (2.0 * m)
}

/// Conditional covariance of `Z̃_t, Z̃_s` given the masses, and its limit.
pub fn conditional_cov_check(cfg: &SystemConfig, law: &MassLaw, masses: &[f64], t: f64, s: f64) -> Result<(f64, f64)> {
    if t < 0.0 || s < 0.0 || t > cfg.horizon || s > cfg.horizon {
        return Err(Error::Domain(format!("times ({t}, {s}) outside [0, {}]", cfg.horizon)));
    }
    let k = cfg.derive();
    let scale = cfg.sigma * k.beta * k.beta / (cfg.gamma * k.total_friction * k.total_friction);
    let xi = scale * masses.iter().map(|&m| ou_double_integral(m, cfg.gamma, t, s)).sum::<f64>();
    let limit = limit_prefactor(cfg, law) * law.variance_fn(cfg.gamma)?.kernel(t, s);
    Ok((xi, limit))
}

/// `2σ C_β² C_δ / (γ² C_α²)` with the mass law's limit constant.
pub fn limit_prefactor(cfg: &SystemConfig, law: &MassLaw) -> f64 {
    2.0 * cfg.sigma * cfg.drive_scale.powi(2) * law.meta.limit_constant / (cfg.gamma.powi(2) * cfg.friction_scale.powi(2))
}

pub(crate) type M3 = [[f64; 3]; 3];

pub(crate) fn mul(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub(crate) fn transpose(a: &M3) -> M3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

/// Covariance of (X, V, ΣU) after `n_steps` steps of the scheme when every
/// surround mass equals `m`; propagated exactly, without sampling.
fn scheme_point_mass_cov(cfg: &SystemConfig, m: f64, n_steps: usize) -> M3 {
    let k = cfg.derive();
    let n = cfg.particles as f64;
    let h = cfg.horizon / n_steps as f64;
    let c = SurroundStep::new(m, k.alpha, cfg.gamma, cfg.sigma, h);
    let w = VelocityWeights::new(k.total_friction / cfg.test_mass, h);
    let f = k.beta / cfg.test_mass;
    let s_row = [0.0, n * c.drift, c.decay];
    let v_row = [0.0, w.decay + f * w.end * n * c.drift, f * w.start + f * w.end * c.decay];
    let x_row = [1.0, w.shift + f * w.shift_end * n * c.drift, f * w.shift_start + f * w.shift_end * c.decay];
    let g: M3 = [x_row, v_row, s_row];
    let noise = [f * w.shift_end, f * w.end, 1.0];
    let var = n * c.noise_sd * c.noise_sd;
    let mut p: M3 = [[0.0; 3]; 3];
    p[2][2] = n * cfg.sigma / (cfg.gamma * m);
    let gt = transpose(&g);
    for _ in 0..n_steps {
        p = mul(&mul(&g, &p), &gt);
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] += var * noise[i] * noise[j];
            }
        }
    }
    p
}

/// `Var X` at the horizon produced by the scheme for the point-mass law `law`,
/// with the same substepping as the simulator.
pub fn point_mass_scheme_variance(cfg: &SystemConfig, law: &MassLaw) -> Result<f64> {
    let m = law
        .point_mass()
        .ok_or_else(|| Error::Domain(format!("family {} is not a point mass", law.family.name())))?;
    let sub = substeps(cfg.gamma, m, cfg.dt());
    Ok(scheme_point_mass_cov(cfg, m, cfg.n_steps * sub)[0][0])
}
