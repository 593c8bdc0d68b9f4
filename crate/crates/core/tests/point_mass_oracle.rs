mod common;

use anodiff::particle_sim::{point_mass_scheme_variance, simulate_full_system};
use anodiff::{Exec, MassFamily, MassLaw};

use common::{point_mass_position_variance, sample_mean_var, wiener_config};

fn law(particles: usize) -> MassLaw {
    MassLaw::new(MassFamily::DiracAtNPower, particles, 0.0, 0.1).unwrap()
}

#[test]
fn lyapunov_oracle_reaches_brownian_motion_for_one_fast_surround_particle() {
    // N = 1, m = 1: the slaved test particle moves like (β/A)∫S, with S an
    // Ornstein-Uhlenbeck velocity whose decay the feedback lowers to γ − β.
    let mut cfg = wiener_config(1);
    cfg.test_mass = 1e-7;
    cfg.gamma = 1e4;
    cfg.sigma = 1e4;
    cfg.drive_scale = 100.0;
    let kappa = cfg.gamma - cfg.drive_scale;
    let target = 2.0 * cfg.sigma * cfg.drive_scale.powi(2) / kappa.powi(2);
    let var = common::point_mass_covariance(&cfg, 1.0, 1.0, 1e-7)[0][0];
    assert!((var / target - 1.0).abs() < 3e-3, "{var} vs {target}");
}

#[test]
fn scheme_covariance_tracks_the_continuous_system() {
    for particles in [256, 1024, 4096] {
        let cfg = wiener_config(particles);
        let law = law(particles);
        let m = law.point_mass().unwrap();
        let scheme = point_mass_scheme_variance(&cfg, &law).unwrap();
        let exact = point_mass_position_variance(&cfg, m, cfg.horizon);
        assert!((scheme / exact - 1.0).abs() < 2e-3, "N={particles}: scheme {scheme} vs oracle {exact}");
    }
}

#[test]
fn simulated_variance_matches_the_oracle() {
    let particles = 256;
    let cfg = wiener_config(particles);
    let law = law(particles);
    let n_traj = 2000;
    let ens = simulate_full_system(&cfg, &law, n_traj, 77, Exec::Parallel).unwrap();
    let (_, var) = sample_mean_var(&ens.primary().column(cfg.n_steps));
    let exact = point_mass_position_variance(&cfg, law.point_mass().unwrap(), cfg.horizon);
    let se = exact * (2.0 / (n_traj as f64 - 1.0)).sqrt();
    assert!((var - exact).abs() < 4.0 * se, "{var} vs {exact} ± {se}");
}
