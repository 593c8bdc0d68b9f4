use super::*;
use crate::rng::{stream, Purpose};
use crate::stats::ks_one_sample;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn stable(n: usize) -> MassLaw {
    MassLaw::new(MassFamily::StablePower { hurst: 0.75 }, n, 0.2, 0.1).unwrap()
}

#[test]
fn stable_ceiling_closed_form() {
    let law = stable(10_000);
    assert!((law.ceiling - (1.5 * 10f64.powf(0.4)).powf(1.0 / 1.5)).abs() < 1e-12);
    assert!((law.ceiling - 2.4214).abs() < 1e-4);
    assert!((law.floor - 10_000f64.powf(-0.2)).abs() < 1e-15);
    assert_eq!(law.meta.moment_exponent, 3.0 * 0.2 - 0.1);
}

#[test]
fn mixture_ceiling_solves_mass_equation() {
    let law = MassLaw::new(MassFamily::PowerMixture { hursts: vec![0.6, 0.9] }, 4096, 0.1, 0.1).unwrap();
    let m = law.ceiling;
    let lhs = m.powf(1.8) / 1.8 + m.powf(1.2) / 1.2;
    assert!((lhs / 4096f64.powf(0.1) - 1.0).abs() < 1e-12);
}

#[test]
fn dirac_laws() {
    let law = MassLaw::new(MassFamily::DiracAtNPower, 10_000, 0.0, 0.1).unwrap();
    assert!((law.point_mass().unwrap() - 1.584_893_192_461_113_4).abs() < 1e-12);
    assert_eq!(law.meta.floor_exponent, -0.05);
    assert_eq!(law.meta.moment_exponent, -0.2);
    let one = MassLaw::new(MassFamily::DiracAtOne, 77, 0.3, 0.2).unwrap();
    assert_eq!(one.point_mass(), Some(1.0));
    assert_eq!(one.normalizer, 1.0);
    assert_eq!(
        one.meta,
        MassLawMeta { floor_exponent: 0.0, moment_exponent: 0.0, normalizer_exponent: 0.0, limit_constant: 1.0 }
    );
    let mut rng = stream(1, Purpose::Masses, 0, 0);
    assert!(law.sample_n(100, &mut rng).iter().all(|&m| m == law.point_mass().unwrap()));
    assert!((one.e_n(1.0, 1.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
    assert!((one.e_n(1.0, 1.0).unwrap() - 0.632_121).abs() < 1e-6);
}

#[test]
fn construction_errors() {
    assert!(MassLaw::new(MassFamily::StablePower { hurst: 0.4 }, 100, 0.2, 0.1).is_err());
    assert!(MassLaw::new(MassFamily::StablePower { hurst: 0.75 }, 100, -0.2, 0.1).is_err());
    assert!(MassLaw::new(MassFamily::PowerMixture { hursts: vec![] }, 100, 0.2, 0.1).is_err());
    assert!(MassLaw::new(MassFamily::TemperedStable { hurst: 0.75 }, 100, 0.1, 0.2).is_err());
    assert!(MassLaw::new(MassFamily::DiracAtNPower, 100, 0.0, 0.0).is_err());
}

#[test]
fn e_n_vanishes_at_zero_and_rejects_negative_time() {
    let law = stable(1000);
    assert_eq!(law.e_n(1.0, 0.0).unwrap(), 0.0);
    assert!(law.e_n(1.0, -1.0).is_err());
}

#[test]
fn stable_draws_stay_in_support_and_match_mean() {
    let law = stable(10_000);
    let mut rng = stream(11, Purpose::Masses, 0, 0);
    let draws = law.sample_n(1_000_000, &mut rng);
    assert!(draws.iter().all(|&y| y > law.floor && y <= law.ceiling));
    let (mean, se) = mean_and_se(&draws);
    // Closed-form first moment of the density m* y^{1/2}.
    let exact = law.normalizer * (law.ceiling.powf(2.5) - law.floor.powf(2.5)) / 2.5;
    assert!((mean - exact).abs() < 3.0 * se, "mean {mean} exact {exact} se {se}");
}

#[test]
fn e_n_matches_monte_carlo() {
    let law = stable(10_000);
    let mut rng = stream(12, Purpose::Masses, 0, 0);
    let g = 1.0;
    let t = 0.7;
    let vals: Vec<f64> = law.sample_n(1_000_000, &mut rng).iter().map(|y| (1.0 - (-g * y * t).exp()) / (y * y)).collect();
    let (mean, se) = mean_and_se(&vals);
    let q = law.e_n(g, t).unwrap();
    assert!((mean - q).abs() < 3.0 * se, "mc {mean} quad {q} se {se}");
}

#[test]
fn normalized_mass_integral_increases_towards_the_laplace_exponent() {
    let v = MassFamily::StablePower { hurst: 0.75 }.variance_fn(1.3).unwrap();
    for t in [0.1, 1.0, 3.0] {
        let ratios: Vec<f64> = (6..=14)
            .map(|k| {
                let law = stable(1 << k);
                law.e_n(1.3, t).unwrap() / law.normalizer / v.rate(t)
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] >= w[0]), "t={t}: {ratios:?}");
        assert!(ratios.iter().all(|&r| r < 1.0));
        assert!(ratios[8] - ratios[0] > 0.05, "t={t}: {ratios:?}");
    }
}

#[test]
fn normalizer_ratio_tends_to_limit_constant() {
    let families = [
        (MassFamily::StablePower { hurst: 0.75 }, 0.2, 0.1),
        (MassFamily::PowerMixture { hursts: vec![0.6, 0.9] }, 0.2, 0.1),
        (MassFamily::TemperedStable { hurst: 0.75 }, 0.1, 0.0),
        (MassFamily::ExponentialLevy { rate: 2.0 }, 0.1, 0.0),
        (MassFamily::DiracAtNPower, 0.0, 0.1),
    ];
    for (family, d, delta) in families {
        let gaps: Vec<f64> = [1usize << 8, 1 << 16, 1 << 30]
            .iter()
            .map(|&n| {
                let law = MassLaw::new(family.clone(), n, d, delta).unwrap();
                (law.normalizer * (n as f64).powf(delta) / law.meta.limit_constant - 1.0).abs()
            })
            .collect();
        assert!(gaps[2] <= gaps[1] && gaps[1] <= gaps[0], "{family:?}: {gaps:?}");
        assert!(gaps[2] < 0.05, "{family:?}: {gaps:?}");
    }
}

#[test]
fn tempered_families_recover_their_laplace_exponent() {
    // With a tiny floor the normalized mass integral equals Φ(γt) up to the cut-off piece.
    for family in [MassFamily::TemperedStable { hurst: 0.75 }, MassFamily::ExponentialLevy { rate: 1.7 }] {
        let law = MassLaw::new(family.clone(), 1 << 20, 1.2, 0.0).unwrap();
        let v = family.variance_fn(1.0).unwrap();
        for t in [0.3, 1.0, 4.0] {
            let r = law.e_n(1.0, t).unwrap() / law.normalizer;
            assert!((r / v.rate(t) - 1.0).abs() < 1e-3, "{family:?} t={t}: {r} vs {}", v.rate(t));
        }
    }
}

#[test]
fn samplers_pass_kolmogorov_smirnov() {
    let laws = [
        stable(10_000),
        MassLaw::new(MassFamily::PowerMixture { hursts: vec![0.6, 0.9] }, 4096, 0.2, 0.1).unwrap(),
        MassLaw::new(MassFamily::TemperedStable { hurst: 0.75 }, 4096, 0.1, 0.0).unwrap(),
        MassLaw::new(MassFamily::ExponentialLevy { rate: 1.0 }, 4096, 0.1, 0.0).unwrap(),
    ];
    for (i, law) in laws.iter().enumerate() {
        let mut rng = stream(13, Purpose::Masses, i as u64, 0);
        let draws = law.sample_n(100_000, &mut rng);
        assert!(draws.iter().all(|&y| y >= law.floor));
        let ks = ks_one_sample(&draws, |y| law.cdf(y)).unwrap();
        assert!(ks.p_value > 0.01, "{:?}: D={} p={}", law.family, ks.statistic, ks.p_value);
    }
}

#[test]
fn density_integrates_to_one_and_cdf_agrees() {
    let laws = [
        stable(4096),
        MassLaw::new(MassFamily::PowerMixture { hursts: vec![0.6, 0.9] }, 4096, 0.2, 0.1).unwrap(),
        MassLaw::new(MassFamily::TemperedStable { hurst: 0.75 }, 4096, 0.1, 0.0).unwrap(),
        MassLaw::new(MassFamily::ExponentialLevy { rate: 3.0 }, 4096, 0.1, 0.0).unwrap(),
    ];
    for law in &laws {
        assert!((law.expect(|_| 1.0, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        let y = 2.0 * law.floor;
        let partial = crate::quad::integrate(|s| law.density(s).unwrap(), law.floor, y, 1e-13).unwrap();
        assert!((partial - law.cdf(y)).abs() < 1e-9, "{:?}", law.family);
    }
}

#[test]
fn mixture_normalizer_is_inverse_mass() {
    let law = MassLaw::new(MassFamily::PowerMixture { hursts: vec![0.6, 0.9] }, 4096, 0.2, 0.1).unwrap();
    // μ_N = m* y² ν on the truncation window, so ∫ y^{-2} μ_N(dy) = m* ν(window).
    let lhs = law.expect(|y| y.powi(-2), 1e-12).unwrap();
    let nu: f64 = [0.6f64, 0.9]
        .iter()
        .map(|h| (law.ceiling.powf(1.0 - 2.0 * h) - law.floor.powf(1.0 - 2.0 * h)) / (1.0 - 2.0 * h))
        .sum();
    assert!((lhs / (law.normalizer * nu) - 1.0).abs() < 1e-9);
}

#[test]
fn inverse_fourth_moment_growth_is_bounded() {
    let families = [
        (MassFamily::StablePower { hurst: 0.75 }, 0.2, 0.1),
        (MassFamily::PowerMixture { hursts: vec![0.6, 0.9] }, 0.2, 0.1),
        (MassFamily::TemperedStable { hurst: 0.75 }, 0.1, 0.0),
        (MassFamily::ExponentialLevy { rate: 1.0 }, 0.1, 0.0),
        (MassFamily::DiracAtNPower, 0.0, 0.1),
    ];
    for (family, d, delta) in families {
        let ratios: Vec<f64> = (6..=14)
            .map(|k| {
                let law = MassLaw::new(family.clone(), 1 << k, d, delta).unwrap();
                let q = law.inverse_fourth_moment().unwrap();
                let oracle = law.expect(|y| y.powi(-4), 1e-12 * q).unwrap();
                assert!((q / oracle - 1.0).abs() < 1e-8);
                q / f64::powf((1u64 << k) as f64, law.meta.moment_exponent)
            })
            .collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(max <= 1.5 * ratios[0], "{family:?}: {ratios:?}");
    }
}

#[test]
fn tempered_acceptance_rate_reported() {
    let law = MassLaw::new(MassFamily::TemperedStable { hurst: 0.75 }, 4096, 0.1, 0.0).unwrap();
    let r = law.acceptance_rate();
    // Mass of the Gamma(3 - 2H, 1) law above the floor.
    let shape = 1.5;
    let body = crate::quad::integrate(|y| y.powf(shape - 1.0) * (-y).exp(), 0.0, law.floor, 1e-14).unwrap();
    let expected = 1.0 - body / statrs::function::gamma::gamma(shape);
    assert!((r - expected).abs() < 1e-10, "{r} vs {expected}");
    assert!(r > 0.5 && r < 1.0);
    assert_eq!(stable(100).acceptance_rate(), 1.0);
}
