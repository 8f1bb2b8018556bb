use std::f64::consts::PI;

use levyfp_core::math::quantile_sorted;
use levyfp_core::particles::*;
use levyfp_core::stable::*;
use levyfp_core::{DensityField, Error, ForceField, ParticleEnsemble, PeriodicGrid1D};

fn torus(n: usize) -> PeriodicGrid1D {
    PeriodicGrid1D::new(2.0 * PI, n).unwrap()
}

fn uniform(n: usize, alpha: f64, seed: u64) -> ParticleEnsemble {
    ParticleEnsemble::from_density(&DensityField::from_fn(torus(64), |_| 1.0).unwrap(), alpha, n, seed, 0.0).unwrap()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable_by(|a, b| a.total_cmp(b));
    quantile_sorted(&s, 0.5)
}

fn cf(v: &[f64], xi: f64) -> (f64, f64) {
    let n = v.len() as f64;
    (
        v.iter().map(|x| (xi * x).cos()).sum::<f64>() / n,
        v.iter().map(|x| (xi * x).sin()).sum::<f64>() / n,
    )
}

#[test]
fn same_seed_same_trajectory() {
    let field = ForceField::sinusoidal(0.5, 1.0).unwrap();
    let run = |seed| {
        let mut e = uniform(20_000, 1.5, seed);
        for _ in 0..5 {
            step_rescaled(&mut e, &field, 0.05, 0.3, 1.5).unwrap();
        }
        (e.positions().to_vec(), e.velocities().to_vec())
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn particle_count_and_domain_are_invariant() {
    let mut e = uniform(30_000, 1.0, 1);
    for _ in 0..10 {
        step_langevin(&mut e, &ForceField::constant(0.3).unwrap(), 0.2, 1.0).unwrap();
    }
    assert_eq!(e.len(), 30_000);
    assert!(e.positions().iter().all(|x| (0.0..2.0 * PI).contains(x)));
}

#[test]
fn one_step_law_matches_the_exact_characteristic_function() {
    let alpha: f64 = 1.5;
    let v0 = 2.0;
    let dt = 0.3;
    let n = 400_000;
    let mut e = ParticleEnsemble::new(vec![0.0; n], vec![v0; n], 2.0 * PI, 17).unwrap();
    step_langevin(&mut e, &ForceField::zero(), dt, alpha).unwrap();
    let spread = -(-alpha * dt).exp_m1() / alpha;
    for xi in [0.5f64, 1.0, 2.0] {
        let modulus = (-spread * xi.powf(alpha)).exp();
        let th = -xi * v0 * (-dt).exp();
        // the law has CF e^{iξ v0 e^{-dt}} · modulus
        let (re, im) = cf(e.velocities(), xi);
        let tol = 5.0 / (n as f64).sqrt();
        assert!((re - modulus * th.cos()).abs() < tol, "xi {xi}");
        assert!((im + modulus * th.sin()).abs() < tol, "xi {xi}");
    }
}

#[test]
fn two_half_steps_have_the_law_of_one_step() {
    let alpha = 1.2;
    let n = 400_000;
    let start = vec![1.5; n];
    let mut a = ParticleEnsemble::new(vec![0.0; n], start.clone(), 2.0 * PI, 5).unwrap();
    let mut b = ParticleEnsemble::new(vec![0.0; n], start, 2.0 * PI, 6).unwrap();
    let field = ForceField::constant(0.4).unwrap();
    step_langevin(&mut a, &field, 0.4, alpha).unwrap();
    step_langevin(&mut b, &field, 0.2, alpha).unwrap();
    step_langevin(&mut b, &field, 0.2, alpha).unwrap();
    for xi in [0.3, 1.0, 2.5] {
        let (ra, ia) = cf(a.velocities(), xi);
        let (rb, ib) = cf(b.velocities(), xi);
        let tol = 7.0 / (n as f64).sqrt();
        assert!((ra - rb).abs() < tol && (ia - ib).abs() < tol, "xi {xi}");
    }
}

#[test]
fn velocity_median_relaxes_like_ornstein_uhlenbeck() {
    let alpha = 1.5;
    let n = 200_000;
    let mut e = ParticleEnsemble::new(vec![0.0; n], vec![3.0; n], 2.0 * PI, 2).unwrap();
    let field = ForceField::constant(0.5).unwrap();
    step_langevin(&mut e, &field, 0.5, alpha).unwrap();
    let m = drift_shift(0.5, 1.0, alpha);
    let expect = m + (3.0 - m) * (-0.5f64).exp();
    assert!((median(e.velocities()) - expect).abs() < 0.02);
}

#[test]
fn stiff_step_lands_on_the_perturbed_equilibrium() {
    let alpha = 1.5;
    let eps: f64 = 0.1;
    let dt = 20.0 * eps.powf(alpha);
    let mut e = uniform(200_000, alpha, 8);
    let field = ForceField::constant(0.5).unwrap();
    step_rescaled(&mut e, &field, dt, eps, alpha).unwrap();
    let base = equilibrium_density(default_velocity_grid(alpha).unwrap(), alpha).unwrap();
    let feps = perturbed_equilibrium(&base, 0.5, eps, alpha).unwrap();
    assert!(feps.ks_distance(e.velocities()).unwrap() < 0.01);
}

#[test]
fn equilibrium_is_stationary_under_langevin_steps() {
    for alpha in [1.0, 1.5, 2.0] {
        let mut e = uniform(200_000, alpha, 12);
        for _ in 0..5 {
            step_langevin(&mut e, &ForceField::zero(), 0.1, alpha).unwrap();
        }
        let g = equilibrium_density(default_velocity_grid(alpha).unwrap(), alpha).unwrap();
        assert!(g.ks_distance(e.velocities()).unwrap() < 0.01, "alpha {alpha}");
    }
}

#[test]
fn density_estimate_has_unit_mass() {
    let e = ParticleEnsemble::from_density(
        &DensityField::from_fn(torus(64), |x| 1.0 + 0.5 * x.cos()).unwrap(),
        1.5,
        100_000,
        4,
        0.0,
    )
    .unwrap();
    for smooth in [false, true] {
        let rho = estimate_density(&e, &torus(32), smooth).unwrap();
        assert!((rho.mass() - 1.0).abs() < 1e-12);
        let exact = DensityField::from_fn(torus(32), |x| 1.0 + 0.5 * x.cos()).unwrap();
        assert!(rho.l1_distance(&exact).unwrap() < 0.05);
    }
}

#[test]
fn sparse_windows_are_statistics_errors() {
    let e = uniform(5_000, 1.5, 1);
    let err = velocity_marginal_at(&e, 0.0, 0.01).unwrap_err();
    assert!(matches!(err, Error::Statistics { .. }));
}

#[test]
fn local_median_follows_a_constant_field() {
    let alpha = 1.5;
    let eps = 0.1;
    let mut e = uniform(400_000, alpha, 21);
    let field = ForceField::constant(1.0).unwrap();
    for _ in 0..10 {
        step_rescaled(&mut e, &field, 0.02, eps, alpha).unwrap();
    }
    let s = velocity_marginal_at(&e, 1.0, 0.3).unwrap();
    let shift = drift_shift(1.0, eps, alpha);
    assert!((s.median - shift).abs() < s.median_tolerance(4.0), "{} vs {shift}", s.median);
}
