use std::f64::consts::PI;

use gle_core::limits::*;
use gle_core::PeriodicPotential;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_potential(rng: &mut ChaCha8Rng, degree: usize) -> PeriodicPotential {
    let c: Vec<f64> = (0..=degree).map(|k| if k == 0 { 0.0 } else { rng.random_range(-0.6..0.6) / k as f64 }).collect();
    let s: Vec<f64> = (0..degree).map(|k| rng.random_range(-0.6..0.6) / (k + 1) as f64).collect();
    PeriodicPotential::new(c, s).unwrap().shifted_to_zero_min()
}

#[test]
fn overdamped_matches_lifson_jackson() {
    let cosine = PeriodicPotential::cosine();
    for beta in [0.5, 1.0, 2.0, 4.0] {
        let d = overdamped_diffusion(&cosine, beta).unwrap();
        let lj = cosine.lifson_jackson(beta).unwrap();
        assert!((d - lj).abs() <= 1e-8 * lj, "β={beta}: {d} vs {lj}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let v = random_potential(&mut rng, 3);
        let r = overdamped_detailed(&v, 1.0).unwrap();
        let lj = v.lifson_jackson(1.0).unwrap();
        assert!((r.d - lj).abs() <= 1e-8 * lj, "{v:?}: {} vs {lj}", r.d);
        assert!((r.d - r.d_alt).abs() <= 1e-9 * lj);
    }
    assert!(overdamped_diffusion(&cosine, 0.0).is_err());
}

#[test]
fn free_underdamped_limits() {
    let free = PeriodicPotential::constant(0.0);
    let opts = EnergyIntegral::default();
    let d = langevin_underdamped_diffusion(&free, 1.0, &opts).unwrap();
    assert!((d - 1.0).abs() < 1e-9, "{d}");
    for nu in [0.1, 0.5, 1.0] {
        let ds = gle_underdamped_diffusion(&free, 1.0, nu, &opts).unwrap();
        assert!((ds - d).abs() < 1e-10, "ν={nu}: {ds} vs {d}");
    }
}

#[test]
fn constant_potential_s_nu_is_scaled_momentum() {
    let free = PeriodicPotential::constant(0.0);
    for (nu, e) in [(0.3, 0.5), (1.0, 2.0), (2.0, 10.0)] {
        let s = s_nu_solve(&free, nu, e, 256).unwrap();
        let want = nu * nu * (2.0 * e).sqrt();
        assert!(s.values.iter().all(|v| (v - want).abs() < 1e-12 * want));
        assert!((s.integral - 2.0 * PI * want).abs() < 1e-11 * want);
    }
}

#[test]
fn s_nu_bounds_and_residual() {
    let v = PeriodicPotential::cosine();
    let e0 = v.barrier_energy().unwrap();
    for nu in [0.2, 0.5, 1.0, 2.0] {
        for e in [e0 + 1e-6, e0 + 0.01, 2.0, 5.0, 20.0] {
            let s = s_nu_solve(&v, nu, e, panels_for(nu, 1024)).unwrap();
            let (lo, hi) = (nu * nu * (2.0 * (e - e0)).sqrt(), nu * nu * (2.0 * e).sqrt());
            for (q, sv) in s.grid().iter().zip(&s.values) {
                assert!(*sv >= lo * (1.0 - 1e-12) && *sv <= hi * (1.0 + 1e-12), "ν={nu} E={e} q={q}: {sv} ∉ [{lo}, {hi}]");
            }
        }
    }
    let s = s_nu_solve(&v, 1.0, 2.0, 1024).unwrap();
    assert!(s_nu_residual(&v, 1.0, 2.0, &s) <= 1e-8);
}

#[test]
fn shooting_agrees_with_closed_form() {
    let v = PeriodicPotential::cosine();
    for e in [2.0, 20.0] {
        let a = s_nu_solve_with(&v, 1.0, e, 1024, SnuMethod::ClosedForm).unwrap();
        let b = s_nu_solve_with(&v, 1.0, e, 1024, SnuMethod::Shooting).unwrap();
        assert!((a.integral - b.integral).abs() < 1e-9 * a.integral, "E={e}: {} vs {}", a.integral, b.integral);
    }
}

#[test]
fn periodic_solver_recovers_known_solution() {
    // f = sin q, g = 2 + cos q, c = 3: h = g f′ − c f
    let c = 3.0;
    let f = |q: f64| q.sin();
    let g = |q: f64| 2.0 + q.cos();
    let h = |q: f64| g(q) * q.cos() - c * f(q);
    let sol = solve_periodic_linear(g, h, c, 0.3, 512).unwrap();
    for (q, v) in sol.grid().iter().zip(&sol.values) {
        assert!((v - f(*q)).abs() < 1e-12, "q={q}");
    }
    assert!(solve_periodic_linear(|_| -1.0, |_| 1.0, 1.0, 0.0, 64).is_err());
    assert!(solve_periodic_linear(|_| 1.0, |_| 1.0, 0.0, 0.0, 64).is_err());
}

#[test]
fn periodic_ode_estimate_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..50 {
        let degree = rng.random_range(1..4);
        let gc: Vec<f64> = (0..=degree).map(|k| if k == 0 { 0.0 } else { rng.random_range(-0.5..0.5) }).collect();
        let gs: Vec<f64> = (0..degree).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut g_cos = gc;
        // strictly positive: constant term dominates the sum of amplitudes
        g_cos[0] = 0.2 + g_cos.iter().chain(&gs).map(|x| x.abs()).sum::<f64>();
        let g = PeriodicPotential::new(g_cos, gs).unwrap();
        let hc: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hs: Vec<f64> = (0..degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = PeriodicPotential::new(hc, hs).unwrap();
        let c = [1.0, 10.0, 100.0][i % 3];
        let (lhs, rhs) = periodic_ode_estimate(&g, &h, c, 2048).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-13, "instance {i}, c={c}: {lhs:e} > {rhs:e}");
    }
}

#[test]
fn s_nu_integral_lower_bound() {
    let cosine = PeriodicPotential::cosine();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pots = [cosine, random_potential(&mut rng, 2), random_potential(&mut rng, 3)];
    for v in &pots {
        let e0 = v.barrier_energy().unwrap();
        for nu in [0.2, 0.5, 1.0, 2.0] {
            let bound = s_nu_lower_bound(v, nu).unwrap();
            assert!(bound > 0.0);
            for de in [1e-6, 1e-3, 0.1, 1.0, 10.0] {
                let s = s_nu_solve(v, nu, e0 + de, panels_for(nu, 1024)).unwrap();
                assert!(s.integral >= bound, "ν={nu} E−E₀={de}: {} < {bound}", s.integral);
            }
        }
    }
    // M for the cosine: sup of (1/2)|sin q| / sqrt(1 + cos q) = sup |sin(q/2)|/√2
    assert!((momentum_slope_bound(&PeriodicPotential::cosine()).unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn s_und_examples_and_monotonicity() {
    let free = PeriodicPotential::constant(0.0);
    assert!((s_und(&free, 2.0).unwrap() - 4.0 * PI).abs() < 1e-12);
    let v = PeriodicPotential::cosine();
    // at the separatrix P = √2 cos(q/2) on [−π, π]
    assert!((s_und(&v, 1.0).unwrap() - 4.0 * 2f64.sqrt()).abs() < 1e-10);
    assert!(s_und(&v, 0.5).is_err());
    let energies = [1.001, 1.1, 2.0, 5.0, 20.0];
    let p = EnergyProfile::compute(&v, None, &energies, 1024).unwrap();
    assert!(p.values.windows(2).all(|w| w[1] > w[0]));
    let pn = EnergyProfile::compute(&v, Some(0.5), &energies, 1024).unwrap();
    assert!(pn.values.windows(2).all(|w| w[1] > w[0]));
    assert!(EnergyProfile::compute(&v, None, &[2.0, 1.5], 1024).is_err());
    assert!(EnergyProfile::compute(&v, None, &[0.9], 1024).is_err());
}

#[test]
fn energy_cutoff_is_immaterial() {
    let v = PeriodicPotential::cosine();
    let mut opts = EnergyIntegral::default();
    let d25 = langevin_underdamped_diffusion(&v, 1.0, &opts).unwrap();
    opts.e_max = 40.0;
    let d40 = langevin_underdamped_diffusion(&v, 1.0, &opts).unwrap();
    assert!((d25 - d40).abs() < 1e-9 * d25);
    opts.e_max = 0.5;
    assert!(langevin_underdamped_diffusion(&v, 1.0, &opts).is_err());
    assert!(gle_underdamped_diffusion(&v, 1.0, 0.0, &EnergyIntegral::default()).is_err());
    // pinned: cosine, β = 1
    assert!((d25 - 0.306_262_135_164).abs() < 1e-10, "{d25}");
}

#[test]
fn partition_function_of_cosine() {
    // Z = sqrt(2π/β) · 2π e^{−β/2} I₀(β/2)
    let i0: f64 = (0..40).map(|k| 0.25f64.powi(k) / (1..=k).map(|j| (j * j) as f64).product::<f64>() / 4f64.powi(k)).sum();
    let v = PeriodicPotential::cosine();
    let z = partition_function(&v, 1.0).unwrap();
    let want = (2.0 * PI).sqrt() * 2.0 * PI * (-0.5f64).exp() * i0;
    assert!((z - want).abs() < 1e-12 * want, "{z} vs {want}");
}

#[test]
fn spectral_derivative_of_trig_polynomial() {
    let n = 128;
    let f: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64 * 5.0).cos()).collect();
    let d = spectral_derivative(&f);
    for (k, dk) in d.iter().enumerate() {
        let q = 2.0 * PI * k as f64 / n as f64;
        assert!((dk + 5.0 * (5.0 * q).sin()).abs() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn s_nu_bounds_hold_for_random_instances(nu in 0.2..2.0f64, de in 1e-4..20.0f64) {
        let v = PeriodicPotential::cosine();
        let e = 1.0 + de;
        let s = s_nu_solve(&v, nu, e, panels_for(nu, 512)).unwrap();
        let (lo, hi) = (nu * nu * (2.0 * de).sqrt(), nu * nu * (2.0 * e).sqrt());
        prop_assert!(s.values.iter().all(|x| *x >= lo * (1.0 - 1e-12) && *x <= hi * (1.0 + 1e-12)));
        prop_assert!(s.integral >= s_nu_lower_bound(&v, nu).unwrap());
    }

    #[test]
    fn overdamped_is_below_free_value(seed in 0u64..1000, beta in 0.3..3.0f64) {
        // D_ovd ≤ 1/β with equality only for constant V
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_potential(&mut rng, 2);
        let d = overdamped_diffusion(&v, beta).unwrap();
        prop_assert!(d > 0.0 && d < 1.0 / beta);
    }
}
