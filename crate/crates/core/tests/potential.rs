use std::f64::consts::PI;

use gle_core::PeriodicPotential;
use proptest::prelude::*;

/// `I₀(x) = Σ (x/2)^{2k} / (k!)²`.
fn bessel_i0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= (x / 2.0).powi(2) / (k * k) as f64;
        sum += term;
    }
    sum
}

#[test]
fn cosine_evaluations() {
    let v = PeriodicPotential::cosine();
    assert_eq!(v.value(0.0), 0.0);
    assert!((v.value(PI) - 1.0).abs() < 1e-15);
    assert!((v.derivative(PI / 2.0) - 0.5).abs() < 1e-15);
    assert!((v.value(1.3 + 2.0 * PI) - v.value(1.3)).abs() < 1e-14);
}

#[test]
fn barrier_energies() {
    assert!((PeriodicPotential::cosine().barrier_energy().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(PeriodicPotential::constant(0.0).barrier_energy().unwrap(), 0.0);
    let v = PeriodicPotential::new(vec![1.0, -1.0], vec![]).unwrap();
    assert!((v.barrier_energy().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn unnormalized_potential_is_rejected() {
    let v = PeriodicPotential::new(vec![1.5, -0.5], vec![]).unwrap();
    assert!(v.barrier_energy().is_err());
}

#[test]
fn momentum_examples() {
    let free = PeriodicPotential::constant(0.0);
    assert!((free.momentum_at_energy(0.7, 2.0).unwrap() - 2.0).abs() < 1e-15);
    let v = PeriodicPotential::cosine();
    assert!((v.momentum_at_energy(0.0, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert!(v.momentum_at_energy(PI, 1.0).unwrap().abs() < 1e-7);
    assert!(v.momentum_at_energy(PI, 0.5).is_err());
}

#[test]
fn lifson_jackson_against_bessel() {
    // for V = (1 − cos q)/2 both period integrals are 2π e^{±β/2} I₀(β/2)
    let v = PeriodicPotential::cosine();
    for beta in [1.0, 2.0] {
        let expect = 1.0 / (beta * bessel_i0(beta / 2.0).powi(2));
        let got = v.lifson_jackson(beta).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect, "beta={beta}: {got} vs {expect}");
    }
    assert!((PeriodicPotential::constant(0.0).lifson_jackson(1.0).unwrap() - 1.0).abs() < 1e-14);
    // pinned oracle digits
    assert!((v.lifson_jackson(1.0).unwrap() - 0.884_175_737_194).abs() < 1e-12);
    assert!((v.lifson_jackson(2.0).unwrap() - 0.311_930_180_216).abs() < 1e-12);
}

#[test]
fn second_derivative_bound_holds() {
    let v = PeriodicPotential::new(vec![0.0, 0.3, -0.2], vec![0.1, 0.05]).unwrap();
    let bound = v.second_derivative_bound();
    let sup = (0..2000).map(|i| v.second_derivative(i as f64 * 2.0 * PI / 2000.0).abs()).fold(0.0, f64::max);
    assert!(sup <= bound + 1e-14);
    assert!((PeriodicPotential::cosine().second_derivative_bound() - 0.5).abs() < 1e-15);
}

fn potential_strategy() -> impl Strategy<Value = PeriodicPotential> {
    (1usize..5)
        .prop_flat_map(|d| (prop::collection::vec(-1.0..1.0f64, d + 1), prop::collection::vec(-1.0..1.0f64, d)))
        .prop_map(|(c, s)| PeriodicPotential::new(c, s).unwrap())
}

proptest! {
    #[test]
    fn derivatives_match_central_differences(v in potential_strategy(), q in -4.0..4.0f64) {
        for (order, f) in [(1u8, 0u8), (2, 1)] {
            let mut errs = Vec::new();
            for h in [1e-3, 1e-4] {
                let fd = (v.eval(q + h, f) - v.eval(q - h, f)) / (2.0 * h);
                errs.push((fd - v.eval(q, order)).abs());
            }
            // O(h²) with constant sup|V'''|/6 ≤ Σk⁴(|c|+|s|)/6 < 200, plus a round-off floor
            prop_assert!(errs[0] <= 200.0 * 1e-6 + 1e-10, "order {order}: {errs:?}");
            prop_assert!(errs[1] <= 200.0 * 1e-8 + 1e-9, "order {order}: {errs:?}");
        }
    }

    #[test]
    fn momentum_energy_identity(q in -4.0..4.0f64, extra in 0.0..5.0f64) {
        let v = PeriodicPotential::cosine();
        let e = v.value(q) + extra;
        let p = v.momentum_at_energy(q, e).unwrap();
        prop_assert!((p * p / 2.0 + v.value(q) - e).abs() <= 1e-14 * e.max(1.0));
    }

    #[test]
    fn lifson_jackson_constant_is_inverse_beta(c in -3.0..3.0f64, beta in 0.1..5.0f64) {
        let d = PeriodicPotential::constant(c).lifson_jackson(beta).unwrap();
        prop_assert!((d * beta - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lifson_jackson_shift_invariant(v in potential_strategy(), c in -2.0..2.0f64) {
        let mut coeffs = v.cos_coeffs().to_vec();
        coeffs[0] += c;
        let shifted = PeriodicPotential::new(coeffs, v.sin_coeffs().to_vec()).unwrap();
        let a = v.lifson_jackson(1.0).unwrap();
        let b = shifted.lifson_jackson(1.0).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a);
    }
}
