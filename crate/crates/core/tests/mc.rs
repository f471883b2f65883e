use gle_core::mc::{dt_extrapolate, simulate};
use gle_core::{Error, McConfig, NoiseParams, PeriodicPotential};

fn free(params: NoiseParams, paths: usize, t: f64) -> McConfig {
    McConfig::new(params, PeriodicPotential::constant(0.0), 1e-2, t, paths, 42)
}

#[test]
fn free_dynamics_diffuse_at_one_over_beta_gamma() {
    for params in [
        NoiseParams::langevin(2.0, 1.0).unwrap(),
        NoiseParams::gl1(1.0, 1.0, 1.0).unwrap(),
        NoiseParams::gl2(1.0, 1.0, 1.0, 1.0).unwrap(),
    ] {
        let r = simulate(&free(params.clone(), 800, 200.0)).unwrap();
        let exact = 1.0 / (params.beta * params.gamma);
        assert!((r.d_hat - exact).abs() <= 3.0 * r.std_err, "{params:?}: {} ± {}", r.d_hat, r.std_err);
        assert!(r.std_err > 0.0 && r.relative_half_width() < 0.2);
    }
}

#[test]
fn equilibrium_moments_are_preserved() {
    let params = NoiseParams::gl1(1.0, 1.0, 2.0).unwrap();
    let mut cfg = McConfig::new(params, PeriodicPotential::cosine(), 5e-3, 20.0, 2000, 3);
    cfg.batches = 20;
    let r = simulate(&cfg).unwrap();
    // sample variance of N normals with variance 1/2 has sd ≈ 0.5·sqrt(2/N)
    let sd = 0.5 * (2.0 / 2000f64).sqrt();
    assert!((r.p_var - 0.5).abs() < 4.0 * sd + 0.01, "{}", r.p_var);
    assert_eq!(r.z_var.len(), 1);
    assert!((r.z_var[0] - 0.5).abs() < 4.0 * sd + 0.01, "{:?}", r.z_var);
}

#[test]
fn mean_squared_displacement_grows_linearly() {
    let mut cfg = free(NoiseParams::gl1(1.0, 1.0, 1.0).unwrap(), 400, 100.0);
    cfg.checkpoints = 20;
    let r = simulate(&cfg).unwrap();
    assert_eq!(r.msd.len(), 20);
    let (t, y): (Vec<f64>, Vec<f64>) = r.msd.iter().copied().unzip();
    let n = t.len() as f64;
    let (tm, ym) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.99, "R² = {r2}");
    assert!(sxy / sxx > 0.0);
}

#[test]
fn results_are_reproducible_and_thread_independent() {
    let cfg = McConfig::new(NoiseParams::gl2(1.0, 1.0, 2.0, 1.0).unwrap(), PeriodicPotential::cosine(), 1e-2, 10.0, 64, 9);
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a, b);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| simulate(&cfg).unwrap());
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| simulate(&cfg).unwrap());
    assert_eq!(one, three);
    assert_eq!(a, one);
    let other = simulate(&McConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.d_hat, other.d_hat);
}

#[test]
fn invalid_configurations_are_rejected() {
    let base = free(NoiseParams::gl1(1.0, 1.0, 1.0).unwrap(), 10, 1.0);
    assert!(simulate(&McConfig { n_paths: 0, ..base.clone() }).is_err());
    assert!(simulate(&McConfig { dt: 0.0, ..base.clone() }).is_err());
    assert!(simulate(&McConfig { burn_in: 1.0, ..base.clone() }).is_err());
    assert!(simulate(&McConfig { batches: 11, ..base.clone() }).is_err());
    assert!(dt_extrapolate(&base, &[1e-2]).is_err());
    assert!(dt_extrapolate(&McConfig { batches: 5, ..base.clone() }, &[1e-2, 1e-2]).is_err());
}

#[test]
fn unstable_step_is_reported() {
    // A = 1/ν² = 100 with dt = 0.1: the explicit z update amplifies by 9 per step
    let cfg = McConfig::new(NoiseParams::gl1(1.0, 0.1, 1.0).unwrap(), PeriodicPotential::cosine(), 0.1, 1000.0, 4, 1);
    match simulate(&McConfig { batches: 2, ..cfg }) {
        Err(Error::BlowUp { step, .. }) => assert!(step > 0),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn step_size_extrapolation() {
    let mut cfg = McConfig::new(NoiseParams::langevin(1.0, 1.0).unwrap(), PeriodicPotential::cosine(), 1e-2, 100.0, 400, 5);
    cfg.burn_in = 5.0;
    let ex = dt_extrapolate(&cfg, &[0.1, 0.05, 0.025]).unwrap();
    assert_eq!(ex.runs.len(), 3);
    let finest = &ex.runs[2];
    assert!((ex.bias - (finest.d_hat - ex.d_extrapolated).abs()).abs() < 1e-15);
    assert_eq!(ex.bias_flag, ex.bias > 2.0 * finest.std_err);
    assert!(ex.std_err >= finest.std_err);
    assert!(ex.d_extrapolated.is_finite() && ex.d_extrapolated > 0.0);
}
