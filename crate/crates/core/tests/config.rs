use gle_core::config::{parse_log_range, parse_range, serialize_config};
use gle_core::galerkin::reference_settings;
use gle_core::{parse_config, Error, Model, RunConfig, SolverMethod};
use proptest::prelude::*;

#[test]
fn empty_file_gives_defaults() {
    let c = parse_config("").unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!(c.beta, 1.0);
    assert_eq!(c.limits.e_max, 25.0);
    assert_eq!(c.solver.gmres_tol, 1e-3);
    assert_eq!(c.potential().unwrap(), gle_core::PeriodicPotential::cosine());
}

#[test]
fn single_key_overrides_only_itself() {
    let c = parse_config("gamma = 2.5\n").unwrap();
    assert_eq!(c, RunConfig { gamma: 2.5, ..RunConfig::default() });
}

#[test]
fn langevin_reference_row() {
    let c = parse_config("model = \"L\"\ngamma = 2.0\nbasis.sigma_inv_sq = 16\n").unwrap();
    assert_eq!(c.model, Model::L);
    let (basis, method) = c.spec_policy().resolve(&c.noise_params().unwrap());
    let (n0, s0, m0) = reference_settings(Model::L, 2.0, c.gmres());
    assert_eq!((basis.n, basis.sigma_inv_sq), (n0, 16.0));
    assert_eq!(s0, 16.0);
    assert_eq!(method, m0);
    assert!(matches!(method, SolverMethod::Direct));
    let small = parse_config("model = \"GL1\"\ngamma = 0.5\n").unwrap();
    let (b, m) = small.spec_policy().resolve(&small.noise_params().unwrap());
    assert_eq!((b.n, b.sigma_inv_sq), (100, 9.0));
    assert!(matches!(m, SolverMethod::Gmres(_)));
    let forced = parse_config("model = \"GL1\"\ngamma = 0.5\nsolver.method = \"direct\"\nbasis.n = 8\n").unwrap();
    let (b, m) = forced.spec_policy().resolve(&forced.noise_params().unwrap());
    assert_eq!(b.n, 8);
    assert!(matches!(m, SolverMethod::Direct));
}

#[test]
fn sections_and_dotted_keys() {
    let text = "model = \"GL2\"\nalpha = 3.0\n[basis]\nn = 12\nn_z = 9\n[mc]\nT = 50.0\npaths = 100\n[potential]\ncos = [0.0, -1.0]\nsin = [0.5]\n";
    let c = parse_config(text).unwrap();
    assert_eq!((c.model, c.alpha), (Model::GL2, 3.0));
    assert_eq!((c.basis.n, c.basis.n_z), (Some(12), Some(9)));
    assert_eq!((c.mc.t_final, c.mc.paths), (50.0, 100));
    let mc = c.mc_config().unwrap();
    assert_eq!((mc.t_final, mc.n_paths, mc.seed), (50.0, 100, 42));
    // the shifted potential is not normalised
    assert!(c.potential().unwrap().barrier_energy().is_err());
}

#[test]
fn errors_carry_line_numbers() {
    match parse_config("gamma = 1.0\n\nbogus = 3\n") {
        Err(Error::Config { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("bogus"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    match parse_config("gamma = \"fast\"\n") {
        Err(Error::Config { line, .. }) => assert_eq!(line, 1),
        other => panic!("{other:?}"),
    }
    match parse_config("[basis]\nn = 4\nsize = 5\n") {
        Err(Error::Config { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(parse_config("model = \"GL3\"\n").is_err());
}

#[test]
fn range_syntax() {
    assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
    assert_eq!(parse_range("2:5:1").unwrap(), vec![2.0]);
    assert_eq!(parse_log_range("-1:1:3").unwrap(), vec![0.1, 1.0, 10.0]);
    for bad in ["0:1", "a:1:2", "0:1:0", "0:1:2:3"] {
        assert!(parse_range(bad).is_err(), "{bad}");
    }
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (
        prop::sample::select(vec![Model::L, Model::GL1, Model::GL2]),
        0.01..100.0f64,
        0.1..10.0f64,
        0.1..10.0f64,
        prop::option::of(2usize..300),
        prop::option::of(0.5..20.0f64),
        any::<u64>(),
        prop::collection::vec(-1.0..1.0f64, 0..4),
    )
        .prop_map(|(model, gamma, nu, alpha, n, s2, seed, sin)| {
            let mut c = RunConfig { model, gamma, nu, alpha, seed, ..RunConfig::default() };
            c.basis.n = n;
            c.basis.sigma_inv_sq = s2;
            c.potential.sin = sin;
            c.mc.dts = vec![1e-3, 2e-3];
            c
        })
}

proptest! {
    #[test]
    fn serialization_round_trips(c in config_strategy()) {
        let text = serialize_config(&c).unwrap();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize_config(&back).unwrap(), text);
    }
}
