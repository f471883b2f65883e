//! Shared fixtures for the criterion benches.

use gle_core::galerkin::standard_spec;
use gle_core::{Model, NoiseParams, PeriodicPotential, TensorBasisSpec};

/// Cosine potential, β = γ = ν = α = 1, uniform order `n` at σ⁻² = 3.
pub fn fixture(model: Model, n: usize) -> (NoiseParams, PeriodicPotential, TensorBasisSpec) {
    let params = NoiseParams::new(model, 1.0, 1.0, 1.0, 1.0).expect("valid parameters");
    let spec = standard_spec(model, n, 3.0, 1.0).expect("valid basis");
    (params, PeriodicPotential::cosine(), spec)
}
