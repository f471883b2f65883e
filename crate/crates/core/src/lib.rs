//! Effective diffusion of Langevin and generalized Langevin dynamics in a periodic
//! potential.
//!
//! The main path is [`galerkin`]: a Fourier × Hermite saddle-point discretization of
//! the Poisson equation `−𝓛φ = p`, from which `D = ⟨φ, p⟩`. The remaining modules
//! provide reference values and independent checks: asymptotic limits, the spectrum
//! of the linear (quadratic-potential) case, hypocoercivity certificates, and Monte
//! Carlo.

pub mod basis;
pub mod config;
pub mod error;
pub mod galerkin;
pub mod hypocoercivity;
pub mod limits;
pub mod mc;
pub mod noise;
pub mod ou_spectrum;
pub mod potential;
pub mod quad;
pub mod sparse;

pub use basis::{Axis, AxisKind, BandedOperator1D, TensorBasisSpec};
pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use galerkin::{DiffusionEstimate, GeneratorMatrix, SaddleSolution, SolverMethod};
pub use hypocoercivity::{Certificate, CoeffFamily};
pub use mc::{McConfig, McResult};
pub use noise::{MarkovEmbedding, Model, NoiseParams};
pub use potential::PeriodicPotential;
pub use sparse::GmresOptions;
