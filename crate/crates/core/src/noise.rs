//! Quasi-Markovian noise models and their memory kernels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// Memoryless Langevin dynamics.
    L,
    /// Scalar Ornstein–Uhlenbeck memory.
    GL1,
    /// Two-dimensional (generalized harmonic) noise.
    GL2,
}

impl Model {
    /// Number of auxiliary noise variables.
    pub fn aux_dim(self) -> usize {
        match self {
            Model::L => 0,
            Model::GL1 => 1,
            Model::GL2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::L => "L",
            Model::GL1 => "GL1",
            Model::GL2 => "GL2",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" => Ok(Model::L),
            "GL1" => Ok(Model::GL1),
            "GL2" => Ok(Model::GL2),
            other => Err(invalid(format!("unknown model {other:?} (expected L, GL1 or GL2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub model: Model,
    /// Effective friction.
    pub gamma: f64,
    /// Square root of the correlation time (ignored for `L`).
    pub nu: f64,
    /// Shape parameter (GL2 only).
    pub alpha: f64,
    /// Inverse temperature.
    pub beta: f64,
}

impl NoiseParams {
    pub fn new(model: Model, gamma: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { model, gamma, nu, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn langevin(gamma: f64, beta: f64) -> Result<Self> {
        Self::new(Model::L, gamma, 1.0, 1.0, beta)
    }

    pub fn gl1(gamma: f64, nu: f64, beta: f64) -> Result<Self> {
        Self::new(Model::GL1, gamma, nu, 1.0, beta)
    }

    pub fn gl2(gamma: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Model::GL2, gamma, nu, alpha, beta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("nu", self.nu),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// `(λ, A, Σ)` of the Markovian embedding `dz = -pλ dt - Az dt + Σ dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovEmbedding {
    pub lambda: DVector<f64>,
    pub a: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

impl MarkovEmbedding {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Symmetric part of `A`.
    pub fn a_sym(&self) -> DMatrix<f64> {
        (&self.a + self.a.transpose()) * 0.5
    }

    /// Antisymmetric part of `A`.
    pub fn a_anti(&self) -> DMatrix<f64> {
        (&self.a - self.a.transpose()) * 0.5
    }

    /// `max |ΣΣᵀ − β⁻¹(A + Aᵀ)|`.
    pub fn fdt_defect(&self, beta: f64) -> f64 {
        let lhs = &self.sigma * self.sigma.transpose();
        let rhs = (&self.a + self.a.transpose()) / beta;
        (lhs - rhs).amax()
    }

    /// `λᵀ e^{-tA} λ` by dense matrix exponential.
    pub fn kernel_expm(&self, t: f64) -> f64 {
        let e = (-&self.a * t).exp();
        self.lambda.dot(&(e * &self.lambda))
    }
}

pub fn embed(params: &NoiseParams) -> Result<MarkovEmbedding> {
    params.validate()?;
    let NoiseParams { gamma, nu, alpha, beta, .. } = *params;
    let r = gamma.sqrt() / nu;
    let nu2 = nu * nu;
    match params.model {
        Model::L => Err(invalid("the Langevin model has no auxiliary embedding")),
        Model::GL1 => Ok(MarkovEmbedding {
            lambda: DVector::from_element(1, r),
            a: DMatrix::from_element(1, 1, 1.0 / nu2),
            sigma: DMatrix::from_element(1, 1, (2.0 / (beta * nu2)).sqrt()),
        }),
        Model::GL2 => Ok(MarkovEmbedding {
            lambda: DVector::from_vec(vec![r, 0.0]),
            a: DMatrix::from_row_slice(2, 2, &[0.0, -alpha, alpha, alpha * alpha]) / nu2,
            sigma: DMatrix::from_row_slice(
                2,
                2,
                &[0.0, 0.0, 0.0, (2.0 * alpha * alpha / (beta * nu2)).sqrt()],
            ),
        }),
    }
}

/// `|4 − α²|` below which the GL2 kernel uses its critical form.
pub const CRITICAL_ALPHA_GAP: f64 = 1e-8;

/// Memory kernel `γ(t)`; the Langevin kernel is a Dirac mass and is rejected.
pub fn kernel_eval(params: &NoiseParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(invalid("kernel time must be nonnegative"));
    }
    let NoiseParams { gamma, nu, alpha, .. } = *params;
    let nu2 = nu * nu;
    match params.model {
        Model::L => Err(invalid("the Langevin kernel is a Dirac mass")),
        Model::GL1 => Ok(gamma / nu2 * (-t / nu2).exp()),
        Model::GL2 => {
            let a2 = alpha * alpha;
            let s = 0.5 * a2 * t / nu2; // decay exponent
            let gap = 4.0 - a2;
            if gap.abs() < CRITICAL_ALPHA_GAP {
                return Ok(gamma / nu2 * (-s).exp() * (1.0 + s));
            }
            let x = gap.abs().sqrt() * alpha * t / (2.0 * nu2);
            let val = if gap > 0.0 {
                (-s).exp() * (x.cos() + s * sinc(x))
            } else if x < 1.0 {
                (-s).exp() * (x.cosh() + s * sinhc(x))
            } else {
                // e^{-s}(cosh x + s sinh x / x) without overflow
                let (ep, em) = ((x - s).exp(), (-x - s).exp());
                0.5 * (ep + em) + s * 0.5 * (ep - em) / x
            };
            Ok(gamma / nu2 * val)
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        x.sin() / x
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 + x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0))
    } else {
        x.sinh() / x
    }
}

/// `λᵀ A⁻¹ λ`.
pub fn effective_friction(emb: &MarkovEmbedding) -> Result<f64> {
    let lu = emb.a.clone().lu();
    let x = lu
        .solve(&emb.lambda)
        .ok_or_else(|| Error::Singular("embedding matrix A".into()))?;
    Ok(emb.lambda.dot(&x))
}
