//! Quadratic potential `V = kq²/2`: the dynamics is Ornstein–Uhlenbeck with drift
//! matrix `D`, and the exponential decay rate is `min_j |Re x_j|` over its eigenvalues.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::{embed, Model, NoiseParams};

#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    pub model: Model,
    pub k: f64,
    pub gamma: f64,
    pub nu: f64,
    pub alpha: f64,
    pub matrix: DMatrix<f64>,
}

/// `[[0, 1, 0ᵀ], [−k, 0, λᵀ], [0, −λ, −A]]`, or `[[0, 1], [−k, −γ]]` for `L`.
pub fn drift_matrix(model: Model, k: f64, gamma: f64, nu: f64, alpha: f64) -> Result<DriftMatrix> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k must be positive"));
    }
    let params = NoiseParams::new(model, gamma, nu, alpha, 1.0)?;
    let matrix = match model {
        Model::L => DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -k, -gamma]),
        _ => {
            let emb = embed(&params)?;
            let m = emb.dim();
            let mut d = DMatrix::zeros(m + 2, m + 2);
            d[(0, 1)] = 1.0;
            d[(1, 0)] = -k;
            for i in 0..m {
                d[(1, 2 + i)] = emb.lambda[i];
                d[(2 + i, 1)] = -emb.lambda[i];
                for j in 0..m {
                    d[(2 + i, 2 + j)] = -emb.a[(i, j)];
                }
            }
            d
        }
    };
    Ok(DriftMatrix { model, k, gamma, nu, alpha, matrix })
}

impl DriftMatrix {
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.matrix.complex_eigenvalues().iter().copied().collect()
    }

    /// Monic characteristic polynomial coefficients `[c_{n-1}, ..., c_0]` of a 3×3 drift.
    pub fn char_poly_3x3(&self) -> Result<[f64; 3]> {
        if self.matrix.nrows() != 3 {
            return Err(Error::DimensionMismatch("characteristic polynomial needs a 3x3 drift".into()));
        }
        let m = &self.matrix;
        let tr = m.trace();
        let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
            - m[(0, 2)] * m[(2, 0)]
            + m[(1, 1)] * m[(2, 2)]
            - m[(1, 2)] * m[(2, 1)];
        Ok([-tr, minors, -m.determinant()])
    }
}

/// Decay rate `min_j |Re x_j|` from a dense eigensolver.
pub fn spectral_abscissa(d: &DriftMatrix) -> Result<f64> {
    let eig = d.eigenvalues();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(eig.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min))
}

/// GL1 characteristic polynomial `x³ + x²/ν² + (γ/ν² + k)x + k/ν²` as `[a, b, c]`.
pub fn gl1_char_poly(k: f64, gamma: f64, nu: f64) -> [f64; 3] {
    let e = 1.0 / (nu * nu);
    [e, gamma * e + k, k * e]
}

/// Roots of `x³ + a x² + b x + c` (closed form, then two Newton polishes).
pub fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex<f64>; 3] {
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc > 0.0 {
        let sq = disc.sqrt();
        // avoid cancellation between -q/2 and sq
        let u = (-q / 2.0 - q.signum() * sq).cbrt();
        let u = if q == 0.0 && u == 0.0 { sq.cbrt() } else { u };
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        let re = -(u + v) / 2.0;
        let im = (u - v) * 3f64.sqrt() / 2.0;
        [
            Complex::new(u + v + shift, 0.0),
            Complex::new(re + shift, im),
            Complex::new(re + shift, -im),
        ]
    } else {
        // three real roots, trigonometric form
        let r = (-p / 3.0).max(0.0).sqrt();
        let arg = if r == 0.0 { 0.0 } else { (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0) };
        let phi = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [0.0, 1.0, 2.0].map(|j| Complex::new(2.0 * r * (phi - j * tau).cos() + shift, 0.0))
    };
    let f = |x: Complex<f64>| ((x + a) * x + b) * x + c;
    let df = |x: Complex<f64>| (3.0 * x + 2.0 * a) * x + b;
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let d = df(*r);
            if d.norm() > 0.0 {
                let step = f(*r) / d;
                if step.re.is_finite() && step.im.is_finite() {
                    *r -= step;
                }
            }
        }
    }
    roots
}

/// The GL1 decay rate from the cubic formula (cross-check of [`spectral_abscissa`]).
pub fn gl1_abscissa_cubic(k: f64, gamma: f64, nu: f64) -> f64 {
    let [a, b, c] = gl1_char_poly(k, gamma, nu);
    cubic_roots(a, b, c).iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min)
}

/// The eight asymptotic regimes of the GL1 decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `ν → ∞`, `γ` fixed.
    I,
    /// `γ → 0`, `ν` fixed.
    II,
    /// `γ → ∞`, `ν` fixed.
    III,
    /// `ν → 0`, `γ` fixed.
    IV,
    /// `γ → 0` and `ν → ∞` jointly.
    V,
    /// `γ → ∞` with `γ/ν² → ∞` and `γν² → ∞`.
    VI,
    /// `ν → 0`, `γ → ∞` with `γν² → 0`.
    VII,
    /// `γ → 0` and `ν → 0`.
    VIII,
}

impl Regime {
    pub const ALL: [Regime; 8] =
        [Regime::I, Regime::II, Regime::III, Regime::IV, Regime::V, Regime::VI, Regime::VII, Regime::VIII];

    pub fn label(self) -> &'static str {
        match self {
            Regime::I => "i",
            Regime::II => "ii",
            Regime::III => "iii",
            Regime::IV => "iv",
            Regime::V => "v",
            Regime::VI => "vi",
            Regime::VII => "vii",
            Regime::VIII => "viii",
        }
    }

    /// Leading-order decay rate.
    pub fn predict(self, k: f64, gamma: f64, nu: f64) -> f64 {
        let nu4 = nu.powi(4);
        match self {
            Regime::I | Regime::V => gamma / (2.0 * k * nu4),
            Regime::II => gamma / (2.0 * (1.0 + k * nu4)),
            Regime::III | Regime::VI | Regime::VII => k / gamma,
            Regime::IV => {
                let real = gamma * gamma > 4.0 * k;
                0.5 * gamma * (1.0 - if real { (1.0 - 4.0 * k / (gamma * gamma)).sqrt() } else { 0.0 })
            }
            Regime::VIII => gamma / 2.0,
        }
    }

    /// `(γ, ν)` for step `t = 1, 2, 3, ...` along a path into the regime (k = 1).
    pub fn path(self, step: u32) -> (f64, f64) {
        let t = step as f64;
        match self {
            Regime::I => (1.0, 10f64.powf(0.5 + 0.5 * t)),
            Regime::II => (10f64.powf(-1.0 - t), 1.0),
            Regime::III => (10f64.powf(1.0 + t), 1.0),
            Regime::IV => (3.0, 10f64.powf(-t)),
            Regime::V => {
                let s = 10f64.powf(0.5 * t);
                (1.0 / s, s)
            }
            Regime::VI => {
                let g = 10f64.powf(2.0 * t);
                (g, g.powf(0.25))
            }
            Regime::VII => {
                let g = 10f64.powf(t);
                (g, 1.0 / g)
            }
            Regime::VIII => {
                let s = 10f64.powf(-t);
                (s, s)
            }
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.label() == s)
            .ok_or_else(|| invalid(format!("unknown regime {s:?}")))
    }
}

/// One point of a regime path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimePoint {
    pub regime: Regime,
    pub k: f64,
    pub gamma: f64,
    pub nu: f64,
    pub abscissa: f64,
    pub predicted: f64,
}

impl RegimePoint {
    pub fn ratio(&self) -> f64 {
        self.abscissa / self.predicted
    }
}

/// Abscissa and prediction along the first `steps` points of a regime path.
pub fn regime_sequence(regime: Regime, k: f64, steps: u32) -> Result<Vec<RegimePoint>> {
    (1..=steps)
        .map(|s| {
            let (gamma, nu) = regime.path(s);
            let d = drift_matrix(Model::GL1, k, gamma, nu, 1.0)?;
            Ok(RegimePoint {
                regime,
                k,
                gamma,
                nu,
                abscissa: spectral_abscissa(&d)?,
                predicted: regime.predict(k, gamma, nu),
            })
        })
        .collect()
}

/// Regime whose leading-order formula best describes `(γ, ν)`: decided by which
/// parameters are small or large, falling back to the formula nearest in log ratio
/// when that one is off by more than a factor 2 (crossovers between regimes).
pub fn classify(k: f64, gamma: f64, nu: f64) -> Regime {
    let r = classify_by_scale(k, gamma, nu);
    let rate = gl1_abscissa_cubic(k, gamma, nu);
    if (r.predict(k, gamma, nu) / rate).ln().abs() <= 2f64.ln() {
        return r;
    }
    nearest_formula(k, gamma, nu, rate)
}

fn nearest_formula(k: f64, gamma: f64, nu: f64, rate: f64) -> Regime {
    *Regime::ALL
        .iter()
        .min_by(|a, b| {
            let da = (a.predict(k, gamma, nu) / rate).ln().abs();
            let db = (b.predict(k, gamma, nu) / rate).ln().abs();
            da.total_cmp(&db)
        })
        .expect("nonempty")
}

fn classify_by_scale(k: f64, gamma: f64, nu: f64) -> Regime {
    let g = gamma.ln();
    let n2 = (nu * nu).ln();
    let small = |x: f64| x < -1.0;
    let large = |x: f64| x > 1.0;
    match (small(g), large(g), small(n2), large(n2)) {
        (true, _, _, true) => Regime::V,
        (true, _, true, _) => Regime::VIII,
        (true, _, _, _) => Regime::II,
        (_, true, true, _) if g + n2 < 0.0 => Regime::VII,
        // γ and ν both large: γ/ν⁴ vs k/γ decides between the ν → ∞ and γ → ∞ laws
        (_, true, _, true) if g < n2 => Regime::I,
        (_, true, _, _) if g - n2 > 1.0 && g + n2 > 1.0 => Regime::VI,
        (_, true, _, _) => Regime::III,
        (_, _, _, true) => Regime::I,
        (_, _, true, _) => Regime::IV,
        _ => nearest_formula(k, gamma, nu, gl1_abscissa_cubic(k, gamma, nu)),
    }
}
