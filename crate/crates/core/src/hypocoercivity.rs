//! Finite-grid certificates for the hypocoercive decay rate `min(γ, 1/γ, γ/ν⁴)` of GL1
//! and the GL2 norm coefficients.
//!
//! The modified `H¹(μ)` norm has coefficients `a₀, a₁, a₂ > 0`, `b₀, b₁ ≥ 0`. The
//! matrix `M₁` must satisfy `0 ≺ M₁ ⪯ I`, and the coercivity matrix `M₂` (upper
//! triangular, compared through `≽₊`, i.e. on the nonnegative orthant) must dominate
//! `C·m(γ, ν)·I`.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `min(γ, 1/γ, γ/ν⁴)`.
pub fn rate_gl1(gamma: f64, nu: f64) -> f64 {
    gamma.min(1.0 / gamma).min(gamma / nu.powi(4))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypoCoeffsGL1 {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
}

/// Exponents and prefactor of the coefficient family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffFamily {
    pub a: f64,
    pub eta: f64,
    pub delta: f64,
    pub rho: f64,
}

impl CoeffFamily {
    pub fn validate(&self) -> Result<()> {
        let CoeffFamily { a, eta, delta, rho } = *self;
        if !(a > 0.0 && a <= 1.0) {
            return Err(invalid(format!("A must lie in (0, 1], got {a}")));
        }
        if !(eta > 0.0 && eta < 0.5) {
            return Err(invalid(format!("eta must lie in (0, 1/2), got {eta}")));
        }
        if !(delta > 1.0 && delta < 1.0 + 2.0 * eta) {
            return Err(invalid(format!("delta must lie in (1, 1 + 2 eta), got {delta}")));
        }
        if !(rho > 0.0 && rho < 0.5 * (delta - 1.0)) {
            return Err(invalid(format!("rho must lie in (0, (delta - 1)/2), got {rho}")));
        }
        Ok(())
    }
}

/// `x = A m/r`, `y = A^η r`, `w = A^δ m`, `z = A^ρ`, with `b₀ = x`, `b₁ = w`,
/// `a₀ = 2x/y`, `a₁ = xy + 2w/z`, `a₂ = zw`.
pub fn coeffs_gl1(family: &CoeffFamily, gamma: f64, nu: f64) -> Result<HypoCoeffsGL1> {
    family.validate()?;
    if !(gamma > 0.0 && nu > 0.0) {
        return Err(invalid("gamma and nu must be positive"));
    }
    let CoeffFamily { a, eta, delta, rho } = *family;
    let r = gamma.sqrt() / nu;
    let m = rate_gl1(gamma, nu);
    let x = a * m / r;
    let y = a.powf(eta) * r;
    let w = a.powf(delta) * m;
    let z = a.powf(rho);
    Ok(HypoCoeffsGL1 { a0: 2.0 * x / y, a1: x * y + 2.0 * w / z, a2: z * w, b0: x, b1: w })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypoMatrices {
    pub m1: Matrix3<f64>,
    pub m2_tilde: Matrix3<f64>,
    pub m2: Matrix3<f64>,
    pub vpp_sup: f64,
}

pub fn build_matrices(c: &HypoCoeffsGL1, gamma: f64, nu: f64, beta: f64, vpp_sup: f64) -> HypoMatrices {
    let HypoCoeffsGL1 { a0, a1, a2, b0, b1 } = *c;
    let r = gamma.sqrt() / nu;
    let nu2 = nu * nu;
    let v = vpp_sup;
    let m1 = Matrix3::new(a0, -b0, 0.0, -b0, a1, -b1, 0.0, -b1, a2);
    let m2_tilde = Matrix3::new(
        1.0 / (beta * nu2) + a0 / nu2 - b0 * r,
        -((a0 - a1) * r + b0 / nu2).abs(),
        -(b0 - b1 * r).abs(),
        0.0,
        b0 * r - b1 * v,
        -a1 - a2 * v,
        0.0,
        0.0,
        b1,
    );
    let m2 = Matrix3::new(
        1.0 / (beta * nu2) - b0 * r - 0.5 * a0,
        -a0 * r - a1 * r - (2.0 + 1.0 / nu2) * b0,
        -b0 - b1 * r,
        0.0,
        b0 * r - 1.5 * a1 - b1 * v,
        -4.0 * b1 - a1 - a2 * v,
        0.0,
        0.0,
        b1 - 2.5 * a2,
    );
    HypoMatrices { m1, m2_tilde, m2, vpp_sup }
}

/// Projected-gradient settings for [`lambda_min_plus`] on matrices with positive
/// off-diagonal entries.
pub const RESTARTS: usize = 32;
pub const PG_TOL: f64 = 1e-10;

/// `min_{v ≥ 0, v ≠ 0} vᵀMv / vᵀv`.
///
/// With nonpositive off-diagonal entries the minimizer can be taken nonnegative
/// (Perron–Frobenius on `−M`), so this is the smallest eigenvalue of `(M + Mᵀ)/2`.
pub fn lambda_min_plus(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    let n = s.nrows();
    let offdiag_nonpositive = (0..n).all(|i| (0..n).all(|j| i == j || s[(i, j)] <= 0.0));
    if offdiag_nonpositive {
        return SymmetricEigen::new(s).eigenvalues.min();
    }
    projected_gradient(&s)
}

pub fn lambda_min_plus3(m: &Matrix3<f64>) -> f64 {
    lambda_min_plus(&DMatrix::from_column_slice(3, 3, m.as_slice()))
}

fn rayleigh(s: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(s * v)) / v.dot(v)
}

fn projected_gradient(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let scale = s.amax().max(f64::MIN_POSITIVE);
    let step = 0.25 / scale;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = f64::INFINITY;
    // axis vectors first: they are exact minimizers whenever a diagonal entry wins
    for i in 0..n {
        best = best.min(s[(i, i)]);
    }
    for _ in 0..RESTARTS {
        let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() + 1e-3);
        v /= v.norm();
        let mut val = rayleigh(s, &v);
        for _ in 0..100_000 {
            let grad = (s * &v - &v * val) * 2.0;
            let mut w = &v - grad * step;
            w.iter_mut().for_each(|x| *x = x.max(0.0));
            let nw = w.norm();
            if nw == 0.0 {
                break;
            }
            w /= nw;
            let new_val = rayleigh(s, &w);
            v = w;
            let done = (val - new_val).abs() <= PG_TOL * scale;
            val = new_val;
            if done {
                break;
            }
        }
        best = best.min(val);
    }
    best
}

/// Exact `λ_min⁺` by enumerating faces of the orthant: on the face supported by `S`,
/// the minimizer is an eigenvector of `sym(M)_SS` with positive entries. Exponential in
/// the dimension; meant as a check for small matrices.
pub fn lambda_min_plus_faces(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    let n = s.nrows();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| s[(idx[i], idx[j])]);
        let eig = SymmetricEigen::new(sub);
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let col = eig.eigenvectors.column(k);
            let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
            if col.iter().all(|&x| sign * x >= -1e-12) {
                best = best.min(lam);
            }
        }
    }
    best
}

/// Per-point data of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertPoint {
    pub gamma: f64,
    pub nu: f64,
    pub lambda_min_plus: f64,
    pub m: f64,
    pub m1_min: f64,
    pub m1_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub family: CoeffFamily,
    /// `min over the grid of λ_min⁺(M₂) / m`.
    pub c_star: f64,
    pub points: Vec<CertPoint>,
}

/// Candidate family members: `A` on a log grid, exponents at interior fractions of
/// their admissible ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub a_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// Position of `δ` in `(1, 1 + 2η)`, as fractions in `(0, 1)`.
    pub delta_fractions: Vec<f64>,
    /// Position of `ρ` in `(0, (δ − 1)/2)`.
    pub rho_fractions: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            a_values: (0..=36).map(|k| 10f64.powf(-0.25 * k as f64)).collect(),
            eta_values: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.45],
            delta_fractions: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            rho_fractions: vec![0.1, 0.25, 0.5, 0.75, 0.9],
        }
    }
}

impl SearchSpace {
    pub fn candidates(&self) -> Vec<CoeffFamily> {
        let mut out = Vec::new();
        for &a in &self.a_values {
            for &eta in &self.eta_values {
                for &fd in &self.delta_fractions {
                    let delta = 1.0 + fd * 2.0 * eta;
                    for &fr in &self.rho_fractions {
                        out.push(CoeffFamily { a, eta, delta, rho: fr * 0.5 * (delta - 1.0) });
                    }
                }
            }
        }
        out
    }
}

/// Evaluate one family member on a grid; `None` if `M₁` fails `0 ≺ M₁ ⪯ I` anywhere.
pub fn evaluate_family(
    family: &CoeffFamily,
    grid: &[(f64, f64)],
    beta: f64,
    vpp_sup: f64,
) -> Result<Option<Certificate>> {
    let mut points = Vec::with_capacity(grid.len());
    let mut c_star = f64::INFINITY;
    for &(gamma, nu) in grid {
        let c = coeffs_gl1(family, gamma, nu)?;
        let mats = build_matrices(&c, gamma, nu, beta, vpp_sup);
        let eig = SymmetricEigen::new(mats.m1).eigenvalues;
        let (m1_min, m1_max) = (eig.min(), eig.max());
        if !(m1_min > 0.0 && m1_max <= 1.0) {
            return Ok(None);
        }
        let m = rate_gl1(gamma, nu);
        let lam = lambda_min_plus3(&mats.m2);
        c_star = c_star.min(lam / m);
        points.push(CertPoint { gamma, nu, lambda_min_plus: lam, m, m1_min, m1_max });
    }
    Ok(Some(Certificate { family: *family, c_star, points }))
}

/// Best certificate (largest `C*`) over the search space.
pub fn verify_bound_gl1(
    grid: &[(f64, f64)],
    space: &SearchSpace,
    beta: f64,
    vpp_sup: f64,
) -> Result<Certificate> {
    if grid.is_empty() {
        return Err(invalid("certificate grid is empty"));
    }
    if !(beta > 0.0) {
        return Err(invalid("beta must be positive"));
    }
    let results: Vec<Option<Certificate>> = space
        .candidates()
        .par_iter()
        .map(|f| evaluate_family(f, grid, beta, vpp_sup))
        .collect::<Result<Vec<_>>>()?;
    results
        .into_iter()
        .flatten()
        .filter(|c| c.c_star > 0.0)
        .max_by(|a, b| a.c_star.total_cmp(&b.c_star))
        .ok_or(Error::NoCertificate)
}

/// `{10^lo, ..., 10^hi}²` with `n` points per axis.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let axis: Vec<f64> = (0..n)
        .map(|i| 10f64.powf(if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }))
        .collect();
    axis.iter().flat_map(|&g| axis.iter().map(move |&nu| (g, nu))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypoCoeffsGL2 {
    pub a: [f64; 4],
    pub b: [f64; 3],
    pub rate: f64,
    /// Smallest eigenvalue of the tridiagonal norm matrix.
    pub norm_min_eig: f64,
    /// Positive definiteness from the `LDLᵀ` pivots, which keep relative accuracy
    /// when the coefficients span many orders of magnitude (small `A`).
    pub norm_pd: bool,
}

/// `LDLᵀ` pivots of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e`.
pub fn tridiagonal_pivots(d: &[f64], e: &[f64]) -> Vec<f64> {
    let mut piv = Vec::with_capacity(d.len());
    for (i, &di) in d.iter().enumerate() {
        let p = if i == 0 { di } else { di - e[i - 1] * e[i - 1] / piv[i - 1] };
        piv.push(p);
    }
    piv
}

/// `min(γ, 1/γ, γ/ν⁴, α⁴γ/ν⁸, α²/γ, α⁴/(γ²ν²))`.
pub fn rate_gl2(gamma: f64, nu: f64, alpha: f64) -> f64 {
    let (a2, a4) = (alpha * alpha, alpha.powi(4));
    [gamma, 1.0 / gamma, gamma / nu.powi(4), a4 * gamma / nu.powi(8), a2 / gamma, a4 / (gamma * gamma * nu * nu)]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn coeffs_gl2_and_rate(a: f64, gamma: f64, nu: f64, alpha: f64) -> Result<HypoCoeffsGL2> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(invalid(format!("A must lie in (0, 1], got {a}")));
    }
    if !(gamma > 0.0 && nu > 0.0 && alpha > 0.0) {
        return Err(invalid("gamma, nu and alpha must be positive"));
    }
    let (g, n, al) = (gamma, nu, alpha);
    let sg = g.sqrt();
    let (al2, al3, al4) = (al * al, al.powi(3), al.powi(4));
    let tail = min_of(&[g, 1.0 / g, g / n.powi(4), al2 / g, al4 * g / n.powi(8), al4 / (g * g * n * n)]);
    let a0 = 2.0 * a.powi(4) * min_of(&[1.0, al, al2 / (n * n), al2 / (sg * n)]);
    let a1 = 2.0
        * a.powi(10)
        * min_of(&[1.0, al, 1.0 / (n * n), al4 / n.powi(6), 1.0 / (sg * n), al4 / (g.powf(1.5) * n.powi(3))]);
    let a2 = 2.0
        * a.powi(14)
        * min_of(&[1.0, al, g, g / n.powi(4), al4 * g / n.powi(8), 1.0 / (sg * n), al4 / (g.powf(1.5) * n.powi(3))]);
    let a3 = 2.0 * a.powi(16) * tail;
    let b0 = a.powi(7) * min_of(&[al, 1.0 / al, al3 / n.powi(4), al3 / (g * n * n)]);
    let b1 = a.powi(12)
        * min_of(&[sg * n, 1.0 / (sg * n), sg / n.powi(3), al4 * sg / n.powi(7), al4 / (g.powf(1.5) * n.powi(3))]);
    let b2 = a.powi(15) * tail;
    let norm = DMatrix::from_row_slice(
        4,
        4,
        &[a0, -b0, 0.0, 0.0, -b0, a1, -b1, 0.0, 0.0, -b1, a2, -b2, 0.0, 0.0, -b2, a3],
    );
    let norm_min_eig = SymmetricEigen::new(norm).eigenvalues.min();
    let norm_pd = tridiagonal_pivots(&[a0, a1, a2, a3], &[b0, b1, b2]).iter().all(|&p| p > 0.0);
    Ok(HypoCoeffsGL2 { a: [a0, a1, a2, a3], b: [b0, b1, b2], rate: rate_gl2(gamma, nu, alpha), norm_min_eig, norm_pd })
}
