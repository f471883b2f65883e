//! One-dimensional trigonometric and rescaled Hermite bases, their banded operator
//! matrices, and tensor-product index bookkeeping.
//!
//! Everything lives in the flat space `L²(dq dp dz)`: a basis function `e` stands for
//! `ρ^{-1/2} e` in `L²(μ)`, with `ρ ∝ exp(-β(V + p²/2 + |z|²/2))`. Orthonormality in
//! `L²(μ)` is then plain orthonormality of the 1D factors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::potential::PeriodicPotential;

/// `G_i(q)`: constant, then interleaved `sin(mq)`, `cos(mq)`, normalized on `[0, 2π)`.
pub fn trig_eval(i: usize, q: f64) -> f64 {
    if i == 0 {
        return (2.0 * PI).sqrt().recip();
    }
    let m = i.div_ceil(2) as f64;
    let s = PI.sqrt().recip();
    if i % 2 == 1 {
        s * (m * q).sin()
    } else {
        s * (m * q).cos()
    }
}

/// Frequency of `G_i`.
pub fn trig_frequency(i: usize) -> usize {
    i.div_ceil(2)
}

/// `ψ_0..ψ_{n-1}` at `x`, `ψ_j(x) = He_j(x) e^{-x²/4} / sqrt(sqrt(2π) j!)`.
pub fn hermite_functions(n: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    out[0] = (2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp();
    if n > 1 {
        out[1] = x * out[0];
    }
    for j in 1..n.saturating_sub(1) {
        let jf = j as f64;
        out[j + 1] = (x * out[j] - jf.sqrt() * out[j - 1]) / (jf + 1.0).sqrt();
    }
    out
}

/// `H_j(p) = σ^{-1/2} ψ_j(p/σ)`.
pub fn hermite_eval(j: usize, p: f64, sigma: f64) -> f64 {
    hermite_functions(j + 1, p / sigma)[j] / sigma.sqrt()
}

/// Square matrix with nonzeros confined to `i - lower <= j <= i + upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOperator1D {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandedOperator1D {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|x| *x = 1.0);
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Declared `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    /// Bandwidths actually occupied by nonzero entries.
    pub fn effective_bandwidths(&self) -> (usize, usize) {
        let (mut lo, mut up) = (0, 0);
        for (i, j, _) in self.nonzeros() {
            if i > j {
                lo = lo.max(i - j);
            } else {
                up = up.max(j - i);
            }
        }
        (lo, up)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || j + self.lower < i || j > i + self.upper {
            return None;
        }
        Some(i * (self.lower + self.upper + 1) + (j + self.lower - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside the band");
        self.data[k] = v;
    }

    /// Iterator over `(row, col, value)` for nonzero entries.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.lower + self.upper + 1;
        (0..self.n).flat_map(move |i| {
            (0..w).filter_map(move |k| {
                let v = self.data[i * w + k];
                let j = (i + k).checked_sub(self.lower)?;
                (v != 0.0 && j < self.n).then_some((i, j, v))
            })
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.nonzeros() {
            out[i][j] = v;
        }
        out
    }

    /// Band matrix from a dense one; bandwidths are detected.
    pub fn from_dense(m: &[Vec<f64>], drop_below: f64) -> Self {
        let n = m.len();
        let (mut lo, mut up) = (0, 0);
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v.abs() > drop_below {
                    if i > j {
                        lo = lo.max(i - j);
                    } else {
                        up = up.max(j - i);
                    }
                }
            }
        }
        let mut out = Self::zeros(n, lo, up);
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v.abs() > drop_below {
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n, self.upper, self.lower);
        for (i, j, v) in self.nonzeros() {
            out.set(j, i, v);
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= s);
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.lower.max(other.lower), self.upper.max(other.upper));
        for (i, j, v) in self.nonzeros() {
            out.set(i, j, v);
        }
        for (i, j, v) in other.nonzeros() {
            let cur = out.get(i, j);
            out.set(i, j, cur + s * v);
        }
        out
    }

    /// Matrix product; bandwidths add.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Self::zeros(self.n, self.lower + other.lower, self.upper + other.upper);
        for (i, k, a) in self.nonzeros() {
            for j in k.saturating_sub(other.lower)..(k + other.upper + 1).min(self.n) {
                let b = other.get(k, j);
                if b != 0.0 {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + a * b);
                }
            }
        }
        out
    }

    /// Leading `m × m` block.
    pub fn truncate(&self, m: usize) -> Self {
        assert!(m <= self.n);
        let mut out = Self::zeros(m, self.lower, self.upper);
        for (i, j, v) in self.nonzeros() {
            if i < m && j < m {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, j, v) in self.nonzeros() {
            y[i] += v * x[j];
        }
        y
    }
}

/// Multiplication by `p` on `{H_j}` with scale `σ` (symmetric tridiagonal).
pub fn hermite_position(n: usize, sigma: f64) -> BandedOperator1D {
    let mut m = BandedOperator1D::zeros(n, 1, 1);
    for j in 0..n.saturating_sub(1) {
        let v = sigma * ((j + 1) as f64).sqrt();
        m.set(j + 1, j, v);
        m.set(j, j + 1, v);
    }
    m
}

/// Plain `∂_p` on `{H_j}` (antisymmetric tridiagonal).
pub fn hermite_derivative(n: usize, sigma: f64) -> BandedOperator1D {
    let mut m = BandedOperator1D::zeros(n, 1, 1);
    for j in 0..n.saturating_sub(1) {
        let v = ((j + 1) as f64).sqrt() / (2.0 * sigma);
        m.set(j, j + 1, v);
        m.set(j + 1, j, -v);
    }
    m
}

/// `∂_p + (β/2) p`: the flat form of `∂_p` acting in `L²(μ)`.
///
/// At the matched scale `σ² = 1/β` it is a pure lowering operator; the lower band is
/// then set to exactly zero.
pub fn hermite_weighted_gradient(n: usize, sigma: f64, beta: f64) -> BandedOperator1D {
    let mismatch = beta * sigma * sigma - 1.0;
    let up = (2.0 + mismatch) / (2.0 * sigma);
    let lo = if mismatch.abs() < 1e-12 { 0.0 } else { mismatch / (2.0 * sigma) };
    let mut m = BandedOperator1D::zeros(n, 1, 1);
    for j in 0..n.saturating_sub(1) {
        let r = ((j + 1) as f64).sqrt();
        m.set(j, j + 1, up * r);
        m.set(j + 1, j, lo * r);
    }
    m
}

/// Galerkin matrix of `aᵀ a` for `a = ∂_p + (β/2)p`.
///
/// Computed at size `n + 1` and truncated so that the product is the exact projection
/// of the operator rather than the product of projections.
pub fn hermite_weighted_laplacian(n: usize, sigma: f64, beta: f64) -> BandedOperator1D {
    let a = hermite_weighted_gradient(n + 1, sigma, beta);
    a.transpose().matmul(&a).truncate(n)
}

/// Hermite-axis operator matrices.
#[derive(Debug, Clone)]
pub struct HermiteOperators {
    /// `∂_p − (β/2)p`, i.e. `e^{βp²/4} ∘ ∂_p ∘ e^{−βp²/4}`.
    pub d_p: BandedOperator1D,
    /// Multiplication by `p`.
    pub m_p: BandedOperator1D,
    /// `(∂_p − (β/2)p)²`.
    pub d2_p: BandedOperator1D,
    pub identity: BandedOperator1D,
}

pub fn hermite_operator_matrices(n: usize, sigma: f64, beta: f64) -> HermiteOperators {
    let conj = |n| hermite_derivative(n, sigma).add_scaled(-0.5 * beta, &hermite_position(n, sigma));
    let big = conj(n + 1);
    HermiteOperators {
        d_p: conj(n),
        m_p: hermite_position(n, sigma),
        d2_p: big.matmul(&big).truncate(n),
        identity: BandedOperator1D::identity(n),
    }
}

/// Fourier-axis operator matrices.
#[derive(Debug, Clone)]
pub struct FourierOperators {
    pub d_q: BandedOperator1D,
    pub m_vprime: BandedOperator1D,
}

/// `∂_q` on `{G_i}`: `∂ G_{2m-1} = m G_{2m}`, `∂ G_{2m} = -m G_{2m-1}`.
pub fn fourier_derivative(n: usize) -> BandedOperator1D {
    let mut d = BandedOperator1D::zeros(n, 1, 1);
    for m in 1..=n / 2 {
        let (s, c) = (2 * m - 1, 2 * m);
        if c < n {
            d.set(c, s, m as f64);
            d.set(s, c, -(m as f64));
        }
    }
    d
}

/// Galerkin matrix of multiplication by `f` on `{G_i}`, `f` a trig polynomial of degree `d`.
///
/// Uses the periodic trapezoid rule with `4(n + d)` nodes, exact for the integrands.
pub fn fourier_multiplication(n: usize, degree: usize, f: impl Fn(f64) -> f64) -> BandedOperator1D {
    let nodes = 4 * (n + degree) + 4;
    let h = 2.0 * PI / nodes as f64;
    let fv: Vec<f64> = (0..nodes).map(|k| f(k as f64 * h)).collect();
    let g: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..nodes).map(|k| trig_eval(i, k as f64 * h)).collect())
        .collect();
    let band = 2 * degree + 1;
    let mut m = BandedOperator1D::zeros(n, band, band);
    for i in 0..n {
        for j in i.saturating_sub(band)..(i + band + 1).min(n) {
            let v: f64 = (0..nodes).map(|k| g[i][k] * fv[k] * g[j][k]).sum::<f64>() * h;
            if v.abs() > 1e-14 {
                m.set(i, j, v);
            }
        }
    }
    m
}

pub fn fourier_operator_matrices(n: usize, pot: &PeriodicPotential) -> FourierOperators {
    FourierOperators {
        d_q: fourier_derivative(n),
        m_vprime: fourier_multiplication(n, pot.degree(), |q| pot.derivative(q)),
    }
}

/// `{G_i}` coefficients of `e^{-βV/2} / sqrt(∫ e^{-βV})`, the flat form of `1` on the q axis.
pub fn fourier_ground_state(n: usize, pot: &PeriodicPotential, beta: f64) -> Vec<f64> {
    let nodes = (16 * n).max(4096);
    let h = 2.0 * PI / nodes as f64;
    let c0 = pot.cos_coeffs()[0];
    let w: Vec<f64> = (0..nodes)
        .map(|k| (-0.5 * beta * (pot.value(k as f64 * h) - c0)).exp())
        .collect();
    let norm = (w.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
    let mut c: Vec<f64> = (0..n)
        .map(|i| (0..nodes).map(|k| trig_eval(i, k as f64 * h) * w[k]).sum::<f64>() * h / norm)
        .collect();
    // quadrature round-off on modes absent by symmetry
    c.iter_mut().filter(|x| x.abs() < 1e-15).for_each(|x| *x = 0.0);
    c
}

/// `{H_j}` coefficients of `(β/2π)^{1/4} e^{-βp²/4}`, the flat form of `1` on a Hermite axis.
///
/// From the generating function of the Hermite functions: with `s = βσ²` and
/// `κ = (1 − s) / (2(1 + s))`, only even indices survive and
/// `c_{2k+2} / c_{2k} = κ sqrt((2k+1)(2k+2)) / (k+1)`.
pub fn hermite_ground_state(n: usize, sigma: f64, beta: f64) -> Vec<f64> {
    let s = beta * sigma * sigma;
    let kappa = (1.0 - s) / (2.0 * (1.0 + s));
    let mut out = vec![0.0; n];
    let mut c = (4.0 * s / ((1.0 + s) * (1.0 + s))).powf(0.25);
    for k in 0..n.div_ceil(2) {
        out[2 * k] = c;
        let kf = k as f64;
        c *= kappa * ((2.0 * kf + 1.0) * (2.0 * kf + 2.0)).sqrt() / (kf + 1.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AxisKind {
    Fourier,
    Hermite { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub kind: AxisKind,
    pub size: usize,
}

/// Tensor basis `G_i(q) H_j(p) H_k(z_1) ...`; the first axis varies slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBasisSpec {
    axes: Vec<Axis>,
    beta: f64,
}

impl TensorBasisSpec {
    pub fn new(axes: Vec<Axis>, beta: f64) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("basis needs at least one axis"));
        }
        if !(beta > 0.0) {
            return Err(invalid("beta must be positive"));
        }
        for ax in &axes {
            if ax.size < 2 {
                return Err(invalid("every axis needs at least 2 basis functions"));
            }
            // an even count leaves sin(mq) without its cos(mq) partner
            if ax.kind == AxisKind::Fourier && ax.size % 2 == 0 {
                return Err(invalid(format!("Fourier axis size must be odd, got {}", ax.size)));
            }
            if let AxisKind::Hermite { sigma } = ax.kind {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("Hermite scale must be positive"));
                }
            }
        }
        Ok(Self { axes, beta })
    }

    /// One Fourier axis followed by `1 + aux_dim` Hermite axes sharing `σ`.
    pub fn phase_space(sizes: &[usize], sigma: f64, beta: f64) -> Result<Self> {
        let axes = sizes
            .iter()
            .enumerate()
            .map(|(k, &size)| Axis {
                kind: if k == 0 { AxisKind::Fourier } else { AxisKind::Hermite { sigma } },
                size,
            })
            .collect();
        Self::new(axes, beta)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.size).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.axes.len()];
        for k in (0..self.axes.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.axes[k + 1].size;
        }
        s
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.axes.len());
        multi.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for k in (0..self.axes.len()).rev() {
            out[k] = flat % self.axes[k].size;
            flat /= self.axes[k].size;
        }
        out
    }

    /// Same axes at half the truncation order: every axis of size `N + 1` goes to
    /// `max(N / 2, 4) + 1` (rounded down to odd for Fourier axes).
    pub fn halved(&self) -> Self {
        let axes = self
            .axes
            .iter()
            .map(|a| {
                let n = a.size - 1;
                let h = (n / 2).max(4).min(n);
                let size = match a.kind {
                    AxisKind::Fourier => 2 * (h / 2) + 1,
                    AxisKind::Hermite { .. } => h + 1,
                };
                Axis { kind: a.kind, size }
            })
            .collect();
        Self { axes, beta: self.beta }
    }

    /// Kronecker product of per-axis coefficient vectors.
    pub fn kron_vector(&self, factors: &[Vec<f64>]) -> Vec<f64> {
        assert_eq!(factors.len(), self.axes.len());
        let mut out = vec![1.0];
        for (f, ax) in factors.iter().zip(&self.axes) {
            assert_eq!(f.len(), ax.size);
            out = out.iter().flat_map(|a| f.iter().map(move |b| a * b)).collect();
        }
        out
    }

    fn ground_state_axis(&self, k: usize, n: usize, pot: &PeriodicPotential) -> Vec<f64> {
        match self.axes[k].kind {
            AxisKind::Fourier => fourier_ground_state(n, pot, self.beta),
            AxisKind::Hermite { sigma } => hermite_ground_state(n, sigma, self.beta),
        }
    }

    /// Coefficients of `Π_N 1` (the flat square root of the invariant density).
    pub fn project_one(&self, pot: &PeriodicPotential) -> Vec<f64> {
        let factors: Vec<Vec<f64>> =
            (0..self.ndim()).map(|k| self.ground_state_axis(k, self.axes[k].size, pot)).collect();
        self.kron_vector(&factors)
    }

    /// Coefficients of `Π_N x_k` for the Hermite axis `k` (e.g. `k = 1` gives `Π_N p`).
    ///
    /// Multiplication is applied at size `N + 1` before truncating, which is exact.
    pub fn project_coordinate(&self, k: usize, pot: &PeriodicPotential) -> Result<Vec<f64>> {
        let AxisKind::Hermite { sigma } = self.axes[k].kind else {
            return Err(invalid("coordinate projection needs a Hermite axis"));
        };
        let factors: Vec<Vec<f64>> = (0..self.ndim())
            .map(|a| {
                let n = self.axes[a].size;
                if a == k {
                    let g = self.ground_state_axis(a, n + 1, pot);
                    let mut v = hermite_position(n + 1, sigma).matvec(&g);
                    v.truncate(n);
                    v
                } else {
                    self.ground_state_axis(a, n, pot)
                }
            })
            .collect();
        Ok(self.kron_vector(&factors))
    }
}
