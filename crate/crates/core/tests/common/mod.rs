//! Quadrature oracles shared by the integration tests; independent of the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// `ψ_j(x)`, `ψ_j'(x)`, `ψ_j''(x)` from explicit `He_j` (`He_j' = j He_{j-1}`).
pub fn psi_derivatives(j: usize, x: f64) -> [f64; 3] {
    let mut he = vec![1.0, x];
    for k in 1..j.max(1) {
        he.push(x * he[k] - k as f64 * he[k - 1]);
    }
    let fact: f64 = (1..=j).map(|k| k as f64).product();
    let c = ((2.0 * PI).sqrt() * fact).sqrt().recip() * (-x * x / 4.0).exp();
    let hj = he[j];
    let dhj = if j == 0 { 0.0 } else { j as f64 * he[j - 1] };
    let psi = c * hj;
    // ψ'' = (x²/4 − j − 1/2) ψ
    [psi, c * (dhj - x / 2.0 * hj), (x * x / 4.0 - j as f64 - 0.5) * psi]
}

/// `H_j`, `H_j'`, `H_j''` at `p` for scale `σ`.
pub fn hermite_derivatives(j: usize, p: f64, sigma: f64) -> [f64; 3] {
    let [f, df, ddf] = psi_derivatives(j, p / sigma);
    [f / sigma.sqrt(), df / sigma.powf(1.5), ddf / sigma.powf(2.5)]
}

/// `G_i` and `G_i'`.
pub fn trig_derivatives(i: usize, q: f64) -> [f64; 2] {
    if i == 0 {
        return [(2.0 * PI).sqrt().recip(), 0.0];
    }
    let m = i.div_ceil(2) as f64;
    let s = PI.sqrt().recip();
    if i % 2 == 1 {
        [s * (m * q).sin(), s * m * (m * q).cos()]
    } else {
        [s * (m * q).cos(), -s * m * (m * q).sin()]
    }
}

/// Trapezoid rule on `[-L, L]`; spectrally accurate for Gaussian-decaying integrands.
pub fn line_integral(f: impl Fn(f64) -> f64, half_width: f64) -> f64 {
    let n = 8000;
    let h = 2.0 * half_width / n as f64;
    (0..=n).map(|i| f(-half_width + i as f64 * h)).sum::<f64>() * h
}

/// Trapezoid rule over one period (exact for trigonometric polynomials of degree < 128).
pub fn periodic_integral(f: impl Fn(f64) -> f64) -> f64 {
    let n = 256;
    let h = 2.0 * PI / n as f64;
    (0..n).map(|i| f(i as f64 * h)).sum::<f64>() * h
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Composite Simpson rule on `[0, t]`.
pub fn simpson(f: impl Fn(f64) -> f64, t: f64, n: usize) -> f64 {
    let h = t / n as f64;
    let mut s = f(0.0) + f(t);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

/// `λᵀ e^{-tA} λ` by Taylor series with scaling and squaring.
pub fn expm_kernel(lambda: &DVector<f64>, a: &DMatrix<f64>, t: f64) -> f64 {
    let m = -a * t;
    let norm = m.amax() * m.nrows() as f64;
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let x = &m / 2f64.powi(s);
    let n = x.nrows();
    let mut e = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &x / k as f64;
        e += &term;
    }
    for _ in 0..s {
        e = &e * &e;
    }
    lambda.dot(&(e * lambda))
}

/// Modified Bessel `I₀(x)` by its power series.
pub fn bessel_i0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= (x / 2.0).powi(2) / (k * k) as f64;
        sum += term;
    }
    sum
}
