//! Trigonometric-polynomial periodic potentials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::adaptive_gk;

/// Tolerance on `min V` accepted by [`PeriodicPotential::barrier_energy`].
pub const MIN_TOLERANCE: f64 = 1e-10;

/// `V(q) = sum_k c_k cos(kq) + sum_{k>=1} s_k sin(kq)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPotential {
    cos_coeffs: Vec<f64>,
    sin_coeffs: Vec<f64>,
}

/// Location and value of the extrema of a potential over one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrema {
    pub min: f64,
    pub argmin: f64,
    pub max: f64,
    pub argmax: f64,
}

impl PeriodicPotential {
    /// `cos_coeffs[k]` multiplies `cos(kq)` for `k = 0..`, `sin_coeffs[k-1]` multiplies `sin(kq)`.
    pub fn new(mut cos_coeffs: Vec<f64>, mut sin_coeffs: Vec<f64>) -> Result<Self> {
        if cos_coeffs.is_empty() {
            cos_coeffs.push(0.0);
        }
        if cos_coeffs.iter().chain(&sin_coeffs).any(|c| !c.is_finite()) {
            return Err(invalid("potential coefficients must be finite"));
        }
        let d = (cos_coeffs.len() - 1).max(sin_coeffs.len());
        cos_coeffs.resize(d + 1, 0.0);
        sin_coeffs.resize(d, 0.0);
        Ok(Self { cos_coeffs, sin_coeffs })
    }

    /// The benchmark potential `V(q) = (1 - cos q)/2`.
    pub fn cosine() -> Self {
        Self::new(vec![0.5, -0.5], vec![]).expect("finite coefficients")
    }

    /// `V ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self::new(vec![c], vec![]).expect("finite coefficients")
    }

    pub fn degree(&self) -> usize {
        self.sin_coeffs.len()
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos_coeffs
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin_coeffs
    }

    pub fn is_constant(&self) -> bool {
        self.cos_coeffs[1..].iter().chain(&self.sin_coeffs).all(|&c| c == 0.0)
    }

    /// `V`, `V'` or `V''` at `q` for `order` 0, 1, 2.
    pub fn eval(&self, q: f64, order: u8) -> f64 {
        debug_assert!(order <= 2);
        let mut acc = if order == 0 { self.cos_coeffs[0] } else { 0.0 };
        for k in 1..=self.degree() {
            let kf = k as f64;
            let (s, c) = (kf * q).sin_cos();
            let (a, b) = (self.cos_coeffs[k], self.sin_coeffs[k - 1]);
            acc += match order {
                0 => a * c + b * s,
                1 => kf * (-a * s + b * c),
                _ => -kf * kf * (a * c + b * s),
            };
        }
        acc
    }

    pub fn value(&self, q: f64) -> f64 {
        self.eval(q, 0)
    }

    pub fn derivative(&self, q: f64) -> f64 {
        self.eval(q, 1)
    }

    pub fn second_derivative(&self, q: f64) -> f64 {
        self.eval(q, 2)
    }

    /// Upper bound `sum k^2 (|c_k| + |s_k|)` on `sup |V''|`.
    pub fn second_derivative_bound(&self) -> f64 {
        (1..=self.degree())
            .map(|k| (k * k) as f64 * (self.cos_coeffs[k].abs() + self.sin_coeffs[k - 1].abs()))
            .sum()
    }

    /// Extrema over `[-π, π]`: 4096 samples followed by golden-section refinement.
    pub fn extrema(&self) -> Extrema {
        const SAMPLES: usize = 4096;
        let h = 2.0 * PI / SAMPLES as f64;
        let (mut imin, mut imax) = (0, 0);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..SAMPLES {
            let v = self.value(-PI + i as f64 * h);
            if v < vmin {
                vmin = v;
                imin = i;
            }
            if v > vmax {
                vmax = v;
                imax = i;
            }
        }
        let qmin = -PI + imin as f64 * h;
        let qmax = -PI + imax as f64 * h;
        let argmin = golden_min(|q| self.value(q), qmin - h, qmin + h);
        let argmax = golden_min(|q| -self.value(q), qmax - h, qmax + h);
        let wrap = |q: f64| (q + PI).rem_euclid(2.0 * PI) - PI;
        Extrema {
            min: self.value(argmin).min(vmin),
            argmin: wrap(argmin),
            max: self.value(argmax).max(vmax),
            argmax: wrap(argmax),
        }
    }

    /// `E0 = max V`; fails if `min V` is not 0 within [`MIN_TOLERANCE`].
    pub fn barrier_energy(&self) -> Result<f64> {
        self.barrier_energy_with_tol(MIN_TOLERANCE)
    }

    pub fn barrier_energy_with_tol(&self, tol: f64) -> Result<f64> {
        let ext = self.extrema();
        if ext.min.abs() > tol {
            return Err(Error::NotNormalized { offset: ext.min });
        }
        Ok(ext.max)
    }

    /// Copy shifted so that `min V = 0`.
    pub fn shifted_to_zero_min(&self) -> Self {
        let mut out = self.clone();
        out.cos_coeffs[0] -= self.extrema().min;
        out
    }

    /// `P(q, E) = sqrt(2 (E - V(q)))`.
    pub fn momentum_at_energy(&self, q: f64, energy: f64) -> Result<f64> {
        let v = self.value(q);
        if energy < v {
            return Err(Error::EnergyBelowPotential { q, energy, potential: v });
        }
        Ok((2.0 * (energy - v)).sqrt())
    }

    /// `∫_T exp(s β V) dq` for `s = ±1` by adaptive quadrature.
    pub fn boltzmann_integral(&self, beta: f64, sign: f64, rel_tol: f64) -> Result<f64> {
        // shifting by the mean of V keeps the exponentials O(1)
        let c0 = self.cos_coeffs[0];
        let (v, _) = adaptive_gk(
            |q| (sign * beta * (self.value(q) - c0)).exp(),
            -PI,
            PI,
            rel_tol,
            0.0,
        )?;
        Ok(v * (sign * beta * c0).exp())
    }

    /// `β⁻¹ (2π)² / (∫ e^{βV} ∫ e^{-βV})`, the closed-form overdamped coefficient.
    pub fn lifson_jackson(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(invalid("beta must be positive"));
        }
        // the ratio is invariant under V -> V + c, so drop the constant term
        let mut shifted = self.clone();
        shifted.cos_coeffs[0] = 0.0;
        let plus = shifted.boltzmann_integral(beta, 1.0, 1e-10)?;
        let minus = shifted.boltzmann_integral(beta, -1.0, 1e-10)?;
        Ok((2.0 * PI).powi(2) / (beta * plus * minus))
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
