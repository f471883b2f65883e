//! Asymptotic reference coefficients: overdamped (`D_ovd`), Langevin underdamped
//! (`D_und`) and GLE underdamped (`D*_ν`), plus the periodic first-order ODE solver
//! behind `s_ν`.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::basis::{fourier_derivative, fourier_multiplication, trig_eval, trig_frequency};
use crate::error::{invalid, Error, Result};
use crate::potential::PeriodicPotential;
use crate::quad::{adaptive_gk, gauss_legendre};

/// Relative change between successive truncation orders accepted as converged.
pub const OVERDAMPED_TOL: f64 = 1e-10;
const OVERDAMPED_MAX_N: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverdampedResult {
    /// `β⁻¹ + ∫ φ V′ dμ`.
    pub d: f64,
    /// `β⁻¹ (1 + ∫ φ′ dμ)`.
    pub d_alt: f64,
    /// Truncation order of the returned solve.
    pub n: usize,
}

/// `D_ovd` from a Fourier–Galerkin solve of `β⁻¹φ″ − V′φ′ = V′`.
pub fn overdamped_diffusion(pot: &PeriodicPotential, beta: f64) -> Result<f64> {
    Ok(overdamped_detailed(pot, beta)?.d)
}

/// Doubles the order until both formulas agree with each other and with the previous
/// order to [`OVERDAMPED_TOL`].
///
/// The two formulas coincide for any smooth periodic `φ` (integrate `φ′ e^{−βV}` by
/// parts), so their agreement only guards the quadrature; convergence is judged on
/// the change between orders.
pub fn overdamped_detailed(pot: &PeriodicPotential, beta: f64) -> Result<OverdampedResult> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta must be positive"));
    }
    let mut n = 8;
    let mut prev = f64::NAN;
    let mut last = f64::NAN;
    while n <= OVERDAMPED_MAX_N {
        let (d, d_alt) = overdamped_at(pot, beta, n)?;
        let tol = OVERDAMPED_TOL * d.abs();
        last = (d - prev).abs().max((d - d_alt).abs());
        if prev.is_finite() && last <= tol {
            return Ok(OverdampedResult { d, d_alt, n });
        }
        prev = d;
        n *= 2;
    }
    Err(Error::NoConvergence { iterations: OVERDAMPED_MAX_N, residual: last })
}

fn overdamped_at(pot: &PeriodicPotential, beta: f64, n: usize) -> Result<(f64, f64)> {
    let size = 2 * (n / 2) + 1;
    let d = fourier_derivative(size).to_dense();
    let m = fourier_multiplication(size, pot.degree(), |q| pot.derivative(q)).to_dense();
    // operator on the nonconstant modes; the constant is fixed by the mean condition
    let k = size - 1;
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 1..size {
        for j in 1..size {
            let d2: f64 = (0..size).map(|l| d[i][l] * d[l][j]).sum();
            let md: f64 = (0..size).map(|l| m[i][l] * d[l][j]).sum();
            a[(i - 1, j - 1)] = d2 / beta - md;
        }
    }
    // right-hand side: V′ expanded in the same basis
    let nodes = 8 * (size + pot.degree()) + 64;
    let h = 2.0 * PI / nodes as f64;
    let b = DVector::from_fn(k, |i, _| {
        (0..nodes).map(|l| trig_eval(i + 1, l as f64 * h) * pot.derivative(l as f64 * h)).sum::<f64>() * h
    });
    let c = a.lu().solve(&b).ok_or_else(|| Error::Singular("overdamped Galerkin matrix".into()))?;

    let nq = 4096.max(16 * size);
    let hq = 2.0 * PI / nq as f64;
    let vmin = pot.extrema().min;
    let (mut z, mut i1, mut i2) = (0.0, 0.0, 0.0);
    for l in 0..nq {
        let q = l as f64 * hq;
        let w = (-beta * (pot.value(q) - vmin)).exp();
        let (mut phi, mut dphi) = (0.0, 0.0);
        for (idx, ci) in c.iter().enumerate() {
            let i = idx + 1;
            let mf = trig_frequency(i) as f64;
            phi += ci * trig_eval(i, q);
            // d/dq sin(mq) = m cos(mq), d/dq cos(mq) = -m sin(mq)
            dphi += ci * mf * if i % 2 == 1 { trig_eval(i + 1, q) } else { -trig_eval(i - 1, q) };
        }
        z += w;
        i1 += phi * pot.derivative(q) * w;
        i2 += dphi * w;
    }
    Ok((1.0 / beta + i1 / z, (1.0 + i2 / z) / beta))
}

/// Settings for the outer energy integral of `D_und` and `D*_ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyIntegral {
    pub e_max: f64,
    pub rel_tol: f64,
    /// Minimum number of uniform q panels used for `s_ν` (see [`panels_for`]).
    pub panels: usize,
    pub method: SnuMethod,
}

impl Default for EnergyIntegral {
    fn default() -> Self {
        Self { e_max: 25.0, rel_tol: 1e-12, panels: 1024, method: SnuMethod::ClosedForm }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnuMethod {
    /// Integrating-factor formula, integrated with Gauss–Legendre panels.
    ClosedForm,
    /// Linear shooting with RK4; kept as an independent check.
    Shooting,
}

/// `S_und(E) = ∫ P(q, E) dq`.
pub fn s_und(pot: &PeriodicPotential, energy: f64) -> Result<f64> {
    let e0 = pot.barrier_energy()?;
    if energy < e0 {
        return Err(Error::EnergyBelowPotential { q: pot.extrema().argmax, energy, potential: e0 });
    }
    let (v, _) = adaptive_gk(|q| (2.0 * (energy - pot.value(q))).max(0.0).sqrt(), -PI, PI, 1e-13, 0.0)?;
    Ok(v)
}

/// `Z_β = sqrt(2π/β) ∫ e^{−βV}`.
pub fn partition_function(pot: &PeriodicPotential, beta: f64) -> Result<f64> {
    Ok((2.0 * PI / beta).sqrt() * pot.boltzmann_integral(beta, -1.0, 1e-13)?)
}

/// `(8π²/(βZ_β)) ∫_{E₀}^{E_max} w(E) e^{−βE} dE` with `E = E₀ + u²`.
fn energy_integral(
    pot: &PeriodicPotential,
    beta: f64,
    opts: &EnergyIntegral,
    weight: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid("beta must be positive"));
    }
    let e0 = pot.barrier_energy()?;
    if !(opts.e_max > e0) {
        return Err(invalid(format!("E_max = {} must exceed the barrier {e0}", opts.e_max)));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let (val, _) = adaptive_gk(
        |u| {
            let e = e0 + u * u;
            match weight(e) {
                Ok(w) => 2.0 * u * w * (-beta * e).exp(),
                Err(err) => {
                    failure.borrow_mut().get_or_insert(err);
                    0.0
                }
            }
        },
        0.0,
        (opts.e_max - e0).sqrt(),
        opts.rel_tol,
        0.0,
    )?;
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok(8.0 * PI * PI / (beta * partition_function(pot, beta)?) * val)
}

/// Limit of `γ D_γ` for Langevin dynamics as `γ → 0`.
pub fn langevin_underdamped_diffusion(pot: &PeriodicPotential, beta: f64, opts: &EnergyIntegral) -> Result<f64> {
    energy_integral(pot, beta, opts, |e| Ok(1.0 / s_und(pot, e)?))
}

/// `D*_ν`, the GLE counterpart with `ν² / S_ν(E)` in place of `1 / S_und(E)`.
pub fn gle_underdamped_diffusion(
    pot: &PeriodicPotential,
    beta: f64,
    nu: f64,
    opts: &EnergyIntegral,
) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(invalid("nu must be positive"));
    }
    let panels = panels_for(nu, opts.panels);
    energy_integral(pot, beta, opts, |e| Ok(nu * nu / s_nu_solve_with(pot, nu, e, panels, opts.method)?.integral))
}

/// The relaxation length of `s_ν` is `ν² P`, so small `ν` needs finer panels than
/// the configured floor.
pub fn panels_for(nu: f64, floor: usize) -> usize {
    floor.max((16.0 / (nu * nu)).ceil().min(1e6) as usize)
}

/// Samples of a periodic function on the uniform grid `q_m = q_0 + 2πm/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSamples {
    pub q0: f64,
    pub values: Vec<f64>,
    /// `∫_T f dq` by the trapezoid rule on the samples.
    pub integral: f64,
}

impl PeriodicSamples {
    pub fn grid(&self) -> Vec<f64> {
        let h = 2.0 * PI / self.values.len() as f64;
        (0..self.values.len()).map(|m| self.q0 + m as f64 * h).collect()
    }

    fn new(q0: f64, values: Vec<f64>) -> Self {
        let integral = values.iter().sum::<f64>() * 2.0 * PI / values.len() as f64;
        Self { q0, values, integral }
    }
}

const PANEL_ORDER: usize = 8;

/// `S[j][l] = ∫_{-1}^{x_j} ℓ_l`, the Gauss–Legendre integration matrix.
fn integration_matrix(x: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let lagrange = |l: usize, t: f64| {
        (0..n).filter(|&i| i != l).map(|i| (t - x[i]) / (x[l] - x[i])).product::<f64>()
    };
    (0..n)
        .map(|j| {
            let half = 0.5 * (x[j] + 1.0);
            (0..n)
                .map(|l| half * (0..n).map(|m| w[m] * lagrange(l, -1.0 + half * (x[m] + 1.0))).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Adaptive bisection of one panel until the increment `ΔI` is small and the
/// one-panel and two-panel estimates agree to `tol` (absolute, fixed by the
/// top-level panel so roundoff near zeros of `h` cannot stall it). The right half
/// only needs `tol / e^{−ΔI_left}`.
fn refine_panel(est: &impl Fn(f64, f64) -> [f64; 3], a: f64, b: f64, depth: usize, tol: Option<f64>) -> [f64; 3] {
    let m = 0.5 * (a + b);
    let whole = est(a, b);
    let (l, r) = (est(a, m), est(m, b));
    let join = |l: [f64; 3], r: [f64; 3]| {
        let damp = (-l[0]).exp();
        [l[0] + r[0], l[1] + damp * r[1], l[2] + damp * r[2]]
    };
    let split = join(l, r);
    if split[0].is_nan() {
        return split;
    }
    let tol = tol.filter(|t| *t > 0.0).unwrap_or(1e-13 * split[2]);
    let converged = split[0] <= 2.0
        && (whole[0] - split[0]).abs() <= 1e-13 * split[0].max(1.0)
        && (whole[1] - split[1]).abs() <= tol;
    if converged || depth >= 40 {
        return split;
    }
    let l = refine_panel(est, a, m, depth + 1, Some(tol));
    if l[0] > 745.0 {
        return join(l, r);
    }
    join(l, refine_panel(est, m, b, depth + 1, Some(tol * l[0].exp())))
}

/// Periodic solution of `g f′ − c f = h` on `[q0, q0 + 2π)`, `g > 0`, `c > 0`.
///
/// Uses the integrating factor `I(q) = ∫ c/g` in the form
/// `f(q) = −∫_q^∞ e^{−(I(y) − I(q))} h(y)/g(y) dy`, summed panel by panel so that
/// every exponential is at most 1.
pub fn solve_periodic_linear(
    g: impl Fn(f64) -> f64,
    h: impl Fn(f64) -> f64,
    c: f64,
    q0: f64,
    panels: usize,
) -> Result<PeriodicSamples> {
    if !(c > 0.0) || panels < 2 {
        return Err(invalid("need c > 0 and at least two panels"));
    }
    let (x, w) = gauss_legendre(PANEL_ORDER);
    let s = integration_matrix(&x, &w);
    let dq = 2.0 * PI / panels as f64;
    // (ΔI, ∫ e^{−(I(y) − I(a))} h/g, same with |h|) over [a, b] by one Gauss–Legendre panel
    let estimate = |a: f64, b: f64| -> [f64; 3] {
        let half = 0.5 * (b - a);
        let mut gv = [0.0; PANEL_ORDER];
        let mut hv = [0.0; PANEL_ORDER];
        for j in 0..PANEL_ORDER {
            let q = a + half * (x[j] + 1.0);
            gv[j] = g(q);
            hv[j] = h(q);
        }
        if gv.iter().any(|v| !(*v > 0.0)) {
            return [f64::NAN; 3];
        }
        let rate: Vec<f64> = gv.iter().map(|gi| c / gi).collect();
        let d = half * w.iter().zip(&rate).map(|(wi, ri)| wi * ri).sum::<f64>();
        let (mut p, mut pa) = (0.0, 0.0);
        for j in 0..PANEL_ORDER {
            let ij = half * (0..PANEL_ORDER).map(|l| s[j][l] * rate[l]).sum::<f64>();
            let t = w[j] * (-ij).exp() / gv[j] * half;
            p += t * hv[j];
            pa += t * hv[j].abs();
        }
        [d, p, pa]
    };
    let mut d_inc = vec![0.0; panels];
    let mut p = vec![0.0; panels];
    for k in 0..panels {
        let a = q0 + k as f64 * dq;
        let [d, pk, _] = refine_panel(&estimate, a, a + dq, 0, None);
        d_inc[k] = d;
        p[k] = pk;
        if d.is_nan() {
            return Err(invalid("g must be positive on the torus"));
        }
    }
    // T_k = p_k + e^{-ΔI_k} T_{k+1} with T_M = T_0
    let total: f64 = d_inc.iter().sum();
    let (mut acc, mut decay) = (0.0, 0.0_f64);
    for k in 0..panels {
        acc += (-decay).exp() * p[k];
        decay += d_inc[k];
    }
    let t0 = acc / -(-total).exp_m1();
    let mut t = vec![0.0; panels];
    let mut next = t0;
    for k in (0..panels).rev() {
        next = p[k] + (-d_inc[k]).exp() * next;
        t[k] = next;
    }
    let values: Vec<f64> = t.iter().map(|tk| -tk).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature { estimate: f64::NAN, error: f64::INFINITY });
    }
    Ok(PeriodicSamples::new(q0, values))
}

/// The same problem by linear shooting: `f_a(q0 + 2π) = A a + B`, so `a* = B / (1 − A)`.
pub fn solve_periodic_shooting(
    g: impl Fn(f64) -> f64,
    h: impl Fn(f64) -> f64,
    c: f64,
    q0: f64,
    steps: usize,
) -> Result<PeriodicSamples> {
    if !(c > 0.0) || steps < 2 {
        return Err(invalid("need c > 0 and at least two steps"));
    }
    let dq = 2.0 * PI / steps as f64;
    let rhs = |q: f64, f: f64| (c * f + h(q)) / g(q);
    let run = |a: f64, record: bool| {
        let mut f = a;
        let mut out = Vec::with_capacity(if record { steps } else { 0 });
        for k in 0..steps {
            if record {
                out.push(f);
            }
            let q = q0 + k as f64 * dq;
            let k1 = rhs(q, f);
            let k2 = rhs(q + 0.5 * dq, f + 0.5 * dq * k1);
            let k3 = rhs(q + 0.5 * dq, f + 0.5 * dq * k2);
            let k4 = rhs(q + dq, f + dq * k3);
            f += dq / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        (f, out)
    };
    let (b, _) = run(0.0, false);
    let (one, _) = run(1.0, false);
    let gain = one - b;
    let a = b / (1.0 - gain);
    let (_, values) = run(a, true);
    if !a.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("shooting map has no fixed point".into()));
    }
    Ok(PeriodicSamples::new(q0, values))
}

/// `s_ν(·, E)`: the periodic solution of `P ∂_q s − s/ν² = −P`, sampled on `panels`
/// uniform points starting at the barrier top (where `P` is smallest).
pub fn s_nu_solve(pot: &PeriodicPotential, nu: f64, energy: f64, panels: usize) -> Result<PeriodicSamples> {
    s_nu_solve_with(pot, nu, energy, panels, SnuMethod::ClosedForm)
}

pub fn s_nu_solve_with(
    pot: &PeriodicPotential,
    nu: f64,
    energy: f64,
    panels: usize,
    method: SnuMethod,
) -> Result<PeriodicSamples> {
    if !(nu > 0.0) {
        return Err(invalid("nu must be positive"));
    }
    let ext = pot.extrema();
    let e0 = pot.barrier_energy()?;
    if !(energy > e0) {
        return Err(Error::EnergyBelowPotential { q: ext.argmax, energy, potential: e0 });
    }
    let p = |q: f64| (2.0 * (energy - pot.value(q))).max(0.0).sqrt();
    let c = 1.0 / (nu * nu);
    match method {
        SnuMethod::ClosedForm => solve_periodic_linear(p, |q| -p(q), c, ext.argmax, panels),
        SnuMethod::Shooting => solve_periodic_shooting(p, |q| -p(q), c, ext.argmax, 8 * panels),
    }
}

/// `sup |P ∂_q s − s/ν² + P|` with `∂_q` by FFT differentiation of the samples.
pub fn s_nu_residual(pot: &PeriodicPotential, nu: f64, energy: f64, s: &PeriodicSamples) -> f64 {
    let ds = spectral_derivative(&s.values);
    s.grid()
        .iter()
        .zip(s.values.iter().zip(&ds))
        .map(|(&q, (&sv, &dv))| {
            let p = (2.0 * (energy - pot.value(q))).max(0.0).sqrt();
            (p * dv - sv / (nu * nu) + p).abs()
        })
        .fold(0.0, f64::max)
}

/// Derivative of a `2π`-periodic function from uniform samples.
pub fn spectral_derivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let freq = if 2 * k < n {
            k as f64
        } else if 2 * k == n {
            0.0 // the Nyquist mode has no real derivative
        } else {
            k as f64 - n as f64
        };
        *b *= Complex::new(0.0, freq);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|b| b.re / n as f64).collect()
}

/// `M = sup_{q, E > E₀} |∂_q P(q, E)| = sup_q |V′(q)| / sqrt(2(E₀ − V(q)))`.
///
/// Near a barrier top the ratio tends to `sqrt(−V″)`, which is included explicitly.
pub fn momentum_slope_bound(pot: &PeriodicPotential) -> Result<f64> {
    let ext = pot.extrema();
    let e0 = pot.barrier_energy()?;
    const SAMPLES: usize = 1 << 16;
    let h = 2.0 * PI / SAMPLES as f64;
    let mut m = (-pot.second_derivative(ext.argmax)).max(0.0).sqrt();
    for i in 0..SAMPLES {
        let q = -PI + i as f64 * h;
        let gap = 2.0 * (e0 - pot.value(q));
        if gap > 1e-6 {
            m = m.max(pot.derivative(q).abs() / gap.sqrt());
        }
    }
    Ok(m)
}

/// Lower bound `ν²/(1 + ν²M) ∫ sqrt(2(E₀ − V))` on `S_ν(E)`, uniform in `E > E₀`.
pub fn s_nu_lower_bound(pot: &PeriodicPotential, nu: f64) -> Result<f64> {
    let e0 = pot.barrier_energy()?;
    let m = momentum_slope_bound(pot)?;
    let (base, _) = adaptive_gk(|q| (2.0 * (e0 - pot.value(q))).max(0.0).sqrt(), -PI, PI, 1e-12, 0.0)?;
    let nu2 = nu * nu;
    Ok(nu2 / (1.0 + nu2 * m) * base)
}

/// Both sides of the a-priori estimate for `g f′ − c f = h` with trigonometric `g, h`:
/// `(max|f + h/c + g h′/c²|, max|g (g h′)′| / c³)` on the solver grid.
pub fn periodic_ode_estimate(
    g: &PeriodicPotential,
    h: &PeriodicPotential,
    c: f64,
    panels: usize,
) -> Result<(f64, f64)> {
    let sol = solve_periodic_linear(|q| g.value(q), |q| h.value(q), c, -PI, panels)?;
    let mut lhs: f64 = 0.0;
    let mut rhs: f64 = 0.0;
    for (q, f) in sol.grid().into_iter().zip(&sol.values) {
        let (gv, gd) = (g.value(q), g.derivative(q));
        let (hv, hd, hdd) = (h.value(q), h.derivative(q), h.second_derivative(q));
        lhs = lhs.max((f + hv / c + gv * hd / (c * c)).abs());
        rhs = rhs.max((gv * (gd * hd + gv * hdd)).abs() / c.powi(3));
    }
    Ok((lhs, rhs))
}

/// `S_und(E)` or `S_ν(E)` tabulated on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    /// `None` for `S_und`.
    pub nu: Option<f64>,
    pub panels: usize,
}

impl EnergyProfile {
    pub fn compute(pot: &PeriodicPotential, nu: Option<f64>, energies: &[f64], panels: usize) -> Result<Self> {
        let e0 = pot.barrier_energy()?;
        let mut prev = e0;
        for &e in energies {
            if !(e > prev) {
                return Err(invalid("energies must increase strictly from above the barrier"));
            }
            prev = e;
        }
        let values = energies
            .iter()
            .map(|&e| match nu {
                None => s_und(pot, e),
                Some(nu) => Ok(s_nu_solve(pot, nu, e, panels)?.integral),
            })
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Quadrature { estimate: f64::NAN, error: f64::NAN });
        }
        Ok(Self { energies: energies.to_vec(), values, nu, panels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integration_matrix_integrates_polynomials() {
        let (x, w) = gauss_legendre(PANEL_ORDER);
        let s = integration_matrix(&x, &w);
        for j in 0..PANEL_ORDER {
            let v: f64 = (0..PANEL_ORDER).map(|l| s[j][l] * x[l].powi(3)).sum();
            assert!((v - (x[j].powi(4) - 1.0) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let n = 64;
        let v: Vec<f64> = (0..n).map(|k| (3.0 * 2.0 * PI * k as f64 / n as f64).sin()).collect();
        let d = spectral_derivative(&v);
        for (k, dk) in d.iter().enumerate() {
            let q = 2.0 * PI * k as f64 / n as f64;
            assert!((dk - 3.0 * (3.0 * q).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn free_overdamped() {
        let r = overdamped_detailed(&PeriodicPotential::constant(0.0), 2.0).unwrap();
        assert!((r.d - 0.5).abs() < 1e-15 && r.n == 16);
    }
}
