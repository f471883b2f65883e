//! Monte Carlo estimate of `D` from the mean-squared displacement of the Markovian
//! system, integrated by Euler–Maruyama.
//!
//! Every path owns a ChaCha stream selected by its index, so results do not depend on
//! the number of worker threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::{embed, Model, NoiseParams};
use crate::potential::PeriodicPotential;

/// `|p|` beyond which a path counts as blown up.
const BLOW_UP: f64 = 1e100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: NoiseParams,
    pub potential: PeriodicPotential,
    pub dt: f64,
    pub t_final: f64,
    pub n_paths: usize,
    pub burn_in: f64,
    pub seed: u64,
    pub batches: usize,
    /// Number of equally spaced times at which `Var(q_t − q_0)` is recorded.
    pub checkpoints: usize,
}

impl McConfig {
    pub fn new(params: NoiseParams, potential: PeriodicPotential, dt: f64, t_final: f64, n_paths: usize, seed: u64) -> Self {
        Self { params, potential, dt, t_final, n_paths, burn_in: 0.0, seed, batches: 20, checkpoints: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.burn_in >= 0.0 && self.t_final > self.burn_in) {
            return Err(invalid("need T > burn_in >= 0"));
        }
        if self.n_paths < 2 {
            return Err(invalid(format!("need at least 2 paths, got {}", self.n_paths)));
        }
        if self.batches < 2 || self.batches > self.n_paths {
            return Err(invalid(format!("batch count must lie in [2, paths], got {}", self.batches)));
        }
        if self.t_final / self.dt > 1e12 {
            return Err(invalid("too many time steps"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub d_hat: f64,
    pub std_err: f64,
    pub n_paths: usize,
    pub dt_effective: f64,
    pub seed: u64,
    /// Sample variance of the final momenta and auxiliary variables.
    pub p_var: f64,
    pub z_var: Vec<f64>,
    /// `(t, Var(q_t − q_0))` at the requested checkpoints.
    pub msd: Vec<(f64, f64)>,
}

impl McResult {
    /// Half-width of the 95% interval relative to the estimate.
    pub fn relative_half_width(&self) -> f64 {
        1.96 * self.std_err / self.d_hat.abs()
    }
}

struct Dynamics {
    friction: f64,
    p_noise: f64,
    d: usize,
    lambda: [f64; 2],
    a: [[f64; 2]; 2],
    sigma: [[f64; 2]; 2],
}

impl Dynamics {
    fn new(params: &NoiseParams) -> Result<Self> {
        let mut dy = Dynamics { friction: 0.0, p_noise: 0.0, d: 0, lambda: [0.0; 2], a: [[0.0; 2]; 2], sigma: [[0.0; 2]; 2] };
        if params.model == Model::L {
            dy.friction = params.gamma;
            dy.p_noise = (2.0 * params.gamma / params.beta).sqrt();
            return Ok(dy);
        }
        let emb = embed(params)?;
        dy.d = emb.dim();
        for i in 0..dy.d {
            dy.lambda[i] = emb.lambda[i];
            for j in 0..dy.d {
                dy.a[i][j] = emb.a[(i, j)];
                dy.sigma[i][j] = emb.sigma[(i, j)];
            }
        }
        Ok(dy)
    }
}

/// `V'` from one `sin_cos` and the angle-addition recurrence.
struct Force {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Force {
    fn new(pot: &PeriodicPotential) -> Self {
        let d = pot.degree();
        Force { cos: pot.cos_coeffs()[1..=d].to_vec(), sin: pot.sin_coeffs()[..d].to_vec() }
    }

    #[inline]
    fn derivative(&self, q: f64) -> f64 {
        let (s1, c1) = q.sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for (k, (&a, &b)) in self.cos.iter().zip(&self.sin).enumerate() {
            acc += (k + 1) as f64 * (b * c - a * s);
            (s, c) = (s * c1 + c * s1, c * c1 - s * s1);
        }
        acc
    }
}

struct PathOutcome {
    disp: f64,
    p: f64,
    z: [f64; 2],
    marks: Vec<f64>,
}

fn sample_position(pot: &PeriodicPotential, beta: f64, vmin: f64, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let q = 2.0 * PI * rng.random::<f64>();
        if rng.random::<f64>() < (-beta * (pot.value(q) - vmin)).exp() {
            return q;
        }
    }
}

fn run_path<const D: usize>(
    cfg: &McConfig,
    dy: &Dynamics,
    vmin: f64,
    n_steps: usize,
    burn_steps: usize,
    mark_every: usize,
    path: usize,
) -> Result<PathOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path as u64);
    let beta = cfg.params.beta;
    let dt = cfg.t_final / n_steps as f64;
    let sdt = dt.sqrt();
    let pot = &cfg.potential;
    let force_of = Force::new(pot);
    let sd = beta.recip().sqrt();

    let q0 = sample_position(pot, beta, vmin, &mut rng);
    let mut q = q0;
    let mut p = sd * rng.sample::<f64, _>(StandardNormal);
    let mut z = [0.0; 2];
    for zi in z.iter_mut().take(dy.d) {
        *zi = sd * rng.sample::<f64, _>(StandardNormal);
    }
    // V' is evaluated at a copy of q kept in [-π, π): cheaper argument reduction
    let mut qw = q0 - 2.0 * PI * ((q0 + PI) / (2.0 * PI)).floor();
    let mut q_burn = q0;
    let mut marks = Vec::new();
    let d = D;

    for step in 0..n_steps {
        if step == burn_steps {
            q_burn = q;
        }
        let force = -force_of.derivative(qw) + dy.lambda[0] * z[0] + dy.lambda[1] * z[1];
        let mut dp = (force - dy.friction * p) * dt;
        if dy.p_noise > 0.0 {
            dp += dy.p_noise * sdt * rng.sample::<f64, _>(StandardNormal);
        }
        let mut xi = [0.0; 2];
        for x in xi.iter_mut().take(d) {
            *x = sdt * rng.sample::<f64, _>(StandardNormal);
        }
        let mut nz = z;
        for i in 0..d {
            let mut drift = -p * dy.lambda[i];
            let mut noise = 0.0;
            for j in 0..d {
                drift -= dy.a[i][j] * z[j];
                noise += dy.sigma[i][j] * xi[j];
            }
            nz[i] = z[i] + drift * dt + noise;
        }
        q += p * dt;
        qw += p * dt;
        if !(-PI..PI).contains(&qw) {
            qw -= 2.0 * PI * ((qw + PI) / (2.0 * PI)).floor();
        }
        p += dp;
        z = nz;
        if !(p.abs() < BLOW_UP) || !q.is_finite() {
            return Err(Error::BlowUp { step: step + 1, path });
        }
        if mark_every > 0 && (step + 1) % mark_every == 0 {
            marks.push(q - q0);
        }
    }
    if burn_steps >= n_steps {
        q_burn = q;
    }
    Ok(PathOutcome { disp: q - q_burn, p, z, marks })
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn simulate(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let dy = Dynamics::new(&cfg.params)?;
    let n_steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let dt_eff = cfg.t_final / n_steps as f64;
    let burn_steps = (cfg.burn_in / dt_eff).round() as usize;
    let mark_every = if cfg.checkpoints > 0 { (n_steps / cfg.checkpoints).max(1) } else { 0 };
    let vmin = cfg.potential.extrema().min;

    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| match dy.d {
            0 => run_path::<0>(cfg, &dy, vmin, n_steps, burn_steps, mark_every, i),
            1 => run_path::<1>(cfg, &dy, vmin, n_steps, burn_steps, mark_every, i),
            _ => run_path::<2>(cfg, &dy, vmin, n_steps, burn_steps, mark_every, i),
        })
        .collect::<Result<Vec<_>>>()?;

    let span = 2.0 * (n_steps - burn_steps.min(n_steps)) as f64 * dt_eff;
    let span = if span > 0.0 { span } else { 2.0 * dt_eff };
    let d_hat = variance(outcomes.iter().map(|o| o.disp)) / span;

    // batch means of the per-path estimator (Δ − Δ̄)² n/(n − 1) over contiguous blocks
    let n = cfg.n_paths as f64;
    let mean = outcomes.iter().map(|o| o.disp).sum::<f64>() / n;
    let b = cfg.batches;
    let batch_d: Vec<f64> = (0..b)
        .map(|k| {
            let block = &outcomes[k * cfg.n_paths / b..(k + 1) * cfg.n_paths / b];
            let ss: f64 = block.iter().map(|o| (o.disp - mean).powi(2)).sum();
            ss / block.len() as f64 * n / (n - 1.0) / span
        })
        .collect();
    let std_err = (variance(batch_d.iter().copied()) / b as f64).sqrt();

    let p_var = variance(outcomes.iter().map(|o| o.p));
    let z_var = (0..dy.d).map(|i| variance(outcomes.iter().map(|o| o.z[i]))).collect();
    let n_marks = outcomes.first().map_or(0, |o| o.marks.len());
    let msd = (0..n_marks)
        .map(|k| {
            let t = ((k + 1) * mark_every) as f64 * dt_eff;
            (t, variance(outcomes.iter().map(|o| o.marks[k])))
        })
        .collect();

    Ok(McResult { d_hat, std_err, n_paths: cfg.n_paths, dt_effective: dt_eff, seed: cfg.seed, p_var, z_var, msd })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McExtrapolation {
    pub runs: Vec<McResult>,
    /// Value of the least-squares line `D(dt) = D₀ + c·dt` at `dt = 0`.
    pub d_extrapolated: f64,
    pub std_err: f64,
    /// `|D(dt_min) − D₀|`.
    pub bias: f64,
    /// Bias exceeds twice the standard error of the finest run.
    pub bias_flag: bool,
}

/// Runs [`simulate`] at each step size (same seed, hence the same path streams) and
/// extrapolates linearly to `dt = 0`.
pub fn dt_extrapolate(cfg: &McConfig, dts: &[f64]) -> Result<McExtrapolation> {
    if dts.len() < 2 {
        return Err(invalid("dt extrapolation needs at least two step sizes"));
    }
    let runs = dts
        .iter()
        .map(|&dt| simulate(&McConfig { dt, ..cfg.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = runs.iter().map(|r| r.dt_effective).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(invalid("dt extrapolation needs distinct step sizes"));
    }
    // D₀ = Σ w_i D_i with w_i = 1/n − x̄(x_i − x̄)/Sxx
    let w: Vec<f64> = xs.iter().map(|x| 1.0 / n - xm * (x - xm) / sxx).collect();
    let d0: f64 = w.iter().zip(&runs).map(|(w, r)| w * r.d_hat).sum();
    let se0 = w.iter().zip(&runs).map(|(w, r)| (w * r.std_err).powi(2)).sum::<f64>().sqrt();
    let finest = runs
        .iter()
        .min_by(|a, b| a.dt_effective.total_cmp(&b.dt_effective))
        .expect("at least two runs");
    let bias = (finest.d_hat - d0).abs();
    let bias_flag = bias > 2.0 * finest.std_err;
    Ok(McExtrapolation { d_extrapolated: d0, std_err: se0, bias, bias_flag, runs })
}
