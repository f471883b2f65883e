//! Run configuration: TOML with dotted keys (`basis.n = 40`), every key optional.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::galerkin::{SolverChoice, SpecPolicy};
use crate::limits::{EnergyIntegral, SnuMethod};
use crate::mc::McConfig;
use crate::noise::{Model, NoiseParams};
use crate::potential::PeriodicPotential;
use crate::sparse::GmresOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    pub model: Model,
    pub gamma: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub potential: PotentialConfig,
    pub basis: BasisConfig,
    pub solver: SolverConfig,
    pub limits: LimitsConfig,
    pub grid: GridConfig,
    pub mc: McSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: None,
            model: Model::GL1,
            gamma: 1.0,
            nu: 1.0,
            alpha: 1.0,
            beta: 1.0,
            seed: 42,
            out: None,
            threads: None,
            potential: PotentialConfig::default(),
            basis: BasisConfig::default(),
            solver: SolverConfig::default(),
            limits: LimitsConfig::default(),
            grid: GridConfig::default(),
            mc: McSection::default(),
        }
    }
}

/// Fourier coefficients: `V = Σ cos[k] cos(kq) + Σ sin[k-1] sin(kq)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { cos: vec![0.5, -0.5], sin: vec![] }
    }
}

/// Unset fields fall back to the reference settings of the model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_inv_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_z: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_inv_sq_z: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: SolverChoice,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let g = GmresOptions::default();
        Self { method: SolverChoice::Auto, gmres_tol: g.tol, gmres_restart: g.restart, gmres_max_iter: g.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    pub e_max: f64,
    pub rel_tol: f64,
    pub panels: usize,
    pub method: SnuMethod,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        let e = EnergyIntegral::default();
        Self { e_max: e.e_max, rel_tol: e.rel_tol, panels: e.panels, method: e.method }
    }
}

/// Parameter grids, written `lo:hi:n`. `gamma_log`, `nu_log` and `log` are in log₁₀
/// units. `regime` is a regime label, `all`, or `grid` (the `gamma_log × nu_log` grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub gamma_log: String,
    pub nu: String,
    pub nu_log: String,
    pub log: String,
    pub regime: String,
    pub k: f64,
    pub steps: usize,
    pub tmax: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            gamma_log: "-2:2:9".into(),
            nu: "0.05:1.0:40".into(),
            nu_log: "-2:2:5".into(),
            log: "-2:2:5".into(),
            regime: "all".into(),
            k: 1.0,
            steps: 4,
            tmax: 10.0,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub paths: usize,
    pub burn_in: f64,
    pub batches: usize,
    /// Extra step sizes for the time-step extrapolation; empty disables it.
    pub dts: Vec<f64>,
}

impl Default for McSection {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 1000.0, paths: 10_000, burn_in: 0.0, batches: 20, dts: vec![] }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })
}

pub fn serialize_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config { line: 0, message: e.to_string() })
}

/// `lo:hi:n` → `n` equally spaced values (`n = 1` gives `[lo]`).
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let bad = || invalid(format!("range {s:?} is not of the form lo:hi:n"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    Ok((0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
}

pub fn parse_log_range(s: &str) -> Result<Vec<f64>> {
    Ok(parse_range(s)?.into_iter().map(|e| 10f64.powf(e)).collect())
}

impl RunConfig {
    pub fn noise_params(&self) -> Result<NoiseParams> {
        NoiseParams::new(self.model, self.gamma, self.nu, self.alpha, self.beta)
    }

    pub fn potential(&self) -> Result<PeriodicPotential> {
        PeriodicPotential::new(self.potential.cos.clone(), self.potential.sin.clone())
    }

    pub fn gmres(&self) -> GmresOptions {
        GmresOptions {
            tol: self.solver.gmres_tol,
            restart: self.solver.gmres_restart,
            max_iter: self.solver.gmres_max_iter,
        }
    }

    pub fn spec_policy(&self) -> SpecPolicy {
        SpecPolicy {
            n: self.basis.n,
            sigma_inv_sq: self.basis.sigma_inv_sq,
            n_z: self.basis.n_z,
            sigma_inv_sq_z: self.basis.sigma_inv_sq_z,
            solver: self.solver.method,
            gmres: self.gmres(),
        }
    }

    pub fn energy_integral(&self) -> EnergyIntegral {
        EnergyIntegral {
            e_max: self.limits.e_max,
            rel_tol: self.limits.rel_tol,
            panels: self.limits.panels,
            method: self.limits.method,
        }
    }

    pub fn mc_config(&self) -> Result<McConfig> {
        let mut c = McConfig::new(
            self.noise_params()?,
            self.potential()?,
            self.mc.dt,
            self.mc.t_final,
            self.mc.paths,
            self.seed,
        );
        c.burn_in = self.mc.burn_in;
        c.batches = self.mc.batches;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("gamma = 2\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
        let e = parse_config("model = \"GL1\"\nnu = \"x\"\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }
}
