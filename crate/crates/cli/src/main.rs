use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gle_core::config::{parse_log_range, parse_range, serialize_config};
use gle_core::galerkin::{sweep, SolverChoice, SweepRow, SWEEP_HEADER};
use gle_core::hypocoercivity::{log_grid, verify_bound_gl1, SearchSpace};
use gle_core::limits::{gle_underdamped_diffusion, langevin_underdamped_diffusion};
use gle_core::mc::{dt_extrapolate, simulate, McResult};
use gle_core::noise::kernel_eval;
use gle_core::ou_spectrum::{classify, drift_matrix, regime_sequence, spectral_abscissa, Regime};
use gle_core::{parse_config, Error, Model, NoiseParams, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "gle", version, about = "Effective diffusion of (generalized) Langevin dynamics in periodic potentials")]
struct Cli {
    /// TOML configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "GLE_THREADS")]
    threads: Option<usize>,
    /// Omit the timestamp comment line so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// L, GL1 or GL2.
    #[arg(long, global = true)]
    model: Option<Model>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV (stdout when absent).
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct BasisArgs {
    /// Truncation order (Fourier frequencies up to N/2, Hermite degrees up to N).
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    sigma_inv_sq: Option<f64>,
    /// Truncation order of the auxiliary axes.
    #[arg(long)]
    n_z: Option<usize>,
    #[arg(long)]
    sigma_inv_sq_z: Option<f64>,
    /// auto, direct or gmres.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    gmres_tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Memory kernel on a time grid.
    Kernel {
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Physical time and kernel instead of the ν-rescaled shape.
        #[arg(long)]
        raw: bool,
    },
    /// Spectral diffusion coefficient at one parameter point.
    Diffusion {
        #[command(flatten)]
        basis: BasisArgs,
    },
    /// Diffusion coefficient over a log-spaced friction grid.
    SweepGamma {
        #[command(flatten)]
        basis: BasisArgs,
        /// log10 range lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        gamma_grid: Option<String>,
    },
    /// Diffusion coefficient over a ν grid.
    SweepNu {
        #[command(flatten)]
        basis: BasisArgs,
        /// Linear range lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        nu_grid: Option<String>,
    },
    /// Underdamped limits D*_ν and D_und.
    Underdamped {
        #[arg(long, allow_hyphen_values = true)]
        nu_grid: Option<String>,
        #[arg(long)]
        e_max: Option<f64>,
        #[arg(long)]
        panels: Option<usize>,
    },
    /// Spectral abscissa of the quadratic-potential drift against the regime formulas.
    Spectrum {
        #[arg(long)]
        k: Option<f64>,
        /// Regime label (i..viii), `all`, or `grid` for the gamma × nu grid.
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        /// log10 range lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        gamma_grid: Option<String>,
        /// log10 range lo:hi:n.
        #[arg(long, allow_hyphen_values = true)]
        nu_grid: Option<String>,
    },
    /// Search a hypocoercivity certificate over a log grid of (gamma, nu).
    HypoCheck {
        /// log10 range lo:hi:n used on both axes.
        #[arg(long, allow_hyphen_values = true)]
        grid_log: Option<String>,
    },
    /// Monte Carlo estimate of D.
    Mc {
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long)]
        batches: Option<usize>,
        /// Comma-separated step sizes for time-step extrapolation.
        #[arg(long, value_delimiter = ',')]
        dts: Option<Vec<f64>>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::Config { .. } | Error::NotNormalized { .. } | Error::DimensionMismatch(_) => 2,
            _ => 3,
        };
        Self { code, message: e.to_string() }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl CommonArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.model, self.model);
        set(&mut c.gamma, self.gamma);
        set(&mut c.nu, self.nu);
        set(&mut c.alpha, self.alpha);
        set(&mut c.beta, self.beta);
        set(&mut c.seed, self.seed);
        if self.out.is_some() {
            c.out = self.out.clone();
        }
    }
}

impl BasisArgs {
    fn apply(&self, c: &mut RunConfig) -> Result<(), Failure> {
        if self.n.is_some() {
            c.basis.n = self.n;
        }
        if self.sigma_inv_sq.is_some() {
            c.basis.sigma_inv_sq = self.sigma_inv_sq;
        }
        if self.n_z.is_some() {
            c.basis.n_z = self.n_z;
        }
        if self.sigma_inv_sq_z.is_some() {
            c.basis.sigma_inv_sq_z = self.sigma_inv_sq_z;
        }
        if let Some(s) = &self.solver {
            c.solver.method = match s.as_str() {
                "auto" => SolverChoice::Auto,
                "direct" => SolverChoice::Direct,
                "gmres" => SolverChoice::Gmres,
                other => return Err(Failure::config(format!("unknown solver {other:?} (auto, direct, gmres)"))),
            };
        }
        set(&mut c.solver.gmres_tol, self.gmres_tol);
        Ok(())
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Kernel { .. } => "kernel",
            Command::Diffusion { .. } => "diffusion",
            Command::SweepGamma { .. } => "sweep-gamma",
            Command::SweepNu { .. } => "sweep-nu",
            Command::Underdamped { .. } => "underdamped",
            Command::Spectrum { .. } => "spectrum",
            Command::HypoCheck { .. } => "hypo-check",
            Command::Mc { .. } => "mc",
        }
    }

    fn apply(&self, c: &mut RunConfig) -> Result<(), Failure> {
        c.subcommand = Some(self.name().to_string());
        match self {
            Command::Kernel { tmax, points, .. } => {
                set(&mut c.grid.tmax, *tmax);
                set(&mut c.grid.points, *points);
            }
            Command::Diffusion { basis } => basis.apply(c)?,
            Command::SweepGamma { basis, gamma_grid } => {
                basis.apply(c)?;
                set(&mut c.grid.gamma_log, gamma_grid.clone());
            }
            Command::SweepNu { basis, nu_grid } => {
                basis.apply(c)?;
                set(&mut c.grid.nu, nu_grid.clone());
            }
            Command::Underdamped { nu_grid, e_max, panels } => {
                set(&mut c.grid.nu, nu_grid.clone());
                set(&mut c.limits.e_max, *e_max);
                set(&mut c.limits.panels, *panels);
            }
            Command::Spectrum { k, regime, steps, gamma_grid, nu_grid } => {
                set(&mut c.grid.k, *k);
                set(&mut c.grid.regime, regime.clone());
                set(&mut c.grid.steps, *steps);
                set(&mut c.grid.gamma_log, gamma_grid.clone());
                set(&mut c.grid.nu_log, nu_grid.clone());
            }
            Command::HypoCheck { grid_log } => set(&mut c.grid.log, grid_log.clone()),
            Command::Mc { dt, t_final, paths, burn_in, batches, dts } => {
                set(&mut c.mc.dt, *dt);
                set(&mut c.mc.t_final, *t_final);
                set(&mut c.mc.paths, *paths);
                set(&mut c.mc.burn_in, *burn_in);
                set(&mut c.mc.batches, *batches);
                set(&mut c.mc.dts, dts.clone());
            }
        }
        Ok(())
    }
}

fn kernel_csv(c: &RunConfig, raw: bool) -> Result<String, Failure> {
    let params = c.noise_params()?;
    if params.model == Model::L {
        return Err(Failure::config("the Langevin model has a Dirac kernel; choose GL1 or GL2"));
    }
    if c.grid.points < 2 || !(c.grid.tmax > 0.0) {
        return Err(Failure::config("kernel grid needs tmax > 0 and at least 2 points"));
    }
    let nu2 = params.nu * params.nu;
    let mut out = String::from("t,gamma_t\n");
    for i in 0..c.grid.points {
        let s = c.grid.tmax * i as f64 / (c.grid.points - 1) as f64;
        let (t, k) = if raw {
            (s, kernel_eval(&params, s)?)
        } else {
            (s, nu2 / params.gamma * kernel_eval(&params, nu2 * s)?)
        };
        out.push_str(&format!("{t},{k}\n"));
    }
    Ok(out)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

fn diffusion_csv(c: &RunConfig, grid: Vec<NoiseParams>, single: bool) -> Result<String, Failure> {
    let pot = c.potential()?;
    let rows = sweep(&grid, &pot, &c.spec_policy());
    if single {
        if let Some(Err(msg)) = rows.first().map(|r| &r.result) {
            return Err(Failure { code: 3, message: msg.clone() });
        }
    }
    Ok(sweep_csv(&rows))
}

fn underdamped_csv(c: &RunConfig) -> Result<String, Failure> {
    let pot = c.potential()?;
    let opts = c.energy_integral();
    let nus = parse_range(&c.grid.nu)?;
    let d_und = langevin_underdamped_diffusion(&pot, c.beta, &opts)?;
    let d_star: Vec<f64> = nus
        .par_iter()
        .map(|&nu| gle_underdamped_diffusion(&pot, c.beta, nu, &opts))
        .collect::<gle_core::Result<_>>()?;
    let mut out = String::from("nu,D_star,D_und,abs_diff\n");
    for (nu, d) in nus.iter().zip(d_star) {
        out.push_str(&format!("{nu},{d},{d_und},{}\n", (d - d_und).abs()));
    }
    Ok(out)
}

fn spectrum_csv(c: &RunConfig) -> Result<String, Failure> {
    let k = c.grid.k;
    let mut out = String::from("k,gamma,nu,abscissa,regime,predicted,ratio\n");
    let mut row = |g: f64, n: f64, a: f64, r: Regime, p: f64| out.push_str(&format!("{k},{g},{n},{a},{},{p},{}\n", r.label(), a / p));
    match c.grid.regime.as_str() {
        "grid" => {
            for g in parse_log_range(&c.grid.gamma_log)? {
                for n in parse_log_range(&c.grid.nu_log)? {
                    let a = spectral_abscissa(&drift_matrix(Model::GL1, k, g, n, 1.0)?)?;
                    let r = classify(k, g, n);
                    row(g, n, a, r, r.predict(k, g, n));
                }
            }
        }
        label => {
            let regimes: Vec<Regime> =
                if label == "all" { Regime::ALL.to_vec() } else { vec![label.parse::<Regime>()?] };
            for r in regimes {
                for p in regime_sequence(r, k, c.grid.steps as u32)? {
                    row(p.gamma, p.nu, p.abscissa, r, p.predicted);
                }
            }
        }
    }
    Ok(out)
}

fn hypo_csv(c: &RunConfig) -> Result<String, Failure> {
    let pot = c.potential()?;
    let axis = parse_range(&c.grid.log)?;
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    let grid = log_grid(lo, hi, axis.len());
    let cert = verify_bound_gl1(&grid, &SearchSpace::default(), c.beta, pot.second_derivative_bound())?; // sup |V''| bound
    let f = cert.family;
    let mut out = String::from("A,eta,delta,rho,C_star,gamma,nu,lambda_min_plus,m\n");
    for p in &cert.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            f.a, f.eta, f.delta, f.rho, cert.c_star, p.gamma, p.nu, p.lambda_min_plus, p.m
        ));
    }
    Ok(out)
}

fn mc_csv(c: &RunConfig) -> Result<String, Failure> {
    let cfg = c.mc_config()?;
    let p = cfg.params;
    let mut out = String::from("model,gamma,nu,alpha,beta,dt,T,paths,seed,D_hat,std_err\n");
    let mut row = |dt: f64, r: (f64, f64)| {
        out.push_str(&format!(
            "{},{},{},{},{},{dt},{},{},{},{},{}\n",
            p.model, p.gamma, p.nu, p.alpha, p.beta, cfg.t_final, cfg.n_paths, cfg.seed, r.0, r.1
        ))
    };
    if c.mc.dts.is_empty() {
        let r: McResult = simulate(&cfg)?;
        row(r.dt_effective, (r.d_hat, r.std_err));
    } else {
        let ex = dt_extrapolate(&cfg, &c.mc.dts)?;
        for r in &ex.runs {
            row(r.dt_effective, (r.d_hat, r.std_err));
        }
        // dt = 0 marks the extrapolated value
        row(0.0, (ex.d_extrapolated, ex.std_err));
        if ex.bias_flag {
            eprintln!("warning: time-step bias {:e} exceeds twice the standard error", ex.bias);
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    cli.common.apply(&mut cfg);
    set(&mut cfg.threads, cli.threads.map(Some));
    cli.command.apply(&mut cfg)?;

    if cli.print_config {
        print!("{}", serialize_config(&cfg)?);
        return Ok(());
    }
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Failure::config("threads must be at least 1"));
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let start = Instant::now();
    let mut csv = match &cli.command {
        Command::Kernel { raw, .. } => kernel_csv(&cfg, *raw)?,
        Command::Diffusion { .. } => diffusion_csv(&cfg, vec![cfg.noise_params()?], true)?,
        Command::SweepGamma { .. } => {
            let grid = parse_log_range(&cfg.grid.gamma_log)?
                .into_iter()
                .map(|g| NoiseParams::new(cfg.model, g, cfg.nu, cfg.alpha, cfg.beta))
                .collect::<gle_core::Result<Vec<_>>>()?;
            diffusion_csv(&cfg, grid, false)?
        }
        Command::SweepNu { .. } => {
            let grid = parse_range(&cfg.grid.nu)?
                .into_iter()
                .map(|n| NoiseParams::new(cfg.model, cfg.gamma, n, cfg.alpha, cfg.beta))
                .collect::<gle_core::Result<Vec<_>>>()?;
            diffusion_csv(&cfg, grid, false)?
        }
        Command::Underdamped { .. } => underdamped_csv(&cfg)?,
        Command::Spectrum { .. } => spectrum_csv(&cfg)?,
        Command::HypoCheck { .. } => hypo_csv(&cfg)?,
        Command::Mc { .. } => mc_csv(&cfg)?,
    };
    if !cli.deterministic {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        csv.push_str(&format!("# generated_unix={now} runtime_s={:.3}\n", start.elapsed().as_secs_f64()));
    }
    match &cfg.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Failure { code: 3, message: format!("cannot write {path}: {e}") }),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
