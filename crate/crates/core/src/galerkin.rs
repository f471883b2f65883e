//! Saddle-point Galerkin solver for the Poisson equation `−𝓛φ = p`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{
    fourier_operator_matrices, hermite_derivative, hermite_position, hermite_weighted_gradient,
    hermite_weighted_laplacian, Axis, AxisKind, BandedOperator1D, TensorBasisSpec,
};
use crate::error::{Error, Result};
use crate::noise::{embed, Model, NoiseParams};
use crate::potential::PeriodicPotential;
use crate::sparse::{dot, gmres, lu_solve, norm2, CsrMatrix, GmresOptions};

/// Galerkin matrix of the flat generator, split into antisymmetric and symmetric parts.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub params: NoiseParams,
    pub spec: TensorBasisSpec,
    pub potential: PeriodicPotential,
    /// Hamiltonian transport plus noise coupling (antisymmetric).
    pub anti: CsrMatrix,
    /// Dissipative part (symmetric, nonpositive).
    pub sym: CsrMatrix,
    /// `anti + sym`.
    pub full: CsrMatrix,
    /// Symmetric friction matrix acting on the dissipative axes, with the axis indices.
    dissipation: Vec<(usize, usize, f64)>,
}

struct KronTerm<'a> {
    coeff: f64,
    factors: Vec<(usize, &'a BandedOperator1D)>,
}

fn kron_triplets(spec: &TensorBasisSpec, term: &KronTerm<'_>, out: &mut Vec<(usize, usize, f64)>) {
    let mut cur = vec![(0usize, 0usize, term.coeff)];
    for (axis, ax) in spec.axes().iter().enumerate() {
        let n = ax.size;
        let factor = term.factors.iter().find(|(a, _)| *a == axis).map(|(_, f)| *f);
        let mut next = Vec::with_capacity(cur.len() * n * 3);
        match factor {
            None => {
                for &(r, c, v) in &cur {
                    for i in 0..n {
                        next.push((r * n + i, c * n + i, v));
                    }
                }
            }
            Some(f) => {
                let nz: Vec<_> = f.nonzeros().collect();
                for &(r, c, v) in &cur {
                    for &(i, j, w) in &nz {
                        next.push((r * n + i, c * n + j, v * w));
                    }
                }
            }
        }
        cur = next;
    }
    out.extend(cur);
}

fn check_layout(params: &NoiseParams, spec: &TensorBasisSpec) -> Result<()> {
    let want = 2 + params.model.aux_dim();
    if spec.ndim() != want {
        return Err(Error::DimensionMismatch(format!(
            "model {} needs {want} axes, basis has {}",
            params.model,
            spec.ndim()
        )));
    }
    if spec.axes()[0].kind != AxisKind::Fourier {
        return Err(Error::DimensionMismatch("axis 0 must be the Fourier (q) axis".into()));
    }
    if spec.axes()[1..].iter().any(|a| !matches!(a.kind, AxisKind::Hermite { .. })) {
        return Err(Error::DimensionMismatch("axes 1.. must be Hermite axes".into()));
    }
    if (spec.beta() - params.beta).abs() > 1e-14 * params.beta {
        return Err(Error::DimensionMismatch("basis and noise use different beta".into()));
    }
    Ok(())
}

fn sigma_of(spec: &TensorBasisSpec, axis: usize) -> f64 {
    match spec.axes()[axis].kind {
        AxisKind::Hermite { sigma } => sigma,
        AxisKind::Fourier => unreachable!("checked by check_layout"),
    }
}

struct AxisOps {
    position: BandedOperator1D,
    derivative: BandedOperator1D,
    gradient: BandedOperator1D,
    laplacian: BandedOperator1D,
}

impl GeneratorMatrix {
    pub fn assemble(params: &NoiseParams, pot: &PeriodicPotential, spec: &TensorBasisSpec) -> Result<Self> {
        params.validate()?;
        check_layout(params, spec)?;
        let beta = params.beta;
        let sizes = spec.sizes();
        let fo = fourier_operator_matrices(sizes[0], pot);
        let ops: Vec<Option<AxisOps>> = (0..spec.ndim())
            .map(|a| {
                (a > 0).then(|| {
                    let (n, s) = (sizes[a], sigma_of(spec, a));
                    AxisOps {
                        position: hermite_position(n, s),
                        derivative: hermite_derivative(n, s),
                        gradient: hermite_weighted_gradient(n, s, beta),
                        laplacian: hermite_weighted_laplacian(n, s, beta),
                    }
                })
            })
            .collect();
        let op = |a: usize| ops[a].as_ref().expect("Hermite axis");

        let mut anti_terms = vec![
            KronTerm { coeff: 1.0, factors: vec![(0, &fo.d_q), (1, &op(1).position)] },
            KronTerm { coeff: -1.0, factors: vec![(0, &fo.m_vprime), (1, &op(1).derivative)] },
        ];
        let mut sym_terms = Vec::new();
        let mut dissipation = Vec::new();
        let transposed: Vec<Option<BandedOperator1D>> =
            ops.iter().map(|o| o.as_ref().map(|o| o.gradient.transpose())).collect();

        match params.model {
            Model::L => {
                let c = params.gamma / beta;
                sym_terms.push(KronTerm { coeff: -c, factors: vec![(1, &op(1).laplacian)] });
                dissipation.push((1, 1, c));
            }
            Model::GL1 | Model::GL2 => {
                let emb = embed(params)?;
                let n = emb.dim();
                let (a_s, a_a) = (emb.a_sym(), emb.a_anti());
                for k in 0..n {
                    let lk = emb.lambda[k];
                    if lk != 0.0 {
                        let zk = 2 + k;
                        anti_terms.push(KronTerm {
                            coeff: lk,
                            factors: vec![(1, &op(1).derivative), (zk, &op(zk).position)],
                        });
                        anti_terms.push(KronTerm {
                            coeff: -lk,
                            factors: vec![(1, &op(1).position), (zk, &op(zk).derivative)],
                        });
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        let (zi, zj) = (2 + i, 2 + j);
                        if i != j && a_a[(i, j)] != 0.0 {
                            anti_terms.push(KronTerm {
                                coeff: a_a[(i, j)],
                                factors: vec![(zi, &op(zi).position), (zj, &op(zj).derivative)],
                            });
                        }
                        let s = a_s[(i, j)];
                        if s == 0.0 {
                            continue;
                        }
                        dissipation.push((zi, zj, s / beta));
                        if i == j {
                            sym_terms.push(KronTerm { coeff: -s / beta, factors: vec![(zi, &op(zi).laplacian)] });
                        } else {
                            sym_terms.push(KronTerm {
                                coeff: -s / beta,
                                factors: vec![
                                    (zi, transposed[zi].as_ref().expect("Hermite axis")),
                                    (zj, &op(zj).gradient),
                                ],
                            });
                        }
                    }
                }
            }
        }

        let m = spec.len();
        let build = |terms: &[KronTerm<'_>]| {
            let mut t = Vec::new();
            for term in terms {
                kron_triplets(spec, term, &mut t);
            }
            CsrMatrix::from_triplets(m, m, t)
        };
        let mut anti = build(&anti_terms);
        let mut sym = build(&sym_terms);
        // cancellations between terms leave round-off entries that would hide the
        // true sparsity pattern
        let scale = anti.max_abs().max(sym.max_abs());
        anti.drop_small(1e-14 * scale);
        sym.drop_small(1e-14 * scale);
        let mut full = anti.linear_combination(1.0, &sym, 1.0);
        full.drop_small(1e-14 * scale);
        Ok(Self { params: *params, spec: spec.clone(), potential: pot.clone(), anti, sym, full, dissipation })
    }

    pub fn dim(&self) -> usize {
        self.spec.len()
    }

    /// `β⁻¹ Σ_ij (A_s)_ij ⟨a_i v, a_j w⟩` evaluated axis by axis with padded outputs.
    ///
    /// Equals `−vᵀ 𝓛_sym w` but never touches the assembled matrix.
    pub fn dissipation_form(&self, v: &[f64], w: &[f64]) -> f64 {
        let sizes = self.spec.sizes();
        let beta = self.params.beta;
        let mut acc = 0.0;
        for &(i, j, c) in &self.dissipation {
            let mut padded = sizes.clone();
            padded[i] += 1;
            if j != i {
                padded[j] += 1;
            }
            let vp = pad(v, &sizes, &padded);
            let wp = pad(w, &sizes, &padded);
            let gi = hermite_weighted_gradient(padded[i], sigma_of(&self.spec, i), beta);
            let gj = hermite_weighted_gradient(padded[j], sigma_of(&self.spec, j), beta);
            let av = apply_axis(&vp, &padded, i, &gi);
            let aw = apply_axis(&wp, &padded, j, &gj);
            acc += c * dot(&av, &aw);
        }
        acc
    }
}

/// Zero-pad a tensor from `shape` to the elementwise-larger `new_shape`.
pub fn pad(v: &[f64], shape: &[usize], new_shape: &[usize]) -> Vec<f64> {
    let total: usize = new_shape.iter().product();
    let mut out = vec![0.0; total];
    let mut idx = vec![0usize; shape.len()];
    for &x in v {
        let mut flat = 0;
        for (k, &i) in idx.iter().enumerate() {
            flat = flat * new_shape[k] + i;
        }
        out[flat] = x;
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Apply a 1D operator along `axis` of a row-major tensor.
pub fn apply_axis(v: &[f64], shape: &[usize], axis: usize, op: &BandedOperator1D) -> Vec<f64> {
    let n = shape[axis];
    assert_eq!(op.size(), n);
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; v.len()];
    let nz: Vec<_> = op.nonzeros().collect();
    for o in 0..outer {
        let base = o * n * inner;
        for &(i, j, w) in &nz {
            let (ri, rj) = (base + i * inner, base + j * inner);
            for t in 0..inner {
                out[ri + t] += w * v[rj + t];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolverMethod {
    Direct,
    Gmres(GmresOptions),
}

impl SolverMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SolverMethod::Direct => "direct",
            SolverMethod::Gmres(_) => "gmres",
        }
    }

    pub fn tol(&self) -> Option<f64> {
        match self {
            SolverMethod::Direct => None,
            SolverMethod::Gmres(o) => Some(o.tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub phi: Vec<f64>,
    /// Lagrange multiplier; ≈ 0 because `p` has zero mean.
    pub alpha: f64,
    pub method: SolverMethod,
    pub iterations: usize,
    /// Relative residual of the bordered system.
    pub residual_norm: f64,
    /// `Π_N 1 / ‖Π_N 1‖`.
    pub u: Vec<f64>,
    /// `Π_N p`.
    pub rhs: Vec<f64>,
}

impl SaddleSolution {
    /// `⟨Φ_N, u_N⟩`.
    pub fn constraint(&self) -> f64 {
        dot(&self.phi, &self.u)
    }
}

fn bordered_apply(gen: &GeneratorMatrix, u: &[f64], x: &[f64], y: &mut [f64]) {
    let m = gen.dim();
    gen.full.matvec_into(&x[..m], &mut y[..m]);
    let alpha = x[m];
    for i in 0..m {
        y[i] = -y[i] + alpha * u[i];
    }
    y[m] = dot(u, &x[..m]);
}

/// Solve `[[−L, u], [uᵀ, 0]] [Φ; α] = [Π_N p; 0]`.
pub fn solve_saddle(gen: &GeneratorMatrix, method: SolverMethod) -> Result<SaddleSolution> {
    let m = gen.dim();
    let one = gen.spec.project_one(&gen.potential);
    let nrm = norm2(&one);
    let u: Vec<f64> = one.iter().map(|x| x / nrm).collect();
    let rhs = gen.spec.project_coordinate(1, &gen.potential)?;
    let mut b = rhs.clone();
    b.push(0.0);

    let (x, iterations) = match method {
        SolverMethod::Direct => {
            let mut t: Vec<(usize, usize, f64)> = gen.full.triplets().map(|(r, c, v)| (r, c, -v)).collect();
            for (i, &ui) in u.iter().enumerate() {
                if ui != 0.0 {
                    t.push((i, m, ui));
                    t.push((m, i, ui));
                }
            }
            // Basis functions with no coupling at all (e.g. the unpaired top sine mode
            // times the ground state when V is constant) make the truncated system
            // singular; their coefficients are pinned to zero.
            let (rows, cols) = gen.full.row_col_counts();
            for i in 0..m {
                if rows[i] == 0 && cols[i] == 0 && u[i].abs() < 1e-14 {
                    if b[i] != 0.0 {
                        return Err(Error::Singular(format!("decoupled basis function {i} carries source")));
                    }
                    t.push((i, i, 1.0));
                }
            }
            let big = CsrMatrix::from_triplets(m + 1, m + 1, t);
            (lu_solve(&big, &b)?, 1)
        }
        SolverMethod::Gmres(opts) => {
            let out = gmres(|x, y| bordered_apply(gen, &u, x, y), &b, &opts);
            if !out.converged {
                return Err(Error::NoConvergence { iterations: out.iterations, residual: out.rel_residual });
            }
            (out.x, out.iterations)
        }
    };
    let mut r = vec![0.0; m + 1];
    bordered_apply(gen, &u, &x, &mut r);
    r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri -= bi);
    let residual_norm = norm2(&r) / norm2(&b).max(f64::MIN_POSITIVE);
    let alpha = x[m];
    let mut phi = x;
    phi.truncate(m);
    Ok(SaddleSolution { phi, alpha, method, iterations, residual_norm, u, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionEstimate {
    pub params: NoiseParams,
    pub sizes: Vec<usize>,
    /// `⟨Φ_N, Π_N p⟩`.
    pub d: f64,
    /// Dissipation (gradient) form of the same quantity.
    pub d_grad: f64,
    /// `|D(N) − D(N/2)|`; `NaN` unless requested.
    pub err_est: f64,
    pub alpha: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl DiffusionEstimate {
    /// Relative half-resolution error above 1%.
    pub fn inaccurate(&self) -> bool {
        !(self.err_est / self.d.abs() <= 0.01)
    }
}

/// `D` and `D_grad` from a solved system (no error estimate).
pub fn diffusion_from_solution(sol: &SaddleSolution, gen: &GeneratorMatrix) -> DiffusionEstimate {
    DiffusionEstimate {
        params: gen.params,
        sizes: gen.spec.sizes(),
        d: dot(&sol.phi, &sol.rhs),
        d_grad: gen.dissipation_form(&sol.phi, &sol.phi),
        err_est: f64::NAN,
        alpha: sol.alpha,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
    }
}

/// `D`, `D_grad`, and the half-resolution error estimate (re-solved at `max(N/2, 4)`).
pub fn diffusion_estimate(sol: &SaddleSolution, gen: &GeneratorMatrix) -> Result<DiffusionEstimate> {
    let mut est = diffusion_from_solution(sol, gen);
    let half = gen.spec.halved();
    let g2 = GeneratorMatrix::assemble(&gen.params, &gen.potential, &half)?;
    let s2 = solve_saddle(&g2, sol.method)?;
    est.err_est = (est.d - dot(&s2.phi, &s2.rhs)).abs();
    Ok(est)
}

/// Assemble, solve and estimate in one call.
pub fn compute_diffusion(
    params: &NoiseParams,
    pot: &PeriodicPotential,
    spec: &TensorBasisSpec,
    method: SolverMethod,
    with_error_estimate: bool,
) -> Result<DiffusionEstimate> {
    let gen = GeneratorMatrix::assemble(params, pot, spec)?;
    let sol = solve_saddle(&gen, method)?;
    if with_error_estimate {
        diffusion_estimate(&sol, &gen)
    } else {
        Ok(diffusion_from_solution(&sol, &gen))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Direct when `γ > 1`, GMRES otherwise.
    Auto,
    Direct,
    Gmres,
}

/// Reference settings `(N, σ⁻², method)` per model and friction regime.
pub fn reference_settings(model: Model, gamma: f64, gmres: GmresOptions) -> (usize, f64, SolverMethod) {
    let high = gamma > 1.0;
    match (model, high) {
        (Model::L, _) => (250, 16.0, SolverMethod::Direct),
        (Model::GL1, true) => (40, 3.0, SolverMethod::Direct),
        (Model::GL1, false) => (100, 9.0, SolverMethod::Gmres(gmres)),
        (Model::GL2, true) => (16, 2.0, SolverMethod::Direct),
        (Model::GL2, false) => (40, 6.0, SolverMethod::Gmres(gmres)),
    }
}

/// How each sweep point picks its basis and solver; `None` fields fall back to
/// [`reference_settings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecPolicy {
    pub n: Option<usize>,
    pub sigma_inv_sq: Option<f64>,
    pub n_z: Option<usize>,
    pub sigma_inv_sq_z: Option<f64>,
    pub solver: SolverChoice,
    pub gmres: GmresOptions,
}

impl Default for SpecPolicy {
    fn default() -> Self {
        Self {
            n: None,
            sigma_inv_sq: None,
            n_z: None,
            sigma_inv_sq_z: None,
            solver: SolverChoice::Auto,
            gmres: GmresOptions::default(),
        }
    }
}

impl SpecPolicy {
    pub fn resolve(&self, params: &NoiseParams) -> (BasisChoice, SolverMethod) {
        let (n0, s0, m0) = reference_settings(params.model, params.gamma, self.gmres);
        let method = match self.solver {
            SolverChoice::Auto => m0,
            SolverChoice::Direct => SolverMethod::Direct,
            SolverChoice::Gmres => SolverMethod::Gmres(self.gmres),
        };
        let basis = BasisChoice {
            n: self.n.unwrap_or(n0),
            sigma_inv_sq: self.sigma_inv_sq.unwrap_or(s0),
            n_z: self.n_z,
            sigma_inv_sq_z: self.sigma_inv_sq_z,
        };
        (basis, method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: NoiseParams,
    pub n: usize,
    pub sigma_inv_sq: f64,
    pub method: SolverMethod,
    pub result: std::result::Result<DiffusionEstimate, String>,
    pub runtime_s: f64,
}

pub const SWEEP_HEADER: &str =
    "model,gamma,nu,alpha,beta,N,sigma_inv_sq,solver,tol,iterations,D,D_grad,err_est,inaccurate,runtime_s,error";

impl SweepRow {
    pub fn inaccurate(&self) -> bool {
        self.result.as_ref().map_or(true, |e| e.inaccurate())
    }

    pub fn csv_line(&self) -> String {
        let p = &self.params;
        let tol = self.method.tol().map_or(String::new(), |t| format!("{t:e}"));
        let (it, d, dg, err, msg) = match &self.result {
            Ok(e) => (e.iterations.to_string(), fmt(e.d), fmt(e.d_grad), fmt(e.err_est), String::new()),
            Err(m) => (String::new(), String::new(), String::new(), String::new(), m.replace([',', '\n'], ";")),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
            p.model,
            fmt(p.gamma),
            fmt(p.nu),
            fmt(p.alpha),
            fmt(p.beta),
            self.n,
            fmt(self.sigma_inv_sq),
            self.method.name(),
            tol,
            it,
            d,
            dg,
            err,
            self.inaccurate(),
            self.runtime_s,
            msg
        )
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// Truncation order and Hermite scales of the standard basis.
///
/// Order `N` means trigonometric functions up to frequency `⌊N/2⌋` (an odd count
/// `2⌊N/2⌋ + 1`) and Hermite functions of degree `0..=N`. The auxiliary axes default to
/// the momentum settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisChoice {
    pub n: usize,
    pub sigma_inv_sq: f64,
    pub n_z: Option<usize>,
    pub sigma_inv_sq_z: Option<f64>,
}

impl BasisChoice {
    pub fn uniform(n: usize, sigma_inv_sq: f64) -> Self {
        Self { n, sigma_inv_sq, n_z: None, sigma_inv_sq_z: None }
    }

    pub fn spec(&self, model: Model, beta: f64) -> Result<TensorBasisSpec> {
        if !(self.sigma_inv_sq > 0.0) || self.sigma_inv_sq_z.is_some_and(|s| !(s > 0.0)) {
            return Err(crate::error::invalid("sigma_inv_sq must be positive"));
        }
        let nz = self.n_z.unwrap_or(self.n);
        let sz = self.sigma_inv_sq_z.unwrap_or(self.sigma_inv_sq);
        let mut axes = vec![
            Axis { kind: AxisKind::Fourier, size: 2 * (self.n / 2) + 1 },
            Axis { kind: AxisKind::Hermite { sigma: self.sigma_inv_sq.powf(-0.5) }, size: self.n + 1 },
        ];
        for _ in 0..model.aux_dim() {
            axes.push(Axis { kind: AxisKind::Hermite { sigma: sz.powf(-0.5) }, size: nz + 1 });
        }
        TensorBasisSpec::new(axes, beta)
    }
}

/// [`BasisChoice::uniform`] turned into a spec.
pub fn standard_spec(model: Model, n: usize, sigma_inv_sq: f64, beta: f64) -> Result<TensorBasisSpec> {
    BasisChoice::uniform(n, sigma_inv_sq).spec(model, beta)
}

/// Solve every grid point independently; failures are recorded in the row.
pub fn sweep(grid: &[NoiseParams], pot: &PeriodicPotential, policy: &SpecPolicy) -> Vec<SweepRow> {
    grid.par_iter()
        .map(|params| {
            let (basis, method) = policy.resolve(params);
            let (n, s2) = (basis.n, basis.sigma_inv_sq);
            let t0 = Instant::now();
            let result = basis
                .spec(params.model, params.beta)
                .and_then(|spec| compute_diffusion(params, pot, &spec, method, true))
                .map_err(|e| e.to_string());
            SweepRow { params: *params, n, sigma_inv_sq: s2, method, result, runtime_s: t0.elapsed().as_secs_f64() }
        })
        .collect()
}
