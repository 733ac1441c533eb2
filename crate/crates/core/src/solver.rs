//! Proximal point solvers: serial (PPA), feature-split parallel (PPPA) and
//! the per-block-η variant (IPPPA).
//!
//! All three share one loop. Per iteration:
//!
//! ```text
//! β_i ← ST(β_i + A_iᵀu / η_i, τ_i)          (blocks in parallel)
//! z   ← clamp(z − u/μ, ±bound)
//! r   ← Σ_i A_i β_i − z − Xᵀy
//! u   ← u − μ/d · (2 r − r_prev)            d = 2, or K+1 for IPPPA
//! ```
//!
//! PPA is the single-block case and PPPA with `K = 1` performs exactly the
//! same floating-point operations.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, gram_blocks, map_indexed, norm2, norm_inf, GramBlocks, Partition};
use crate::problem::ProblemData;
use crate::prox::{clamp, shrink_scalar};

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_INIT: f64 = 0.001;
pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_MAX_ITER: usize = 2000;
/// Iterates whose ∞-norm exceeds this abort the solve.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ppa,
    Pppa,
    Ippa,
    Ladmm,
    Tadmm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ppa,
        Algorithm::Pppa,
        Algorithm::Ippa,
        Algorithm::Ladmm,
        Algorithm::Tadmm,
    ];

    /// Whether the linearization uses one η per block rather than a global one.
    pub fn per_block_eta(self) -> bool {
        matches!(self, Algorithm::Ippa | Algorithm::Tadmm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ppa => "ppa",
            Algorithm::Pppa => "pppa",
            Algorithm::Ippa => "ippa",
            Algorithm::Ladmm => "ladmm",
            Algorithm::Tadmm => "tadmm",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ppa" => Ok(Algorithm::Ppa),
            "pppa" => Ok(Algorithm::Pppa),
            "ippa" | "ipppa" => Ok(Algorithm::Ippa),
            "ladmm" => Ok(Algorithm::Ladmm),
            "tadmm" => Ok(Algorithm::Tadmm),
            other => Err(Error::arg(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// How the coefficient vector is split into column blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockSpec {
    /// `K` blocks of near-equal size.
    Even(usize),
    /// Explicit block sizes in order.
    Sizes(Vec<usize>),
}

impl BlockSpec {
    pub fn partition(&self, p: usize) -> Result<Partition> {
        match self {
            BlockSpec::Even(k) => Partition::even(p, *k),
            BlockSpec::Sizes(s) => {
                let part = Partition::from_sizes(s)?;
                if part.dim() != p {
                    return Err(Error::dim(format!(
                        "block sizes sum to {}, problem has p = {p}",
                        part.dim()
                    )));
                }
                Ok(part)
            }
        }
    }

    pub fn block_count(&self) -> usize {
        match self {
            BlockSpec::Even(k) => *k,
            BlockSpec::Sizes(s) => s.len(),
        }
    }
}

/// Per-coordinate objective weights and constraint bounds of a weighted solve.
///
/// With weights `w` the objective is `Σ w_j |β_j|` and the constraint is
/// `|Aβ − Xᵀy|_j ≤ bound_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub weight: Vec<f64>,
    pub bound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub mu: f64,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub blocks: BlockSpec,
    pub weights: Option<WeightSpec>,
    pub init_value: f64,
    /// Record full `(β, z, u)` snapshots for every iterate.
    pub diagnostics: bool,
    pub power_tol: f64,
    pub power_max_iter: usize,
    /// When set, stopping also requires `‖Aβ − z − Xᵀy‖∞ / n ≤ feas_tol`.
    /// Since `z` stays in the box this bounds the constraint violation.
    #[serde(default)]
    pub feas_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Ppa,
            mu: 1.0,
            lambda: 0.0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            blocks: BlockSpec::Even(1),
            weights: None,
            init_value: DEFAULT_INIT,
            diagnostics: false,
            power_tol: DEFAULT_POWER_TOL,
            power_max_iter: DEFAULT_POWER_MAX_ITER,
            feas_tol: None,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, lambda: f64) -> Self {
        SolverConfig {
            algorithm,
            lambda,
            ..Default::default()
        }
    }

    pub fn with_blocks(mut self, k: usize) -> Self {
        self.blocks = BlockSpec::Even(k);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::arg(format!("μ must be finite and > 0, got {}", self.mu)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::arg(format!(
                "λ must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::arg(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.feas_tol.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::arg("feasibility tolerance must be > 0"));
        }
        if !self.init_value.is_finite() {
            return Err(Error::arg("initial value must be finite"));
        }
        let k = self.blocks.block_count();
        if k == 0 {
            return Err(Error::arg("K must be >= 1"));
        }
        if matches!(self.algorithm, Algorithm::Ppa | Algorithm::Ladmm) && k != 1 {
            return Err(Error::arg(format!(
                "{} is a single-block algorithm, got K = {k}",
                self.algorithm
            )));
        }
        if let Some(w) = &self.weights {
            if w.weight.len() != p || w.bound.len() != p {
                return Err(Error::dim(format!(
                    "weights/bounds have lengths {}/{}, expected {p}",
                    w.weight.len(),
                    w.bound.len()
                )));
            }
            if w.weight
                .iter()
                .chain(&w.bound)
                .any(|v| !(*v >= 0.0) || !v.is_finite())
            {
                return Err(Error::arg("weights and bounds must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Whether the residual passes the optional feasibility gate.
    pub(crate) fn feasible_enough(&self, r: &[f64], n: usize) -> bool {
        self.feas_tol.is_none_or(|t| norm_inf(r) / n as f64 <= t)
    }

    /// Per-coordinate objective weights (all ones when unweighted).
    pub fn weight_vector(&self, p: usize) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.weight.clone(),
            None => vec![1.0; p],
        }
    }

    /// Per-coordinate box bounds on `z` (`nλ` when unweighted).
    pub fn bound_vector(&self, n: usize, p: usize) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.bound.clone(),
            None => vec![n as f64 * self.lambda; p],
        }
    }
}

/// The primal-dual triple `g = (β, z, u)` and the residual `r = Aβ − z − Xᵀy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub beta: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub iter: usize,
}

impl SolverState {
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            beta: self.beta.clone(),
            z: self.z.clone(),
            u: self.u.clone(),
        }
    }
}

/// One recorded iterate `(β, z, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub beta: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

impl Snapshot {
    /// `(β, z, u)` stacked into one vector.
    pub fn stacked(&self) -> Vec<f64> {
        [self.beta.as_slice(), &self.z, &self.u].concat()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    TolReached,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// `‖β^{t+1} − β^t‖₂ / max(‖β^{t+1}‖₂, 1)`.
    pub rel_change: f64,
    /// `‖Aβ − z − Xᵀy‖∞` after the iteration.
    pub residual_inf: f64,
}

/// Linearization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Eta {
    Global(f64),
    PerBlock(Vec<f64>),
}

impl Eta {
    /// η for block `i`.
    pub fn block(&self, i: usize) -> f64 {
        match self {
            Eta::Global(e) => *e,
            Eta::PerBlock(v) => v[i],
        }
    }
}

/// Number of auxiliary reals carried between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMemory {
    pub dual_values: usize,
    pub slack_values: usize,
}

impl StateMemory {
    pub fn total(&self) -> usize {
        self.dual_values + self.slack_values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub mu: f64,
    pub k: usize,
    pub block_sizes: Vec<usize>,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
    /// `iterations + 1` entries starting with the initial point; present only
    /// when diagnostics are on.
    pub snapshots: Option<Vec<Snapshot>>,
    pub final_state: SolverState,
    pub eta: Eta,
    pub state_memory: StateMemory,
    pub wall_time_s: f64,
    pub precompute_time_s: f64,
}

/// Gram blocks and linearization constants that can be reused across solves
/// with the same `μ` and partition (LLA passes, λ paths).
#[derive(Debug, Clone)]
pub struct Workspace<'a> {
    data: &'a ProblemData,
    gram: GramBlocks,
    eta: Eta,
    mu: f64,
    precompute_time_s: f64,
}

impl<'a> Workspace<'a> {
    pub fn new(data: &'a ProblemData, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate(data.p())?;
        let start = Instant::now();
        let partition = cfg.blocks.partition(data.p())?;
        let gram = gram_blocks(data.x(), &partition)?;
        let eta = compute_eta(&gram, cfg)?;
        Ok(Workspace {
            data,
            gram,
            eta,
            mu: cfg.mu,
            precompute_time_s: start.elapsed().as_secs_f64(),
        })
    }

    /// A workspace for `cfg` built from this one. The Gram matrix is
    /// regrouped rather than recomputed, and a global η is reused when `μ`
    /// is unchanged since it does not depend on the partition. Results are
    /// bitwise identical to [`Workspace::new`].
    pub fn reconfigure(&self, cfg: &SolverConfig) -> Result<Workspace<'a>> {
        let cfg = normalized(cfg);
        cfg.validate(self.data.p())?;
        let start = Instant::now();
        let partition = cfg.blocks.partition(self.data.p())?;
        let gram = self.gram.regroup(&partition)?;
        let eta = match &self.eta {
            Eta::Global(_) if !cfg.algorithm.per_block_eta() && cfg.mu == self.mu => self.eta.clone(),
            _ => compute_eta(&gram, &cfg)?,
        };
        Ok(Workspace {
            data: self.data,
            gram,
            eta,
            mu: cfg.mu,
            precompute_time_s: start.elapsed().as_secs_f64(),
        })
    }

    pub fn data(&self) -> &'a ProblemData {
        self.data
    }

    pub fn gram(&self) -> &GramBlocks {
        &self.gram
    }

    pub fn partition(&self) -> &Partition {
        self.gram.partition()
    }

    pub fn eta(&self) -> &Eta {
        &self.eta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn precompute_time_s(&self) -> f64 {
        self.precompute_time_s
    }

    /// `Σ A_i β_i` with the deterministic block reduction.
    pub fn a_times(&self, beta: &[f64]) -> Vec<f64> {
        linalg::blocked_matvec_unchecked(&self.gram, &self.partition().split(beta))
    }

    fn check(&self, cfg: &SolverConfig) -> Result<()> {
        cfg.validate(self.data.p())?;
        if cfg.mu != self.mu {
            return Err(Error::Precondition(format!(
                "workspace built for μ = {}, config has μ = {}",
                self.mu, cfg.mu
            )));
        }
        let part = cfg.blocks.partition(self.data.p())?;
        if &part != self.partition() {
            return Err(Error::Precondition(
                "workspace partition differs from config".into(),
            ));
        }
        let per_block = matches!(self.eta, Eta::PerBlock(_));
        if per_block != cfg.algorithm.per_block_eta() {
            return Err(Error::Precondition(format!(
                "workspace η mode does not match algorithm {}",
                cfg.algorithm
            )));
        }
        Ok(())
    }
}

/// `η = λ_max(μ AᵀA) + 1`, or one such constant per block for IPPPA/TADMM.
fn compute_eta(gram: &GramBlocks, cfg: &SolverConfig) -> Result<Eta> {
    let mu = cfg.mu;
    if cfg.algorithm.per_block_eta() {
        let etas = (0..gram.block_count())
            .map(|i| {
                let dim = gram.partition().range(i).len();
                linalg::power_method_max_eigen(
                    |v| gram.block_gram_apply(i, mu, v),
                    dim,
                    cfg.power_tol,
                    cfg.power_max_iter,
                )
                .map(|e| e + 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Eta::PerBlock(etas))
    } else {
        let e = linalg::power_method_max_eigen(
            |v| gram.gram_apply(mu, v),
            gram.dim(),
            cfg.power_tol,
            cfg.power_max_iter,
        )?;
        Ok(Eta::Global(e + 1.0))
    }
}

/// `(weighted_)soft_threshold(β_i + A_iᵀu/η, τ)` with `τ = 1/η`, or
/// `τ_j = w_j/η` when weights are given.
pub fn beta_block_update(
    beta_block: &[f64],
    gram: &GramBlocks,
    block: usize,
    u: &[f64],
    eta: f64,
    weight: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let width = gram.partition().range(block).len();
    if beta_block.len() != width || u.len() != gram.dim() {
        return Err(Error::dim(format!(
            "block {block}: β has {} entries (expected {width}), u has {} (expected {})",
            beta_block.len(),
            u.len(),
            gram.dim()
        )));
    }
    if weight.is_some_and(|w| w.len() != width) {
        return Err(Error::dim("weight block length mismatch"));
    }
    if !(eta > 0.0) {
        return Err(Error::arg(format!("η must be > 0, got {eta}")));
    }
    let atu = gram.block_t_matvec(block, u);
    Ok(beta_block
        .iter()
        .zip(&atu)
        .enumerate()
        .map(|(j, (b, g))| {
            let tau = weight.map_or(1.0, |w| w[j]) / eta;
            shrink_scalar(b + g / eta, tau)
        })
        .collect())
}

/// `clamp(z − u/μ, ±bound)`.
pub fn z_update(z_prev: &[f64], u: &[f64], mu: f64, bound: &[f64]) -> Result<Vec<f64>> {
    if z_prev.len() != u.len() || u.len() != bound.len() {
        return Err(Error::dim("z update: length mismatch"));
    }
    if !(mu > 0.0) {
        return Err(Error::arg(format!("μ must be > 0, got {mu}")));
    }
    if z_prev.iter().chain(u).chain(bound).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("z update received a non-finite value".into()));
    }
    Ok(z_prev
        .iter()
        .zip(u)
        .zip(bound)
        .map(|((z, u), b)| clamp(z - u / mu, *b))
        .collect())
}

/// `u − (μ/d)(2 r_new − r_old)`.
pub fn dual_update(u: &[f64], r_new: &[f64], r_old: &[f64], mu: f64, coeff_divisor: f64) -> Result<Vec<f64>> {
    if u.len() != r_new.len() || u.len() != r_old.len() {
        return Err(Error::dim("dual update: length mismatch"));
    }
    if !(coeff_divisor > 0.0) {
        return Err(Error::arg(format!("divisor must be > 0, got {coeff_divisor}")));
    }
    let c = mu / coeff_divisor;
    Ok(u.iter()
        .zip(r_new)
        .zip(r_old)
        .map(|((u, rn), ro)| u - c * (2.0 * rn - ro))
        .collect())
}

/// Relative change `‖β_new − β_old‖₂ / max(‖β_new‖₂, 1)` and whether it is `≤ tol`.
pub fn stopping_check(beta_new: &[f64], beta_old: &[f64], tol: f64) -> (f64, bool) {
    let diff = beta_new
        .iter()
        .zip(beta_old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let value = diff / norm2(beta_new).max(1.0);
    (value, value <= tol)
}

/// An exactly unchanged β says nothing while the residual is still moving
/// (β can sit at zero for several steps as the dual builds up), so such a
/// step must not end the run.
pub(crate) fn stalled(beta_new: &[f64], beta_old: &[f64], r_new: &[f64], r_old: &[f64], tol: f64) -> bool {
    if beta_new != beta_old {
        return false;
    }
    let (change, _) = stopping_check(r_new, r_old, tol);
    change > tol
}

pub(crate) fn initial_state(
    ws: &Workspace<'_>,
    cfg: &SolverConfig,
    warm: Option<&SolverState>,
) -> Result<SolverState> {
    let p = ws.data.p();
    let (beta, z, u) = match warm {
        Some(w) => {
            if w.beta.len() != p || w.z.len() != p || w.u.len() != p {
                return Err(Error::dim("warm-start state has the wrong dimension"));
            }
            (w.beta.clone(), w.z.clone(), w.u.clone())
        }
        None => {
            let v = cfg.init_value;
            (vec![v; p], vec![v; p], vec![v; p])
        }
    };
    let r = residual(&ws.a_times(&beta), &z, ws.data.xty());
    Ok(SolverState {
        beta,
        z,
        u,
        r,
        iter: 0,
    })
}

pub(crate) fn residual(a_beta: &[f64], z: &[f64], c: &[f64]) -> Vec<f64> {
    a_beta.iter().zip(z).zip(c).map(|((a, z), c)| a - z - c).collect()
}

pub(crate) fn guard(iteration: usize, vecs: &[&[f64]]) -> Result<()> {
    for v in vecs {
        let m = norm_inf(v);
        if !m.is_finite() || m > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                iteration,
                detail: format!("iterate ∞-norm {m:e} exceeds {DIVERGENCE_LIMIT:e}"),
            });
        }
    }
    Ok(())
}

/// Builds the workspace for `cfg` and runs the solver from the configured
/// initial point.
pub fn solve(data: &ProblemData, cfg: &SolverConfig) -> Result<SolveReport> {
    let cfg = normalized(cfg);
    let ws = Workspace::new(data, &cfg)?;
    solve_in(&ws, &cfg, None)
}

/// TADMM with one block is LADMM.
fn normalized(cfg: &SolverConfig) -> SolverConfig {
    let mut cfg = cfg.clone();
    if cfg.algorithm == Algorithm::Tadmm && cfg.blocks.block_count() == 1 {
        cfg.algorithm = Algorithm::Ladmm;
    }
    cfg
}

/// Runs the configured algorithm on a prepared workspace, optionally
/// warm-started from a previous state.
pub fn solve_in(ws: &Workspace<'_>, cfg: &SolverConfig, warm: Option<&SolverState>) -> Result<SolveReport> {
    let cfg = normalized(cfg);
    ws.check(&cfg)?;
    match cfg.algorithm {
        Algorithm::Ppa | Algorithm::Pppa | Algorithm::Ippa => run_ppa(ws, &cfg, warm),
        Algorithm::Ladmm => crate::baselines::run_ladmm(ws, &cfg, warm),
        Algorithm::Tadmm => crate::baselines::run_tadmm(ws, &cfg, warm),
    }
}

fn run_ppa(ws: &Workspace<'_>, cfg: &SolverConfig, warm: Option<&SolverState>) -> Result<SolveReport> {
    let data = ws.data;
    let (n, p) = (data.n(), data.p());
    let part = ws.partition().clone();
    let k = part.block_count();
    let weight = cfg.weights.as_ref().map(|w| w.weight.as_slice());
    let bound = cfg.bound_vector(n, p);
    let divisor = if cfg.algorithm == Algorithm::Ippa {
        (k + 1) as f64
    } else {
        2.0
    };

    let mut state = initial_state(ws, cfg, warm)?;
    let mut trace = Vec::with_capacity(cfg.max_iter.min(4096));
    let mut snapshots = cfg.diagnostics.then(|| vec![state.snapshot()]);
    let mut termination = Termination::MaxIter;

    let start = Instant::now();
    for t in 0..cfg.max_iter {
        let blocks = map_indexed(k, p * p, |i| {
            let r = part.range(i);
            beta_block_update(
                &state.beta[r.clone()],
                &ws.gram,
                i,
                &state.u,
                ws.eta.block(i),
                weight.map(|w| &w[r]),
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let beta_new = blocks.concat();
        let z_new = z_update(&state.z, &state.u, cfg.mu, &bound)?;
        let r_new = residual(&ws.a_times(&beta_new), &z_new, data.xty());
        let u_new = dual_update(&state.u, &r_new, &state.r, cfg.mu, divisor)?;
        guard(t + 1, &[&beta_new, &z_new, &u_new])?;

        let (rel_change, stop) = stopping_check(&beta_new, &state.beta, cfg.tol);
        let stop = stop
            && !stalled(&beta_new, &state.beta, &r_new, &state.r, cfg.tol)
            && cfg.feasible_enough(&r_new, n);
        trace.push(TraceEntry {
            rel_change,
            residual_inf: norm_inf(&r_new),
        });
        state = SolverState {
            beta: beta_new,
            z: z_new,
            u: u_new,
            r: r_new,
            iter: t + 1,
        };
        if let Some(s) = snapshots.as_mut() {
            s.push(state.snapshot());
        }
        if stop {
            termination = Termination::TolReached;
            break;
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    Ok(SolveReport {
        algorithm: cfg.algorithm,
        lambda: cfg.lambda,
        mu: cfg.mu,
        k,
        block_sizes: part.sizes(),
        beta: state.beta.clone(),
        iterations: state.iter,
        converged: termination == Termination::TolReached,
        termination,
        trace,
        snapshots,
        final_state: state,
        eta: ws.eta.clone(),
        state_memory: StateMemory {
            dual_values: p,
            slack_values: 0,
        },
        wall_time_s,
        precompute_time_s: ws.precompute_time_s,
    })
}

fn with_algorithm(data: &ProblemData, cfg: &SolverConfig, algorithm: Algorithm) -> Result<SolveReport> {
    let mut cfg = cfg.clone();
    cfg.algorithm = algorithm;
    solve(data, &cfg)
}

/// Serial PPA.
pub fn ppa_solve(data: &ProblemData, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut cfg = cfg.clone();
    cfg.blocks = BlockSpec::Even(1);
    with_algorithm(data, &cfg, Algorithm::Ppa)
}

/// Parallel PPA over `cfg.blocks` with one global η.
pub fn pppa_solve(data: &ProblemData, cfg: &SolverConfig) -> Result<SolveReport> {
    with_algorithm(data, cfg, Algorithm::Pppa)
}

/// Parallel PPA with per-block η_i and dual step μ/(K+1).
pub fn ippa_solve(data: &ProblemData, cfg: &SolverConfig) -> Result<SolveReport> {
    with_algorithm(data, cfg, Algorithm::Ippa)
}
