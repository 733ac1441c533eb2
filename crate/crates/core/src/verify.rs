//! Executable checks of the convergence theory: the metric matrices H and
//! H_K, contraction of iterates in those norms, partition insensitivity,
//! constraint feasibility, and an exact LP solve for tiny instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm_inf, GramBlocks};
use crate::problem::ProblemData;
use crate::solver::{
    solve, solve_in, Algorithm, BlockSpec, Eta, Snapshot, SolverConfig, WeightSpec, Workspace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Global η, corner `2/μ`.
    H,
    /// Per-block η_i, corner `(K+1)/μ`.
    HK,
}

/// A dense symmetric `3p × 3p` matrix acting on stacked `(β, z, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionMetric {
    pub kind: MetricKind,
    pub dim: usize,
    pub matrix: Vec<f64>,
    pub eta: Eta,
    pub mu: f64,
}

impl ContractionMetric {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }
}

fn max_block_eigen(gram: &GramBlocks, mu: f64, block: Option<usize>) -> Result<f64> {
    match block {
        None => linalg::power_method_max_eigen(|v| gram.gram_apply(mu, v), gram.dim(), 1e-13, 20_000),
        Some(i) => linalg::power_method_max_eigen(
            |v| gram.block_gram_apply(i, mu, v),
            gram.partition().range(i).len(),
            1e-13,
            20_000,
        ),
    }
}

/// Assembles the symmetric 3×3 block pattern shared by H, H_K, M and M_K.
/// `top_left` fills the β–β block; the remaining blocks are fixed.
fn assemble(gram: &GramBlocks, mu: f64, corner: f64, top_left: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let p = gram.dim();
    let d = 3 * p;
    let mut h = vec![0.0; d * d];
    for j in 0..p {
        for k in 0..p {
            h[j * d + k] = top_left(j, k);
            // β–u coupling: A (symmetric), placed on both sides
            let a = gram.entry(j, k);
            h[j * d + 2 * p + k] = a;
            h[(2 * p + k) * d + j] = a;
        }
        h[(p + j) * d + p + j] = mu;
        h[(p + j) * d + 2 * p + j] = -1.0;
        h[(2 * p + j) * d + p + j] = -1.0;
        h[(2 * p + j) * d + 2 * p + j] = corner;
    }
    h
}

/// Builds H (global η) or H_K (per-block η_i) for the given μ.
///
/// The β–β block is `diag(η_{block(j)})`, the z–z block `μI`, the coupling
/// blocks `A` and `−I`, and the u–u block `2/μ·I` for H or `(K+1)/μ·I` for
/// H_K.
pub fn build_contraction_metric(gram: &GramBlocks, mu: f64, eta: &Eta) -> Result<ContractionMetric> {
    if !(mu > 0.0) {
        return Err(Error::arg(format!("μ must be > 0, got {mu}")));
    }
    let part = gram.partition();
    let (kind, corner) = match eta {
        Eta::Global(e) => {
            let lam = max_block_eigen(gram, mu, None)?;
            if !(*e > lam) {
                return Err(Error::Precondition(format!(
                    "η = {e} does not exceed λ_max(μAᵀA) = {lam}"
                )));
            }
            (MetricKind::H, 2.0 / mu)
        }
        Eta::PerBlock(etas) => {
            if etas.len() != part.block_count() {
                return Err(Error::dim("one η per block required"));
            }
            for (i, e) in etas.iter().enumerate() {
                let lam = max_block_eigen(gram, mu, Some(i))?;
                if !(*e > lam) {
                    return Err(Error::Precondition(format!(
                        "η_{i} = {e} does not exceed λ_max(μA_iᵀA_i) = {lam}"
                    )));
                }
            }
            (MetricKind::HK, (part.block_count() + 1) as f64 / mu)
        }
    };
    let matrix = assemble(gram, mu, corner, |j, k| {
        if j == k {
            eta.block(part.block_of(j))
        } else {
            0.0
        }
    });
    Ok(ContractionMetric {
        kind,
        dim: 3 * gram.dim(),
        matrix,
        eta: eta.clone(),
        mu,
    })
}

/// The positive semidefinite companions M (`per_block = false`) and M_K.
pub fn build_m_matrix(gram: &GramBlocks, mu: f64, per_block: bool) -> Vec<f64> {
    let part = gram.partition();
    let p = gram.dim();
    let dense = gram.to_dense();
    let corner = if per_block {
        (part.block_count() + 1) as f64 / mu
    } else {
        2.0 / mu
    };
    // μ (AᵀA)_{jk}, restricted to diagonal blocks for M_K
    assemble(gram, mu, corner, |j, k| {
        if per_block && part.block_of(j) != part.block_of(k) {
            return 0.0;
        }
        mu * (0..p).map(|r| dense[r * p + j] * dense[r * p + k]).sum::<f64>()
    })
}

/// `gᵀ H g`.
pub fn h_norm_sq(metric: &ContractionMetric, g: &[f64]) -> Result<f64> {
    let d = metric.dim;
    if g.len() != d {
        return Err(Error::dim(format!(
            "vector has length {}, metric has dimension {d}",
            g.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..d {
        if g[i] == 0.0 {
            continue;
        }
        total += g[i] * linalg::dot(&metric.matrix[i * d..(i + 1) * d], g);
    }
    Ok(total)
}

/// Outcome of the three contraction checks along one recorded trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `‖g^t − g^{t+1}‖²_H` for each recorded step.
    pub step_norms: Vec<f64>,
    /// `‖g^t − g*‖²_H` for each recorded iterate.
    pub distances: Vec<f64>,
    /// Largest increase of `step_norms` beyond slack (0 when monotone).
    pub step_violation: f64,
    /// Largest increase of `distances` beyond slack.
    pub distance_violation: f64,
    /// Largest excess of `‖g^T − g^{T+1}‖²_H` over `‖g^0 − g*‖²_H/(T+1)`.
    pub rate_violation: f64,
    pub passed: bool,
}

pub const CONTRACTION_SLACK: f64 = 1e-10;

fn diff(a: &Snapshot, b: &Snapshot) -> Vec<f64> {
    linalg::sub(&a.stacked(), &b.stacked())
}

/// Checks that along the snapshots `g^0, g^1, …`:
/// `‖g^t − g^{t+1}‖²_H` and `‖g^t − g*‖²_H` never increase, and
/// `‖g^T − g^{T+1}‖²_H ≤ ‖g^0 − g*‖²_H / (T+1)` for every `T`. Each
/// comparison allows `1e-10·(1 + magnitude)`.
pub fn check_contraction(
    snapshots: &[Snapshot],
    metric: &ContractionMetric,
    g_star: &Snapshot,
) -> Result<ContractionReport> {
    if snapshots.len() < 2 {
        return Err(Error::arg("contraction check needs at least two snapshots"));
    }
    let steps = snapshots
        .windows(2)
        .map(|w| h_norm_sq(metric, &diff(&w[0], &w[1])))
        .collect::<Result<Vec<_>>>()?;
    let dists = snapshots
        .iter()
        .map(|s| h_norm_sq(metric, &diff(s, g_star)))
        .collect::<Result<Vec<_>>>()?;

    let excess = |later: f64, earlier: f64| {
        let slack = CONTRACTION_SLACK * (1.0 + later.abs().max(earlier.abs()));
        (later - earlier - slack).max(0.0)
    };
    let step_violation = steps.windows(2).map(|w| excess(w[1], w[0])).fold(0.0, f64::max);
    let distance_violation = dists.windows(2).map(|w| excess(w[1], w[0])).fold(0.0, f64::max);
    let rate_violation = steps
        .iter()
        .enumerate()
        .map(|(t, s)| excess(*s, dists[0] / (t + 1) as f64))
        .fold(0.0, f64::max);
    Ok(ContractionReport {
        passed: step_violation == 0.0 && distance_violation == 0.0 && rate_violation == 0.0,
        step_norms: steps,
        distances: dists,
        step_violation,
        distance_violation,
        rate_violation,
    })
}

/// Reference optimum for contraction checks: the same algorithm run until its
/// iterates stop moving.
pub fn reference_optimum(data: &ProblemData, cfg: &SolverConfig) -> Result<Snapshot> {
    let mut cfg = cfg.clone();
    cfg.tol = 1e-15;
    cfg.max_iter = 200_000;
    cfg.diagnostics = false;
    Ok(solve(data, &cfg)?.final_state.snapshot())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `max(0, ‖Xᵀ(Xβ − y)/n‖∞ − λ)`, coordinatewise against `bound/n` when weighted.
    pub linf_violation: f64,
    /// `‖β‖₁`, or `Σ w_j |β_j|` when weighted.
    pub l1_objective: f64,
}

/// Constraint violation and objective of `β` for the plain or weighted problem.
pub fn kkt_feasibility(
    data: &ProblemData,
    beta: &[f64],
    lambda: f64,
    weights: Option<&WeightSpec>,
) -> Result<Feasibility> {
    let corr = data.scaled_correlation(beta)?;
    let n = data.n() as f64;
    let (linf_violation, l1_objective) = match weights {
        None => (
            (norm_inf(&corr) - lambda).max(0.0),
            beta.iter().map(|b| b.abs()).sum(),
        ),
        Some(w) => {
            if w.bound.len() != beta.len() || w.weight.len() != beta.len() {
                return Err(Error::dim("weights do not match β"));
            }
            let v = corr
                .iter()
                .zip(&w.bound)
                .map(|(c, b)| c.abs() - b / n)
                .fold(0.0, f64::max);
            let obj = beta.iter().zip(&w.weight).map(|(b, w)| w * b.abs()).sum();
            (v, obj)
        }
    };
    Ok(Feasibility {
        linf_violation,
        l1_objective,
    })
}

/// Exact Dantzig selector solution by linear programming:
///
/// ```text
/// min Σ β⁺_j + β⁻_j   s.t.  −nλ ≤ [A(β⁺ − β⁻) − Xᵀy]_k ≤ nλ,  β± ≥ 0
/// ```
///
/// Intended for tiny instances (at most 200 LP variables).
pub fn lp_oracle_solve(data: &ProblemData, lambda: f64) -> Result<Vec<f64>> {
    let p = data.p();
    if 2 * p > 200 {
        return Err(Error::arg(format!("LP oracle is limited to p <= 100, got {p}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::arg(format!("λ must be >= 0, got {lambda}")));
    }
    let gram = linalg::gram_blocks(data.x(), &linalg::Partition::even(p, 1)?)?;
    let a = gram.to_dense();
    let c = data.xty();
    let nl = data.n() as f64 * lambda;
    let mut rows = Vec::with_capacity(2 * p);
    let mut rhs = Vec::with_capacity(2 * p);
    for k in 0..p {
        let ak = &a[k * p..(k + 1) * p];
        let row: Vec<f64> = ak.iter().copied().chain(ak.iter().map(|v| -v)).collect();
        rows.push(row.clone());
        rhs.push(c[k] + nl);
        rows.push(row.into_iter().map(|v| -v).collect());
        rhs.push(nl - c[k]);
    }
    let x = simplex_min(&vec![1.0; 2 * p], &rows, &rhs)?;
    Ok((0..p).map(|j| x[j] - x[p + j]).collect())
}

/// Dense two-phase simplex for `min cᵀx` subject to `Ax ≤ b`, `x ≥ 0`,
/// using Bland's rule throughout.
pub fn simplex_min(cost: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    let nv = cost.len();
    if b.len() != m || a.iter().any(|r| r.len() != nv) {
        return Err(Error::dim("LP shape mismatch"));
    }
    let scale = a.iter().flatten().chain(b).fold(1.0f64, |s, v| s.max(v.abs()));
    let eps = 1e-11 * scale;

    let art_rows: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let ncol = nv + m + art_rows.len();
    let width = ncol + 1;
    let mut t = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    let mut art_col = nv + m;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nv {
            t[i * width + j] = sign * a[i][j];
        }
        t[i * width + nv + i] = sign;
        t[i * width + ncol] = sign * b[i];
        if b[i] < 0.0 {
            t[i * width + art_col] = 1.0;
            basis[i] = art_col;
            art_col += 1;
        } else {
            basis[i] = nv + i;
        }
    }

    if !art_rows.is_empty() {
        let phase1: Vec<f64> = (0..ncol).map(|j| if j >= nv + m { 1.0 } else { 0.0 }).collect();
        run_simplex(&mut t, &mut basis, m, width, &phase1, ncol, eps)?;
        let infeas: f64 = (0..m)
            .filter(|&i| basis[i] >= nv + m)
            .map(|i| t[i * width + ncol])
            .sum();
        if infeas > 1e-8 * scale {
            return Err(Error::Lp(format!("infeasible (phase-one residual {infeas:e})")));
        }
        // pivot remaining zero-level artificials out where possible
        for i in 0..m {
            if basis[i] >= nv + m {
                if let Some(j) = (0..nv + m).find(|&j| t[i * width + j].abs() > eps) {
                    pivot(&mut t, m, width, i, j);
                    basis[i] = j;
                }
            }
        }
    }
    let phase2: Vec<f64> = (0..ncol).map(|j| if j < nv { cost[j] } else { 0.0 }).collect();
    run_simplex(&mut t, &mut basis, m, width, &phase2, nv + m, eps)?;

    let mut x = vec![0.0; nv];
    for i in 0..m {
        if basis[i] < nv {
            x[basis[i]] = t[i * width + ncol].max(0.0);
        }
    }
    Ok(x)
}

fn pivot(t: &mut [f64], m: usize, width: usize, row: usize, col: usize) {
    let pv = t[row * width + col];
    for v in &mut t[row * width..(row + 1) * width] {
        *v /= pv;
    }
    let pivot_row: Vec<f64> = t[row * width..(row + 1) * width].to_vec();
    for i in 0..m {
        if i == row {
            continue;
        }
        let f = t[i * width + col];
        if f != 0.0 {
            for (v, pr) in t[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
        }
    }
}

/// Minimizes `cost` over the current tableau; only columns `< allowed` may enter.
fn run_simplex(
    t: &mut [f64],
    basis: &mut [usize],
    m: usize,
    width: usize,
    cost: &[f64],
    allowed: usize,
    eps: f64,
) -> Result<()> {
    let ncol = width - 1;
    for _ in 0..100_000 {
        let entering = (0..allowed).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let reduced = cost[j] - (0..m).map(|i| cost[basis[i]] * t[i * width + j]).sum::<f64>();
            reduced < -1e-12 * (1.0 + cost[j].abs())
        });
        let Some(col) = entering else {
            return Ok(());
        };
        let mut best: Option<(f64, usize)> = None;
        for i in 0..m {
            let a = t[i * width + col];
            if a > eps {
                let ratio = t[i * width + ncol] / a;
                best = match best {
                    Some((r, bi)) if ratio > r + 1e-14 * (1.0 + r.abs()) => Some((r, bi)),
                    Some((r, bi)) if (ratio - r).abs() <= 1e-14 * (1.0 + r.abs()) && basis[bi] < basis[i] => {
                        Some((r, bi))
                    }
                    _ => Some((ratio, i)),
                };
            }
        }
        let Some((_, row)) = best else {
            return Err(Error::Lp("unbounded objective".into()));
        };
        pivot(t, m, width, row, col);
        basis[row] = col;
    }
    Err(Error::Lp("simplex iteration limit reached".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDiscrepancy {
    pub blocks: BlockSpec,
    pub iterations: usize,
    /// Largest relative ∞-norm gap of β, z or u over all iterates.
    pub max_rel_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub reference_iterations: usize,
    pub runs: Vec<PartitionDiscrepancy>,
    pub max_rel_discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const PARTITION_TOLERANCE: f64 = 1e-8;

fn rel_gap(a: &[f64], reference: &[f64]) -> f64 {
    let scale = norm_inf(reference);
    let gap = norm_inf(&linalg::sub(a, reference));
    if scale > 0.0 {
        gap / scale
    } else {
        gap
    }
}

/// Runs PPPA for each partition and compares every iterate with the
/// single-block trajectory. Differing iteration counts count as a failure.
pub fn partition_insensitivity_check(
    data: &ProblemData,
    cfg: &SolverConfig,
    partitions: &[BlockSpec],
) -> Result<PartitionReport> {
    let mut base = cfg.clone();
    base.algorithm = Algorithm::Pppa;
    base.diagnostics = true;
    base.blocks = BlockSpec::Even(1);
    let reference = solve(data, &base)?;
    let ref_snaps = reference.snapshots.as_deref().unwrap_or_default();

    let mut runs = Vec::with_capacity(partitions.len());
    for spec in partitions {
        let mut c = base.clone();
        c.blocks = spec.clone();
        let rep = solve(data, &c)?;
        let snaps = rep.snapshots.as_deref().unwrap_or_default();
        let mut worst: f64 = if snaps.len() == ref_snaps.len() {
            0.0
        } else {
            f64::INFINITY
        };
        for (s, r) in snaps.iter().zip(ref_snaps) {
            worst = worst
                .max(rel_gap(&s.beta, &r.beta))
                .max(rel_gap(&s.z, &r.z))
                .max(rel_gap(&s.u, &r.u));
        }
        runs.push(PartitionDiscrepancy {
            blocks: spec.clone(),
            iterations: rep.iterations,
            max_rel_discrepancy: worst,
        });
    }
    let max_rel_discrepancy = runs.iter().map(|r| r.max_rel_discrepancy).fold(0.0, f64::max);
    Ok(PartitionReport {
        reference_iterations: reference.iterations,
        passed: max_rel_discrepancy <= PARTITION_TOLERANCE,
        runs,
        max_rel_discrepancy,
        tolerance: PARTITION_TOLERANCE,
    })
}

/// Runs `steps` iterations with snapshots from the configured start and
/// checks contraction in the metric matching the algorithm (`H` for PPA and
/// PPPA, `H_K` for IPPPA). The ADMM baselines are not covered.
pub fn contraction_run(data: &ProblemData, cfg: &SolverConfig, steps: usize) -> Result<ContractionReport> {
    if matches!(cfg.algorithm, Algorithm::Ladmm | Algorithm::Tadmm) {
        return Err(Error::Precondition(format!(
            "contraction is checked for ppa, pppa and ippa, not {}",
            cfg.algorithm
        )));
    }
    if steps < 1 {
        return Err(Error::arg("contraction run needs at least one step"));
    }
    let mut c = cfg.clone();
    // never stop early: the check wants exactly `steps` iterates
    c.tol = f64::MIN_POSITIVE;
    c.feas_tol = None;
    c.max_iter = steps;
    c.diagnostics = true;
    let ws = Workspace::new(data, &c)?;
    let rep = solve_in(&ws, &c, None)?;
    let g_star = reference_optimum(data, cfg)?;
    let metric = build_contraction_metric(ws.gram(), c.mu, ws.eta())?;
    check_contraction(rep.snapshots.as_deref().unwrap_or_default(), &metric, &g_star)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpCheck {
    pub lp_objective: f64,
    pub solver_objective: f64,
    pub objective_gap: f64,
    pub violation: f64,
    pub passed: bool,
}

pub const LP_OBJECTIVE_TOLERANCE: f64 = 1e-3;
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// Compares a solve against the exact LP solution.
pub fn lp_check(data: &ProblemData, cfg: &SolverConfig) -> Result<LpCheck> {
    let lp = lp_oracle_solve(data, cfg.lambda)?;
    let lp_objective: f64 = lp.iter().map(|b| b.abs()).sum();
    let rep = solve(data, cfg)?;
    let f = kkt_feasibility(data, &rep.beta, cfg.lambda, None)?;
    let objective_gap = (f.l1_objective - lp_objective).abs();
    Ok(LpCheck {
        lp_objective,
        solver_objective: f.l1_objective,
        objective_gap,
        violation: f.linf_violation,
        passed: objective_gap <= LP_OBJECTIVE_TOLERANCE && f.linf_violation <= FEASIBILITY_TOLERANCE,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub lp: bool,
    pub partitions: Vec<BlockSpec>,
    pub contraction_steps: Option<usize>,
}

/// The JSON document behind the `verify` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub mu: f64,
    pub feasibility: Feasibility,
    pub feasibility_passed: bool,
    pub lp: Option<LpCheck>,
    pub partition: Option<PartitionReport>,
    pub contraction: Option<ContractionReport>,
    pub passed: bool,
}

/// Solves once and runs the requested checks on the same instance.
pub fn verify_instance(data: &ProblemData, cfg: &SolverConfig, opts: &VerifyOptions) -> Result<VerifyReport> {
    let rep = solve(data, cfg)?;
    let feasibility = kkt_feasibility(data, &rep.beta, cfg.lambda, cfg.weights.as_ref())?;
    let feasibility_passed = feasibility.linf_violation <= FEASIBILITY_TOLERANCE;
    let lp = if opts.lp { Some(lp_check(data, cfg)?) } else { None };
    let partition = if opts.partitions.is_empty() {
        None
    } else {
        Some(partition_insensitivity_check(data, cfg, &opts.partitions)?)
    };
    let contraction = match opts.contraction_steps {
        Some(steps) => Some(contraction_run(data, cfg, steps)?),
        None => None,
    };
    let passed = feasibility_passed
        && lp.as_ref().is_none_or(|c| c.passed)
        && partition.as_ref().is_none_or(|c| c.passed)
        && contraction.as_ref().is_none_or(|c| c.passed);
    Ok(VerifyReport {
        algorithm: cfg.algorithm,
        lambda: cfg.lambda,
        mu: cfg.mu,
        feasibility,
        feasibility_passed,
        lp,
        partition,
        contraction,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gram_blocks, DesignMatrix, Partition};

    fn tiny() -> ProblemData {
        let x = DesignMatrix::from_rows(&[
            vec![1.0, 0.5, -0.2],
            vec![0.1, -1.0, 0.7],
            vec![0.6, 0.3, 1.2],
            vec![-0.8, 0.9, 0.4],
            vec![0.3, -0.2, -1.1],
        ])
        .unwrap();
        ProblemData::new(x, vec![2.0, -1.0, 0.5, 1.5, -0.7]).unwrap()
    }

    #[test]
    fn zero_coupling_metric() {
        let x = DesignMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        let g = gram_blocks(&x, &Partition::even(2, 1).unwrap()).unwrap();
        let h = build_contraction_metric(&g, 1.0, &Eta::Global(1.0)).unwrap();
        assert_eq!(h.kind, MetricKind::H);
        assert_eq!(h.get(0, 0), 1.0);
        assert_eq!(h.get(2, 2), 1.0);
        assert_eq!(h.get(2, 4), -1.0);
        assert_eq!(h.get(4, 4), 2.0);
        assert_eq!(h.get(0, 4), 0.0);
    }

    #[test]
    fn metric_is_exactly_symmetric() {
        let d = tiny();
        let g = gram_blocks(d.x(), &Partition::even(3, 2).unwrap()).unwrap();
        let lam = max_block_eigen(&g, 0.5, None).unwrap();
        let h = build_contraction_metric(&g, 0.5, &Eta::Global(lam + 1.0)).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(h.get(i, j), h.get(j, i));
            }
        }
    }

    #[test]
    fn small_eta_is_rejected() {
        let d = tiny();
        let g = gram_blocks(d.x(), &Partition::even(3, 1).unwrap()).unwrap();
        assert!(matches!(
            build_contraction_metric(&g, 1.0, &Eta::Global(1.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn single_block_hk_equals_h() {
        let d = tiny();
        let g = gram_blocks(d.x(), &Partition::even(3, 1).unwrap()).unwrap();
        let e = max_block_eigen(&g, 1.0, None).unwrap() + 1.0;
        let h = build_contraction_metric(&g, 1.0, &Eta::Global(e)).unwrap();
        let hk = build_contraction_metric(&g, 1.0, &Eta::PerBlock(vec![e])).unwrap();
        assert_eq!(h.matrix, hk.matrix);
        assert_eq!(hk.kind, MetricKind::HK);
    }

    #[test]
    fn h_norm_basics() {
        let d = tiny();
        let g = gram_blocks(d.x(), &Partition::even(3, 1).unwrap()).unwrap();
        let e = max_block_eigen(&g, 1.0, None).unwrap() + 1.0;
        let h = build_contraction_metric(&g, 1.0, &Eta::Global(e)).unwrap();
        assert_eq!(h_norm_sq(&h, &[0.0; 9]).unwrap(), 0.0);
        assert!(h_norm_sq(&h, &[0.0; 8]).is_err());
        let ident = ContractionMetric {
            kind: MetricKind::H,
            dim: 3,
            matrix: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            eta: Eta::Global(1.0),
            mu: 1.0,
        };
        assert_eq!(h_norm_sq(&ident, &[1.0, 2.0, -2.0]).unwrap(), 9.0);
    }

    #[test]
    fn fixed_point_passes_contraction() {
        let s = Snapshot {
            beta: vec![1.0],
            z: vec![0.5],
            u: vec![-0.2],
        };
        let metric = ContractionMetric {
            kind: MetricKind::H,
            dim: 3,
            matrix: vec![2.0, 0.0, 1.0, 0.0, 1.0, -1.0, 1.0, -1.0, 2.0],
            eta: Eta::Global(2.0),
            mu: 1.0,
        };
        let rep = check_contraction(&[s.clone(), s.clone(), s.clone()], &metric, &s).unwrap();
        assert!(rep.passed);
        assert!(rep.step_norms.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn feasibility_examples() {
        let d = tiny();
        let lmax = d.lambda_max();
        let f = kkt_feasibility(&d, &[0.0; 3], lmax, None).unwrap();
        assert_eq!(f.linf_violation, 0.0);
        assert_eq!(f.l1_objective, 0.0);
        let f = kkt_feasibility(&d, &[0.0; 3], 0.5 * lmax, None).unwrap();
        assert!((f.linf_violation - 0.5 * lmax).abs() < 1e-15);
    }

    #[test]
    fn lp_large_lambda_is_zero() {
        let d = tiny();
        let b = lp_oracle_solve(&d, d.lambda_max() * 1.1).unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lp_solution_is_feasible() {
        let d = tiny();
        let lam = 0.3 * d.lambda_max();
        let b = lp_oracle_solve(&d, lam).unwrap();
        let f = kkt_feasibility(&d, &b, lam, None).unwrap();
        assert!(f.linf_violation <= 1e-9, "{f:?}");
        assert!(f.l1_objective > 0.0);
    }

    #[test]
    fn lp_one_dimensional_matches_grid() {
        let x = DesignMatrix::new(4, 1, vec![1.0, -0.5, 2.0, 0.3]).unwrap();
        let d = ProblemData::new(x, vec![1.2, 0.4, 3.1, -0.2]).unwrap();
        let lam = 0.4 * d.lambda_max();
        let b = lp_oracle_solve(&d, lam).unwrap()[0];
        let mut best = f64::INFINITY;
        let mut k = -1_000_000i64;
        while k <= 1_000_000 {
            let t = k as f64 * 1e-5;
            let c = d.scaled_correlation(&[t]).unwrap()[0];
            if c.abs() <= lam && t.abs() < best.abs() {
                best = t;
            }
            k += 1;
        }
        assert!((b - best).abs() < 2e-5, "{b} vs {best}");
    }

    #[test]
    fn simplex_textbook_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  → (2, 6)
        let x = simplex_min(
            &[-3.0, -5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
        // x ≥ 1 written as −x ≤ −1 needs phase one
        let y = simplex_min(&[1.0], &[vec![-1.0]], &[-1.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!(matches!(
            simplex_min(&[1.0], &[vec![1.0], vec![-1.0]], &[1.0, -2.0]),
            Err(Error::Lp(_))
        ));
        assert!(matches!(
            simplex_min(&[-1.0], &[vec![-1.0]], &[0.0]),
            Err(Error::Lp(_))
        ));
    }

    #[test]
    fn identical_partitions_have_zero_discrepancy() {
        let d = tiny();
        let cfg = SolverConfig::new(Algorithm::Pppa, 0.3 * d.lambda_max());
        let rep = partition_insensitivity_check(&d, &cfg, &[BlockSpec::Even(1), BlockSpec::Even(1)]).unwrap();
        assert_eq!(rep.max_rel_discrepancy, 0.0);
        assert!(rep.passed);
    }

    #[test]
    fn verify_instance_runs_all_checks() {
        let d = tiny();
        let mut cfg = SolverConfig::new(Algorithm::Pppa, 0.3 * d.lambda_max());
        cfg.tol = 1e-12;
        cfg.max_iter = 100_000;
        let opts = VerifyOptions {
            lp: true,
            partitions: vec![BlockSpec::Even(2), BlockSpec::Sizes(vec![1, 2])],
            contraction_steps: Some(50),
        };
        let r = verify_instance(&d, &cfg, &opts).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.contraction.unwrap().step_norms.len(), 50);
        cfg.algorithm = Algorithm::Ladmm;
        cfg.blocks = BlockSpec::Even(1);
        assert!(contraction_run(&d, &cfg, 10).is_err());
    }
}
