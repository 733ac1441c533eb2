//! Linearized ADMM and the three-block parallel ADMM (TADMM) used as
//! comparison baselines.

use std::time::Instant;

use crate::error::Result;
use crate::linalg::{map_indexed, norm_inf, reduce_in_order};
use crate::problem::ProblemData;
use crate::prox::{clamp, shrink_scalar};
use crate::solver::{
    guard, initial_state, residual, solve, stalled, stopping_check, Algorithm, SolveReport, SolverConfig,
    SolverState, StateMemory, Termination, TraceEntry, Workspace,
};

/// Linearized ADMM.
pub fn ladmm_solve(data: &ProblemData, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut cfg = cfg.clone();
    cfg.algorithm = Algorithm::Ladmm;
    solve(data, &cfg)
}

/// Three-block parallel ADMM over `cfg.blocks`; one block falls back to LADMM.
pub fn tadmm_solve(data: &ProblemData, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut cfg = cfg.clone();
    cfg.algorithm = Algorithm::Tadmm;
    solve(data, &cfg)
}

/// Auxiliary storage of TADMM with `K` blocks: `K` duals and `K − 1` slacks of length `p`.
pub fn tadmm_state_memory(p: usize, k: usize) -> StateMemory {
    StateMemory {
        dual_values: k * p,
        slack_values: k.saturating_sub(1) * p,
    }
}

fn thresholds(cfg: &SolverConfig, p: usize, eta: f64) -> Vec<f64> {
    cfg.weight_vector(p).into_iter().map(|w| w / eta).collect()
}

pub(crate) fn run_ladmm(
    ws: &Workspace<'_>,
    cfg: &SolverConfig,
    warm: Option<&SolverState>,
) -> Result<SolveReport> {
    let data = ws.data();
    let (n, p) = (data.n(), data.p());
    let c = data.xty();
    let mu = cfg.mu;
    let eta = ws.eta().block(0);
    let step = mu / eta;
    let tau = thresholds(cfg, p, eta);
    let bound = cfg.bound_vector(n, p);

    let mut state = initial_state(ws, cfg, warm)?;
    let mut a_beta = ws.a_times(&state.beta);
    let mut trace = Vec::new();
    let mut snapshots = cfg.diagnostics.then(|| vec![state.snapshot()]);
    let mut termination = Termination::MaxIter;

    let start = Instant::now();
    for t in 0..cfg.max_iter {
        // β ← ST(β − (μ/η) Aᵀ(Aβ − z − c + u/μ), τ)
        let inner: Vec<f64> = (0..p)
            .map(|k| a_beta[k] - state.z[k] - c[k] + state.u[k] / mu)
            .collect();
        let grad = ws.gram().t_matvec(&inner);
        let beta_new: Vec<f64> = (0..p)
            .map(|j| shrink_scalar(state.beta[j] - step * grad[j], tau[j]))
            .collect();
        let a_new = ws.a_times(&beta_new);
        let z_new: Vec<f64> = (0..p)
            .map(|k| clamp(a_new[k] - c[k] + state.u[k] / mu, bound[k]))
            .collect();
        let r_new = residual(&a_new, &z_new, c);
        let u_new: Vec<f64> = state.u.iter().zip(&r_new).map(|(u, r)| u + mu * r).collect();
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
        a_beta = a_new;
        if let Some(s) = snapshots.as_mut() {
            s.push(state.snapshot());
        }
        if stop {
            termination = Termination::TolReached;
            break;
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    Ok(finish(
        ws,
        cfg,
        state,
        trace,
        snapshots,
        termination,
        wall_time_s,
        StateMemory {
            dual_values: p,
            slack_values: 0,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ws: &Workspace<'_>,
    cfg: &SolverConfig,
    state: SolverState,
    trace: Vec<TraceEntry>,
    snapshots: Option<Vec<crate::solver::Snapshot>>,
    termination: Termination,
    wall_time_s: f64,
    state_memory: StateMemory,
) -> SolveReport {
    SolveReport {
        algorithm: cfg.algorithm,
        lambda: cfg.lambda,
        mu: cfg.mu,
        k: ws.partition().block_count(),
        block_sizes: ws.partition().sizes(),
        beta: state.beta.clone(),
        iterations: state.iter,
        converged: termination == Termination::TolReached,
        termination,
        trace,
        snapshots,
        final_state: state,
        eta: ws.eta().clone(),
        state_memory,
        wall_time_s,
        precompute_time_s: ws.precompute_time_s(),
    }
}

/// ω_i = (c + z + K·P_i − Aβ)/K for blocks `2..K`.
fn omega_from(c: &[f64], z: &[f64], parts: &[Vec<f64>], a_beta: &[f64]) -> Vec<Vec<f64>> {
    let k = parts.len() as f64;
    parts[1..]
        .iter()
        .map(|pi| {
            (0..c.len())
                .map(|j| (c[j] + z[j] + k * pi[j] - a_beta[j]) / k)
                .collect()
        })
        .collect()
}

fn sum_omega(omega: &[Vec<f64>], p: usize) -> Vec<f64> {
    reduce_in_order(omega.to_vec(), p)
}

pub(crate) fn run_tadmm(
    ws: &Workspace<'_>,
    cfg: &SolverConfig,
    warm: Option<&SolverState>,
) -> Result<SolveReport> {
    let data = ws.data();
    let (n, p) = (data.n(), data.p());
    let c = data.xty();
    let mu = cfg.mu;
    let gram = ws.gram();
    let part = ws.partition().clone();
    let k = part.block_count();
    let weight = cfg.weight_vector(p);
    let bound = cfg.bound_vector(n, p);

    let init = initial_state(ws, cfg, warm)?;
    let mut beta = init.beta;
    let mut z = init.z;
    let mut u: Vec<Vec<f64>> = std::iter::once(init.u)
        .chain((1..k).map(|_| vec![cfg.init_value; p]))
        .collect();
    let mut omega: Vec<Vec<f64>> = match warm {
        // with a warm start the slacks begin consistent with β
        Some(_) => (1..k)
            .map(|i| gram.block_matvec(i, &beta[part.range(i)]))
            .collect(),
        None => (1..k).map(|_| vec![cfg.init_value; p]).collect(),
    };
    let mut parts = map_indexed(k, p * p, |i| gram.block_matvec(i, &beta[part.range(i)]));

    let mut trace = Vec::new();
    let mut snapshots = cfg.diagnostics.then(|| {
        vec![crate::solver::Snapshot {
            beta: beta.clone(),
            z: z.clone(),
            u: u[0].clone(),
        }]
    });
    let mut termination = Termination::MaxIter;
    let mut r = Vec::new();
    let mut iters = 0;

    let start = Instant::now();
    for t in 0..cfg.max_iter {
        let omega_sum = sum_omega(&omega, p);
        // per-block linearized steps, all from the previous iterate
        let new_blocks: Vec<Vec<f64>> = map_indexed(k, p * p, |i| {
            let range = part.range(i);
            let eta = ws.eta().block(i);
            let inner: Vec<f64> = if i == 0 {
                (0..p)
                    .map(|j| parts[0][j] + omega_sum[j] - z[j] - c[j] + u[0][j] / mu)
                    .collect()
            } else {
                (0..p)
                    .map(|j| parts[i][j] - omega[i - 1][j] + u[i][j] / mu)
                    .collect()
            };
            let g = gram.block_t_matvec(i, &inner);
            range
                .clone()
                .zip(&g)
                .map(|(j, gj)| shrink_scalar(beta[j] - mu / eta * gj, weight[j] / eta))
                .collect()
        });
        let beta_new = new_blocks.concat();
        parts = map_indexed(k, p * p, |i| gram.block_matvec(i, &beta_new[part.range(i)]));
        let a_beta = reduce_in_order(parts.clone(), p);

        let omega_half = omega_from(c, &z, &parts, &a_beta);
        let half_sum = sum_omega(&omega_half, p);
        let z_new: Vec<f64> = (0..p)
            .map(|j| clamp(parts[0][j] + half_sum[j] - c[j] + u[0][j] / mu, bound[j]))
            .collect();
        omega = omega_from(c, &z_new, &parts, &a_beta);
        let full_sum = sum_omega(&omega, p);
        for j in 0..p {
            u[0][j] += mu * (parts[0][j] + full_sum[j] - z_new[j] - c[j]);
        }
        for i in 1..k {
            for j in 0..p {
                u[i][j] += mu * (parts[i][j] - omega[i - 1][j]);
            }
        }
        let mut check: Vec<&[f64]> = vec![&beta_new, &z_new];
        check.extend(u.iter().map(Vec::as_slice));
        guard(t + 1, &check)?;

        let r_new = residual(&a_beta, &z_new, c);
        let (rel_change, stop) = stopping_check(&beta_new, &beta, cfg.tol);
        let stop = stop && !stalled(&beta_new, &beta, &r_new, &r, cfg.tol) && cfg.feasible_enough(&r_new, n);
        r = r_new;
        trace.push(TraceEntry {
            rel_change,
            residual_inf: norm_inf(&r),
        });
        beta = beta_new;
        z = z_new;
        iters = t + 1;
        if let Some(s) = snapshots.as_mut() {
            s.push(crate::solver::Snapshot {
                beta: beta.clone(),
                z: z.clone(),
                u: u[0].clone(),
            });
        }
        if stop {
            termination = Termination::TolReached;
            break;
        }
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    if iters == 0 {
        r = init.r;
    }
    let state = SolverState {
        beta,
        z,
        u: u.swap_remove(0),
        r,
        iter: iters,
    };
    Ok(finish(
        ws,
        cfg,
        state,
        trace,
        snapshots,
        termination,
        wall_time_s,
        tadmm_state_memory(p, k),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DesignMatrix;

    fn small() -> ProblemData {
        let x = DesignMatrix::from_rows(&[
            vec![1.0, 0.2, -0.4],
            vec![0.3, 1.1, 0.5],
            vec![-0.6, 0.4, 0.9],
            vec![0.8, -0.7, 0.1],
            vec![0.2, 0.5, -1.2],
        ])
        .unwrap();
        ProblemData::new(x, vec![1.5, -0.3, 0.8, 2.1, -1.0]).unwrap()
    }

    #[test]
    fn large_lambda_gives_zero() {
        let d = small();
        let lam = d.lambda_max() * 1.01;
        let l = ladmm_solve(&d, &SolverConfig::new(Algorithm::Ladmm, lam)).unwrap();
        assert!(norm_inf(&l.beta) < 1e-3);
        let t = tadmm_solve(&d, &SolverConfig::new(Algorithm::Tadmm, lam).with_blocks(2)).unwrap();
        assert!(norm_inf(&t.beta) < 1e-3);
    }

    #[test]
    fn tadmm_single_block_is_ladmm() {
        let d = small();
        let lam = 0.3 * d.lambda_max();
        let a = ladmm_solve(&d, &SolverConfig::new(Algorithm::Ladmm, lam)).unwrap();
        let b = tadmm_solve(&d, &SolverConfig::new(Algorithm::Tadmm, lam)).unwrap();
        assert_eq!(a.beta, b.beta);
        assert_eq!(b.algorithm, Algorithm::Ladmm);
    }

    #[test]
    fn memory_counts() {
        let m = tadmm_state_memory(10, 4);
        assert_eq!(m.total(), 70);
        assert_eq!(m.total(), (2 * 4 - 1) * 10);
        assert!(m.total() > 10);
    }
}
