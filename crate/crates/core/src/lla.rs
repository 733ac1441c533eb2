//! Local linear approximation for SCAD/MCP Dantzig selectors: a plain ℓ1
//! solve followed by a few weighted ℓ1 solves whose weights come from the
//! penalty derivative at the previous estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, sub};
use crate::problem::ProblemData;
use crate::prox::{PenaltyKind, PenaltySpec};
use crate::solver::{solve_in, SolveReport, SolverConfig, WeightSpec, Workspace};

pub const DEFAULT_OUTER_ITERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlaConfig {
    pub penalty: PenaltySpec,
    /// Number of weighted passes after the initial ℓ1 solve.
    pub outer_iters: usize,
    /// Inner solver settings; `lambda` is taken from the penalty and
    /// `weights` is overwritten on each pass.
    pub inner: SolverConfig,
    /// Start each weighted pass from the full `(β, z, u)` of the previous one.
    pub warm_start: bool,
}

impl LlaConfig {
    pub fn new(penalty: PenaltySpec, inner: SolverConfig) -> Self {
        LlaConfig {
            penalty,
            outer_iters: DEFAULT_OUTER_ITERS,
            inner,
            warm_start: true,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        self.penalty.validate()?;
        if self.penalty.kind == PenaltyKind::L1 {
            return Err(Error::arg("LLA needs a SCAD or MCP penalty"));
        }
        if self.outer_iters == 0 {
            return Err(Error::arg("outer iterations must be >= 1"));
        }
        let mut inner = self.inner.clone();
        inner.lambda = self.penalty.lambda;
        inner.weights = None;
        inner.validate(p)
    }
}

/// `weight_j = P'(|β_j|)/λ` and `bound_j = n·P'(|β_j|)`.
pub fn compute_weights(beta: &[f64], penalty: &PenaltySpec, n: usize) -> Result<WeightSpec> {
    penalty.validate()?;
    if penalty.kind == PenaltyKind::L1 {
        return Err(Error::arg("weights are defined for SCAD and MCP only"));
    }
    if !(penalty.lambda > 0.0) {
        return Err(Error::arg("λ must be > 0 to form weights"));
    }
    let (mut weight, mut bound) = (Vec::with_capacity(beta.len()), Vec::with_capacity(beta.len()));
    for b in beta {
        if !b.is_finite() {
            return Err(Error::Numeric(
                "non-finite coefficient in weight computation".into(),
            ));
        }
        let d = penalty.derivative_at(b.abs());
        weight.push(d / penalty.lambda);
        bound.push(n as f64 * d);
    }
    Ok(WeightSpec { weight, bound })
}

/// One weighted pass of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlaPass {
    pub weights: WeightSpec,
    pub iterations: usize,
    pub converged: bool,
    /// `Σ w_j |β_j|` at the start and end of the pass (current weights).
    pub objective_before: f64,
    pub objective_after: f64,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlaReport {
    /// Final estimate with the trace of every inner solve concatenated.
    pub report: SolveReport,
    /// The initial unweighted solve.
    pub initial: SolveReport,
    pub passes: Vec<LlaPass>,
    /// Passes whose weighted objective did not decrease.
    pub objective_increases: Vec<usize>,
    pub stopped_early: bool,
}

fn weighted_l1(beta: &[f64], w: &[f64]) -> f64 {
    beta.iter().zip(w).map(|(b, w)| w * b.abs()).sum()
}

/// Runs the ℓ1 solve and then up to `outer_iters` weighted passes, reusing
/// one workspace throughout.
pub fn lla_solve(data: &ProblemData, cfg: &LlaConfig) -> Result<LlaReport> {
    lla_solve_from(data, cfg, None)
}

/// As [`lla_solve`], but starting from an already computed ℓ1 solution, for
/// example one shared by several penalties at the same λ.
pub fn lla_solve_from(
    data: &ProblemData,
    cfg: &LlaConfig,
    initial: Option<&SolveReport>,
) -> Result<LlaReport> {
    cfg.validate(data.p())?;
    let mut inner = cfg.inner.clone();
    inner.lambda = cfg.penalty.lambda;
    inner.weights = None;
    let ws = Workspace::new(data, &inner)?;

    let initial = match initial {
        Some(r) => {
            if r.beta.len() != data.p() || r.lambda != inner.lambda {
                return Err(Error::Precondition(
                    "initial solution does not match this problem and λ".into(),
                ));
            }
            r.clone()
        }
        None => solve_in(&ws, &inner, None)?,
    };
    let mut current = initial.clone();
    let mut trace = initial.trace.clone();
    let mut iterations = initial.iterations;
    let mut wall = initial.wall_time_s;
    let mut passes = Vec::with_capacity(cfg.outer_iters);
    let mut objective_increases = Vec::new();
    let mut stopped_early = false;

    for l in 0..cfg.outer_iters {
        let weights = compute_weights(&current.beta, &cfg.penalty, data.n())?;
        inner.weights = Some(weights.clone());
        let warm = cfg.warm_start.then_some(&current.final_state);
        let next = solve_in(&ws, &inner, warm)?;

        let before = weighted_l1(&current.beta, &weights.weight);
        let after = weighted_l1(&next.beta, &weights.weight);
        if after >= before && before > 0.0 {
            objective_increases.push(l);
        }
        trace.extend_from_slice(&next.trace);
        iterations += next.iterations;
        wall += next.wall_time_s;
        let change = norm2(&sub(&next.beta, &current.beta)) / norm2(&next.beta).max(1.0);
        passes.push(LlaPass {
            weights,
            iterations: next.iterations,
            converged: next.converged,
            objective_before: before,
            objective_after: after,
            beta: next.beta.clone(),
        });
        current = next;
        if change <= inner.tol && l + 1 < cfg.outer_iters {
            stopped_early = true;
            break;
        }
    }

    let mut report = current;
    report.trace = trace;
    report.iterations = iterations;
    report.wall_time_s = wall;
    report.snapshots = None;
    Ok(LlaReport {
        report,
        initial,
        passes,
        objective_increases,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DesignMatrix;
    use crate::solver::Algorithm;
    use crate::verify::kkt_feasibility;

    fn tiny() -> ProblemData {
        let x = DesignMatrix::from_rows(&[
            vec![1.0, 0.3, -0.5, 0.2],
            vec![0.4, -1.2, 0.6, 0.1],
            vec![-0.7, 0.5, 1.1, -0.3],
            vec![0.9, 0.8, -0.2, 1.0],
            vec![0.1, -0.4, 0.7, -1.1],
            vec![-0.5, 0.2, 0.3, 0.6],
        ])
        .unwrap();
        ProblemData::new(x, vec![2.5, -0.4, -1.3, 3.0, 0.2, -0.9]).unwrap()
    }

    #[test]
    fn zero_beta_gives_unit_weights() {
        let w = compute_weights(&[0.0; 3], &PenaltySpec::scad(0.5, 3.7).unwrap(), 10).unwrap();
        assert_eq!(w.weight, vec![1.0; 3]);
        assert_eq!(w.bound, vec![5.0; 3]);
    }

    #[test]
    fn scad_weight_examples() {
        let s = PenaltySpec::scad(1.0, 3.7).unwrap();
        let w = compute_weights(&[10.0, 2.0], &s, 100).unwrap();
        assert_eq!(w.weight[0], 0.0);
        assert_eq!(w.bound[0], 0.0);
        assert!((w.weight[1] - 0.629_629_6).abs() < 1e-6);
        assert!((w.bound[1] - 62.962_96).abs() < 1e-4);
    }

    #[test]
    fn bound_is_n_lambda_weight() {
        let s = PenaltySpec::mcp(0.7, 3.0).unwrap();
        let beta = [0.0, 0.3, -1.0, 2.5, 5.0];
        let w = compute_weights(&beta, &s, 40).unwrap();
        for (b, wt) in w.bound.iter().zip(&w.weight) {
            assert!((b - 40.0 * 0.7 * wt).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_initial_matches_fresh_run() {
        let d = tiny();
        let lam = 0.3 * d.lambda_max();
        let cfg = LlaConfig::new(
            PenaltySpec::scad(lam, 3.7).unwrap(),
            SolverConfig::new(Algorithm::Ppa, lam),
        );
        let a = lla_solve(&d, &cfg).unwrap();
        let b = lla_solve_from(&d, &cfg, Some(&a.initial)).unwrap();
        assert_eq!(a.report.beta, b.report.beta);
        let mut other = a.initial.clone();
        other.lambda *= 2.0;
        assert!(lla_solve_from(&d, &cfg, Some(&other)).is_err());
    }

    #[test]
    fn l1_is_rejected() {
        let cfg = LlaConfig::new(PenaltySpec::l1(0.1).unwrap(), SolverConfig::default());
        assert!(lla_solve(&tiny(), &cfg).is_err());
        let mut cfg = LlaConfig::new(PenaltySpec::scad(0.1, 3.7).unwrap(), SolverConfig::default());
        cfg.outer_iters = 0;
        assert!(lla_solve(&tiny(), &cfg).is_err());
    }

    #[test]
    fn inner_solves_meet_their_constraints() {
        let d = tiny();
        let lam = 0.3 * d.lambda_max();
        for pen in [
            PenaltySpec::scad(lam, 3.7).unwrap(),
            PenaltySpec::mcp(lam, 3.0).unwrap(),
        ] {
            let mut inner = SolverConfig::new(Algorithm::Ppa, lam);
            inner.tol = 1e-12;
            inner.max_iter = 200_000;
            let rep = lla_solve(&d, &LlaConfig::new(pen, inner)).unwrap();
            assert!(!rep.passes.is_empty());
            for pass in &rep.passes {
                let f = kkt_feasibility(&d, &pass.beta, lam, Some(&pass.weights)).unwrap();
                assert!(f.linf_violation <= 1e-6, "{f:?}");
            }
        }
    }

    #[test]
    fn huge_a_mcp_approaches_l1() {
        let d = tiny();
        let lam = 0.3 * d.lambda_max();
        let mut inner = SolverConfig::new(Algorithm::Ppa, lam);
        inner.tol = 1e-10;
        inner.max_iter = 100_000;
        let rep = lla_solve(&d, &LlaConfig::new(PenaltySpec::mcp(lam, 1e9).unwrap(), inner)).unwrap();
        let gap = norm2(&sub(&rep.report.beta, &rep.initial.beta));
        assert!(gap < 1e-5, "{gap}");
    }
}
