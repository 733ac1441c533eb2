//! Choosing λ along a grid by a high-dimensional BIC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_ZERO_TOL;
use crate::problem::ProblemData;
use crate::solver::{solve_in, SolveReport, SolverConfig, SolverState, Workspace};

pub const DEFAULT_GRID_POINTS: usize = 50;
pub const DEFAULT_GRID_RATIO: f64 = 0.01;

/// `log(RSS/n) + c · |Â| · log(log n) · log(p) / n`. The constant `c`
/// defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbicParams {
    pub complexity: f64,
    pub zero_tol: f64,
}

impl Default for HbicParams {
    fn default() -> Self {
        HbicParams {
            complexity: 1.0,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }
}

/// HBIC of a fit. A perfect fit scores `−∞`.
pub fn hbic_score(data: &ProblemData, beta: &[f64], params: &HbicParams) -> Result<f64> {
    if beta.len() != data.p() {
        return Err(Error::dim(format!(
            "β has length {}, expected {}",
            beta.len(),
            data.p()
        )));
    }
    let n = data.n() as f64;
    let p = data.p() as f64;
    let rss = data.rss(beta)?;
    if rss == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let support = beta.iter().filter(|b| b.abs() > params.zero_tol).count() as f64;
    // log log n is negative for n < 3; clamp so the penalty never rewards size
    let loglog = n.ln().ln().max(0.0);
    Ok((rss / n).ln() + params.complexity * support * loglog * p.ln() / n)
}

/// `count` log-spaced values from `λ_max` down to `ratio·λ_max`.
pub fn default_grid(data: &ProblemData, count: usize, ratio: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::arg("grid needs at least one point"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::arg(format!("grid ratio must lie in (0, 1], got {ratio}")));
    }
    let top = data.lambda_max();
    if !(top > 0.0) {
        return Err(Error::Tuning("λ_max is zero: Xᵀy vanishes".into()));
    }
    if count == 1 {
        return Ok(vec![top]);
    }
    let step = ratio.ln() / (count - 1) as f64;
    Ok((0..count).map(|i| top * (step * i as f64).exp()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub score: Option<f64>,
    pub nonzeros: usize,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub best_lambda: f64,
    pub best_score: f64,
    pub points: Vec<GridPoint>,
    pub best_report: SolveReport,
    pub total_iterations: usize,
}

/// Solves along the grid from the largest λ down and returns the HBIC
/// minimizer; equal scores keep the larger λ. The grid is sorted first, so
/// its order does not matter. With `warm_start` each point starts from the
/// previous solution; otherwise the points are solved independently and may
/// run in parallel.
pub fn lambda_grid_search(
    data: &ProblemData,
    template: &SolverConfig,
    grid: &[f64],
    params: &HbicParams,
    warm_start: bool,
) -> Result<TuningResult> {
    if grid.is_empty() {
        return Err(Error::arg("λ grid is empty"));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::arg("λ grid values must be finite and >= 0"));
    }
    let mut lambdas = grid.to_vec();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.dedup();

    let ws = Workspace::new(data, template)?;
    let cfg_for = |lambda: f64| {
        let mut c = template.clone();
        c.lambda = lambda;
        c
    };

    let outcomes: Vec<Result<SolveReport>> = if warm_start {
        let mut out = Vec::with_capacity(lambdas.len());
        let mut prev: Option<SolverState> = None;
        for &l in &lambdas {
            let r = solve_in(&ws, &cfg_for(l), prev.as_ref());
            if let Ok(rep) = &r {
                prev = Some(rep.final_state.clone());
            }
            out.push(r);
        }
        out
    } else {
        lambdas
            .par_iter()
            .map(|&l| solve_in(&ws, &cfg_for(l), None))
            .collect()
    };

    let mut points = Vec::with_capacity(lambdas.len());
    let mut best: Option<(f64, f64, SolveReport)> = None;
    let mut total_iterations = 0;
    for (&lambda, outcome) in lambdas.iter().zip(outcomes) {
        match outcome {
            Ok(rep) => {
                let score = hbic_score(data, &rep.beta, params)?;
                total_iterations += rep.iterations;
                points.push(GridPoint {
                    lambda,
                    score: Some(score),
                    nonzeros: rep.beta.iter().filter(|b| b.abs() > params.zero_tol).count(),
                    iterations: rep.iterations,
                    converged: rep.converged,
                    error: None,
                });
                if best.as_ref().is_none_or(|(_, s, _)| score < *s) {
                    best = Some((lambda, score, rep));
                }
            }
            Err(e) => points.push(GridPoint {
                lambda,
                score: None,
                nonzeros: 0,
                iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    let Some((best_lambda, best_score, best_report)) = best else {
        return Err(Error::Tuning(format!("all {} grid solves failed", points.len())));
    };
    Ok(TuningResult {
        best_lambda,
        best_score,
        points,
        best_report,
        total_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DesignMatrix;
    use crate::solver::Algorithm;

    fn small() -> ProblemData {
        let x = DesignMatrix::from_rows(&[
            vec![1.0, 0.3, -0.5, 0.2],
            vec![0.4, -1.2, 0.6, 0.1],
            vec![-0.7, 0.5, 1.1, -0.3],
            vec![0.9, 0.8, -0.2, 1.0],
            vec![0.1, -0.4, 0.7, -1.1],
            vec![-0.5, 0.2, 0.3, 0.6],
            vec![0.2, 0.9, -0.8, 0.4],
            vec![-1.0, -0.1, 0.2, 0.3],
        ])
        .unwrap();
        ProblemData::new(x, vec![2.5, -0.4, -1.3, 3.0, 0.2, -0.9, 1.1, -2.0]).unwrap()
    }

    // independent spelling of the same score
    fn hbic_again(d: &ProblemData, beta: &[f64]) -> f64 {
        let mut rss = 0.0;
        for i in 0..d.n() {
            let fit: f64 = (0..d.p()).map(|j| d.x().get(i, j) * beta[j]).sum();
            rss += (d.y()[i] - fit) * (d.y()[i] - fit);
        }
        let k = beta.iter().filter(|b| b.abs() > 1e-4).count() as f64;
        let n = d.n() as f64;
        (rss / n).ln() + k * n.ln().ln() * (d.p() as f64).ln() / n
    }

    #[test]
    fn empty_model_score() {
        let d = small();
        let s = hbic_score(&d, &[0.0; 4], &HbicParams::default()).unwrap();
        let yy: f64 = d.y().iter().map(|v| v * v).sum();
        assert!((s - (yy / 8.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn score_monotone_in_support_and_rss() {
        let d = small();
        let p = HbicParams::default();
        let base = hbic_score(&d, &[0.0; 4], &p).unwrap();
        // a tiny coefficient above the threshold barely moves RSS but adds a term
        let grown = hbic_score(&d, &[2e-4, 0.0, 0.0, 0.0], &p).unwrap();
        assert!(grown > base);
    }

    #[test]
    fn perfect_fit_is_minus_infinity() {
        let x = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let d = ProblemData::new(x, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            hbic_score(&d, &[1.0, 2.0], &HbicParams::default()).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn grid_shape() {
        let d = small();
        let g = default_grid(&d, DEFAULT_GRID_POINTS, DEFAULT_GRID_RATIO).unwrap();
        assert_eq!(g.len(), 50);
        assert!((g[0] - d.lambda_max()).abs() < 1e-15);
        assert!((g[49] - 0.01 * d.lambda_max()).abs() < 1e-12 * d.lambda_max());
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        assert!(default_grid(&d, 0, 0.1).is_err());
    }

    #[test]
    fn lambda_max_alone_selects_zero() {
        let d = small();
        let cfg = SolverConfig::new(Algorithm::Ppa, 0.0);
        let r = lambda_grid_search(&d, &cfg, &[d.lambda_max()], &HbicParams::default(), true).unwrap();
        assert_eq!(r.best_lambda, d.lambda_max());
        assert!(r.best_report.beta.iter().all(|b| b.abs() < 1e-3));
    }

    #[test]
    fn argmin_matches_exhaustive_and_ignores_order() {
        let d = small();
        let mut cfg = SolverConfig::new(Algorithm::Ppa, 0.0);
        cfg.tol = 1e-9;
        cfg.max_iter = 50_000;
        let grid = default_grid(&d, 12, 0.05).unwrap();
        let r = lambda_grid_search(&d, &cfg, &grid, &HbicParams::default(), false).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for &l in &grid {
            let mut c = cfg.clone();
            c.lambda = l;
            let rep = crate::solver::solve(&d, &c).unwrap();
            let s = hbic_again(&d, &rep.beta);
            if s < best.0 {
                best = (s, l);
            }
        }
        assert_eq!(r.best_lambda, best.1);
        let mut shuffled = grid.clone();
        shuffled.reverse();
        shuffled.swap(1, 7);
        let r2 = lambda_grid_search(&d, &cfg, &shuffled, &HbicParams::default(), false).unwrap();
        assert_eq!(r2.best_lambda, r.best_lambda);
    }

    #[test]
    fn empty_grid_rejected() {
        let d = small();
        assert!(lambda_grid_search(&d, &SolverConfig::default(), &[], &HbicParams::default(), true).is_err());
    }
}
