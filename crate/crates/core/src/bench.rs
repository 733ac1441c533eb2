//! Replicated benchmarks over algorithms and block counts.

use serde::{Deserialize, Serialize};

use crate::datagen::{gen_dataset, ScenarioSpec};
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, DEFAULT_ZERO_TOL};
use crate::problem::ProblemData;
use crate::solver::{solve_in, Algorithm, BlockSpec, SolverConfig, StateMemory, Workspace};
use crate::tuning::{default_grid, lambda_grid_search, HbicParams, DEFAULT_GRID_POINTS, DEFAULT_GRID_RATIO};

/// How λ is set for each replicate. All cells of a replicate share it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LambdaRule {
    Fixed {
        value: f64,
    },
    /// `σ √(2 log p / n)` with σ the scenario's noise scale.
    Universal,
    /// HBIC over the default log grid, solved with PPA from the template.
    Hbic {
        points: usize,
        ratio: f64,
    },
}

impl LambdaRule {
    pub fn hbic_default() -> Self {
        LambdaRule::Hbic {
            points: DEFAULT_GRID_POINTS,
            ratio: DEFAULT_GRID_RATIO,
        }
    }

    pub fn choose(
        &self,
        data: &ProblemData,
        scenario: &ScenarioSpec,
        template: &SolverConfig,
    ) -> Result<f64> {
        match *self {
            LambdaRule::Fixed { value } => Ok(value),
            LambdaRule::Universal => {
                Ok(scenario.noise_scale * (2.0 * (data.p() as f64).ln() / data.n() as f64).sqrt())
            }
            LambdaRule::Hbic { points, ratio } => {
                let mut cfg = template.clone();
                cfg.algorithm = Algorithm::Ppa;
                cfg.blocks = BlockSpec::Even(1);
                cfg.weights = None;
                cfg.diagnostics = false;
                let grid = default_grid(data, points, ratio)?;
                Ok(lambda_grid_search(data, &cfg, &grid, &HbicParams::default(), true)?.best_lambda)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenario: ScenarioSpec,
    pub algorithms: Vec<Algorithm>,
    pub k_list: Vec<usize>,
    pub replicates: usize,
    /// μ, tolerances and iteration limits for every cell.
    pub solver: SolverConfig,
    pub lambda: LambdaRule,
    pub zero_tol: f64,
}

impl BenchConfig {
    pub fn new(
        scenario: ScenarioSpec,
        algorithms: Vec<Algorithm>,
        k_list: Vec<usize>,
        replicates: usize,
    ) -> Self {
        BenchConfig {
            scenario,
            algorithms,
            k_list,
            replicates,
            solver: SolverConfig::default(),
            lambda: LambdaRule::Universal,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }

    /// Every (algorithm, K) pair; single-block algorithms appear only at K = 1.
    pub fn cells(&self) -> Vec<(Algorithm, usize)> {
        let mut out = Vec::new();
        for &a in &self.algorithms {
            for &k in &self.k_list {
                if matches!(a, Algorithm::Ppa | Algorithm::Ladmm) && k != 1 {
                    continue;
                }
                out.push((a, k));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub replicate: usize,
    pub seed: u64,
    pub lambda: f64,
    pub metrics: Option<MetricReport>,
    pub per_iter_time_s: Option<f64>,
    pub precompute_time_s: Option<f64>,
    pub state_memory: Option<StateMemory>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    /// Mean and sample standard deviation; NaN when empty.
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub ok: usize,
    pub failed: usize,
    #[serde(rename = "AE")]
    pub ae: Stat,
    #[serde(rename = "FP")]
    pub fp: Stat,
    #[serde(rename = "FN")]
    pub fn_: Stat,
    pub l2_error_sq: Stat,
    pub iterations: Stat,
    pub time_s: Stat,
    pub per_iter_time_s: Stat,
}

/// One `(algorithm, K)` cell: its runs and their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub algorithm: Algorithm,
    #[serde(rename = "K")]
    pub k: usize,
    pub summary: CellSummary,
    pub runs: Vec<RunRecord>,
}

/// Summary statistics of a cell, computed from its runs alone.
pub fn aggregate(runs: &[RunRecord]) -> CellSummary {
    let ok: Vec<&MetricReport> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let pick = |f: &dyn Fn(&MetricReport) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
    let per_iter: Vec<f64> = runs.iter().filter_map(|r| r.per_iter_time_s).collect();
    CellSummary {
        ok: ok.len(),
        failed: runs.len() - ok.len(),
        ae: pick(&|m| m.ae),
        fp: pick(&|m| m.fp as f64),
        fn_: pick(&|m| m.fn_ as f64),
        l2_error_sq: pick(&|m| m.l2_error_sq),
        iterations: pick(&|m| m.iterations as f64),
        time_s: pick(&|m| m.wall_time),
        per_iter_time_s: Stat::of(&per_iter),
    }
}

/// Runs every cell on every replicate. Each replicate's data set is drawn
/// once and shared by all cells; solver failures are recorded in the cell.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<CellReport>> {
    cfg.scenario.validate()?;
    if cfg.replicates == 0 {
        return Err(Error::arg("replicates must be >= 1"));
    }
    let cells = cfg.cells();
    if cells.is_empty() {
        return Err(Error::arg("no (algorithm, K) cells to run"));
    }
    let mut runs: Vec<Vec<RunRecord>> = vec![Vec::with_capacity(cfg.replicates); cells.len()];

    for r in 0..cfg.replicates {
        let seed = cfg.scenario.seed.wrapping_add(r as u64);
        let spec = ScenarioSpec {
            seed,
            ..cfg.scenario.clone()
        };
        let ds = gen_dataset(&spec)?;
        let data = ds.problem()?;
        let lambda = match cfg.lambda.choose(&data, &spec, &cfg.solver) {
            Ok(l) => l,
            Err(e) => {
                for cell in runs.iter_mut() {
                    cell.push(failed_run(r, seed, f64::NAN, &e));
                }
                continue;
            }
        };
        let mut base: Option<Workspace<'_>> = None;
        for (c, &(alg, k)) in cells.iter().enumerate() {
            let mut sc = cfg.solver.clone();
            sc.algorithm = alg;
            sc.blocks = BlockSpec::Even(k);
            sc.lambda = lambda;
            let ws = match &base {
                Some(b) => b.reconfigure(&sc),
                None => Workspace::new(&data, &sc),
            };
            let outcome = ws.and_then(|ws| {
                let rep = solve_in(&ws, &sc, None)?;
                let m = MetricReport::from_solve(&rep, &ds.beta_star, &ds.sigma, cfg.zero_tol)?;
                if base.is_none() {
                    base = Some(ws);
                }
                Ok((rep, m))
            });
            runs[c].push(match outcome {
                Ok((rep, m)) => RunRecord {
                    replicate: r,
                    seed,
                    lambda,
                    per_iter_time_s: (rep.iterations > 0).then(|| rep.wall_time_s / rep.iterations as f64),
                    precompute_time_s: Some(rep.precompute_time_s),
                    state_memory: Some(rep.state_memory),
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => failed_run(r, seed, lambda, &e),
            });
        }
    }

    Ok(cells
        .into_iter()
        .zip(runs)
        .map(|((algorithm, k), runs)| CellReport {
            algorithm,
            k,
            summary: aggregate(&runs),
            runs,
        })
        .collect())
}

fn failed_run(replicate: usize, seed: u64, lambda: f64, e: &Error) -> RunRecord {
    RunRecord {
        replicate,
        seed,
        lambda,
        metrics: None,
        per_iter_time_s: None,
        precompute_time_s: None,
        state_memory: None,
        error: Some(e.to_string()),
    }
}

/// `algorithm,K,mean_time_s,mean_per_iter_time_s,mean_AE` rows for plotting.
pub fn plot_csv(cells: &[CellReport]) -> String {
    let mut s = String::from("algorithm,K,mean_time_s,mean_per_iter_time_s,mean_AE\n");
    for c in cells {
        s.push_str(&format!(
            "{},{},{:?},{:?},{:?}\n",
            c.algorithm.name(),
            c.k,
            c.summary.time_s.mean,
            c.summary.per_iter_time_s.mean,
            c.summary.ae.mean
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_bench(algorithms: Vec<Algorithm>, k_list: Vec<usize>, replicates: usize) -> BenchConfig {
        let mut cfg = BenchConfig::new(
            ScenarioSpec::sparse(40, 16, 0.5, 3),
            algorithms,
            k_list,
            replicates,
        );
        cfg.solver.mu = 1.0 / 1600.0;
        cfg
    }

    #[test]
    fn single_cell_single_replicate() {
        let cells = run_bench(&tiny_bench(vec![Algorithm::Ppa], vec![1], 1)).unwrap();
        assert_eq!(cells.len(), 1);
        let c = &cells[0];
        assert_eq!(c.runs.len(), 1);
        let m = c.runs[0].metrics.as_ref().unwrap();
        assert_eq!(c.summary.ae.mean, m.ae);
        assert_eq!(c.summary.ae.sd, 0.0);
    }

    #[test]
    fn pppa_ae_is_flat_across_k() {
        let cells = run_bench(&tiny_bench(vec![Algorithm::Pppa], vec![1, 2, 4], 2)).unwrap();
        let ae: Vec<f64> = cells.iter().map(|c| c.summary.ae.mean).collect();
        assert!(ae.iter().all(|a| (a - ae[0]).abs() <= 1e-8), "{ae:?}");
    }

    #[test]
    fn aggregation_is_reproducible_from_json() {
        let cells = run_bench(&tiny_bench(
            vec![Algorithm::Pppa, Algorithm::Tadmm],
            vec![1, 2],
            2,
        ))
        .unwrap();
        let text = serde_json::to_string(&cells).unwrap();
        let back: Vec<CellReport> = serde_json::from_str(&text).unwrap();
        for c in &back {
            assert_eq!(aggregate(&c.runs), c.summary);
        }
        assert!(plot_csv(&cells).lines().count() == 5);
    }

    #[test]
    fn single_block_algorithms_skip_larger_k() {
        let cfg = tiny_bench(
            vec![Algorithm::Ppa, Algorithm::Pppa, Algorithm::Ladmm],
            vec![1, 2],
            1,
        );
        assert_eq!(
            cfg.cells(),
            vec![
                (Algorithm::Ppa, 1),
                (Algorithm::Pppa, 1),
                (Algorithm::Pppa, 2),
                (Algorithm::Ladmm, 1)
            ]
        );
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let mut cfg = tiny_bench(vec![Algorithm::Pppa], vec![1, 32], 1);
        cfg.replicates = 1;
        let cells = run_bench(&cfg).unwrap();
        assert!(cells[0].runs[0].error.is_none());
        assert!(cells[1].runs[0].error.is_some());
        assert_eq!(cells[1].summary.failed, 1);
    }

    #[test]
    fn stat_examples() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
        assert!(Stat::of(&[]).mean.is_nan());
    }
}
