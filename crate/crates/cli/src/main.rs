//! `dsppa`: generate data, solve, tune, benchmark and verify Dantzig
//! selectors from the command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dsppa_core::bench::{plot_csv, run_bench, BenchConfig, LambdaRule};
use dsppa_core::datagen::{gen_dataset, NoiseKind, ScenarioSpec, SigmaDescriptor};
use dsppa_core::io::{
    read_config, read_matrix, read_vector, write_dataset, write_json, write_vector, MatrixFormat, RunReport,
};
use dsppa_core::metrics::{MetricReport, DEFAULT_ZERO_TOL};
use dsppa_core::repro::{run_repro, ReproId, ReproScenario};
use dsppa_core::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use dsppa_core::tuning::{default_grid, lambda_grid_search, HbicParams};
use dsppa_core::verify::{verify_instance, VerifyOptions};
use dsppa_core::{
    lla_solve, solve, Algorithm, BlockSpec, LlaConfig, PenaltyKind, PenaltySpec, ProblemData, SolverConfig,
};

/// Exit code for a command that ran but whose checks did not pass.
const EXIT_CHECKS_FAILED: u8 = 9;
/// Flags that take no value; `key=true` in a config file turns them on.
const SWITCHES: [&str; 3] = ["diag", "lp", "cold"];

#[derive(Parser, Debug)]
#[command(
    name = "dsppa",
    version,
    about = "Proximal point solvers for ℓ1, SCAD and MCP Dantzig selectors"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads (DSPPA_WORKERS takes precedence; default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// key=value file whose entries act as defaults for this command's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset (X.dsm1, y.csv, beta_star.csv, scenario.json).
    Datagen {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one problem and write a JSON report.
    Solve {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// λ value, or `hbic` to tune it first.
        #[arg(long, value_parser = parse_lambda)]
        lambda: LambdaArg,
        /// Also write β̂ as one-column CSV.
        #[arg(long)]
        beta_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose λ by HBIC along a log-spaced grid.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 50)]
        grid_points: usize,
        #[arg(long, default_value_t = 0.01)]
        grid_ratio: f64,
        #[arg(long, default_value_t = 1.0)]
        complexity: f64,
        /// Solve grid points independently instead of warm-starting down the path.
        #[arg(long)]
        cold: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep algorithms and block counts over replicated synthetic data.
    Bench {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_value = "pppa,tadmm")]
        algos: Vec<Algorithm>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// `universal`, `hbic` or `fixed:<value>`.
        #[arg(long, default_value = "universal", value_parser = parse_rule)]
        lambda_rule: LambdaRule,
        /// Directory for bench.json and plot.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check feasibility, and optionally LP agreement, partition
    /// insensitivity and contraction, on one instance.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        lambda: f64,
        /// Compare with the exact LP solution (p ≤ 100).
        #[arg(long)]
        lp: bool,
        /// Block counts for the partition check.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        /// Iterations to record for the contraction check.
        #[arg(long)]
        contraction_steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scripted desk-scale reproductions.
    Repro {
        /// table1, table3, table7 or all.
        #[arg(long, default_value = "all")]
        scenario: String,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        results: PathBuf,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    /// dsm1, csv or auto (by extension).
    #[arg(long, default_value = "auto")]
    format: MatrixFormat,
    /// True coefficients; adds error and selection metrics to the report.
    #[arg(long)]
    beta_star: Option<PathBuf>,
    /// AR(1) correlation used for the model error.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long = "algo", default_value = "ppa")]
    algorithm: Algorithm,
    #[arg(long, default_value = "l1")]
    penalty: PenaltyKind,
    /// SCAD/MCP shape (defaults 3.7 and 3).
    #[arg(long)]
    a: Option<f64>,
    /// Step size, or `auto` for 1/n².
    #[arg(long, default_value = "1.0", value_parser = parse_mu)]
    mu: MuArg,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Also require ‖Aβ − z − Xᵀy‖∞/n below this before stopping.
    #[arg(long)]
    feas_tol: Option<f64>,
    #[arg(long, default_value_t = 2)]
    outer_iters: usize,
    /// Record every iterate in the report.
    #[arg(long)]
    diag: bool,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    p: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Dense design of size (720 s, 2560 s); overrides --n and --p.
    #[arg(long)]
    dense: Option<usize>,
    #[arg(long, default_value = "gaussian")]
    noise: NoiseKind,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioArgs {
    fn spec(&self) -> ScenarioSpec {
        let mut spec = match self.dense {
            Some(s) => ScenarioSpec::dense(s, self.seed),
            None => ScenarioSpec::sparse(self.n, self.p, self.rho, self.seed),
        };
        spec.rho = self.rho;
        spec.noise = self.noise;
        spec.noise_scale = self.noise_scale;
        spec
    }
}

#[derive(Debug, Clone, Copy)]
enum MuArg {
    Value(f64),
    Auto,
}

impl MuArg {
    fn resolve(self, n: usize) -> f64 {
        match self {
            MuArg::Value(v) => v,
            MuArg::Auto => 1.0 / (n as f64 * n as f64),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum LambdaArg {
    Value(f64),
    Hbic,
}

fn parse_mu(s: &str) -> Result<MuArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(MuArg::Auto);
    }
    s.parse().map(MuArg::Value).map_err(|e| format!("{e}"))
}

fn parse_lambda(s: &str) -> Result<LambdaArg, String> {
    if s.eq_ignore_ascii_case("hbic") {
        return Ok(LambdaArg::Hbic);
    }
    s.parse().map(LambdaArg::Value).map_err(|e| format!("{e}"))
}

fn parse_rule(s: &str) -> Result<LambdaRule, String> {
    match s.to_ascii_lowercase().as_str() {
        "universal" => Ok(LambdaRule::Universal),
        "hbic" => Ok(LambdaRule::hbic_default()),
        other => match other.strip_prefix("fixed:") {
            Some(v) => v
                .parse()
                .map(|value| LambdaRule::Fixed { value })
                .map_err(|e| format!("{e}")),
            None => Err(format!("expected universal, hbic or fixed:<value>, got {s:?}")),
        },
    }
}

impl SolverArgs {
    /// Solver settings; `tol` and `max_iter` fall back to the given defaults.
    fn config(&self, n: usize, lambda: f64, tol: f64, max_iter: usize) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.algorithm, lambda);
        cfg.mu = self.mu.resolve(n);
        cfg.blocks = BlockSpec::Even(self.k);
        cfg.tol = self.tol.unwrap_or(tol);
        cfg.max_iter = self.max_iter.unwrap_or(max_iter);
        cfg.feas_tol = self.feas_tol;
        cfg.diagnostics = self.diag;
        cfg
    }

    fn penalty(&self, lambda: f64) -> dsppa_core::Result<PenaltySpec> {
        PenaltySpec::new(self.penalty, lambda, self.a)
    }
}

struct Loaded {
    data: ProblemData,
    beta_star: Option<Vec<f64>>,
    sigma: SigmaDescriptor,
}

fn load(args: &DataArgs) -> anyhow::Result<Loaded> {
    let x = read_matrix(&args.x, args.format)?;
    let y = read_vector(&args.y, args.format)?;
    let data = ProblemData::new(x, y)?;
    let beta_star = args
        .beta_star
        .as_deref()
        .map(|p| read_vector(p, args.format))
        .transpose()?;
    Ok(Loaded {
        data,
        beta_star,
        sigma: SigmaDescriptor::Ar1 { rho: args.rho },
    })
}

fn emit(out: Option<&Path>, value: &serde_json::Value) -> anyhow::Result<()> {
    match out {
        Some(path) => write_json(path, value)?,
        None => {
            let text = serde_json::to_string_pretty(value)?;
            let mut stdout = std::io::stdout().lock();
            // a closed pipe (`dsppa solve … | head`) is not an error
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

/// Returns whether every check in the command passed.
fn run(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Datagen { scenario, out } => {
            let spec = scenario.spec();
            let ds = gen_dataset(&spec)?;
            write_dataset(&out, &ds, &spec)?;
            emit(None, &json!({ "out": out, "scenario": spec }))?;
            Ok(true)
        }
        Command::Solve {
            data,
            solver,
            lambda,
            beta_out,
            out,
        } => {
            let loaded = load(&data)?;
            let d = &loaded.data;
            let lambda = match lambda {
                LambdaArg::Value(v) => v,
                LambdaArg::Hbic => {
                    let mut cfg = solver.config(d.n(), 0.0, DEFAULT_TOL, DEFAULT_MAX_ITER);
                    cfg.algorithm = Algorithm::Ppa;
                    cfg.blocks = BlockSpec::Even(1);
                    cfg.diagnostics = false;
                    let grid = default_grid(d, 50, 0.01)?;
                    lambda_grid_search(d, &cfg, &grid, &HbicParams::default(), true)?.best_lambda
                }
            };
            let cfg = solver.config(d.n(), lambda, DEFAULT_TOL, DEFAULT_MAX_ITER);
            let penalty = solver.penalty(lambda)?;
            let report = if penalty.kind == PenaltyKind::L1 {
                solve(d, &cfg)?
            } else {
                let mut lla = LlaConfig::new(penalty, cfg);
                lla.outer_iters = solver.outer_iters;
                lla_solve(d, &lla)?.report
            };
            let metrics = match &loaded.beta_star {
                Some(b) => Some(MetricReport::from_solve(
                    &report,
                    b,
                    &loaded.sigma,
                    DEFAULT_ZERO_TOL,
                )?),
                None => None,
            };
            if let Some(path) = &beta_out {
                write_vector(path, &report.beta, MatrixFormat::Csv)?;
            }
            let mut doc = serde_json::to_value(RunReport::new(
                &report,
                &penalty.kind.to_string(),
                metrics,
                DEFAULT_ZERO_TOL,
            ))?;
            if solver.diag {
                doc["trace"] = serde_json::to_value(&report.trace)?;
                doc["snapshots"] = serde_json::to_value(&report.snapshots)?;
            }
            emit(out.as_deref(), &doc)?;
            Ok(true)
        }
        Command::Tune {
            data,
            solver,
            grid_points,
            grid_ratio,
            complexity,
            cold,
            out,
        } => {
            let loaded = load(&data)?;
            let d = &loaded.data;
            let cfg = solver.config(d.n(), 0.0, DEFAULT_TOL, DEFAULT_MAX_ITER);
            let grid = default_grid(d, grid_points, grid_ratio)?;
            let params = HbicParams {
                complexity,
                ..HbicParams::default()
            };
            let r = lambda_grid_search(d, &cfg, &grid, &params, !cold)?;
            let report = RunReport::new(&r.best_report, "l1", None, params.zero_tol);
            emit(
                out.as_deref(),
                &json!({
                    "best_lambda": r.best_lambda,
                    "best_score": r.best_score,
                    "total_iterations": r.total_iterations,
                    "points": r.points,
                    "best_report": report,
                }),
            )?;
            Ok(true)
        }
        Command::Bench {
            scenario,
            solver,
            algos,
            ks,
            replicates,
            lambda_rule,
            out,
        } => {
            let spec = scenario.spec();
            let mut cfg = BenchConfig::new(spec.clone(), algos, ks, replicates);
            cfg.solver = solver.config(spec.n, 0.0, DEFAULT_TOL, DEFAULT_MAX_ITER);
            cfg.lambda = lambda_rule;
            let cells = run_bench(&cfg)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_json(&out.join("bench.json"), &cells)?;
            let csv_path = out.join("plot.csv");
            std::fs::write(&csv_path, plot_csv(&cells))
                .with_context(|| format!("writing {}", csv_path.display()))?;
            let failed: usize = cells.iter().map(|c| c.summary.failed).sum();
            emit(
                None,
                &json!({ "out": out, "cells": cells.len(), "failed_runs": failed }),
            )?;
            Ok(true)
        }
        Command::Verify {
            data,
            solver,
            lambda,
            lp,
            ks,
            contraction_steps,
            out,
        } => {
            let loaded = load(&data)?;
            let d = &loaded.data;
            let mut cfg = solver.config(d.n(), lambda, 1e-10, 100_000);
            // a small relative change alone does not certify feasibility
            cfg.feas_tol = cfg.feas_tol.or(Some(1e-8));
            let opts = VerifyOptions {
                lp,
                partitions: ks.into_iter().map(BlockSpec::Even).collect(),
                contraction_steps,
            };
            let report = verify_instance(d, &cfg, &opts)?;
            emit(out.as_deref(), &serde_json::to_value(&report)?)?;
            Ok(report.passed)
        }
        Command::Repro {
            scenario,
            replicates,
            seed,
            results,
        } => {
            let ids: Vec<ReproId> = if scenario.eq_ignore_ascii_case("all") {
                ReproId::ALL.to_vec()
            } else {
                vec![scenario.parse()?]
            };
            let mut all_passed = true;
            for id in ids {
                let mut s = ReproScenario::registered(id);
                s.replicates = replicates.unwrap_or(s.replicates);
                s.seed = seed.unwrap_or(s.seed);
                let outcome = run_repro(&s, Some(&results))?;
                for c in &outcome.checks {
                    eprintln!(
                        "{} {}: {} {} {} {}",
                        if c.passed { "PASS" } else { "FAIL" },
                        id.name(),
                        c.name,
                        c.observed,
                        c.op,
                        c.bound
                    );
                }
                all_passed &= outcome.passed;
            }
            emit(None, &json!({ "results": results, "passed": all_passed }))?;
            Ok(all_passed)
        }
    }
}

/// Splices `--config` entries in right after the subcommand so that flags
/// given on the command line, which come later, override them.
fn expand_config(mut argv: Vec<String>) -> anyhow::Result<Vec<String>> {
    let mut path = None;
    let mut i = 1;
    while i < argv.len() {
        if argv[i] == "--config" && i + 1 < argv.len() {
            path = Some(PathBuf::from(&argv[i + 1]));
            argv.drain(i..i + 2);
        } else if let Some(p) = argv[i].strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
            argv.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let mut extra = Vec::new();
    for (key, value) in read_config(&path)? {
        let key = key.replace('_', "-");
        if SWITCHES.contains(&key.as_str()) {
            match value.as_str() {
                "true" => extra.push(format!("--{key}")),
                "false" => {}
                v => return Err(arg_error(format!("{key} expects true or false, got {v:?}"))),
            }
        } else {
            extra.push(format!("--{key}={value}"));
        }
    }
    // the subcommand is the first bare word; global flags before it take a value
    let mut at = 1;
    while at < argv.len() && argv[at].starts_with("--") {
        at += if argv[at].contains('=') { 1 } else { 2 };
    }
    let at = (at + 1).min(argv.len());
    argv.splice(at..at, extra);
    Ok(argv)
}

fn arg_error(msg: String) -> anyhow::Error {
    dsppa_core::Error::Argument(msg).into()
}

fn worker_count(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Ok(v) = std::env::var("DSPPA_WORKERS") {
        return v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| arg_error(format!("DSPPA_WORKERS must be a positive integer, got {v:?}")));
    }
    match flag {
        Some(0) => Err(arg_error("--workers must be >= 1".into())),
        Some(w) => Ok(w),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = Cli::parse_from(argv);
    let outcome = worker_count(cli.workers).and_then(|w| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build()?;
        pool.install(|| run(cli.command))
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECKS_FAILED),
        Err(e) => fail(&e),
    }
}

fn fail(e: &anyhow::Error) -> ExitCode {
    // core errors already carry their cause in the message
    let code = match e.downcast_ref::<dsppa_core::Error>() {
        Some(c) => {
            eprintln!("error: {c}");
            c.exit_code()
        }
        None => {
            eprintln!("error: {e:#}");
            1
        }
    };
    ExitCode::from(code as u8)
}
