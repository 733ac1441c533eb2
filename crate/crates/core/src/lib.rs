//! Solvers for the Dantzig selector
//!
//! ```text
//! minimize ‖β‖₁  subject to  ‖Xᵀ(Xβ − y)/n‖∞ ≤ λ
//! ```
//!
//! and its SCAD/MCP-penalized variants, using proximal point iterations that
//! split the features into column blocks. The problem is solved in the
//! equivalent form `min ‖β‖₁ + δ(z)` subject to `Aβ − z = Xᵀy` with
//! `A = XᵀX` and `‖z‖∞ ≤ nλ`.
//!
//! The library never creates thread pools. Callers that want a particular
//! worker count install a rayon pool around the call; results do not depend
//! on its size.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod datagen;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lla;
pub mod metrics;
pub mod problem;
pub mod prox;
pub mod repro;
pub mod solver;
pub mod tuning;
pub mod verify;

pub use baselines::{ladmm_solve, tadmm_solve};
pub use error::{Error, Result};
pub use linalg::{DesignMatrix, GramBlocks, Partition};
pub use lla::{lla_solve, lla_solve_from, LlaConfig, LlaReport};
pub use problem::ProblemData;
pub use prox::{PenaltyKind, PenaltySpec};
pub use solver::{
    ippa_solve, ppa_solve, pppa_solve, solve, solve_in, Algorithm, BlockSpec, SolveReport, SolverConfig,
    SolverState, Workspace,
};

#[cfg(test)]
mod docs_index {
    const INDEX: &str = include_str!("../../../docs/operations.md");

    const OPERATIONS: [&str; 37] = [
        "gram_blocks",
        "blocked_matvec",
        "power_method_max_eigen",
        "soft_threshold",
        "weighted_soft_threshold",
        "project_linf_box",
        "penalty_derivative",
        "beta_block_update",
        "z_update",
        "dual_update",
        "stopping_check",
        "ppa_solve",
        "pppa_solve",
        "ippa_solve",
        "compute_weights",
        "lla_solve",
        "ladmm_solve",
        "tadmm_solve",
        "build_contraction_metric",
        "h_norm_sq",
        "check_contraction",
        "kkt_feasibility",
        "lp_oracle_solve",
        "partition_insensitivity_check",
        "gen_ar1_design",
        "gen_sparse_beta",
        "gen_dense_beta",
        "gen_noise",
        "gen_dataset",
        "estimation_errors",
        "selection_counts",
        "hbic_score",
        "lambda_grid_search",
        "read_matrix",
        "write_report",
        "run_bench",
        "run_repro",
    ];

    fn rows() -> Vec<(String, String)> {
        INDEX
            .lines()
            .filter_map(|l| {
                let cells: Vec<&str> = l.split('|').map(str::trim).collect();
                let name = cells.get(1)?.strip_prefix('`')?.strip_suffix('`')?;
                let module = cells.get(2)?.trim_matches('`');
                Some((name.to_string(), module.to_string()))
            })
            .collect()
    }

    #[test]
    fn every_operation_is_indexed() {
        let names: Vec<String> = rows().into_iter().map(|r| r.0).collect();
        for op in OPERATIONS {
            assert!(
                names.iter().any(|n| n == op),
                "{op} missing from docs/operations.md"
            );
        }
    }

    #[test]
    fn every_row_names_a_real_function() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("src");
        for (name, module) in rows() {
            let src = std::fs::read_to_string(dir.join(format!("{module}.rs"))).unwrap();
            assert!(
                src.contains(&format!("pub fn {name}")),
                "{module}::{name} not found"
            );
        }
    }
}
