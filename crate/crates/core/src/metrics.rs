//! Estimation and selection metrics against a known truth.

use serde::{Deserialize, Serialize};

use crate::datagen::SigmaDescriptor;
use crate::error::{Error, Result};
use crate::solver::SolveReport;

/// Coefficients with `|β_j|` at or below this count as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationErrors {
    /// `‖β̂ − β*‖₁`
    pub l1: f64,
    /// `‖β̂ − β*‖₂²`
    pub l2_sq: f64,
    /// `(β̂ − β*)ᵀ Σ (β̂ − β*)`
    pub model: f64,
}

/// ℓ1, squared ℓ2 and model error. The AR(1) quadratic form is evaluated in
/// `O(p)` with the recursion `f_i = d_i + ρ f_{i−1}`.
pub fn estimation_errors(
    beta_hat: &[f64],
    beta_star: &[f64],
    sigma: &SigmaDescriptor,
) -> Result<EstimationErrors> {
    if beta_hat.len() != beta_star.len() {
        return Err(Error::dim(format!(
            "estimate has length {}, truth has length {}",
            beta_hat.len(),
            beta_star.len()
        )));
    }
    let d: Vec<f64> = beta_hat.iter().zip(beta_star).map(|(a, b)| a - b).collect();
    let l1 = d.iter().map(|v| v.abs()).sum();
    let l2_sq = d.iter().map(|v| v * v).sum();
    let model = match *sigma {
        SigmaDescriptor::Ar1 { rho } => {
            let mut f = 0.0;
            let mut total = 0.0;
            for &di in &d {
                f = di + rho * f;
                total += di * (2.0 * f - di);
            }
            total.max(0.0)
        }
    };
    Ok(EstimationErrors { l1, l2_sq, model })
}

/// False positives, false negatives and the mean absolute error `‖β̂ − β*‖₁/p`.
pub fn selection_counts(beta_hat: &[f64], beta_star: &[f64], zero_tol: f64) -> Result<(usize, usize, f64)> {
    if beta_hat.len() != beta_star.len() {
        return Err(Error::dim("estimate and truth differ in length"));
    }
    if !(zero_tol > 0.0) {
        return Err(Error::arg(format!("zero tolerance must be > 0, got {zero_tol}")));
    }
    let mut fp = 0;
    let mut fn_ = 0;
    let mut abs = 0.0;
    for (h, s) in beta_hat.iter().zip(beta_star) {
        let selected = h.abs() > zero_tol;
        if selected && *s == 0.0 {
            fp += 1;
        }
        if !selected && *s != 0.0 {
            fn_ += 1;
        }
        abs += (h - s).abs();
    }
    let ae = if beta_hat.is_empty() {
        0.0
    } else {
        abs / beta_hat.len() as f64
    };
    Ok((fp, fn_, ae))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub l1_error: f64,
    pub l2_error_sq: f64,
    pub model_error: f64,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
    #[serde(rename = "AE")]
    pub ae: f64,
    pub iterations: usize,
    pub wall_time: f64,
}

impl MetricReport {
    pub fn from_solve(
        report: &SolveReport,
        beta_star: &[f64],
        sigma: &SigmaDescriptor,
        zero_tol: f64,
    ) -> Result<Self> {
        let e = estimation_errors(&report.beta, beta_star, sigma)?;
        let (fp, fn_, ae) = selection_counts(&report.beta, beta_star, zero_tol)?;
        Ok(MetricReport {
            l1_error: e.l1,
            l2_error_sq: e.l2_sq,
            model_error: e.model,
            fp,
            fn_,
            ae,
            iterations: report.iterations,
            wall_time: report.wall_time_s,
        })
    }
}
