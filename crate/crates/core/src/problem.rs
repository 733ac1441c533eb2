use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, DesignMatrix};

/// A regression instance `(X, y)` together with `Xᵀy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemData {
    x: DesignMatrix,
    y: Vec<f64>,
    xty: Vec<f64>,
}

impl ProblemData {
    pub fn new(x: DesignMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::dim(format!(
                "response has {} entries, design has {} rows",
                y.len(),
                x.rows()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite response at index {i}")));
        }
        let xty = x.t_matvec(&y)?;
        Ok(ProblemData { x, y, xty })
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `Xᵀy`.
    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// `‖Xᵀy‖∞ / n`, the smallest λ for which `β = 0` is feasible.
    pub fn lambda_max(&self) -> f64 {
        norm_inf(&self.xty) / self.n() as f64
    }

    /// `Xᵀ(Xβ − y) / n`.
    pub fn scaled_correlation(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let mut resid = self.x.matvec(beta)?;
        for (r, y) in resid.iter_mut().zip(&self.y) {
            *r -= y;
        }
        let n = self.n() as f64;
        Ok(self.x.t_matvec(&resid)?.into_iter().map(|v| v / n).collect())
    }

    /// `‖y − Xβ‖₂²`.
    pub fn rss(&self, beta: &[f64]) -> Result<f64> {
        let fit = self.x.matvec(beta)?;
        Ok(fit.iter().zip(&self.y).map(|(f, y)| (y - f).powi(2)).sum())
    }
}
