//! Closed-form proximal maps and penalty derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;
pub const DEFAULT_MCP_A: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    L1,
    Scad,
    Mcp,
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "lasso" => Ok(PenaltyKind::L1),
            "scad" => Ok(PenaltyKind::Scad),
            "mcp" => Ok(PenaltyKind::Mcp),
            other => Err(Error::arg(format!("unknown penalty {other:?}"))),
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyKind::L1 => "l1",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Mcp => "mcp",
        })
    }
}

/// A penalty `P_{a,λ}`; `a` is ignored for ℓ1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub a: f64,
}

impl PenaltySpec {
    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::L1, lambda, None)
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyKind::Scad, lambda, Some(a))
    }

    pub fn mcp(lambda: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyKind::Mcp, lambda, Some(a))
    }

    /// Builds and validates a spec, filling in the default shape when `a` is absent.
    pub fn new(kind: PenaltyKind, lambda: f64, a: Option<f64>) -> Result<Self> {
        let a = a.unwrap_or(match kind {
            PenaltyKind::L1 => f64::INFINITY,
            PenaltyKind::Scad => DEFAULT_SCAD_A,
            PenaltyKind::Mcp => DEFAULT_MCP_A,
        });
        let spec = PenaltySpec { kind, lambda, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::arg(format!(
                "penalty λ must be finite and > 0, got {}",
                self.lambda
            )));
        }
        match self.kind {
            PenaltyKind::L1 => Ok(()),
            PenaltyKind::Scad if !(self.a > 2.0) => {
                Err(Error::arg(format!("SCAD requires a > 2, got {}", self.a)))
            }
            PenaltyKind::Mcp if !(self.a > 1.0) => {
                Err(Error::arg(format!("MCP requires a > 1, got {}", self.a)))
            }
            _ => Ok(()),
        }
    }

    /// `∇P_{a,λ}(t)` for a single `t = |β| ≥ 0`.
    pub fn derivative_at(&self, t: f64) -> f64 {
        let (lam, a) = (self.lambda, self.a);
        match self.kind {
            PenaltyKind::L1 => lam,
            PenaltyKind::Scad => {
                if t <= lam {
                    lam
                } else if t < a * lam {
                    (a * lam - t) / (a - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyKind::Mcp => {
                if t <= a * lam {
                    lam - t / a
                } else {
                    0.0
                }
            }
        }
    }
}

fn shrink(v: f64, tau: f64) -> f64 {
    let m = v.abs() - tau;
    if m > 0.0 {
        m.copysign(v)
    } else {
        0.0
    }
}

/// `sign(v)·max(|v| − τ, 0)` elementwise, with `sign(0) = 0`.
pub fn soft_threshold(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::arg(format!("threshold must be >= 0, got {tau}")));
    }
    Ok(v.iter().map(|&x| shrink(x, tau)).collect())
}

pub fn weighted_soft_threshold(v: &[f64], tau: &[f64]) -> Result<Vec<f64>> {
    if v.len() != tau.len() {
        return Err(Error::dim(format!(
            "weighted soft-threshold: {} values, {} thresholds",
            v.len(),
            tau.len()
        )));
    }
    if let Some(t) = tau.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::arg(format!("threshold must be >= 0, got {t}")));
    }
    Ok(v.iter().zip(tau).map(|(&x, &t)| shrink(x, t)).collect())
}

/// Elementwise clamp of `v` to `[-bound_j, bound_j]`.
pub fn project_linf_box(v: &[f64], bound: &[f64]) -> Result<Vec<f64>> {
    if v.len() != bound.len() {
        return Err(Error::dim(format!(
            "box projection: {} values, {} bounds",
            v.len(),
            bound.len()
        )));
    }
    if let Some(b) = bound.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::arg(format!("box bound must be >= 0, got {b}")));
    }
    Ok(v.iter().zip(bound).map(|(&x, &b)| clamp(x, b)).collect())
}

#[inline]
pub(crate) fn clamp(x: f64, b: f64) -> f64 {
    x.max(-b).min(b)
}

#[inline]
pub(crate) fn shrink_scalar(v: f64, tau: f64) -> f64 {
    shrink(v, tau)
}

/// `∇P_{a,λ}(|β_j|)` for every entry of `beta_abs`.
pub fn penalty_derivative(spec: &PenaltySpec, beta_abs: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if let Some(t) = beta_abs.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::arg(format!("penalty derivative needs |β| >= 0, got {t}")));
    }
    Ok(beta_abs.iter().map(|&t| spec.derivative_at(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
        let steps = ((hi - lo) / step).round() as usize;
        let mut best = (f64::INFINITY, lo);
        for k in 0..=steps {
            let b = lo + k as f64 * step;
            let val = f(b);
            if val < best.0 {
                best = (val, b);
            }
        }
        best.1
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(
            soft_threshold(&[3.0, -0.5, 0.0], 1.0).unwrap(),
            vec![2.0, 0.0, 0.0]
        );
        let v = [1.25, -7.0, 0.0, 3e-9];
        assert_eq!(soft_threshold(&v, 0.0).unwrap(), v.to_vec());
        assert!(soft_threshold(&v, -1e-3).is_err());
    }

    #[test]
    fn soft_threshold_matches_grid_minimizer() {
        let eta = 2.0;
        let got = soft_threshold(&[1.5], 1.0 / eta).unwrap()[0];
        let grid = grid_argmin(|b| b.abs() + eta / 2.0 * (b - 1.5).powi(2), -3.0, 3.0, 1e-4);
        assert!((got - 1.0).abs() < 1e-15);
        assert!((got - grid).abs() < 1e-4);
    }

    #[test]
    fn weighted_soft_threshold_cases() {
        let v = [2.0, -1.0, 0.3];
        assert_eq!(
            weighted_soft_threshold(&v, &[0.5; 3]).unwrap(),
            soft_threshold(&v, 0.5).unwrap()
        );
        let out = weighted_soft_threshold(&v, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(out, vec![1.0, -1.0, 0.0]);
        assert!(matches!(
            weighted_soft_threshold(&v, &[1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn weighted_soft_threshold_matches_grid() {
        let v = [0.83, -2.1, 0.05, 1.4];
        let tau = [0.2, 0.7, 0.1, 1.9];
        let got = weighted_soft_threshold(&v, &tau).unwrap();
        for j in 0..4 {
            let g = grid_argmin(|b| tau[j] * b.abs() + 0.5 * (b - v[j]).powi(2), -3.0, 3.0, 1e-6);
            assert!((got[j] - g).abs() < 1e-6, "coordinate {j}: {} vs {g}", got[j]);
        }
    }

    #[test]
    fn box_projection_cases() {
        let out = project_linf_box(&[2.0, -3.0, 0.2], &[1.0; 3]).unwrap();
        assert_eq!(out, vec![1.0, -1.0, 0.2]);
        let inside = [0.1, -0.9, 0.0];
        assert_eq!(project_linf_box(&inside, &[1.0; 3]).unwrap(), inside.to_vec());
        assert!(project_linf_box(&inside, &[1.0, -0.1, 1.0]).is_err());
    }

    #[test]
    fn box_projection_matches_grid() {
        let v = [1.7, -0.4, -2.5];
        let b = [0.9, 1.0, 0.25];
        let got = project_linf_box(&v, &b).unwrap();
        for j in 0..3 {
            let g = grid_argmin(|z| (z - v[j]).powi(2), -b[j], b[j], 1e-6);
            assert!((got[j] - g).abs() < 1e-6);
        }
    }

    #[test]
    fn scad_and_mcp_derivatives() {
        let scad = PenaltySpec::scad(1.0, 3.7).unwrap();
        let d = penalty_derivative(&scad, &[0.5, 2.0, 10.0]).unwrap();
        assert_eq!(d[0], 1.0);
        assert!((d[1] - 1.7 / 2.7).abs() < 1e-15);
        assert!((d[1] - 0.62963).abs() < 1e-5);
        assert_eq!(d[2], 0.0);

        let mcp = PenaltySpec::mcp(1.0, 3.0).unwrap();
        assert_eq!(
            penalty_derivative(&mcp, &[0.0, 1.5, 4.0]).unwrap(),
            vec![1.0, 0.5, 0.0]
        );

        let l1 = PenaltySpec::l1(0.3).unwrap();
        assert_eq!(penalty_derivative(&l1, &[0.0, 5.0, 1e9]).unwrap(), vec![0.3; 3]);
    }

    #[test]
    fn boundary_branches_follow_inequality_directions() {
        let scad = PenaltySpec::scad(1.0, 3.7).unwrap();
        assert_eq!(scad.derivative_at(3.7), 0.0);
        let mcp = PenaltySpec::mcp(2.0, 3.0).unwrap();
        // |β| = aλ lands on the λ − |β|/a branch, which evaluates to zero
        assert_eq!(mcp.derivative_at(6.0), 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(PenaltySpec::scad(1.0, 2.0).is_err());
        assert!(PenaltySpec::mcp(1.0, 1.0).is_err());
        assert!(PenaltySpec::l1(0.0).is_err());
        let spec = PenaltySpec::new(PenaltyKind::Scad, 0.5, None).unwrap();
        assert_eq!(spec.a, DEFAULT_SCAD_A);
        assert!(penalty_derivative(&spec, &[-1.0]).is_err());
        assert_eq!("MCP".parse::<PenaltyKind>().unwrap(), PenaltyKind::Mcp);
        assert!("ridge".parse::<PenaltyKind>().is_err());
    }

    proptest! {
        #[test]
        fn soft_threshold_non_expansive(
            pair in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..20),
            tau in 0.0f64..10.0,
        ) {
            let (u, v): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let su = soft_threshold(&u, tau).unwrap();
            let sv = soft_threshold(&v, tau).unwrap();
            let lhs: f64 = su.iter().zip(&sv).map(|(a, b)| (a - b).powi(2)).sum();
            let rhs: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn projection_idempotent(
            pair in prop::collection::vec((-50.0f64..50.0, 0.0f64..20.0), 1..20),
        ) {
            let (v, b): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
            let once = project_linf_box(&v, &b).unwrap();
            let twice = project_linf_box(&once, &b).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn derivative_is_lambda_on_unit_interval(lambda in 0.01f64..10.0, frac in 0.0f64..1.0) {
            let scad = PenaltySpec::scad(lambda, 3.7).unwrap();
            prop_assert_eq!(scad.derivative_at(frac * lambda), lambda);
            let mcp = PenaltySpec::mcp(lambda, 3.0).unwrap();
            prop_assert!(mcp.derivative_at(0.0) == lambda);
        }

        #[test]
        fn derivative_continuous_at_breakpoints(lambda in 0.01f64..10.0, a_off in 0.01f64..5.0) {
            let scad = PenaltySpec::scad(lambda, 2.0 + a_off).unwrap();
            let mcp = PenaltySpec::mcp(lambda, 1.0 + a_off).unwrap();
            for (spec, points) in [(scad, vec![lambda, scad.a * lambda]), (mcp, vec![mcp.a * lambda])] {
                for t in points {
                    let h = 1e-13 * (1.0 + t);
                    let left = spec.derivative_at(t - h);
                    let right = spec.derivative_at(t + h);
                    prop_assert!((left - right).abs() <= 1e-12 * (1.0 + lambda));
                }
            }
        }
    }
}
