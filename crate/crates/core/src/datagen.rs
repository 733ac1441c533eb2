//! Seeded synthetic regression data.
//!
//! Every generator draws from `ChaCha20Rng::seed_from_u64(seed)` on its own
//! stream, so regenerating one part (say the noise) never shifts another.
//! Design rows use one stream each and can be generated in parallel without
//! changing the output.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;
use crate::problem::ProblemData;

pub const SPARSE8_VALUES: [f64; 8] = [3.0, 1.5, 10.0, 4.0, 2.0, 5.0, 2.5, 4.5];
pub const DENSE_SEGMENTS: usize = 80;
pub const DENSE_ACTIVE_SEGMENTS: usize = 10;

const STREAM_DESIGN: u64 = 1 << 60;
const STREAM_BETA: u64 = 2 << 60;
const STREAM_NOISE: u64 = 3 << 60;

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BetaPattern {
    /// Eight nonzeros with the fixed values of [`SPARSE8_VALUES`].
    Sparse8,
    /// `p = 2560 s`, ten of eighty segments active.
    Dense { s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseKind {
    Gaussian,
    /// `0.4 N(−3, 4) + 0.6 N(2, 1)`, variances as written.
    MixedNormal,
    StudentT {
        df: f64,
    },
    Cauchy,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        if let Some(df) = s.strip_prefix("t").and_then(|r| r.strip_prefix(':').or(Some(r))) {
            if let Ok(df) = df.trim_matches(|c| c == '(' || c == ')').parse::<f64>() {
                return Ok(NoiseKind::StudentT { df });
            }
        }
        match s.as_str() {
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            "mixed" | "mixed-normal" | "mixednormal" => Ok(NoiseKind::MixedNormal),
            "cauchy" => Ok(NoiseKind::Cauchy),
            other => Err(Error::arg(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// A synthetic scenario: AR(1) design, coefficient pattern and noise law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta: BetaPattern,
    pub noise: NoiseKind,
    /// Multiplier on the noise draws; 1 gives the standard scenarios.
    pub noise_scale: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn sparse(n: usize, p: usize, rho: f64, seed: u64) -> Self {
        ScenarioSpec {
            n,
            p,
            rho,
            beta: BetaPattern::Sparse8,
            noise: NoiseKind::Gaussian,
            noise_scale: 1.0,
            seed,
        }
    }

    /// `(n, p) = (720 s, 2560 s)`, ρ = 0.5.
    pub fn dense(s: usize, seed: u64) -> Self {
        ScenarioSpec {
            n: 720 * s,
            p: 2560 * s,
            rho: 0.5,
            beta: BetaPattern::Dense { s },
            noise: NoiseKind::Gaussian,
            noise_scale: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::arg("n and p must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::arg(format!("ρ must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::arg("noise scale must be finite and >= 0"));
        }
        match self.beta {
            BetaPattern::Sparse8 if self.p < 8 => {
                Err(Error::arg(format!("Sparse8 needs p >= 8, got {}", self.p)))
            }
            BetaPattern::Dense { s } if s == 0 || self.p != 2560 * s => Err(Error::arg(format!(
                "Dense{{s={s}}} needs s >= 1 and p = 2560 s, got p = {}",
                self.p
            ))),
            _ => Ok(()),
        }?;
        if let NoiseKind::StudentT { df } = self.noise {
            if !(df > 0.0) {
                return Err(Error::arg(format!("t degrees of freedom must be > 0, got {df}")));
            }
        }
        Ok(())
    }
}

/// Covariance of the design rows, kept in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SigmaDescriptor {
    /// `Σ_{jk} = ρ^{|j−k|}`.
    Ar1 { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DesignMatrix,
    pub y: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub sigma: SigmaDescriptor,
}

impl Dataset {
    pub fn problem(&self) -> Result<ProblemData> {
        ProblemData::new(self.x.clone(), self.y.clone())
    }
}

/// Rows i.i.d. `N(0, Σ)` with `Σ_{jk} = ρ^{|j−k|}` via the recursion
/// `x_1 = z_1`, `x_j = ρ x_{j−1} + √(1−ρ²) z_j`.
pub fn gen_ar1_design(n: usize, p: usize, rho: f64, seed: u64) -> Result<DesignMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::arg(format!("ρ must lie in [0, 1), got {rho}")));
    }
    let scale = (1.0 - rho * rho).sqrt();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = rng_for(seed, STREAM_DESIGN + i as u64);
            let mut prev = 0.0;
            (0..p)
                .map(|j| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    prev = if j == 0 { z } else { rho * prev + scale * z };
                    prev
                })
                .collect::<Vec<_>>()
        })
        .collect();
    DesignMatrix::new(n, p, data)
}

/// Eight distinct random positions carrying the values of [`SPARSE8_VALUES`].
pub fn gen_sparse_beta(p: usize, seed: u64) -> Result<Vec<f64>> {
    if p < SPARSE8_VALUES.len() {
        return Err(Error::arg(format!("Sparse8 needs p >= 8, got {p}")));
    }
    let mut rng = rng_for(seed, STREAM_BETA);
    let mut beta = vec![0.0; p];
    for (pos, v) in index::sample(&mut rng, p, SPARSE8_VALUES.len())
        .into_iter()
        .zip(SPARSE8_VALUES)
    {
        beta[pos] = v;
    }
    Ok(beta)
}

/// `p = 2560 s` split into 80 segments of `32 s`; ten segments are active
/// with `β_j = ξ_j (1 + |a_j|)`, `ξ_j = ±1`, `a_j ~ N(0, 1)`.
pub fn gen_dense_beta(s: usize, seed: u64) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::arg("Dense pattern needs s >= 1"));
    }
    let seg = 32 * s;
    let p = seg * DENSE_SEGMENTS;
    let mut rng = rng_for(seed, STREAM_BETA);
    let mut segments = index::sample(&mut rng, DENSE_SEGMENTS, DENSE_ACTIVE_SEGMENTS).into_vec();
    segments.sort_unstable();
    let mut beta = vec![0.0; p];
    for sgm in segments {
        for b in &mut beta[sgm * seg..(sgm + 1) * seg] {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a: f64 = StandardNormal.sample(&mut rng);
            *b = sign * (1.0 + a.abs());
        }
    }
    Ok(beta)
}

/// `n` i.i.d. noise draws.
pub fn gen_noise(n: usize, kind: NoiseKind, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng_for(seed, STREAM_NOISE);
    match kind {
        NoiseKind::Gaussian => Ok((0..n).map(|_| StandardNormal.sample(&mut rng)).collect()),
        NoiseKind::MixedNormal => Ok((0..n)
            .map(|_| {
                let first = rng.random_bool(0.4);
                let z: f64 = StandardNormal.sample(&mut rng);
                if first {
                    -3.0 + 2.0 * z
                } else {
                    2.0 + z
                }
            })
            .collect()),
        NoiseKind::StudentT { df } => {
            let chi =
                ChiSquared::new(df).map_err(|e| Error::arg(format!("t degrees of freedom {df}: {e}")))?;
            Ok((0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let v = chi.sample(&mut rng);
                    z / (v / df).sqrt()
                })
                .collect())
        }
        NoiseKind::Cauchy => Ok((0..n)
            .map(|_| {
                let u: f64 = rng.random();
                (std::f64::consts::PI * (u - 0.5)).tan()
            })
            .collect()),
    }
}

/// `y = X β* + ε` for the scenario.
pub fn gen_dataset(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let x = gen_ar1_design(spec.n, spec.p, spec.rho, spec.seed)?;
    let beta_star = match spec.beta {
        BetaPattern::Sparse8 => gen_sparse_beta(spec.p, spec.seed)?,
        BetaPattern::Dense { s } => gen_dense_beta(s, spec.seed)?,
    };
    let noise = gen_noise(spec.n, spec.noise, spec.seed)?;
    let mut y = x.matvec(&beta_star)?;
    for (yi, e) in y.iter_mut().zip(&noise) {
        *yi += spec.noise_scale * e;
    }
    Ok(Dataset {
        x,
        y,
        beta_star,
        sigma: SigmaDescriptor::Ar1 { rho: spec.rho },
    })
}
