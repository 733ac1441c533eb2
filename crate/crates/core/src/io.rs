//! Matrix files (DSM1 binary and CSV), key=value configs and JSON run reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, ScenarioSpec};
use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;
use crate::metrics::MetricReport;
use crate::solver::{SolveReport, Termination};

pub const DSM1_MAGIC: &[u8; 4] = b"DSM1";
const DSM1_HEADER: usize = 4 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Dsm1,
    Csv,
    /// DSM1 if the file starts with the magic bytes, CSV otherwise.
    Auto,
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dsm1" | "bin" => Ok(MatrixFormat::Dsm1),
            "csv" => Ok(MatrixFormat::Csv),
            "auto" => Ok(MatrixFormat::Auto),
            other => Err(Error::arg(format!("unknown matrix format {other:?}"))),
        }
    }
}

pub fn encode_dsm1(m: &DesignMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(DSM1_HEADER + 8 * m.data().len());
    out.extend_from_slice(DSM1_MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_dsm1(bytes: &[u8]) -> Result<DesignMatrix> {
    if bytes.len() < 4 || &bytes[..4] != DSM1_MAGIC {
        return Err(Error::Format("missing DSM1 magic bytes".into()));
    }
    if bytes.len() < DSM1_HEADER {
        return Err(Error::Format(format!(
            "DSM1 header needs {DSM1_HEADER} bytes, file has {}",
            bytes.len()
        )));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("DSM1 shape {rows}x{cols} overflows")))?;
    let actual = (bytes.len() - DSM1_HEADER) as u64;
    if actual != expected {
        return Err(Error::Format(format!(
            "DSM1 payload for {rows}x{cols} needs {expected} bytes, found {actual}"
        )));
    }
    let data = bytes[DSM1_HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DesignMatrix::new(rows as usize, cols as usize, data)
}

/// Parses comma-separated rows. A first line with any non-numeric field is
/// taken as a header and skipped.
pub fn parse_csv(text: &str) -> Result<DesignMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("not a number ({e})"),
                })
            }
        };
        first = false;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {w} fields, found {}", values.len()),
                })
            }
            _ => {}
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at line {line_no}, field {}",
                j + 1
            )));
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Format("CSV contains no data rows".into()));
    }
    DesignMatrix::from_rows(&rows)
}

pub fn format_csv(m: &DesignMatrix) -> String {
    let mut s = String::with_capacity(m.data().len() * 24);
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<DesignMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = match format {
        MatrixFormat::Auto if bytes.starts_with(DSM1_MAGIC) => MatrixFormat::Dsm1,
        MatrixFormat::Auto => MatrixFormat::Csv,
        f => f,
    };
    match format {
        MatrixFormat::Dsm1 => decode_dsm1(&bytes),
        _ => {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::Format(format!("{} is not UTF-8 text", path.display())))?;
            parse_csv(&text)
        }
    }
}

pub fn write_matrix(path: &Path, m: &DesignMatrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => format_csv(m).into_bytes(),
        _ => encode_dsm1(m),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a vector stored as a single column or a single row.
pub fn read_vector(path: &Path, format: MatrixFormat) -> Result<Vec<f64>> {
    let m = read_matrix(path, format)?;
    if m.cols() == 1 || m.rows() == 1 {
        Ok(m.data().to_vec())
    } else {
        Err(Error::dim(format!(
            "{} holds a {}x{} matrix, expected a vector",
            path.display(),
            m.rows(),
            m.cols()
        )))
    }
}

pub fn write_vector(path: &Path, v: &[f64], format: MatrixFormat) -> Result<()> {
    let m = DesignMatrix::new(v.len(), 1, v.to_vec())?;
    write_matrix(path, &m, format)
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected key=value, found {line:?}"),
            });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse {
                line: idx + 1,
                message: "empty key".into(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_values(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub entries: usize,
    pub final_rel_change: Option<f64>,
    pub final_residual_inf: Option<f64>,
    pub max_residual_inf: Option<f64>,
}

/// The JSON document written for every solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub penalty: String,
    pub lambda: f64,
    pub mu: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub beta_nnz: usize,
    pub metrics: Option<MetricReport>,
    pub trace_summary: TraceSummary,
    pub wall_time_s: f64,
    pub precompute_time_s: f64,
    pub beta: Vec<f64>,
}

impl RunReport {
    pub fn new(report: &SolveReport, penalty: &str, metrics: Option<MetricReport>, zero_tol: f64) -> Self {
        let t = &report.trace;
        RunReport {
            algorithm: report.algorithm.name().to_string(),
            penalty: penalty.to_string(),
            lambda: report.lambda,
            mu: report.mu,
            k: report.k,
            iterations: report.iterations,
            converged: report.converged,
            termination: report.termination,
            beta_nnz: report.beta.iter().filter(|b| b.abs() > zero_tol).count(),
            metrics,
            trace_summary: TraceSummary {
                entries: t.len(),
                final_rel_change: t.last().map(|e| e.rel_change),
                final_residual_inf: t.last().map(|e| e.residual_inf),
                max_residual_inf: t.iter().map(|e| e.residual_inf).reduce(f64::max),
            },
            wall_time_s: report.wall_time_s,
            precompute_time_s: report.precompute_time_s,
            beta: report.beta.clone(),
        }
    }

    /// The same report with timings zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.wall_time_s = 0.0;
        r.precompute_time_s = 0.0;
        if let Some(m) = r.metrics.as_mut() {
            m.wall_time = 0.0;
        }
        r
    }
}

/// Pretty JSON to `path`. Floats are written in shortest round-trip form.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes `X.dsm1`, `y.csv`, `beta_star.csv` and `scenario.json` into `dir`.
pub fn write_dataset(dir: &Path, ds: &Dataset, spec: &ScenarioSpec) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(&dir.join("X.dsm1"), &ds.x, MatrixFormat::Dsm1)?;
    write_vector(&dir.join("y.csv"), &ds.y, MatrixFormat::Csv)?;
    write_vector(&dir.join("beta_star.csv"), &ds.beta_star, MatrixFormat::Csv)?;
    write_json(&dir.join("scenario.json"), spec)
}
