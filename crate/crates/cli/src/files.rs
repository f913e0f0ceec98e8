//! JSON documents written and read by the command-line tool.
//!
//! Every document carries a `"kind"` tag. Network files follow the library
//! schema and may add a `"meta"` object with provenance.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use netred::io::{self as nio, rows};
use netred::reduction::{ReducedModel, SolverStatus};
use netred::semistable::AveragePart;
use netred::SecondOrderNetwork;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::sweep::SweepReport;

pub const NETWORK: &str = "network";
pub const REDUCED: &str = "reduced-model";
pub const TRIDIAGONAL: &str = "tridiagonal";
pub const SWEEP: &str = "sweep-report";

/// Network JSON with optional extra top-level members.
pub fn network_document(net: &SecondOrderNetwork, extra: Map<String, Value>) -> Value {
    let mut v = nio::network_to_json(net);
    let obj = v.as_object_mut().expect("network JSON is an object");
    obj.insert("kind".into(), json!(NETWORK));
    obj.extend(extra);
    v
}

pub fn to_pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("documents serialize");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or to `fallback` when no path is given.
pub fn emit(path: Option<&Path>, text: &str, fallback: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => fallback.write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)?;
    Ok(nio::parse_json(&text)?)
}

/// Loads a network file and its `meta` member.
pub fn load_network(path: &Path) -> CliResult<(SecondOrderNetwork, Value)> {
    let v = read_json(path)?;
    if let Some(kind) = v.get("kind").and_then(Value::as_str) {
        if kind != NETWORK {
            return Err(CliError::Usage(format!("{} holds a {kind}, expected a network", path.display())));
        }
    }
    let net = nio::network_from_json(&v)?;
    let meta = v.get("meta").cloned().unwrap_or(Value::Null);
    Ok((net, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageDocument {
    pub alpha: f64,
    /// `S₀ᵀF`.
    #[serde(rename = "F", with = "rows")]
    pub f: DMatrix<f64>,
    /// `HS₀`.
    #[serde(rename = "H", with = "rows")]
    pub h: DMatrix<f64>,
    /// Orthonormal kernel basis of `K`.
    #[serde(rename = "S0", with = "rows")]
    pub s0: DMatrix<f64>,
}

impl AverageDocument {
    pub fn part(&self) -> AveragePart {
        AveragePart {
            alpha: self.alpha,
            f: self.f.clone(),
            h: self.h.clone(),
        }
    }
}

/// Summary of one reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceReport {
    /// Order of the model handed to the solver.
    pub n: usize,
    pub r: usize,
    pub status: SolverStatus,
    pub iterations: usize,
    pub gamma_raw: f64,
    pub certified_bound: f64,
    pub actual_h2_error: f64,
    pub original_h2_norm: f64,
    pub bound_holds: bool,
    pub wall_time_seconds: f64,
    /// The input was semistable and only its stable part was reduced.
    pub stable_part_only: bool,
}

impl ReduceReport {
    pub fn line(&self) -> String {
        format!(
            "r={} status={} gamma={:.6e} bound={:.6e} actual={:.6e} original={:.6e} bound_holds={} iterations={} time={:.3}s{}",
            self.r,
            status_name(self.status),
            self.gamma_raw,
            self.certified_bound,
            self.actual_h2_error,
            self.original_h2_norm,
            self.bound_holds,
            self.iterations,
            self.wall_time_seconds,
            if self.stable_part_only { " part=stable" } else { "" }
        )
    }
}

pub fn status_name(s: SolverStatus) -> &'static str {
    match s {
        SolverStatus::Optimal => "optimal",
        SolverStatus::NearOptimal => "near-optimal",
        SolverStatus::Infeasible => "infeasible",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedDocument {
    pub kind: String,
    pub reduced: ReducedModel,
    pub report: ReduceReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<AverageDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalDocument {
    pub kind: String,
    pub diagonally_dominant: bool,
    #[serde(rename = "K_tilde", with = "rows")]
    pub k_tilde: DMatrix<f64>,
    #[serde(rename = "U", with = "rows")]
    pub u: DMatrix<f64>,
    /// Network form, present only when `K̃` is diagonally dominant.
    pub network: Option<Value>,
}

pub fn load_reduced(path: &Path) -> CliResult<ReducedDocument> {
    let v = read_json(path)?;
    match v.get("kind").and_then(Value::as_str) {
        Some(REDUCED) => Ok(serde_json::from_value(v)?),
        other => Err(CliError::Usage(format!(
            "{} is not a reduced-model file (kind {:?})",
            path.display(),
            other
        ))),
    }
}

/// Any document the tool writes.
#[derive(Debug, Clone)]
pub enum Document {
    Network(Box<SecondOrderNetwork>, Value),
    Reduced(Box<ReducedDocument>),
    Tridiagonal(Box<TridiagonalDocument>),
    Sweep(Box<SweepReport>),
    Laplacian(netred::Laplacian),
}

pub fn load_any(path: &Path) -> CliResult<Document> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => return Ok(Document::Sweep(Box::new(SweepReport::read_csv(path)?))),
        Some("mtx") => return Ok(Document::Laplacian(nio::load_laplacian(path)?)),
        _ => {}
    }
    let v = read_json(path)?;
    match v.get("kind").and_then(Value::as_str) {
        Some(REDUCED) => Ok(Document::Reduced(Box::new(serde_json::from_value(v)?))),
        Some(TRIDIAGONAL) => Ok(Document::Tridiagonal(Box::new(serde_json::from_value(v)?))),
        Some(SWEEP) => Ok(Document::Sweep(Box::new(serde_json::from_value(v)?))),
        Some(NETWORK) | None => {
            let net = nio::network_from_json(&v)?;
            Ok(Document::Network(Box::new(net), v.get("meta").cloned().unwrap_or(Value::Null)))
        }
        Some(other) => Err(CliError::Usage(format!("unknown document kind {other:?}"))),
    }
}
