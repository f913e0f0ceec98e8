//! Order sweeps.
//!
//! CSV columns, in order: `r, status, gamma_raw, certified_bound,
//! actual_h2_error, bound_holds, iterations, wall_time_seconds, message`.
//! Failed rows leave the numeric columns empty. The JSON report holds the
//! same rows plus run metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::SWEEP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: usize,
    /// `optimal`, `near-optimal`, `infeasible` or `failed`.
    pub status: String,
    pub gamma_raw: Option<f64>,
    pub certified_bound: Option<f64>,
    pub actual_h2_error: Option<f64>,
    pub bound_holds: Option<bool>,
    pub iterations: Option<usize>,
    pub wall_time_seconds: f64,
    pub message: Option<String>,
}

impl SweepRow {
    pub fn is_optimal(&self) -> bool {
        self.status == "optimal"
    }

    /// Same row with timing removed.
    pub fn numeric(&self) -> SweepRow {
        SweepRow {
            wall_time_seconds: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub input: String,
    pub n: usize,
    /// Dimension of the stiffness kernel; zero for asymptotically stable inputs.
    pub kernel_dimension: usize,
    pub seed: Option<u64>,
    pub alpha: f64,
    pub beta: f64,
    pub orders: String,
    pub margin: f64,
    pub refine_output: bool,
    pub solver: netred::sdp::SolverSettings,
    /// H2 norm of the (stable part of the) input.
    pub original_h2_norm: f64,
    /// `‖AP + PAᵀ + BBᵀ‖_F / ‖BBᵀ‖_F` of the Gramian behind that norm.
    pub lyapunov_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: String,
    pub metadata: Option<SweepMetadata>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn new(metadata: SweepMetadata, mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by_key(|r| r.r);
        Self {
            kind: SWEEP.into(),
            metadata: Some(metadata),
            rows,
        }
    }

    pub fn optimal_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.is_optimal())
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn read_csv(path: &Path) -> CliResult<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize().collect::<Result<Vec<SweepRow>, _>>()?;
        Ok(Self {
            kind: SWEEP.into(),
            metadata: None,
            rows,
        })
    }

    /// Whitespace-separated `r actual bound` lines of the successful rows.
    pub fn error_table(&self) -> String {
        let mut s = String::from("# r actual_h2_error certified_bound\n");
        for row in &self.rows {
            if let (Some(a), Some(b)) = (row.actual_h2_error, row.certified_bound) {
                s.push_str(&format!("{} {:.10e} {:.10e}\n", row.r, a, b));
            }
        }
        s
    }
}

/// Parses `start:stop:step` (stop inclusive) or a single order.
pub fn parse_orders(spec: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("orders must be start:stop:step with 1 ≤ start ≤ stop, got {spec:?}"));
    let parts: Vec<usize> = spec
        .split(':')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let (start, stop, step) = match parts.as_slice() {
        [one] => (*one, *one, 1),
        [a, b] => (*a, *b, 1),
        [a, b, c] => (*a, *b, *c),
        _ => return Err(bad()),
    };
    if start == 0 || stop < start || step == 0 {
        return Err(bad());
    }
    Ok((start..=stop).step_by(step).collect())
}
