//! Experiment configuration read from TOML; command-line flags take precedence.
//!
//! ```toml
//! margin = 1e-7
//! refine_output = false
//!
//! [solver]
//! gap_tol = 1e-7
//! feas_tol = 1e-9
//! max_iter = 100
//!
//! [sparsity]
//! starts = 32
//! seed = 0
//! pairing = "descending"
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use netred::reconstruct::{EigenPairing, SparsityOptions};
use netred::reduction::ReductionOptions;
use netred::sdp::SolverSettings;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Strictness margin of the matrix inequalities, relative to the data scale.
    pub margin: f64,
    pub refine_output: bool,
    pub solver: SolverSettings,
    pub sparsity: SparsityOptions,
}

impl Default for Config {
    fn default() -> Self {
        let reduction = ReductionOptions::default();
        Self {
            margin: reduction.margin,
            refine_output: reduction.refine_output,
            solver: reduction.solver,
            sparsity: SparsityOptions::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn reduction_options(&self) -> ReductionOptions {
        ReductionOptions {
            margin: self.margin,
            solver: self.solver,
            refine_output: self.refine_output,
        }
    }

    fn check(&self) -> CliResult<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Usage(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(CliError::Usage(format!("margin must be non-negative, got {}", self.margin)));
        }
        positive("gap_tol", self.solver.gap_tol)?;
        positive("feas_tol", self.solver.feas_tol)?;
        positive("near_gap_tol", self.solver.near_gap_tol)?;
        positive("near_feas_tol", self.solver.near_feas_tol)?;
        positive("certificate_tol", self.solver.certificate_tol)?;
        positive("sparsity tolerance", self.sparsity.tolerance)?;
        if self.solver.max_iter == 0 {
            return Err(CliError::Usage("max_iter must be at least 1".into()));
        }
        if self.sparsity.starts == 0 {
            return Err(CliError::Usage("starts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solver flags shared by `reduce` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Strictness margin of the matrix inequalities
    #[arg(long)]
    pub margin: Option<f64>,
    /// Relative duality gap for an optimal solve
    #[arg(long)]
    pub gap_tol: Option<f64>,
    /// Relative primal/dual residual for an optimal solve
    #[arg(long)]
    pub feas_tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Replace the reduced output matrix by the error-optimal one
    #[arg(long)]
    pub refine_output: bool,
}

impl SolverFlags {
    pub fn resolve(&self) -> CliResult<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(v) = self.margin {
            cfg.margin = v;
        }
        if let Some(v) = self.gap_tol {
            cfg.solver.gap_tol = v;
        }
        if let Some(v) = self.feas_tol {
            cfg.solver.feas_tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.solver.max_iter = v;
        }
        cfg.refine_output |= self.refine_output;
        cfg.check()?;
        Ok(cfg)
    }
}

/// Multistart flags of `reconstruct`.
#[derive(Debug, Clone, Default, Args)]
pub struct SparsityFlags {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of random starts for the sparsity search
    #[arg(long)]
    pub starts: Option<usize>,
    /// Seed of the multistart generator
    #[arg(long)]
    pub sparsity_seed: Option<u64>,
    #[arg(long, value_enum)]
    pub pairing: Option<PairingArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PairingArg {
    Descending,
    Ascending,
}

impl From<PairingArg> for EigenPairing {
    fn from(p: PairingArg) -> Self {
        match p {
            PairingArg::Descending => EigenPairing::Descending,
            PairingArg::Ascending => EigenPairing::Ascending,
        }
    }
}

impl SparsityFlags {
    pub fn resolve(&self) -> CliResult<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(v) = self.starts {
            cfg.sparsity.starts = v;
        }
        if let Some(v) = self.sparsity_seed {
            cfg.sparsity.seed = v;
        }
        if let Some(p) = self.pairing {
            cfg.sparsity.pairing = p.into();
        }
        cfg.check()?;
        Ok(cfg)
    }
}
