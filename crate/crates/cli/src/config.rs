//! JSON run configurations. Every file carries a `schema` tag naming the
//! command and format version; unknown fields are rejected.

use std::path::Path;

use relent::bounds::{RefineOptions, RelEntProblem};
use relent::gridding::{AdaptiveFactor, RefineStrategy};
use relent::instances::SweepConfig;
use relent::linalg::HermitianMatrix;
use relent::sdp::SolverSettings;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FIXED_PAIR_SCHEMA: &str = "relent/fixed-pair/v1";
pub const SOLVE_SCHEMA: &str = "relent/solve/v1";
pub const QKD_SWEEP_SCHEMA: &str = "relent/qkd-sweep/v1";
pub const CAPACITY_SWEEP_SCHEMA: &str = "relent/capacity-sweep/v1";
pub const REE_SWEEP_SCHEMA: &str = "relent/ree-sweep/v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl std::fmt::Display for Units {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Nats => "nats",
            Self::Bits => "bits",
        })
    }
}

impl Units {
    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Self::Nats => nats,
            Self::Bits => relent::nats_to_bits(nats),
        }
    }
}

fn default_budget() -> usize {
    12
}

fn default_strategy() -> RefineStrategy {
    RefineStrategy::AdaptiveTighten
}

/// Grid refinement and solver tolerances shared by all commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_strategy")]
    pub strategy: RefineStrategy,
    #[serde(default)]
    pub factor: AdaptiveFactor,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            budget: default_budget(),
            strategy: default_strategy(),
            factor: AdaptiveFactor::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl RefineConfig {
    pub fn options(&self, target_eps: f64) -> RefineOptions {
        RefineOptions {
            target_eps,
            strategy: self.strategy,
            budget: self.budget,
            factor: self.factor,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.budget == 0 {
            return Err(CliError::Config("refine.budget: must be at least 1".into()));
        }
        self.solver
            .validate()
            .map_err(|e| CliError::Config(format!("refine.solver: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PairSource {
    /// Full-rank random pair drawn from the run seed.
    Random { dim: usize },
    Inline { rho: HermitianMatrix, sigma: HermitianMatrix },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// Adaptive grids for each ε.
    Adaptive {
        eps: Vec<f64>,
        #[serde(default)]
        factor: AdaptiveFactor,
    },
    /// Uniform grids with the given numbers of points.
    Uniform { points: Vec<usize> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Solve both relaxations as SDPs.
    #[default]
    Sdp,
    /// Evaluate the fixed-pair closed forms.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPairConfig {
    pub schema: String,
    pub pair: PairSource,
    pub schedule: Schedule,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub units: Option<Units>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSource {
    Inline { problem: Box<RelEntProblem> },
    /// Problem JSON file, relative to the config file.
    File { path: String },
    /// Witness-constrained random instance drawn from the run seed.
    Generic { dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema: String,
    pub problem: ProblemSource,
    pub target_eps: f64,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub units: Option<Units>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QkdSweepConfig {
    pub schema: String,
    pub local_dim: usize,
    pub sweep: SweepConfig,
    /// Upper sandwich constant; `local_dim` (= √(d_A d_B)) when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub bell_diagonal: Option<bool>,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub units: Option<Units>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySweepConfig {
    pub schema: String,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub units: Option<Units>,
}

fn default_ree_lambda() -> f64 {
    relent::instances::DEFAULT_REE_LAMBDA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReeSweepConfig {
    pub schema: String,
    pub sweep: SweepConfig,
    #[serde(default = "default_ree_lambda")]
    pub lambda_cap: f64,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub units: Option<Units>,
}

/// Reads and parses a config file, checking its schema tag.
pub fn load<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == schema => {}
        Some(s) => return Err(CliError::Config(format!("schema: expected \"{schema}\", found \"{s}\""))),
        None => return Err(CliError::Config(format!("schema: missing, expected \"{schema}\""))),
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn check_eps(field: &str, eps: f64) -> Result<(), CliError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Config(format!("{field}: must be positive, got {eps}")));
    }
    Ok(())
}

fn check_sweep(sweep: &SweepConfig, parameter: &str) -> Result<(), CliError> {
    if sweep.parameter != parameter {
        return Err(CliError::Config(format!(
            "sweep.parameter: expected \"{parameter}\", found \"{}\"",
            sweep.parameter
        )));
    }
    check_eps("sweep.target_eps", sweep.target_eps)?;
    sweep.validate().map_err(|e| CliError::Config(format!("sweep.values: {e}")))
}

impl FixedPairConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.schedule {
            Schedule::Adaptive { eps, .. } => {
                if eps.is_empty() {
                    return Err(CliError::Config("schedule.eps: empty".into()));
                }
                for &e in eps {
                    check_eps("schedule.eps", e)?;
                }
            }
            Schedule::Uniform { points } => {
                if points.is_empty() || points.iter().any(|&n| n < 2) {
                    return Err(CliError::Config("schedule.points: need at least one entry, each ≥ 2".into()));
                }
            }
        }
        if let PairSource::Random { dim } = self.pair {
            if dim < 1 {
                return Err(CliError::Config("pair.dim: must be positive".into()));
            }
        }
        self.solver.validate().map_err(|e| CliError::Config(format!("solver: {e}")))
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_eps("target_eps", self.target_eps)?;
        self.refine.validate()
    }
}

impl QkdSweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.local_dim < 2 {
            return Err(CliError::Config(format!("local_dim: must be at least 2, got {}", self.local_dim)));
        }
        check_sweep(&self.sweep, "alpha")?;
        self.refine.validate()
    }
}

impl CapacitySweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_sweep(&self.sweep, "p")?;
        self.refine.validate()
    }
}

impl ReeSweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.lambda_cap > 1.0 && self.lambda_cap.is_finite()) {
            return Err(CliError::Config(format!("lambda_cap: must be finite and above 1, got {}", self.lambda_cap)));
        }
        check_sweep(&self.sweep, "alpha")?;
        self.refine.validate()
    }
}
