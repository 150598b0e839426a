//! Experiment configuration: one JSON document with a schema version.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{BetaSearch, IntermittencySearch, Resolution, Truncation};
use crate::error::{invalid, Error, Result};
use crate::estimate::MomentOptions;
use crate::green::OperatorSpec;
use crate::grid::SimGrid;
use crate::kernels::KernelSpec;
use crate::noise::LevyMeasure;
use crate::simulate::{Model, SimConfig};
use crate::stats::log_space;

pub const SCHEMA_VERSION: u32 = 1;

fn default_p() -> Vec<f64> {
    vec![2.0]
}
fn default_replicates() -> usize {
    200
}
fn default_n_max() -> usize {
    4
}
fn default_chaos_samples() -> usize {
    100_000
}
fn default_noise_cells() -> usize {
    1_000_000
}
fn default_volume() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_eta() -> f64 {
    1.0
}

/// Analysis settings shared by the subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    /// Times for Monte Carlo moments; empty means every recorded step.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Times for the analytic functionals; empty means 12 log-spaced points
    /// over the last two decades of the horizon.
    #[serde(default)]
    pub bound_times: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_chaos_samples")]
    pub chaos_samples: usize,
    /// Time of the chaos-series evaluation; default is the horizon.
    #[serde(default)]
    pub chaos_t: Option<f64>,
    #[serde(default)]
    pub truncation: Truncation,
    /// `β` values at which `A_{β,p}` is tabulated; default 13 points in `[1e-3, 1e3]`.
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub beta_search: BetaSearch,
    /// Rosenthal `B_p`; default `2p`.
    #[serde(default)]
    pub bp: Option<f64>,
    /// Upper Lipschitz constant of `σ`; default from the model.
    #[serde(default)]
    pub lip: Option<f64>,
    /// Lower constant `|σ(u)| ≥ L|u|`; default from the model.
    #[serde(default)]
    pub lip_lower: Option<f64>,
    #[serde(default)]
    pub intermittency: IntermittencySearch,
    #[serde(default)]
    pub resolution: Resolution,
    /// Growth-rate window; default is the final third of the horizon.
    #[serde(default)]
    pub growth_window: Option<(f64, f64)>,
    #[serde(default = "default_noise_cells")]
    pub noise_cells: usize,
    #[serde(default = "default_volume")]
    pub noise_cell_volume: f64,
    #[serde(default)]
    pub moments: MomentOptions,
    /// Write the simulated field in binary form.
    #[serde(default = "default_true")]
    pub write_field: bool,
}

impl Default for Analysis {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub operator: OperatorSpec,
    pub kernel: KernelSpec,
    pub measure: LevyMeasure,
    pub grid: SimGrid,
    #[serde(default = "default_model")]
    pub model: Model,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_model() -> Model {
    Model::Linear
}

impl ExperimentConfig {
    /// Reads a config file, or the config embedded in a MANIFEST.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("config is not valid JSON: {e}")))?;
        let value = match value.get("manifest_version") {
            Some(_) => value
                .get("config")
                .cloned()
                .ok_or_else(|| Error::InvalidParameter("manifest has no config".into()))?,
            None => value,
        };
        let cfg: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            ));
        }
        Ok(cfg)
    }

    /// Cross-field checks; `dalang` runs the eager Dalang classification.
    pub fn validate(&self, dalang: bool) -> Result<()> {
        self.operator.validate()?;
        self.kernel.validate()?;
        self.measure.validate()?;
        self.grid.validate()?;
        self.model.validate()?;
        if self.kernel.dim != self.operator.dim || self.grid.dim != self.operator.dim {
            return Err(Error::GridMismatch(format!(
                "operator d = {}, kernel d = {}, grid d = {}",
                self.operator.dim, self.kernel.dim, self.grid.dim
            )));
        }
        let a = &self.analysis;
        if a.p.is_empty() || a.p.iter().any(|p| !(*p >= 2.0 && p.is_finite())) {
            return invalid("analysis.p must list moment orders >= 2");
        }
        if a.times
            .iter()
            .chain(&a.bound_times)
            .any(|t| !(*t >= 0.0 && t.is_finite()))
        {
            return invalid("analysis times must be finite and nonnegative");
        }
        if a.betas.iter().any(|b| !(*b > 0.0)) {
            return invalid("analysis.betas must be positive");
        }
        if !(self.eta.is_finite()) {
            return invalid("eta must be finite");
        }
        if dalang && !self.kernel.dalang_condition().holds {
            return Err(Error::DalangFailed(format!(
                "{:?} in d = {}",
                self.kernel.family, self.kernel.dim
            )));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            op: self.operator,
            kernel: self.kernel.clone(),
            measure: self.measure.clone(),
            model: self.model,
            eta: self.eta,
            grid: self.grid.clone(),
        }
    }

    pub fn bound_times(&self) -> Vec<f64> {
        if self.analysis.bound_times.is_empty() {
            log_space(self.grid.horizon * 1e-2, self.grid.horizon, 12)
        } else {
            self.analysis.bound_times.clone()
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        if self.analysis.betas.is_empty() {
            log_space(1e-3, 1e3, 13)
        } else {
            self.analysis.betas.clone()
        }
    }

    pub fn lip(&self) -> f64 {
        self.analysis
            .lip
            .unwrap_or_else(|| self.model.sigma().lipschitz())
    }

    pub fn lip_lower(&self) -> f64 {
        self.analysis
            .lip_lower
            .unwrap_or_else(|| self.model.sigma().lower_lipschitz())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
