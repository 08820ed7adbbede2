//! Run configuration schema. Unknown keys are rejected, and schema errors
//! carry the line/column of the offending JSON.

use serde::{Deserialize, Serialize};
use std::path::Path;

use pplab::grid::InitialSpec;
use pplab::operators::{ConvectionSpec, PotentialSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convection: Option<ConvectionSpec>,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_quad_steps")]
    pub quad_steps: usize,
    pub time_grid: Vec<f64>,
}

fn default_max_terms() -> usize {
    64
}
fn default_tol() -> f64 {
    1e-10
}
fn default_rho() -> f64 {
    0.5
}
fn default_quad_steps() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into(), "bin".into()]
}

/// Configuration of a single solve or classify run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

/// One scanned parameter range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl RangeConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 0 {
            return Vec::new();
        }
        if self.steps == 1 {
            return vec![self.min];
        }
        (0..self.steps)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

/// Which time-profile family the scan instantiates at each `Lambda0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFamily {
    Constant,
    ExpDecay,
}

/// Configuration of a phase scan over `(sigma, Lambda0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub sigma: RangeConfig,
    pub lambda0: RangeConfig,
    #[serde(default = "default_family")]
    pub lambda_family: ScanFamily,
    #[serde(default)]
    pub r0: f64,
    pub initial: InitialSpec,
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_family() -> ScanFamily {
    ScanFamily::Constant
}

/// Parses a JSON config file, anchoring schema violations to their line.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())
    })
}
