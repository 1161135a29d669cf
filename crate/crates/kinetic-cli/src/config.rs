use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::RunError;

/// File-backed run configuration. Every field is optional; command-line
/// flags win over file values, and built-in defaults fill the rest.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Informational command label, carried through but not dispatched on.
    pub command: Option<String>,
    pub dimension: Option<usize>,
    pub seed: Option<u64>,

    pub from: Option<String>,
    pub to: Option<String>,
    pub family: Option<String>,
    pub expansion: Option<String>,
    pub samples: Option<usize>,

    pub lambda: Option<f64>,
    #[serde(rename = "Lambda")]
    pub lambda_max: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
    pub offsets: Option<Vec<(f64, f64)>>,
    pub nodes: Option<usize>,
    pub slice_nodes: Option<usize>,
    pub levels: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub iota: Option<f64>,
    pub bound: Option<f64>,
    pub refine: Option<bool>,

    pub scales: Option<Vec<f64>>,
    pub qs: Option<Vec<f64>>,
    pub node_counts: Option<Vec<usize>>,
    pub amplitude: Option<f64>,
    pub fd_step: Option<f64>,
    pub fd_tolerance: Option<f64>,

    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub resolution: Option<Vec<usize>>,
    pub families: Option<usize>,

    pub p_values: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub k_values: Option<Vec<f64>>,

    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub kappa: Option<f64>,
    pub mu: Option<f64>,
    pub p: Option<f64>,
    pub p0: Option<f64>,
    pub reading: Option<String>,
    pub reading_delta: Option<f64>,

    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub profile: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, RunError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| RunError::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Flag wins, then the config file, then the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn pick_opt<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T, RunError> {
    value.ok_or_else(|| RunError::Usage(format!("missing required value for {flag}")))
}
