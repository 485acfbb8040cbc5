//! Optional TOML configuration file. Every key is optional; command-line
//! flags take precedence over values read here.

use std::path::{Path, PathBuf};

use memetune::pso::PsoConfig;
use memetune::svm::SmoConfig;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub format: Option<String>,
    pub label_column: Option<usize>,
    pub synthetic: Option<String>,
    pub algorithm: Option<String>,
    pub algorithms: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub seeds: Option<Seeds>,
    pub folds: Option<usize>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub velocity_cap_fraction: Option<f64>,
    pub max_evals: Option<u64>,
    pub stall_evals: Option<u64>,
    pub grid_step: Option<f64>,
    pub normalize: Option<bool>,
    pub threads: Option<usize>,
    pub pso: Option<PsoConfig>,
    pub pattern: Option<PatternSection>,
    pub smo: Option<SmoConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSection {
    pub initial_step: Option<f64>,
    pub min_step: Option<f64>,
    pub max_polls: Option<usize>,
}

/// `seeds = [1, 2, 3]` or `seeds = "0..30"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Text(String),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
