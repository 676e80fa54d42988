//! Per-subcommand settings merged from flags, an optional JSON file and
//! defaults, in that order of precedence.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// Reads the subcommand's settings from a JSON object whose keys mirror the
/// long flag names. Unknown keys are rejected by name.
pub fn load_file<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("config {}", path.display()))
}

/// Flag value if given, else the file value.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchFile {
    pub profile: Option<String>,
    pub configs: Option<Vec<u64>>,
    pub loads: Option<Vec<u32>>,
    pub duration: Option<f64>,
    pub settle: Option<f64>,
    pub reps: Option<u32>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub transport: Option<String>,
    pub out: Option<PathBuf>,
    pub no_timestamps: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitFile {
    pub records: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OptimizeFile {
    pub model: Option<PathBuf>,
    pub profile: Option<String>,
    pub d: Option<f64>,
    pub k: Option<f64>,
    pub sweep_d: Option<Vec<f64>>,
    pub sweep_k: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateFile {
    pub profile: Option<String>,
    pub policy: Option<String>,
    pub compare: Option<bool>,
    pub d: Option<f64>,
    pub k: Option<f64>,
    pub tokens: Option<usize>,
    pub queue: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReportFile {
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}
