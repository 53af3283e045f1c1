//! Campaign configuration: a JSON file naming datasets, searchers, seeds and output paths.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use svmtune_core::dataset::{load_csv, prepare, Dataset};
use svmtune_core::{Algorithm, SelectionRule};

use crate::error::{BenchError, Result};
use crate::stats::DEFAULT_REPLICATES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: String,
    pub path: PathBuf,
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default)]
    pub categorical: Vec<String>,
}

fn default_label() -> String {
    "label".into()
}

/// Every seed is mandatory; nothing is seeded from the clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub split: u64,
    pub search: u64,
    pub bootstrap: u64,
    /// Inner-fold seeds of the two stability runs.
    #[serde(default)]
    pub stability: Option<(u64, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSpec>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_baseline")]
    pub baseline: Algorithm,
    pub seeds: Seeds,
    #[serde(default = "default_k_inner")]
    pub k_inner: usize,
    pub output_dir: PathBuf,
    #[serde(default = "default_time_limit")]
    pub time_limit_secs: u64,
    #[serde(default = "default_rule")]
    pub selection_rule: SelectionRule,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_replicates")]
    pub bootstrap_replicates: usize,
}

fn default_baseline() -> Algorithm {
    "grid100".parse().unwrap()
}

fn default_k_inner() -> usize {
    5
}

fn default_time_limit() -> u64 {
    3600
}

fn default_rule() -> SelectionRule {
    SelectionRule::RandCg
}

fn default_jobs() -> usize {
    1
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

/// A prepared dataset with its identifier.
#[derive(Clone, Debug)]
pub struct NamedDataset {
    pub id: String,
    pub data: Dataset<f64>,
}

impl RunConfig {
    /// Parses and validates a config file. Relative dataset paths and the output directory
    /// are resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| BenchError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.algorithms.is_empty() {
            return bad("no algorithms listed".into());
        }
        if self.k_inner < 2 {
            return bad(format!("k_inner must be at least 2, got {}", self.k_inner));
        }
        if self.jobs == 0 || self.bootstrap_replicates == 0 || self.time_limit_secs == 0 {
            return bad("jobs, bootstrap_replicates and time_limit_secs must be positive".into());
        }
        let mut ids: Vec<&str> = self.datasets.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate dataset id `{}`", w[0]));
        }
        let mut algs = self.algorithms.clone();
        algs.sort_by_key(|a| a.to_string());
        if let Some(w) = algs.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("algorithm `{}` listed twice", w[0]));
        }
        Ok(())
    }

    /// Extra checks for a gain campaign: a dataset and a baseline plus one other searcher.
    pub fn validate_campaign(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(BenchError::Config("no datasets listed".into()));
        }
        if !self.algorithms.contains(&self.baseline) || self.algorithms.len() < 2 {
            return Err(BenchError::Config(format!(
                "algorithms must include the baseline {} and at least one other searcher",
                self.baseline
            )));
        }
        Ok(())
    }

    pub fn load_datasets(&self) -> Result<Vec<NamedDataset>> {
        self.datasets.iter().map(load_dataset).collect()
    }

    pub fn time_limit(&self) -> std::time::Duration {
        std::time::Duration::from_secs(self.time_limit_secs)
    }
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<NamedDataset> {
    let wrap = |source| BenchError::Dataset { dataset: spec.id.clone(), source };
    let raw = load_csv(&spec.path, &spec.label, &spec.categorical).map_err(wrap)?;
    Ok(NamedDataset { id: spec.id.clone(), data: prepare(&raw).map_err(wrap)? })
}
