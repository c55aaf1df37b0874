//! The JSON run configuration. Every key is optional; command-line flags
//! override the file.

use std::fs;
use std::path::{Path, PathBuf};

use groupoid_walk::oracle::DpEngine;
use groupoid_walk::{Generator, KernelF64, KernelSpec, MetricF64, Sign};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<KernelSource>,
    pub metric: Option<MetricSpec>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,

    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub newton_polish: Option<bool>,
    pub derivatives: Option<bool>,
    pub oracle: Option<bool>,

    pub q_values: Option<Vec<f64>>,
    pub q_min: Option<f64>,
    pub q_max: Option<f64>,
    pub q_step: Option<f64>,

    pub seed: Option<u64>,
    pub n_steps: Option<u64>,
    pub n_paths: Option<usize>,
    pub start: Option<String>,
    pub record: Option<Record>,
    pub gamma_ref: Option<f64>,
    pub sigma2_ref: Option<f64>,
    pub paths_csv: Option<PathBuf>,

    pub n: Option<usize>,
    pub x: Option<f64>,
    pub z: Option<f64>,

    pub dp_kind: Option<DpKindArg>,
    pub max_steps: Option<usize>,
    pub target: Option<String>,
    pub window: Option<usize>,
    pub engine: Option<DpEngine>,
    pub state_cap: Option<usize>,
}

/// A kernel given inline, by named family, or as `{"file": path}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum KernelSource {
    File(KernelFile),
    Spec(KernelSpec),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub file: PathBuf,
}

/// `"word"`, `"fenced"`, or `{"custom": [{"i":1,"j":2,"k":1,"weight":0.5}, ...]}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    Word,
    Fenced,
    Custom(Vec<WeightEntry>),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub i: usize,
    pub j: usize,
    pub k: i64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Record {
    Full,
    Streaming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DpKindArg {
    Hitting,
    Return,
    TruncatedG,
}

impl RunConfig {
    /// Reads a config file; a relative kernel file path is taken relative to
    /// the config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Invalid(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        if let (Some(KernelSource::File(f)), Some(dir)) = (&mut cfg.kernel, path.parent()) {
            if f.file.is_relative() {
                f.file = dir.join(&f.file);
            }
        }
        Ok(cfg)
    }

    pub fn kernel(&self) -> Result<KernelF64, CliError> {
        let source = self.kernel.as_ref().ok_or_else(|| {
            CliError::Invalid(
                "no kernel given: use --symmetric, --q, --asymmetric, --kernel-file or the config"
                    .into(),
            )
        })?;
        let spec = match source {
            KernelSource::Spec(spec) => spec.clone(),
            KernelSource::File(f) => read_kernel_file(&f.file)?,
        };
        spec.build::<f64>().map_err(CliError::Kernel)
    }

    pub fn metric(&self, n_windows: usize) -> Result<MetricF64, CliError> {
        match self.metric.as_ref().unwrap_or(&MetricSpec::Word) {
            MetricSpec::Word => Ok(MetricF64::word()),
            MetricSpec::Fenced => Ok(MetricF64::fenced()),
            MetricSpec::Custom(entries) => custom_metric(n_windows, entries),
        }
    }
}

pub fn read_kernel_file(path: &Path) -> Result<KernelSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Invalid(format!("cannot read kernel file {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Invalid(format!(
            "kernel file {}: {e} (expected {{\"N\": n, \"p\": [...]}} or a named family)",
            path.display()
        ))
    })
}

pub fn read_metric_file(path: &Path) -> Result<MetricSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Invalid(format!("cannot read metric file {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("metric file {}: {e}", path.display())))
}

fn custom_metric(n: usize, entries: &[WeightEntry]) -> Result<MetricF64, CliError> {
    let mut weights: Vec<Option<f64>> = vec![None; Generator::count(n)];
    for e in entries {
        let g = Sign::try_from(e.k)
            .ok()
            .and_then(|s| Generator::new(e.i, e.j, s).ok())
            .and_then(|g| g.index(n).map(|ix| (g, ix)));
        let Some((g, ix)) = g else {
            return Err(CliError::Invalid(format!(
                "custom metric: ({},{},{}) is not a generator for N={n}",
                e.i, e.j, e.k
            )));
        };
        if weights[ix].replace(e.weight).is_some() {
            return Err(CliError::Invalid(format!(
                "custom metric: weight of {g} given twice"
            )));
        }
    }
    let weights = weights
        .into_iter()
        .enumerate()
        .map(|(ix, w)| {
            w.ok_or_else(|| {
                CliError::Invalid(format!(
                    "custom metric: no weight for {}",
                    Generator::from_index(ix, n)
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    MetricF64::custom(n, weights).map_err(|e| CliError::Invalid(format!("custom metric: {e}")))
}
