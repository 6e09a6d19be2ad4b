//! Experiment configuration, deterministic execution of the pipelines and
//! run manifests with output digests.

mod config;
mod pipelines;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    BrownianSection, CensusSection, DivisorSection, EnumerateSection, EquidistSection, EstimatorSection, ExperimentConfig,
    FamilyKind, FamilySection, FlsSection, GridEstimatorKind, GridSection, Pipeline, ScheduleSection,
};
pub use pipelines::fmt_float;

use crate::error::{Error, Result};
use pipelines::{run_pipeline, Context};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord { kind: e.kind().to_owned(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// The resolved configuration; running it again reproduces the outputs.
    pub config: ExperimentConfig,
    pub version: String,
    pub task_seeds: BTreeMap<String, u64>,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    /// SHA-256 of every output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    pub error: Option<ErrorRecord>,
}

impl RunManifest {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(format!("manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn version_tag() -> String {
    format!("bifcurrent-core {}", env!("CARGO_PKG_VERSION"))
}

/// Run the configured pipeline and write its outputs plus `manifest.json`
/// into the output directory.
///
/// Failures inside the pipeline are recorded in the returned manifest
/// rather than returned as `Err`; `Err` means nothing could be written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    let out = config.output_dir.clone().ok_or_else(|| Error::Config("no output directory given".into()))?;
    std::fs::create_dir_all(&out)?;
    let start = Instant::now();
    let mut manifest = RunManifest {
        config: config.clone(),
        version: version_tag(),
        task_seeds: BTreeMap::new(),
        workers: 0,
        wall_clock_seconds: 0.0,
        outputs: BTreeMap::new(),
        error: None,
    };
    let outcome = config.clone().resolve().and_then(|cfg| {
        manifest.config = cfg.clone();
        let pipeline = cfg.pipeline.expect("resolved config names a pipeline");
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cfg.workers {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
        manifest.workers = pool.current_num_threads();
        let mut ctx = Context::new(cfg.master_seed);
        let result = pool.install(|| run_pipeline(&cfg, pipeline, &mut ctx));
        manifest.task_seeds = std::mem::take(&mut ctx.seeds);
        result.map(|()| ctx.artifacts)
    });
    match outcome {
        Ok(artifacts) => {
            for a in artifacts {
                std::fs::write(out.join(&a.name), a.contents.as_bytes())?;
                manifest.outputs.insert(a.name, sha256_hex(a.contents.as_bytes()));
            }
        }
        Err(e) => manifest.error = Some(ErrorRecord::from(&e)),
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerunReport {
    pub original: RunManifest,
    pub rerun: RunManifest,
    /// Output files whose digest differs or which are missing on one side.
    pub mismatches: Vec<String>,
}

impl RerunReport {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty() && self.rerun.succeeded() == self.original.succeeded()
    }
}

/// Run the configuration stored in a manifest again, optionally into a
/// different directory, and compare output digests.
pub fn rerun(manifest_path: &Path, out: Option<PathBuf>) -> Result<RerunReport> {
    let original = RunManifest::read(manifest_path)?;
    let mut cfg = original.config.clone();
    if let Some(dir) = out {
        cfg.output_dir = Some(dir);
    }
    let rerun = run_experiment(&cfg)?;
    let names: std::collections::BTreeSet<&String> = original.outputs.keys().chain(rerun.outputs.keys()).collect();
    let mismatches =
        names.into_iter().filter(|n| original.outputs.get(*n) != rerun.outputs.get(*n)).cloned().collect();
    Ok(RerunReport { original, rerun, mismatches })
}

#[cfg(test)]
mod tests;
