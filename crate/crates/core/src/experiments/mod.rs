//! Config-driven experiment recipes. Each recipe computes an in-memory report and writes
//! plain CSV / JSON files into an output directory next to the resolved `config.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

mod commands;
mod presets;

pub use commands::*;
pub use presets::{preset, PRESETS};

/// Default compute budget in estimated scalar operations.
pub const DEFAULT_BUDGET: f64 = 1e9;

fn default_budget() -> f64 {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    OdeVsSim,
    Heatmap,
    SchedulesCompare,
    ScalingLaw,
    PrivacyReport,
    RealData,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::OdeVsSim => "ode-vs-sim",
            ExperimentKind::Heatmap => "heatmap",
            ExperimentKind::SchedulesCompare => "schedules-compare",
            ExperimentKind::ScalingLaw => "scaling-law",
            ExperimentKind::PrivacyReport => "privacy-report",
            ExperimentKind::RealData => "real-data",
        }
    }
}

/// Recipe-specific settings, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    OdeVsSim(OdeVsSimConfig),
    Heatmap(HeatmapConfig),
    SchedulesCompare(SchedulesConfig),
    ScalingLaw(ScalingLawConfig),
    PrivacyReport(PrivacyReportConfig),
    RealData(RealDataConfig),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::OdeVsSim(_) => ExperimentKind::OdeVsSim,
            Experiment::Heatmap(_) => ExperimentKind::Heatmap,
            Experiment::SchedulesCompare(_) => ExperimentKind::SchedulesCompare,
            Experiment::ScalingLaw(_) => ExperimentKind::ScalingLaw,
            Experiment::PrivacyReport(_) => ExperimentKind::PrivacyReport,
            Experiment::RealData(_) => ExperimentKind::RealData,
        }
    }

    /// Recipe with its default settings.
    pub fn default_for(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::OdeVsSim => Experiment::OdeVsSim(Default::default()),
            ExperimentKind::Heatmap => Experiment::Heatmap(Default::default()),
            ExperimentKind::SchedulesCompare => Experiment::SchedulesCompare(Default::default()),
            ExperimentKind::ScalingLaw => Experiment::ScalingLaw(Default::default()),
            ExperimentKind::PrivacyReport => Experiment::PrivacyReport(Default::default()),
            ExperimentKind::RealData => Experiment::RealData(Default::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Refuse runs whose estimated cost exceeds this many scalar operations.
    #[serde(default = "default_budget")]
    pub budget: f64,
    pub experiment: Experiment,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self { seed: 0, out: None, budget: DEFAULT_BUDGET, experiment }
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file, or JSON when the extension is `.json` (as written to `config.json`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// SHA-256 of the canonical (sorted-key, compact) JSON form, without `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        hex::encode(digest)
    }

    /// Rough scalar-operation count of the run.
    pub fn estimate_ops(&self) -> f64 {
        match &self.experiment {
            Experiment::OdeVsSim(c) => c.estimate_ops(),
            Experiment::Heatmap(c) => c.estimate_ops(),
            Experiment::SchedulesCompare(c) => c.estimate_ops(),
            Experiment::ScalingLaw(c) => c.estimate_ops(),
            Experiment::PrivacyReport(c) => c.estimate_ops(),
            Experiment::RealData(c) => c.estimate_ops(),
        }
    }

    pub fn check_budget(&self, force: bool) -> Result<()> {
        let estimate = self.estimate_ops();
        if !force && estimate > self.budget {
            return Err(Error::Budget { estimate, budget: self.budget });
        }
        Ok(())
    }
}

/// Outcome of [`run`]: the files written and a short human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Runs the configured recipe and writes its outputs into `out`.
pub fn run(config: &ExperimentConfig, out: &Path, force: bool) -> Result<RunOutput> {
    config.check_budget(force)?;
    fs::create_dir_all(out)?;
    let hash = config.hash();
    let mut files = vec![write_json(&out.join("config.json"), config)?];
    let seed = config.seed;
    let summary = match &config.experiment {
        Experiment::OdeVsSim(c) => {
            let r = run_ode_vs_sim(c, seed)?;
            files.extend(r.write(out, &hash)?);
            r.summary()
        }
        Experiment::Heatmap(c) => {
            let r = run_heatmap(c, seed)?;
            files.extend(r.write(out, &hash)?);
            r.summary()
        }
        Experiment::SchedulesCompare(c) => {
            let r = run_schedules_compare(c)?;
            files.extend(r.write(out, &hash)?);
            r.summary()
        }
        Experiment::ScalingLaw(c) => {
            let r = run_scaling_law(c)?;
            files.extend(r.write(out, &hash)?);
            r.summary()
        }
        Experiment::PrivacyReport(c) => {
            let r = run_privacy_report(c)?;
            files.extend(r.write(out, &hash)?);
            r.summary()
        }
        Experiment::RealData(c) => {
            let r = run_real_data(c, seed)?;
            files.extend(r.write(out, &hash)?);
            r.summary()
        }
    };
    Ok(RunOutput { dir: out.to_path_buf(), files, summary })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(path.to_path_buf())
}

/// Number formatting shared by all CSV outputs.
pub(crate) fn num(x: f64) -> String {
    crate::ode::fmt(x)
}
