//! TOML scenario files.
//!
//! One file fully determines a run: detector, fusion and twin settings, the
//! fault list, and where the three sensor traces come from (a synthetic
//! generator or a mote log). See `configs/` for complete examples.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use twinfuse_core::{
    validate_config, FaultAssignment, FaultKind, FaultSpec, ResamplePolicy, ScenarioConfig, SoftMode, Threshold,
    ThresholdMode, Timestamp, TwinKind, TwinSettings, UniformTrace, TRIAD,
};

use crate::ingest::{parse_log, resample, Channel, Grid};
use crate::synth::{generate_triad, Generator};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("dataset file {path}: {message}")]
    Dataset { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: u64,
    pub run_len: Option<usize>,
    pub repair_after_s: Option<u64>,
    pub tracking_tol: Option<f64>,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub twin: TwinSection,
    pub source: SourceSection,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
    pub eval: Option<EvalSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    pub lookback_n: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection { lookback_n: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub threshold: f64,
    pub threshold_mode: ModeName,
    pub patience: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            threshold: 3.0,
            threshold_mode: ModeName::Absolute,
            patience: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwinKindName {
    AdditiveSeasonal,
    Kalman,
    Naive,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwinSection {
    pub kind: TwinKindName,
    pub train_len: usize,
    pub seasonal_period_s: u64,
    pub fourier_order_k: usize,
    pub kalman_q: Option<f64>,
    pub kalman_r: Option<f64>,
}

impl Default for TwinSection {
    fn default() -> Self {
        let d = TwinSettings::default();
        TwinSection {
            kind: TwinKindName::AdditiveSeasonal,
            train_len: d.train_len,
            seasonal_period_s: d.seasonal_period_s,
            fourier_order_k: d.fourier_order_k,
            kalman_q: None,
            kalman_r: None,
        }
    }
}

impl TwinSection {
    pub fn settings(&self) -> TwinSettings {
        TwinSettings {
            kind: match self.kind {
                TwinKindName::AdditiveSeasonal => TwinKind::AdditiveSeasonal,
                TwinKindName::Kalman => TwinKind::Kalman,
                TwinKindName::Naive => TwinKind::Naive,
            },
            train_len: self.train_len,
            seasonal_period_s: self.seasonal_period_s,
            fourier_order_k: self.fourier_order_k,
            kalman_q: self.kalman_q,
            kalman_r: self.kalman_r,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSection {
    Synthetic {
        #[serde(default = "default_interval")]
        interval_s: u64,
        #[serde(default)]
        start: u64,
        #[serde(default)]
        noise_sd: f64,
        #[serde(default)]
        noise_seed: u64,
        generator: Generator,
    },
    Dataset {
        path: PathBuf,
        motes: [u32; TRIAD],
        channel: String,
        #[serde(default = "default_interval")]
        interval_s: u64,
        #[serde(default)]
        policy: PolicyName,
        start: Option<u64>,
    },
}

fn default_interval() -> u64 {
    60
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Locf,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKindName {
    Hard,
    Soft,
    Intermittent,
    Transient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftModeName {
    Stuck,
    Offset,
    Scale,
}

/// `[[faults]]` entry. Indices are grid indices into the full trace
/// (training span included).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub sensor: usize,
    pub kind: FaultKindName,
    pub start_idx: usize,
    pub duration: usize,
    pub mode: Option<SoftModeName>,
    pub value: Option<f64>,
    pub p: Option<f64>,
}

impl FaultEntry {
    fn to_assignment(&self, index: usize) -> Result<FaultAssignment, ConfigFileError> {
        let soft = || -> Result<SoftMode, ConfigFileError> {
            let mode = self
                .mode
                .ok_or_else(|| ConfigFileError::Invalid(format!("faults[{index}]: mode is required")))?;
            let value = self
                .value
                .ok_or_else(|| ConfigFileError::Invalid(format!("faults[{index}]: value is required")))?;
            Ok(match mode {
                SoftModeName::Stuck => SoftMode::Stuck(value),
                SoftModeName::Offset => SoftMode::Offset(value),
                SoftModeName::Scale => SoftMode::Scale(value),
            })
        };
        let kind = match self.kind {
            FaultKindName::Hard => FaultKind::Hard,
            FaultKindName::Soft => FaultKind::Soft(soft()?),
            FaultKindName::Transient => FaultKind::Transient(soft()?),
            FaultKindName::Intermittent => FaultKind::Intermittent {
                p: self
                    .p
                    .ok_or_else(|| ConfigFileError::Invalid(format!("faults[{index}]: p is required")))?,
                mode: soft()?,
            },
        };
        Ok(FaultAssignment {
            sensor: self.sensor,
            spec: FaultSpec {
                kind,
                start_idx: self.start_idx,
                duration: self.duration,
            },
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default)]
    pub sensor: usize,
    pub horizon: usize,
    pub tolerance: f64,
}

/// A parsed config file together with its directory (for relative paths).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub base_dir: PathBuf,
}

/// The three traces of a scenario and, when known, the noiseless signal.
#[derive(Debug, Clone)]
pub struct Traces {
    pub sensors: [UniformTrace; TRIAD],
    pub truth: Option<Vec<f64>>,
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
        path: path.to_owned(),
        source,
    })?;
    let file: ConfigFile = toml::from_str(&text).map_err(|e| ConfigFileError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    let base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
    Ok(LoadedConfig { file, base_dir })
}

impl LoadedConfig {
    /// The validated core scenario configuration.
    pub fn scenario(&self, seed_override: Option<u64>) -> Result<ScenarioConfig, ConfigFileError> {
        let f = &self.file;
        let fault_specs = f
            .faults
            .iter()
            .enumerate()
            .map(|(i, e)| e.to_assignment(i))
            .collect::<Result<Vec<_>, _>>()?;
        let threshold = Threshold {
            value: f.detector.threshold,
            mode: match f.detector.threshold_mode {
                ModeName::Absolute => ThresholdMode::Absolute,
                ModeName::Relative => ThresholdMode::Relative,
            },
        };
        let cfg = ScenarioConfig {
            lookback_n: f.fusion.lookback_n,
            threshold,
            patience: f.detector.patience,
            twin: f.twin.settings(),
            fault_specs,
            repair_after_s: f.repair_after_s,
            seed: seed_override.unwrap_or(f.seed),
            run_len: f
                .run_len
                .ok_or_else(|| ConfigFileError::Invalid("run_len is required".into()))?,
            tracking_tol: f.tracking_tol.unwrap_or(f.detector.threshold),
        };
        validate_config(cfg).map_err(|e| ConfigFileError::Invalid(e.to_string()))
    }

    /// Produce `len` grid points for each sensor.
    pub fn traces(&self, len: usize) -> Result<Traces, ConfigFileError> {
        match &self.file.source {
            SourceSection::Synthetic {
                interval_s,
                start,
                noise_sd,
                noise_seed,
                generator,
            } => {
                if *interval_s == 0 || len == 0 {
                    return Err(ConfigFileError::Invalid(
                        "source.interval_s and length must be positive".into(),
                    ));
                }
                if !(noise_sd.is_finite() && *noise_sd >= 0.0) {
                    return Err(ConfigFileError::Invalid("source.noise_sd must be ≥ 0".into()));
                }
                let (sensors, truth) =
                    generate_triad(generator, Timestamp(*start), *interval_s, len, *noise_sd, *noise_seed);
                Ok(Traces {
                    sensors,
                    truth: Some(truth),
                })
            }
            SourceSection::Dataset {
                path,
                motes,
                channel,
                interval_s,
                policy,
                start,
            } => {
                let channel: Channel = channel.parse().map_err(|e: crate::ingest::IngestError| {
                    ConfigFileError::Invalid(format!("source.channel: {e}"))
                })?;
                if *interval_s == 0 {
                    return Err(ConfigFileError::Invalid("source.interval_s must be positive".into()));
                }
                let path = self.base_dir.join(path);
                let dataset_err = |message: String| ConfigFileError::Dataset {
                    path: path.clone(),
                    message,
                };
                let mut series = Vec::with_capacity(TRIAD);
                for mote in motes {
                    let file = File::open(&path).map_err(|e| dataset_err(e.to_string()))?;
                    let log =
                        parse_log(BufReader::new(file), *mote, channel).map_err(|e| dataset_err(e.to_string()))?;
                    if log.pairs.is_empty() {
                        return Err(dataset_err(format!("mote {mote} has no {channel} readings")));
                    }
                    series.push(log.pairs);
                }
                // first grid point at or after the latest first observation
                let start = start.unwrap_or_else(|| {
                    let first = series.iter().map(|s| s[0].0).fold(f64::MIN, f64::max).max(0.0).ceil() as u64;
                    first.div_ceil(*interval_s) * interval_s
                });
                let grid = Grid {
                    start: Timestamp(start),
                    interval_s: *interval_s,
                    len,
                };
                let policy = match policy {
                    PolicyName::Locf => ResamplePolicy::Locf,
                    PolicyName::Linear => ResamplePolicy::Linear,
                };
                let sensors: Vec<UniformTrace> = series
                    .iter()
                    .zip(motes)
                    .map(|(pairs, mote)| resample(pairs, grid, policy, *mote, channel.kind()))
                    .collect::<Result<_, _>>()
                    .map_err(|e| ConfigFileError::Invalid(e.to_string()))?;
                Ok(Traces {
                    sensors: sensors.try_into().expect("three motes"),
                    truth: None,
                })
            }
        }
    }
}
