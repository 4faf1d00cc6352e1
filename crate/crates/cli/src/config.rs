//! The run configuration: one JSON document with a section per module.
//!
//! Leaf values can be overridden from the command line with dotted keys
//! (`--override model.max_epochs=5`). Every module seed is derived from the
//! top-level `seed` by XOR with the first eight bytes of SHA-256 of a label.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use sgda_core::augment::{AugmentConfig, FaultSchedule};
use sgda_core::mcsa::fault_frequency_map;
use sgda_core::model::DEFAULT_HIDDEN_UNITS;
use sgda_core::signal::DEFAULT_DB_EPSILON;
use sgda_core::synth::SynthConfig;
use sgda_core::{
    FaultFrequencyMap, FaultType, HarmonicOrders, Label, ModelConfig, ModelKind, MotorParams, NormalizationMode,
    SegmentConfig, Task,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub motor: MotorParams,
    #[serde(default)]
    pub orders: HarmonicOrders,
    #[serde(default = "default_faults")]
    pub faults: Vec<FaultType>,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub segment: SegmentSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub normalization: NormalizationMode,
    /// Floor inside the decibel logarithm.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub paths: Paths,
}

fn default_faults() -> Vec<FaultType> {
    vec![FaultType::RotorBarDefect, FaultType::InterTurnShortCircuit]
}

fn default_epsilon() -> f64 {
    DEFAULT_DB_EPSILON
}

/// Window geometry. Absent entries default to one-second windows, with 50 %
/// overlap for training and none for inference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<SegmentConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inference: Option<SegmentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_min: Option<f64>,
    pub a_max: f64,
    pub sigma_min_hz: f64,
    pub sigma_max_hz: f64,
    pub epsilon_f_hz: f64,
    pub replication_r: usize,
    pub schedule: FaultSchedule,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentConfig::default();
        AugmentSection {
            a_min: d.a_min,
            a_max: d.a_max,
            sigma_min_hz: d.sigma_min_hz,
            sigma_max_hz: d.sigma_max_hz,
            epsilon_f_hz: d.epsilon_f_hz,
            replication_r: d.replication_r,
            schedule: d.schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_learning_rate: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let kind = ModelKind::OneHidden {
            hidden_units: DEFAULT_HIDDEN_UNITS,
        };
        let d = ModelConfig::new(kind, 1, Vec::new());
        ModelSection {
            kind,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            plateau_patience: d.plateau_patience,
            plateau_factor: d.plateau_factor,
            min_learning_rate: d.min_learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultGroup {
    pub fault: FaultType,
    pub count: usize,
    #[serde(default = "default_fault_amplitude")]
    pub amplitude: f64,
}

fn default_fault_amplitude() -> f64 {
    0.05
}

/// What `synth` generates: `healthy` clean signals, then each fault group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Distinguishes independent sets (e.g. "train" and "test") drawn under
    /// the same top-level seed.
    pub label: String,
    pub duration_s: f64,
    pub healthy: usize,
    pub faulty: Vec<FaultGroup>,
    pub base_amplitude: f64,
    pub harmonic_amplitudes: BTreeMap<u32, f64>,
    pub noise_std: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::healthy(MotorParams::motor_a(), 4.0, 0);
        SynthSection {
            label: "default".into(),
            duration_s: d.duration_s,
            healthy: 10,
            faulty: Vec::new(),
            base_amplitude: d.base_amplitude,
            harmonic_amplitudes: d.harmonic_amplitudes,
            noise_std: d.noise_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    /// Epochs whose augmented datasets are frozen to disk.
    pub epochs: Vec<u64>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection { epochs: vec![0] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory of signal CSVs, optionally with a `manifest.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Labeled manifest for `evaluate`; defaults to `<input>/manifest.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

/// `seed XOR first_8_bytes(SHA-256(label))`, little-endian.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(bytes)
}

/// Set `dotted.key` in a JSON tree. The value is parsed as JSON when possible
/// and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{assignment}` is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::config(format!("override `{assignment}` has an empty key segment")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(map) => map,
            _ => {
                return Err(CliError::config(format!(
                    "override `{key}`: `{}` is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last segment")
}

/// Prefix the field of a parameter error with its section.
fn in_section(section: &str, e: sgda_core::Error) -> CliError {
    match e {
        sgda_core::Error::InvalidParam { field, reason } if !field.starts_with(section) => {
            CliError::config(format!("invalid {section}.{field}: {reason}"))
        }
        other => CliError::config(other),
    }
}

impl RunConfig {
    /// Read, override, deserialize and validate.
    pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> CliResult<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut root: Value =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        if let Some(seed) = seed {
            apply_override(&mut root, &format!("seed={seed}"))?;
        }
        Self::from_value(root)
    }

    pub fn from_value(root: Value) -> CliResult<RunConfig> {
        let cfg: RunConfig = serde_path_to_error::deserialize(root).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(format!("field `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.motor.validate().map_err(|e| in_section("motor", e))?;
        self.orders.validate().map_err(|e| in_section("orders", e))?;
        if self.faults.is_empty() {
            return Err(CliError::config("invalid faults: at least one fault type is required"));
        }
        self.fault_map()?;
        self.train_segment().validate().map_err(|e| in_section("segment.train", e))?;
        self.inference_segment()
            .validate()
            .map_err(|e| in_section("segment.inference", e))?;
        if self.train_segment().segment_len_samples != self.inference_segment().segment_len_samples {
            return Err(CliError::config(
                "invalid segment.inference.segment_len_samples: must equal the training segment length",
            ));
        }
        self.augment_config()?.validate().map_err(CliError::from)?;
        self.model_config()?.validate().map_err(CliError::from)?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CliError::config("invalid epsilon: must be a positive number"));
        }
        for (i, g) in self.synth.faulty.iter().enumerate() {
            if !(g.amplitude.is_finite() && g.amplitude >= 0.0) {
                return Err(CliError::config(format!(
                    "invalid synth.faulty[{i}].amplitude: must be nonnegative"
                )));
            }
        }
        Ok(())
    }

    pub fn fault_map(&self) -> CliResult<FaultFrequencyMap> {
        fault_frequency_map(&self.motor, &self.faults, &self.orders).map_err(|e| in_section("motor", e))
    }

    pub fn train_segment(&self) -> SegmentConfig {
        self.segment
            .train
            .unwrap_or_else(|| SegmentConfig::one_second_overlapping(self.motor.sampling_rate_hz))
    }

    pub fn inference_segment(&self) -> SegmentConfig {
        self.segment
            .inference
            .unwrap_or_else(|| SegmentConfig::one_second(self.motor.sampling_rate_hz))
    }

    pub fn classes(&self) -> Vec<Label> {
        self.task.classes(&self.faults)
    }

    pub fn augment_config(&self) -> CliResult<AugmentConfig> {
        let a = &self.augment;
        Ok(AugmentConfig {
            a_min: a.a_min,
            a_max: a.a_max,
            sigma_min_hz: a.sigma_min_hz,
            sigma_max_hz: a.sigma_max_hz,
            epsilon_f_hz: a.epsilon_f_hz,
            replication_r: a.replication_r,
            seed: derive_seed(self.seed, "augment"),
            schedule: a.schedule,
            fault_map: self.fault_map()?,
        })
    }

    pub fn model_config(&self) -> CliResult<ModelConfig> {
        let m = &self.model;
        Ok(ModelConfig {
            learning_rate: m.learning_rate,
            batch_size: m.batch_size,
            max_epochs: m.max_epochs,
            plateau_patience: m.plateau_patience,
            plateau_factor: m.plateau_factor,
            min_learning_rate: m.min_learning_rate,
            seed: derive_seed(self.seed, "model"),
            ..ModelConfig::new(m.kind, self.train_segment().bin_count(), self.classes())
        })
    }

    /// Every signal `synth` produces, with its label, in output order.
    pub fn synth_plan(&self) -> CliResult<Vec<(SynthConfig, Label)>> {
        let s = &self.synth;
        let base = derive_seed(self.seed, &format!("synth/{}", s.label));
        let template = SynthConfig {
            base_amplitude: s.base_amplitude,
            harmonic_amplitudes: s.harmonic_amplitudes.clone(),
            noise_std: s.noise_std,
            orders: self.orders.clone(),
            ..SynthConfig::healthy(self.motor.clone(), s.duration_s, 0)
        };
        let mut plan = Vec::new();
        for _ in 0..s.healthy {
            plan.push((template.clone(), Label::Normal));
        }
        for g in &s.faulty {
            for _ in 0..g.count {
                plan.push((template.clone().with_fault(g.fault, g.amplitude), Label::Fault(g.fault)));
            }
        }
        for (i, (cfg, _)) in plan.iter_mut().enumerate() {
            cfg.seed = base.wrapping_add(i as u64);
            cfg.validate().map_err(|e| in_section("synth", e))?;
        }
        Ok(plan)
    }

    /// The configuration as echoed into artifacts. Paths are left out so that
    /// identical experiments produce identical files wherever they run.
    pub fn echo(&self) -> Value {
        let mut cfg = self.clone();
        cfg.paths = Paths::default();
        serde_json::to_value(cfg).expect("config serializes")
    }
}
