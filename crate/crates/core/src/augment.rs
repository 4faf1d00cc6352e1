//! Frequency-domain fault synthesis.
//!
//! A fault variant of a normalized healthy spectrum is the spectrum plus one
//! Gaussian bump per characteristic frequency `f*` of the fault:
//!
//! ```text
//! P(x) = 1{|x| <= eps_f} * A * exp(-(x - mu)^2 / (2 sigma^2)),   x = f_k - f*
//! ```
//!
//! with `|A| ~ U(a_min, a_max)` times a random sign, `mu ~ U(-eps_f, eps_f)` and
//! `sigma ~ U(sigma_min, sigma_max)`. Bins outside every window are left
//! untouched, bit for bit. Values are not clipped back into `[0, 1]`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, Task};
use crate::mcsa::{FaultFrequencyMap, FaultType};
use crate::rng;
use crate::signal::{Spectrum, Stage};

/// One sampled Gaussian peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    /// Signed amplitude.
    pub amplitude: f64,
    /// Offset of the peak centre from the anchor.
    pub mu_hz: f64,
    pub sigma_hz: f64,
    pub anchor_hz: f64,
    /// Half-width of the support around the anchor.
    pub window_hz: f64,
}

/// How fault types are assigned to the `K` synthetic variants of a parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FaultSchedule {
    /// Cycle through the fault classes so every class gets exactly `1 + R`.
    #[default]
    Stratified,
    /// Draw each variant's fault uniformly at random.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Lower amplitude bound. `None` estimates it per parent as the mean
    /// absolute difference between successive bins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_min: Option<f64>,
    pub a_max: f64,
    pub sigma_min_hz: f64,
    pub sigma_max_hz: f64,
    pub epsilon_f_hz: f64,
    pub replication_r: usize,
    pub seed: u64,
    pub schedule: FaultSchedule,
    pub fault_map: FaultFrequencyMap,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            a_min: None,
            a_max: 1.0,
            sigma_min_hz: 0.1,
            sigma_max_hz: 0.5,
            epsilon_f_hz: 2.0,
            replication_r: 0,
            seed: 0,
            schedule: FaultSchedule::Stratified,
            fault_map: FaultFrequencyMap::default(),
        }
    }
}

impl AugmentConfig {
    pub fn with_fault_map(fault_map: FaultFrequencyMap) -> Self {
        AugmentConfig {
            fault_map,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a_min) = self.a_min {
            if !(a_min.is_finite() && a_min >= 0.0) {
                return Err(Error::invalid("augment.a_min", "must be nonnegative"));
            }
            if a_min > self.a_max {
                return Err(Error::invalid("augment.a_min", "must not exceed a_max"));
            }
        }
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::invalid("augment.a_max", "must be positive"));
        }
        if !(self.sigma_min_hz.is_finite() && self.sigma_min_hz > 0.0) {
            return Err(Error::invalid("augment.sigma_min_hz", "must be positive"));
        }
        if !(self.sigma_max_hz.is_finite() && self.sigma_max_hz >= self.sigma_min_hz) {
            return Err(Error::invalid("augment.sigma_max_hz", "must be at least sigma_min_hz"));
        }
        if !(self.epsilon_f_hz.is_finite() && self.epsilon_f_hz > 0.0) {
            return Err(Error::invalid("augment.epsilon_f_hz", "must be positive"));
        }
        if self.fault_map.is_empty() {
            return Err(Error::invalid("augment.fault_map", "no fault types configured"));
        }
        Ok(())
    }

    /// The fault labels of `task`, in class order.
    pub fn fault_labels(&self, task: Task) -> Vec<Label> {
        let faults: Vec<FaultType> = self.fault_map.faults().collect();
        task.classes(&faults).into_iter().skip(1).collect()
    }

    /// Synthetic variants per parent: `1 + R` per fault class.
    pub fn variants_per_parent(&self, task: Task) -> usize {
        self.fault_labels(task).len() * (1 + self.replication_r)
    }

    /// Sampling bounds for peaks injected into `parent`.
    pub fn bounds_for(&self, parent: &[f64]) -> PeakBounds {
        let a_min = self.a_min.unwrap_or_else(|| local_variability(parent)).min(self.a_max);
        PeakBounds {
            a_min,
            a_max: self.a_max,
            sigma_min_hz: self.sigma_min_hz,
            sigma_max_hz: self.sigma_max_hz,
            epsilon_f_hz: self.epsilon_f_hz,
        }
    }

    /// Anchor frequencies for a label; empty for `Normal`.
    pub fn anchors(&self, label: Label) -> Result<Vec<f64>> {
        match label {
            Label::Normal => Ok(Vec::new()),
            Label::Anomalous => Ok(self.fault_map.union()),
            Label::Fault(f) => self
                .fault_map
                .get(f)
                .map(|s| s.frequencies_hz.clone())
                .ok_or_else(|| Error::UnknownLabel(label.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub sigma_min_hz: f64,
    pub sigma_max_hz: f64,
    pub epsilon_f_hz: f64,
}

/// Mean absolute difference between successive bins.
pub fn local_variability(bins: &[f64]) -> f64 {
    if bins.len() < 2 {
        return 0.0;
    }
    bins.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (bins.len() - 1) as f64
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draw `|A|`, the sign, `mu` and `sigma`, in that order.
pub fn sample_peak<R: Rng + ?Sized>(anchor_hz: f64, bounds: &PeakBounds, rng: &mut R) -> PeakParams {
    let magnitude = uniform(rng, bounds.a_min, bounds.a_max);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mu_hz = uniform(rng, -bounds.epsilon_f_hz, bounds.epsilon_f_hz);
    let sigma_hz = uniform(rng, bounds.sigma_min_hz, bounds.sigma_max_hz);
    PeakParams {
        amplitude: sign * magnitude,
        mu_hz,
        sigma_hz,
        anchor_hz,
        window_hz: bounds.epsilon_f_hz,
    }
}

/// Index range of bins with `|f_k - anchor| <= window` on a sorted axis.
pub fn window_range(freq_axis: &[f64], anchor_hz: f64, window_hz: f64) -> std::ops::Range<usize> {
    let lo = freq_axis.partition_point(|&f| f - anchor_hz < -window_hz);
    let hi = freq_axis.partition_point(|&f| f - anchor_hz <= window_hz);
    lo..hi.max(lo)
}

fn peak_value(peak: &PeakParams, f: f64) -> f64 {
    let x = f - peak.anchor_hz;
    let d = x - peak.mu_hz;
    peak.amplitude * (-(d * d) / (2.0 * peak.sigma_hz * peak.sigma_hz)).exp()
}

fn check_peak(peak: &PeakParams) -> Result<()> {
    if !(peak.sigma_hz > 0.0) {
        return Err(Error::invalid("peak.sigma_hz", "must be positive"));
    }
    Ok(())
}

/// The peak evaluated at every bin; exactly zero outside the window.
pub fn gaussian_peak_vector(freq_axis: &[f64], peak: &PeakParams) -> Result<Vec<f64>> {
    check_peak(peak)?;
    let mut out = vec![0.0; freq_axis.len()];
    for k in window_range(freq_axis, peak.anchor_hz, peak.window_hz) {
        out[k] = peak_value(peak, freq_axis[k]);
    }
    Ok(out)
}

/// Add one freshly sampled peak per anchor to a copy of `bins`. The peaks are
/// accumulated into a delta first, then added to the parent.
pub fn inject_peaks<R: Rng + ?Sized>(
    bins: &[f64],
    freq_axis: &[f64],
    anchors: &[f64],
    bounds: &PeakBounds,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<PeakParams>)> {
    let mut delta = vec![0.0; bins.len()];
    let mut touched = vec![false; bins.len()];
    let mut peaks = Vec::with_capacity(anchors.len());
    for &anchor in anchors {
        let peak = sample_peak(anchor, bounds, rng);
        check_peak(&peak)?;
        for k in window_range(freq_axis, anchor, peak.window_hz) {
            delta[k] += peak_value(&peak, freq_axis[k]);
            touched[k] = true;
        }
        peaks.push(peak);
    }
    let out = bins
        .iter()
        .zip(delta.iter().zip(&touched))
        .map(|(&b, (&d, &t))| if t { b + d } else { b })
        .collect();
    Ok((out, peaks))
}

/// Where an epoch sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub parent: usize,
    pub epoch: u64,
    pub variant: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectrum {
    pub spectrum: Spectrum,
    pub label: Label,
    pub provenance: Provenance,
}

fn check_parent(parent: &Spectrum) -> Result<()> {
    parent.expect_stage(Stage::Normalized)?;
    if parent.channel_count() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: parent.channel_count(),
        });
    }
    Ok(())
}

/// Identity for `Normal`; otherwise the parent plus sampled peaks at every
/// characteristic frequency of the label.
pub fn augment_spectrum<R: Rng + ?Sized>(
    parent: &Spectrum,
    label: Label,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<LabeledSpectrum> {
    check_parent(parent)?;
    let provenance = Provenance {
        parent: 0,
        epoch: 0,
        variant: 0,
    };
    if label.is_normal() {
        return Ok(LabeledSpectrum {
            spectrum: parent.clone(),
            label,
            provenance,
        });
    }
    let anchors = cfg.anchors(label)?;
    let bins = &parent.channels[0];
    let (augmented, _) = inject_peaks(bins, &parent.freq_axis_hz, &anchors, &cfg.bounds_for(bins), rng)?;
    Ok(LabeledSpectrum {
        spectrum: Spectrum {
            channels: vec![augmented],
            freq_axis_hz: parent.freq_axis_hz.clone(),
            stage: Stage::Augmented,
        },
        label,
        provenance,
    })
}

/// One epoch of the balanced training set.
///
/// For each parent: `R + 1` identical `Normal` copies, then `K` synthetic
/// variants where `K = 1 + R` (binary) or `K = |faults| (1 + R)` (multiclass).
/// Variant `v` of parent `p` draws from its own stream keyed by
/// `(seed, epoch, p, v)`.
pub fn build_epoch_dataset(
    parents: &[Spectrum],
    cfg: &AugmentConfig,
    task: Task,
    epoch: u64,
) -> Result<Vec<LabeledSpectrum>> {
    if parents.is_empty() {
        return Err(Error::invalid("parents", "no healthy spectra to augment"));
    }
    cfg.validate()?;
    let fault_labels = cfg.fault_labels(task);
    let normal_copies = cfg.replication_r + 1;
    let variants = cfg.variants_per_parent(task);

    let mut out = Vec::with_capacity(parents.len() * (normal_copies + variants));
    for (p, parent) in parents.iter().enumerate() {
        check_parent(parent)?;
        for r in 0..normal_copies {
            out.push(LabeledSpectrum {
                spectrum: parent.clone(),
                label: Label::Normal,
                provenance: Provenance {
                    parent: p,
                    epoch,
                    variant: r,
                },
            });
        }
        for v in 0..variants {
            let mut rng = rng::augment_stream(cfg.seed, epoch, p as u64, v as u64);
            let label = match cfg.schedule {
                FaultSchedule::Stratified => fault_labels[v % fault_labels.len()],
                FaultSchedule::Uniform => fault_labels[rng.random_range(0..fault_labels.len())],
            };
            let mut sample = augment_spectrum(parent, label, cfg, &mut rng)?;
            sample.provenance = Provenance {
                parent: p,
                epoch,
                variant: normal_copies + v,
            };
            out.push(sample);
        }
    }
    Ok(out)
}

pub fn class_counts(samples: &[LabeledSpectrum]) -> BTreeMap<Label, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.label).or_insert(0) += 1;
    }
    counts
}
