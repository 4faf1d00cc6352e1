//! Synthetic stator-current signals: a supply tone with odd harmonics,
//! white Gaussian noise, and optionally pure tones at a fault type's
//! characteristic frequencies.
//!
//! Faults are synthesized in the time domain so that test signals never pass
//! through the spectral augmenter.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcsa::{fault_frequency_map, FaultType, HarmonicOrders, MotorParams};
use crate::rng::{self, Domain};
use crate::signal::RawSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultTone {
    pub fault: FaultType,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub params: MotorParams,
    #[serde(default)]
    pub orders: HarmonicOrders,
    pub duration_s: f64,
    #[serde(default = "default_base_amplitude")]
    pub base_amplitude: f64,
    /// Odd harmonic order → amplitude as a fraction of `base_amplitude`.
    #[serde(default = "default_harmonics")]
    pub harmonic_amplitudes: BTreeMap<u32, f64>,
    /// Absolute noise standard deviation.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultTone>,
    #[serde(default)]
    pub seed: u64,
}

fn default_base_amplitude() -> f64 {
    1.0
}

fn default_harmonics() -> BTreeMap<u32, f64> {
    BTreeMap::from([(3, 0.05), (5, 0.02)])
}

fn default_noise_std() -> f64 {
    0.01
}

impl SynthConfig {
    /// Healthy signal with the default harmonic ladder and 1 % noise.
    pub fn healthy(params: MotorParams, duration_s: f64, seed: u64) -> Self {
        SynthConfig {
            params,
            orders: HarmonicOrders::default(),
            duration_s,
            base_amplitude: default_base_amplitude(),
            harmonic_amplitudes: default_harmonics(),
            noise_std: default_noise_std(),
            fault: None,
            seed,
        }
    }

    pub fn with_fault(mut self, fault: FaultType, amplitude: f64) -> Self {
        self.fault = Some(FaultTone { fault, amplitude });
        self
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.params.sampling_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) || self.sample_count() < 1 {
            return Err(Error::invalid(
                "synth.duration_s",
                "must give at least one sample at the sampling rate",
            ));
        }
        if !(self.base_amplitude.is_finite() && self.base_amplitude > 0.0) {
            return Err(Error::invalid("synth.base_amplitude", "must be positive"));
        }
        for (&h, &a) in &self.harmonic_amplitudes {
            if h == 0 || h % 2 == 0 {
                return Err(Error::invalid(
                    "synth.harmonic_amplitudes",
                    format!("harmonic {h} is not an odd positive order"),
                ));
            }
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::invalid(
                    "synth.harmonic_amplitudes",
                    format!("amplitude of harmonic {h} must be nonnegative"),
                ));
            }
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid("synth.noise_std", "must be nonnegative"));
        }
        if let Some(tone) = &self.fault {
            if !(tone.amplitude > 0.0 && tone.amplitude < self.base_amplitude) {
                return Err(Error::invalid(
                    "synth.fault.amplitude",
                    "must be positive and below base_amplitude",
                ));
            }
        }
        Ok(())
    }

    /// Frequencies of the injected fault tones, if any.
    pub fn fault_frequencies(&self) -> Result<Vec<f64>> {
        match &self.fault {
            None => Ok(Vec::new()),
            Some(tone) => {
                let map = fault_frequency_map(&self.params, &[tone.fault], &self.orders)?;
                Ok(map.union())
            }
        }
    }
}

/// Render the configured signal. Identical configs give bit-identical output.
pub fn generate(cfg: &SynthConfig) -> Result<RawSignal> {
    cfg.validate()?;
    let fs = cfg.params.sampling_rate_hz;
    let f1 = cfg.params.supply_frequency_hz;
    let nyquist = cfg.params.nyquist_hz();

    let mut tones: Vec<(f64, f64)> = vec![(f1, cfg.base_amplitude)];
    for (&h, &rel) in &cfg.harmonic_amplitudes {
        let f = h as f64 * f1;
        if h > 1 && f < nyquist && rel > 0.0 {
            tones.push((f, rel * cfg.base_amplitude));
        }
    }
    if let Some(tone) = &cfg.fault {
        tones.extend(cfg.fault_frequencies()?.into_iter().map(|f| (f, tone.amplitude)));
    }

    let mut rng = rng::stream(Domain::Synth, cfg.seed, 0, 0);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid("synth.noise_std", e.to_string()))?;
    let samples = (0..cfg.sample_count())
        .map(|n| {
            let t = n as f64 / fs;
            let clean: f64 = tones.iter().map(|&(f, a)| a * (TAU * f * t).sin()).sum();
            if cfg.noise_std > 0.0 {
                clean + noise.sample(&mut rng)
            } else {
                clean
            }
        })
        .collect();
    let source = match &cfg.fault {
        Some(tone) => format!("synth-{}-{}", tone.fault.abbrev(), cfg.seed),
        None => format!("synth-normal-{}", cfg.seed),
    };
    RawSignal::single_channel(samples, fs, source)
}
