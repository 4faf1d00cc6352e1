//! Raw current signals and their spectral representation: sliding-window
//! segmentation, one-sided FFT magnitude, decibel scaling and min–max
//! normalization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor added to magnitudes before taking the logarithm.
pub const DEFAULT_DB_EPSILON: f64 = 1e-12;

/// A sampled multichannel current signal, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSignal {
    channels: Vec<Vec<f64>>,
    sampling_rate_hz: f64,
    source_id: String,
}

impl RawSignal {
    pub fn new(channels: Vec<Vec<f64>>, sampling_rate_hz: f64, source_id: impl Into<String>) -> Result<Self> {
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::invalid("sampling_rate_hz", "must be a positive number"));
        }
        let Some(first) = channels.first() else {
            return Err(Error::invalid("samples", "signal has no channels"));
        };
        let len = first.len();
        if len == 0 {
            return Err(Error::invalid("samples", "signal has no samples"));
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("samples", "channels differ in length"));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", "signal contains NaN or infinite values"));
        }
        Ok(RawSignal {
            channels,
            sampling_rate_hz,
            source_id: source_id.into(),
        })
    }

    pub fn single_channel(samples: Vec<f64>, sampling_rate_hz: f64, source_id: impl Into<String>) -> Result<Self> {
        Self::new(vec![samples], sampling_rate_hz, source_id)
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, j: usize) -> &[f64] {
        &self.channels[j]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Write as CSV: a `channel_j` header row, then one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.channel_count()).map(|j| format!("channel_{j}")).collect();
        writer.write_record(&header).map_err(csv_io)?;
        let mut row = Vec::with_capacity(self.channel_count());
        for n in 0..self.len() {
            row.clear();
            row.extend(self.channels.iter().map(|c| c[n].to_string()));
            writer.write_record(&row).map_err(csv_io)?;
        }
        writer.flush().map_err(|e| Error::io(&self.source_id, e))?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

/// Read a CSV with one row per sample and one column per channel. A single
/// leading header row is skipped if it is not numeric.
pub fn load_signal_csv(path: impl AsRef<Path>, sampling_rate_hz: f64) -> Result<RawSignal> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut channels: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            reason: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(values) => values,
            Err(_) if row == 1 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    reason: format!("not a number ({e})"),
                })
            }
        };
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                reason: format!("non-finite value {v}"),
            });
        }
        if channels.is_empty() {
            channels = vec![Vec::new(); values.len()];
        } else if values.len() != channels.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                reason: format!("expected {} columns, found {}", channels.len(), values.len()),
            });
        }
        for (c, v) in channels.iter_mut().zip(values) {
            c.push(v);
        }
    }
    if channels.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }
    RawSignal::new(channels, sampling_rate_hz, path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub segment_len_samples: usize,
    pub step_samples: usize,
}

impl SegmentConfig {
    /// One-second, non-overlapping windows (inference).
    pub fn one_second(sampling_rate_hz: f64) -> Self {
        let len = (sampling_rate_hz.round() as usize).max(1);
        SegmentConfig {
            segment_len_samples: len,
            step_samples: len,
        }
    }

    /// One-second windows with 50 % overlap (training-set building).
    pub fn one_second_overlapping(sampling_rate_hz: f64) -> Self {
        let len = (sampling_rate_hz.round() as usize).max(1);
        SegmentConfig {
            segment_len_samples: len,
            step_samples: (len / 2).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_len_samples == 0 {
            return Err(Error::invalid("segment.segment_len_samples", "must be positive"));
        }
        if self.step_samples == 0 || self.step_samples > self.segment_len_samples {
            return Err(Error::invalid(
                "segment.step_samples",
                "must lie in [1, segment_len_samples]",
            ));
        }
        Ok(())
    }

    /// Number of windows over a signal of `n` samples.
    pub fn segment_count(&self, n: usize) -> usize {
        if n < self.segment_len_samples {
            0
        } else {
            (n - self.segment_len_samples) / self.step_samples + 1
        }
    }

    /// One-sided bin count of each segment's spectrum.
    pub fn bin_count(&self) -> usize {
        self.segment_len_samples / 2 + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Channel-major, `L` samples per channel.
    pub data: Vec<Vec<f64>>,
    pub index: usize,
    pub parent: String,
    pub sampling_rate_hz: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Split a signal into windows `[iΔ, iΔ + L)` for `i = 0..=⌊(N − L)/Δ⌋`.
pub fn segment(signal: &RawSignal, cfg: &SegmentConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let n = signal.len();
    if n < cfg.segment_len_samples {
        return Err(Error::SignalTooShort {
            len: n,
            segment_len: cfg.segment_len_samples,
        });
    }
    Ok((0..cfg.segment_count(n))
        .map(|i| {
            let start = i * cfg.step_samples;
            Segment {
                data: signal
                    .channels()
                    .iter()
                    .map(|c| c[start..start + cfg.segment_len_samples].to_vec())
                    .collect(),
                index: i,
                parent: signal.source_id().to_string(),
                sampling_rate_hz: signal.sampling_rate_hz(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Magnitude,
    Decibel,
    Normalized,
    /// A normalized spectrum with injected synthetic peaks.
    Augmented,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Magnitude => "Magnitude",
            Stage::Decibel => "Decibel",
            Stage::Normalized => "Normalized",
            Stage::Augmented => "Augmented",
        }
    }
}

/// One-sided spectrum of a segment, one bin vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub channels: Vec<Vec<f64>>,
    pub freq_axis_hz: Vec<f64>,
    pub stage: Stage,
}

impl Spectrum {
    pub fn new(channels: Vec<Vec<f64>>, freq_axis_hz: Vec<f64>, stage: Stage) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("spectrum", "no channels"));
        }
        if let Some(c) = channels.iter().find(|c| c.len() != freq_axis_hz.len()) {
            return Err(Error::DimensionMismatch {
                expected: freq_axis_hz.len(),
                found: c.len(),
            });
        }
        Ok(Spectrum {
            channels,
            freq_axis_hz,
            stage,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.freq_axis_hz.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// The single-channel spectrum of channel `j`.
    pub fn channel(&self, j: usize) -> Spectrum {
        Spectrum {
            channels: vec![self.channels[j].clone()],
            freq_axis_hz: self.freq_axis_hz.clone(),
            stage: self.stage,
        }
    }

    /// Split into one single-channel spectrum per channel.
    pub fn into_channels(self) -> Vec<Spectrum> {
        let Spectrum {
            channels,
            freq_axis_hz,
            stage,
        } = self;
        channels
            .into_iter()
            .map(|c| Spectrum {
                channels: vec![c],
                freq_axis_hz: freq_axis_hz.clone(),
                stage,
            })
            .collect()
    }

    pub(crate) fn expect_stage(&self, expected: Stage) -> Result<()> {
        if self.stage != expected {
            return Err(Error::StageMismatch {
                expected: expected.name(),
                found: self.stage.name(),
            });
        }
        Ok(())
    }

    /// CSV with columns `freq_hz, channel_0, ..., channel_{d-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        let io = |e| Error::io("<spectrum csv>", e);
        write!(out, "freq_hz").map_err(io)?;
        for j in 0..self.channel_count() {
            write!(out, ",channel_{j}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for (k, f) in self.freq_axis_hz.iter().enumerate() {
            write!(out, "{f}").map_err(io)?;
            for c in &self.channels {
                write!(out, ",{}", c[k]).map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Reusable FFT plan for segments of one fixed length.
pub struct SpectrumAnalyzer {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer").field("len", &self.len).finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        SpectrumAnalyzer { len, fft }
    }

    /// One-sided magnitude `|X_k|`, `k = 0..=L/2`, `f_k = k fs / L`. No taper.
    pub fn magnitude(&self, seg: &Segment) -> Result<Spectrum> {
        if seg.is_empty() {
            return Err(Error::invalid("segment", "empty segment"));
        }
        if seg.len() != self.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: seg.len(),
            });
        }
        let bins = self.len / 2 + 1;
        let mut scratch = vec![Complex::default(); self.fft.get_inplace_scratch_len()];
        let channels = seg
            .data
            .iter()
            .map(|samples| {
                let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                buf[..bins].iter().map(|c| c.norm()).collect()
            })
            .collect();
        let step = seg.sampling_rate_hz / self.len as f64;
        let freq_axis_hz = (0..bins).map(|k| k as f64 * step).collect();
        Ok(Spectrum {
            channels,
            freq_axis_hz,
            stage: Stage::Magnitude,
        })
    }
}

pub fn fft_magnitude(seg: &Segment) -> Result<Spectrum> {
    SpectrumAnalyzer::new(seg.len().max(1)).magnitude(seg)
}

/// `20 log10(|X| + ε)` elementwise.
pub fn db_scale(spec: &Spectrum, epsilon: f64) -> Result<Spectrum> {
    spec.expect_stage(Stage::Magnitude)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be a positive number"));
    }
    Ok(Spectrum {
        channels: spec
            .channels
            .iter()
            .map(|c| c.iter().map(|&m| 20.0 * (m + epsilon).log10()).collect())
            .collect(),
        freq_axis_hz: spec.freq_axis_hz.clone(),
        stage: Stage::Decibel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalizationMode {
    /// Each spectrum-channel scaled by its own extrema.
    #[default]
    PerSegmentChannel,
    /// Each channel scaled by extrema pooled over every spectrum.
    GlobalPerChannel,
}

impl NormalizationMode {
    pub fn name(self) -> &'static str {
        match self {
            NormalizationMode::PerSegmentChannel => "PerSegmentChannel",
            NormalizationMode::GlobalPerChannel => "GlobalPerChannel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
}

impl Extrema {
    fn of(values: &[f64]) -> Extrema {
        values.iter().fold(
            Extrema {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |e, &v| Extrema {
                min: e.min.min(v),
                max: e.max.max(v),
            },
        )
    }

    fn merge(self, other: Extrema) -> Extrema {
        Extrema {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    /// Min–max scale; a degenerate range maps every value to 0.5.
    fn scale(&self, values: &[f64]) -> Vec<f64> {
        if self.is_degenerate() {
            return vec![0.5; values.len()];
        }
        let range = self.max - self.min;
        values.iter().map(|&v| (v - self.min) / range).collect()
    }
}

/// What is needed to normalize future spectra the way the training set was.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationContext {
    pub mode: NormalizationMode,
    /// Per-channel extrema (GlobalPerChannel only; empty otherwise).
    #[serde(default)]
    pub extrema: Vec<Extrema>,
}

impl NormalizationContext {
    pub fn per_segment() -> Self {
        NormalizationContext {
            mode: NormalizationMode::PerSegmentChannel,
            extrema: Vec::new(),
        }
    }

    /// The context restricted to channel `j`, for single-channel spectra.
    pub fn for_channel(&self, j: usize) -> Result<NormalizationContext> {
        match self.mode {
            NormalizationMode::PerSegmentChannel => Ok(self.clone()),
            NormalizationMode::GlobalPerChannel => {
                let e = self.extrema.get(j).ok_or(Error::DimensionMismatch {
                    expected: self.extrema.len(),
                    found: j + 1,
                })?;
                Ok(NormalizationContext {
                    mode: self.mode,
                    extrema: vec![*e],
                })
            }
        }
    }

    /// Normalize one decibel spectrum. Under GlobalPerChannel values outside
    /// the stored range are clamped and the returned flag is set.
    pub fn apply(&self, spec: &Spectrum) -> Result<(Spectrum, bool)> {
        spec.expect_stage(Stage::Decibel)?;
        let mut out_of_range = false;
        let channels = match self.mode {
            NormalizationMode::PerSegmentChannel => {
                spec.channels.iter().map(|c| Extrema::of(c).scale(c)).collect()
            }
            NormalizationMode::GlobalPerChannel => {
                if spec.channel_count() > self.extrema.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.extrema.len(),
                        found: spec.channel_count(),
                    });
                }
                spec.channels
                    .iter()
                    .zip(&self.extrema)
                    .map(|(c, e)| {
                        let mut scaled = e.scale(c);
                        for v in &mut scaled {
                            if !(0.0..=1.0).contains(v) {
                                out_of_range = true;
                                *v = v.clamp(0.0, 1.0);
                            }
                        }
                        scaled
                    })
                    .collect()
            }
        };
        Ok((
            Spectrum {
                channels,
                freq_axis_hz: spec.freq_axis_hz.clone(),
                stage: Stage::Normalized,
            },
            out_of_range,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub spectra: Vec<Spectrum>,
    pub context: NormalizationContext,
    /// Spectrum-channels whose extrema coincided (all bins set to 0.5).
    pub degenerate_channels: usize,
}

/// Min–max normalize decibel spectra into `[0, 1]`.
pub fn normalize(specs: &[Spectrum], mode: NormalizationMode) -> Result<Normalized> {
    let Some(first) = specs.first() else {
        return Err(Error::invalid("spectra", "nothing to normalize"));
    };
    for s in specs {
        s.expect_stage(Stage::Decibel)?;
        if s.channel_count() != first.channel_count() {
            return Err(Error::DimensionMismatch {
                expected: first.channel_count(),
                found: s.channel_count(),
            });
        }
    }
    let context = match mode {
        NormalizationMode::PerSegmentChannel => NormalizationContext::per_segment(),
        NormalizationMode::GlobalPerChannel => {
            let extrema = (0..first.channel_count())
                .map(|j| {
                    specs
                        .iter()
                        .map(|s| Extrema::of(&s.channels[j]))
                        .reduce(Extrema::merge)
                        .expect("nonempty")
                })
                .collect();
            NormalizationContext { mode, extrema }
        }
    };
    let degenerate_channels = match mode {
        NormalizationMode::PerSegmentChannel => specs
            .iter()
            .flat_map(|s| s.channels.iter())
            .filter(|c| Extrema::of(c).is_degenerate())
            .count(),
        NormalizationMode::GlobalPerChannel => {
            specs.len() * context.extrema.iter().filter(|e| e.is_degenerate()).count()
        }
    };
    let spectra = specs
        .iter()
        .map(|s| context.apply(s).map(|(n, _)| n))
        .collect::<Result<_>>()?;
    Ok(Normalized {
        spectra,
        context,
        degenerate_channels,
    })
}

/// Segment, transform and dB-scale a signal; one spectrum per segment.
pub fn decibel_spectra(signal: &RawSignal, cfg: &SegmentConfig, epsilon: f64) -> Result<Vec<Spectrum>> {
    let segments = segment(signal, cfg)?;
    let analyzer = SpectrumAnalyzer::new(cfg.segment_len_samples);
    segments
        .iter()
        .map(|seg| db_scale(&analyzer.magnitude(seg)?, epsilon))
        .collect()
}
