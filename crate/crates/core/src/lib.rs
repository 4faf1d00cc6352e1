//! Signature-guided data augmentation for induction-motor fault diagnosis.
//!
//! The pipeline computes characteristic fault frequencies from motor
//! parameters ([`mcsa`]), turns current signals into normalized one-sided
//! spectra ([`signal`]), injects Gaussian fault peaks at those frequencies to
//! build balanced training sets from healthy recordings alone ([`augment`]),
//! trains small classifiers ([`model`]) and aggregates per-segment predictions
//! into a signal-level verdict by majority vote ([`infer`]). [`synth`]
//! produces healthy and faulted test signals.

pub mod augment;
pub mod dataset;
pub mod error;
pub mod infer;
pub mod label;
pub mod mcsa;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
pub use label::{Label, Task};
pub use mcsa::{BearingGeometry, FaultFrequencyMap, FaultType, FrequencySet, HarmonicOrders, MotorParams};
pub use signal::{NormalizationContext, NormalizationMode, RawSignal, Segment, SegmentConfig, Spectrum, Stage};
pub use augment::{AugmentConfig, LabeledSpectrum, PeakParams};
pub use infer::{BatchReport, VoteReport};
pub use model::{Metrics, ModelConfig, ModelKind, Prediction, TrainedModel};
