//! End-to-end training from healthy signals only.

use crate::augment::{build_epoch_dataset, AugmentConfig};
use crate::error::{Error, Result};
use crate::label::Task;
use crate::model::{train, ModelConfig, TrainedModel};
use crate::signal::{decibel_spectra, normalize, NormalizationContext, NormalizationMode, RawSignal, SegmentConfig, Spectrum};

/// Normalized single-channel spectra of every segment of every signal, plus
/// the normalization context to reuse at inference.
#[derive(Debug, Clone)]
pub struct Parents {
    pub spectra: Vec<Spectrum>,
    pub context: NormalizationContext,
}

pub fn prepare_parents(
    signals: &[RawSignal],
    seg_cfg: &SegmentConfig,
    mode: NormalizationMode,
    db_epsilon: f64,
) -> Result<Parents> {
    if signals.is_empty() {
        return Err(Error::invalid("signals", "no training signals"));
    }
    let channels = signals[0].channel_count();
    if let Some(s) = signals.iter().find(|s| s.channel_count() != channels) {
        return Err(Error::DimensionMismatch {
            expected: channels,
            found: s.channel_count(),
        });
    }
    let mut db = Vec::new();
    for s in signals {
        db.extend(decibel_spectra(s, seg_cfg, db_epsilon)?);
    }
    let normalized = normalize(&db, mode)?;
    let spectra = normalized
        .spectra
        .into_iter()
        .flat_map(Spectrum::into_channels)
        .collect();
    Ok(Parents {
        spectra,
        context: normalized.context,
    })
}

/// Train on per-epoch augmented datasets built from `parents`.
pub fn train_on_parents(
    parents: &Parents,
    augment: &AugmentConfig,
    task: Task,
    model_cfg: &ModelConfig,
    db_epsilon: f64,
) -> Result<TrainedModel> {
    let mut model = train(
        |epoch| build_epoch_dataset(&parents.spectra, augment, task, epoch),
        model_cfg,
    )?;
    model.normalization = parents.context.clone();
    model.db_epsilon = db_epsilon;
    Ok(model)
}
