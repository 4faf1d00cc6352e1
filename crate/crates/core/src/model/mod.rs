//! Lightweight classifiers over normalized spectra: multinomial/binary
//! logistic regression and a one-hidden-layer rectifier network, trained with
//! Adam on cross-entropy and a reduce-on-plateau learning-rate schedule.

mod metrics;
mod network;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::LabeledSpectrum;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::rng::{self, Domain};
use crate::signal::{NormalizationContext, Spectrum, Stage, DEFAULT_DB_EPSILON};

pub use metrics::{ClassMetrics, Metrics};
pub use network::{Architecture, ModelKind};

/// Finite-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub input_dim: usize,
    /// `Normal` first.
    pub classes: Vec<Label>,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "defaults::plateau_patience")]
    pub plateau_patience: usize,
    #[serde(default = "defaults::plateau_factor")]
    pub plateau_factor: f64,
    #[serde(default = "defaults::min_learning_rate")]
    pub min_learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn learning_rate() -> f64 {
        1e-3
    }
    pub fn batch_size() -> usize {
        16
    }
    pub fn max_epochs() -> usize {
        100
    }
    pub fn plateau_patience() -> usize {
        10
    }
    pub fn plateau_factor() -> f64 {
        0.5
    }
    pub fn min_learning_rate() -> f64 {
        1e-6
    }
}

pub const DEFAULT_HIDDEN_UNITS: usize = 64;

impl ModelConfig {
    pub fn new(kind: ModelKind, input_dim: usize, classes: Vec<Label>) -> Self {
        ModelConfig {
            kind,
            input_dim,
            classes,
            learning_rate: defaults::learning_rate(),
            batch_size: defaults::batch_size(),
            max_epochs: defaults::max_epochs(),
            plateau_patience: defaults::plateau_patience(),
            plateau_factor: defaults::plateau_factor(),
            min_learning_rate: defaults::min_learning_rate(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("model.input_dim", "must be positive"));
        }
        if let ModelKind::OneHidden { hidden_units: 0 } = self.kind {
            return Err(Error::invalid("model.kind.hidden_units", "must be positive"));
        }
        if self.classes.len() < 2 {
            return Err(Error::invalid("model.classes", "need at least two classes"));
        }
        if self.classes[0] != Label::Normal {
            return Err(Error::invalid("model.classes", "Normal must be the first class"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(Error::invalid("model.classes", format!("duplicate class {c}")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("model.learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("model.batch_size", "must be positive"));
        }
        if self.plateau_patience == 0 {
            return Err(Error::invalid("model.plateau_patience", "must be positive"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::invalid("model.plateau_factor", "must lie in (0, 1)"));
        }
        if !(self.min_learning_rate >= 0.0) {
            return Err(Error::invalid("model.min_learning_rate", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture::new(self.kind, self.input_dim, self.classes.len())
    }
}

/// Adam with the usual moment constants.
#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Multiply the learning rate by `factor` after `patience` epochs without a
/// relative loss improvement of at least `THRESHOLD`.
#[derive(Debug, Clone)]
struct Plateau {
    best: f64,
    wait: usize,
    patience: usize,
    factor: f64,
    floor: f64,
}

impl Plateau {
    const THRESHOLD: f64 = 1e-4;

    fn step(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best * (1.0 - Self::THRESHOLD) {
            self.best = loss;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.wait = 0;
            return (lr * self.factor).max(self.floor);
        }
        lr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub macro_f1: f64,
    pub learning_rate: f64,
    pub class_counts: BTreeMap<Label, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub label: Label,
    pub class_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub class_order: Vec<Label>,
    pub normalization: NormalizationContext,
    #[serde(default = "default_db_epsilon")]
    pub db_epsilon: f64,
    /// Per-bin mean of the first training epoch, subtracted from every input
    /// before the first layer. Empty means no centering.
    #[serde(default, with = "f64_base64")]
    pub input_offset: Vec<f64>,
    #[serde(with = "f64_base64")]
    pub parameters: Vec<f64>,
    pub train_log: Vec<EpochLog>,
}

impl TrainedModel {
    /// Freshly initialized, untrained model.
    pub fn initialize(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init_rng = rng::stream(Domain::ModelInit, cfg.seed, 0, 0);
        Ok(TrainedModel {
            config: cfg.clone(),
            class_order: cfg.classes.clone(),
            normalization: NormalizationContext::per_segment(),
            db_epsilon: DEFAULT_DB_EPSILON,
            input_offset: Vec::new(),
            parameters: cfg.architecture().init(&mut init_rng),
            train_log: Vec::new(),
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(s)?;
        model.config.validate()?;
        if model.class_order != model.config.classes {
            return Err(Error::invalid("class_order", "does not match the model configuration"));
        }
        let expected = model.architecture().parameter_count();
        if model.parameters.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: model.parameters.len(),
            });
        }
        if !model.input_offset.is_empty() && model.input_offset.len() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                found: model.input_offset.len(),
            });
        }
        if model.parameters.iter().chain(&model.input_offset).any(|p| !p.is_finite()) {
            return Err(Error::invalid("parameters", "non-finite weight"));
        }
        Ok(model)
    }

    /// The same classifier with its fault classes listed in a different order.
    /// `Normal` must stay first; two-class models have nothing to permute.
    pub fn with_class_order(&self, order: &[Label]) -> Result<TrainedModel> {
        if order.len() != self.class_order.len() || order.first() != Some(&Label::Normal) {
            return Err(Error::invalid("class_order", "must be a permutation with Normal first"));
        }
        let perm = order
            .iter()
            .map(|l| {
                self.class_order
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| Error::UnknownLabel(l.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        if !self.architecture().is_binary() {
            out.parameters = self.architecture().permute_outputs(&self.parameters, &perm);
        }
        out.class_order = order.to_vec();
        out.config.classes = order.to_vec();
        Ok(out)
    }
}

fn default_db_epsilon() -> f64 {
    DEFAULT_DB_EPSILON
}

mod f64_base64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text).map_err(serde::de::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(serde::de::Error::custom("parameter blob is not a whole number of f64"));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn feature_row<'a>(spec: &'a Spectrum, input_dim: usize) -> Result<&'a [f64]> {
    if !matches!(spec.stage, Stage::Normalized | Stage::Augmented) {
        return Err(Error::StageMismatch {
            expected: Stage::Normalized.name(),
            found: spec.stage.name(),
        });
    }
    if spec.channel_count() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: spec.channel_count(),
        });
    }
    if spec.bin_count() != input_dim {
        return Err(Error::DimensionMismatch {
            expected: input_dim,
            found: spec.bin_count(),
        });
    }
    Ok(&spec.channels[0])
}

fn argmax_lowest(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn centered(x: &[f64], offset: &[f64]) -> Vec<f64> {
    if offset.is_empty() {
        return x.to_vec();
    }
    x.iter().zip(offset).map(|(v, m)| v - m).collect()
}

fn column_means(rows: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    let n = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Class probabilities and the argmax label (ties go to the lower index).
pub fn predict(model: &TrainedModel, spec: &Spectrum) -> Result<Prediction> {
    let x = centered(feature_row(spec, model.input_dim())?, &model.input_offset);
    let probabilities = model.architecture().probabilities(&model.parameters, &x);
    let class_index = argmax_lowest(&probabilities);
    Ok(Prediction {
        label: model.class_order[class_index],
        probabilities,
        class_index,
    })
}

pub fn evaluate(model: &TrainedModel, data: &[LabeledSpectrum]) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::invalid("data", "no samples to evaluate"));
    }
    let mut truth = Vec::with_capacity(data.len());
    let mut predicted = Vec::with_capacity(data.len());
    for s in data {
        if !model.class_order.contains(&s.label) {
            return Err(Error::UnknownLabel(s.label.to_string()));
        }
        truth.push(s.label);
        predicted.push(predict(model, &s.spectrum)?.label);
    }
    Metrics::from_labels(&model.class_order, &truth, &predicted)
}

/// Minimize cross-entropy on a fresh dataset every epoch.
///
/// `provider(epoch)` supplies that epoch's samples. Mini-batch order is
/// shuffled from a stream keyed by `(seed, epoch)`, so the result depends only
/// on the config and the provider's output. Inputs are centered on the per-bin
/// mean of the first epoch; that offset is stored with the model.
pub fn train<F>(mut provider: F, cfg: &ModelConfig) -> Result<TrainedModel>
where
    F: FnMut(u64) -> Result<Vec<LabeledSpectrum>>,
{
    let mut model = TrainedModel::initialize(cfg)?;
    let arch = cfg.architecture();
    let mut adam = Adam::new(arch.parameter_count());
    let mut plateau = Plateau {
        best: f64::INFINITY,
        wait: 0,
        patience: cfg.plateau_patience,
        factor: cfg.plateau_factor,
        floor: cfg.min_learning_rate,
    };
    let mut lr = cfg.learning_rate;
    let mut grad = vec![0.0; arch.parameter_count()];

    for epoch in 0..cfg.max_epochs {
        let data = provider(epoch as u64)?;
        if data.is_empty() {
            return Err(Error::invalid("dataset", format!("epoch {epoch} produced no samples")));
        }
        let mut rows = Vec::with_capacity(data.len());
        let mut targets = Vec::with_capacity(data.len());
        let mut class_counts = BTreeMap::new();
        for s in &data {
            rows.push(feature_row(&s.spectrum, cfg.input_dim)?);
            let target = cfg
                .classes
                .iter()
                .position(|c| *c == s.label)
                .ok_or_else(|| Error::UnknownLabel(s.label.to_string()))?;
            targets.push(target);
            *class_counts.entry(s.label).or_insert(0) += 1;
        }

        if epoch == 0 {
            model.input_offset = column_means(&rows, cfg.input_dim);
        }
        let rows: Vec<Vec<f64>> = rows.iter().map(|x| centered(x, &model.input_offset)).collect();

        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(&mut rng::stream(Domain::Shuffle, cfg.seed, epoch as u64, 0));

        let mut total_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                total_loss += arch.accumulate_gradient(&model.parameters, &rows[i], targets[i], &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.update(&mut model.parameters, &grad, lr);
        }
        let loss = total_loss / rows.len() as f64;
        if !loss.is_finite() || model.parameters.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }

        let predicted: Vec<Label> = rows
            .iter()
            .map(|x| cfg.classes[argmax_lowest(&arch.probabilities(&model.parameters, x))])
            .collect();
        let truth: Vec<Label> = targets.iter().map(|&t| cfg.classes[t]).collect();
        let macro_f1 = Metrics::from_labels(&cfg.classes, &truth, &predicted)?.macro_f1;

        model.train_log.push(EpochLog {
            epoch,
            loss,
            macro_f1,
            learning_rate: lr,
            class_counts,
        });
        lr = plateau.step(loss, lr);
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub parameters_checked: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Floor on the relative-error denominator so parameters with vanishing
/// gradient are judged on absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compare backprop gradients with central finite differences (step
/// [`FD_STEP`]) of the mean loss over `sample_count` random inputs in `[0, 1]`.
pub fn gradient_check(cfg: &ModelConfig, sample_count: usize, tolerance: f64) -> Result<GradCheckReport> {
    cfg.validate()?;
    if sample_count == 0 {
        return Err(Error::invalid("sample_count", "must be at least 1"));
    }
    let arch = cfg.architecture();
    let mut rng = rng::stream(Domain::GradCheck, cfg.seed, sample_count as u64, 0);
    let mut params = arch.init(&mut rng);
    // Nonzero biases so every parameter contributes.
    for p in params.iter_mut() {
        *p += 0.1 * (2.0 * rng.random::<f64>() - 1.0);
    }
    let inputs: Vec<Vec<f64>> = (0..sample_count)
        .map(|_| (0..cfg.input_dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let targets: Vec<usize> = (0..sample_count).map(|_| rng.random_range(0..cfg.classes.len())).collect();

    let mean_loss = |p: &[f64]| -> f64 {
        inputs.iter().zip(&targets).map(|(x, &t)| arch.loss(p, x, t)).sum::<f64>() / sample_count as f64
    };
    let mut analytic = vec![0.0; params.len()];
    for (x, &t) in inputs.iter().zip(&targets) {
        arch.accumulate_gradient(&params, x, t, &mut analytic);
    }
    analytic.iter_mut().for_each(|g| *g /= sample_count as f64);

    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + FD_STEP;
        let up = mean_loss(&params);
        params[i] = orig - FD_STEP;
        let down = mean_loss(&params);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        parameters_checked: params.len(),
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        tolerance,
        passed: max_rel < tolerance,
    })
}

#[cfg(test)]
mod tests;
