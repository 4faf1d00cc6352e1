use super::*;
use crate::augment::Provenance;
use crate::mcsa::FaultType;

const RBD: Label = Label::Fault(FaultType::RotorBarDefect);
const ITSC: Label = Label::Fault(FaultType::InterTurnShortCircuit);

fn spectrum(bins: Vec<f64>) -> Spectrum {
    let axis = (0..bins.len()).map(|k| k as f64).collect();
    Spectrum::new(vec![bins], axis, Stage::Normalized).unwrap()
}

fn sample(bins: Vec<f64>, label: Label) -> LabeledSpectrum {
    LabeledSpectrum {
        spectrum: spectrum(bins),
        label,
        provenance: Provenance {
            parent: 0,
            epoch: 0,
            variant: 0,
        },
    }
}

/// Two classes, each lighting a different bin on a low random floor. A weight
/// vector `w = e_a - e_b` separates them with margin >= 0.6, so the data is
/// linearly separable by construction.
fn toy_set(n_per_class: usize, seed: u64) -> Vec<LabeledSpectrum> {
    let mut rng = rng::stream(Domain::Synth, seed, 0, 0);
    let mut out = Vec::new();
    for i in 0..2 * n_per_class {
        let mut bins: Vec<f64> = (0..8).map(|_| 0.2 * rng.random::<f64>()).collect();
        let (active, label) = if i % 2 == 0 { (1, Label::Normal) } else { (5, Label::Anomalous) };
        bins[active] = 0.8 + 0.2 * rng.random::<f64>();
        out.push(sample(bins, label));
    }
    out
}

fn separable(data: &[LabeledSpectrum]) -> bool {
    data.iter().all(|s| {
        let b = &s.spectrum.channels[0];
        let score = b[5] - b[1];
        (s.label == Label::Anomalous) == (score > 0.0)
    })
}

fn toy_cfg(kind: ModelKind) -> ModelConfig {
    ModelConfig {
        batch_size: 8,
        max_epochs: 200,
        ..ModelConfig::new(kind, 8, vec![Label::Normal, Label::Anomalous])
    }
}

#[test]
fn logistic_learns_separable_toy() {
    let data = toy_set(256, 1);
    assert!(separable(&data));
    let model = train(|_| Ok(data.clone()), &toy_cfg(ModelKind::Logistic)).unwrap();
    let final_loss = model.train_log.last().unwrap().loss;
    assert!(final_loss < 0.01, "loss {final_loss}");

    let held_out = toy_set(16, 2);
    for s in held_out.iter().filter(|s| s.label == Label::Anomalous) {
        let p = predict(&model, &s.spectrum).unwrap();
        assert_eq!(p.label, Label::Anomalous);
        assert!(p.probabilities[1] > 0.9);
    }
}

#[test]
fn one_hidden_learns_separable_toy() {
    let data = toy_set(256, 3);
    let model = train(|_| Ok(data.clone()), &toy_cfg(ModelKind::OneHidden { hidden_units: 8 })).unwrap();
    assert!(model.train_log.last().unwrap().loss < 0.01);
}

#[test]
fn zero_epochs_is_initialization() {
    let cfg = ModelConfig {
        max_epochs: 0,
        ..toy_cfg(ModelKind::Logistic)
    };
    let model = train(|_| panic!("provider must not be called"), &cfg).unwrap();
    assert!(model.train_log.is_empty());
    assert_eq!(model, TrainedModel::initialize(&cfg).unwrap());
}

#[test]
fn training_is_deterministic() {
    let data = toy_set(8, 4);
    let cfg = ModelConfig {
        max_epochs: 5,
        ..toy_cfg(ModelKind::OneHidden { hidden_units: 4 })
    };
    let a = train(|_| Ok(data.clone()), &cfg).unwrap();
    let b = train(|_| Ok(data.clone()), &cfg).unwrap();
    let bits = |m: &TrainedModel| m.parameters.iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn lr_schedule_is_non_increasing_and_loss_finite() {
    let data = toy_set(8, 5);
    let cfg = ModelConfig {
        max_epochs: 60,
        plateau_patience: 2,
        ..toy_cfg(ModelKind::Logistic)
    };
    let model = train(|_| Ok(data.clone()), &cfg).unwrap();
    for w in model.train_log.windows(2) {
        assert!(w[1].learning_rate <= w[0].learning_rate);
    }
    assert!(model.train_log.iter().all(|e| e.loss.is_finite()));
}

#[test]
fn plateau_reduces_and_floors() {
    let mut p = Plateau {
        best: f64::INFINITY,
        wait: 0,
        patience: 2,
        factor: 0.5,
        floor: 0.3,
    };
    assert_eq!(p.step(1.0, 1.0), 1.0);
    assert_eq!(p.step(1.0, 1.0), 1.0);
    assert_eq!(p.step(1.0, 1.0), 0.5);
    assert_eq!(p.step(1.0, 0.5), 0.5);
    assert_eq!(p.step(1.0, 0.5), 0.3);
    assert_eq!(p.step(0.5, 0.3), 0.3);
}

#[test]
fn dimension_and_label_errors() {
    let bad = vec![sample(vec![0.0; 4], Label::Normal)];
    assert!(matches!(
        train(|_| Ok(bad.clone()), &toy_cfg(ModelKind::Logistic)),
        Err(Error::DimensionMismatch { .. })
    ));
    let unknown = vec![sample(vec![0.0; 8], RBD)];
    assert!(matches!(
        train(|_| Ok(unknown.clone()), &toy_cfg(ModelKind::Logistic)),
        Err(Error::UnknownLabel(_))
    ));
    let model = TrainedModel::initialize(&toy_cfg(ModelKind::Logistic)).unwrap();
    assert!(predict(&model, &spectrum(vec![0.0; 3])).is_err());
    assert!(evaluate(&model, &[]).is_err());
    assert!(evaluate(&model, &unknown).is_err());
}

#[test]
fn non_finite_loss_names_epoch() {
    let cfg = ModelConfig {
        learning_rate: 1e300,
        max_epochs: 50,
        ..toy_cfg(ModelKind::OneHidden { hidden_units: 4 })
    };
    let data: Vec<LabeledSpectrum> = toy_set(4, 6)
        .into_iter()
        .map(|mut s| {
            s.spectrum.channels[0].iter_mut().for_each(|v| *v *= 1e300);
            s
        })
        .collect();
    match train(|_| Ok(data.clone()), &cfg) {
        Err(Error::NonFiniteLoss { .. }) => {}
        other => panic!("expected non-finite loss, got {other:?}"),
    }
}

#[test]
fn zero_weights_uniform_and_tie_to_normal() {
    let cfg = ModelConfig::new(ModelKind::Logistic, 6, vec![Label::Normal, ITSC, RBD]);
    let mut model = TrainedModel::initialize(&cfg).unwrap();
    model.parameters.iter_mut().for_each(|p| *p = 0.0);
    let p = predict(&model, &spectrum(vec![0.3; 6])).unwrap();
    assert!(p.probabilities.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    assert_eq!(p.label, Label::Normal);
}

#[test]
fn probabilities_sum_to_one() {
    let mut rng = rng::stream(Domain::Synth, 77, 0, 0);
    for (kind, classes) in [
        (ModelKind::Logistic, vec![Label::Normal, Label::Anomalous]),
        (ModelKind::OneHidden { hidden_units: 5 }, vec![Label::Normal, ITSC, RBD]),
    ] {
        let mut cfg = ModelConfig::new(kind, 10, classes);
        for seed in 0..20 {
            cfg.seed = seed;
            let model = TrainedModel::initialize(&cfg).unwrap();
            let x: Vec<f64> = (0..10).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
            let p = predict(&model, &spectrum(x)).unwrap();
            assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(p.probabilities.iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn gradient_check_both_kinds() {
    let classes3 = vec![Label::Normal, ITSC, RBD];
    for (kind, classes) in [
        (ModelKind::Logistic, vec![Label::Normal, Label::Anomalous]),
        (ModelKind::Logistic, classes3.clone()),
        (ModelKind::OneHidden { hidden_units: 6 }, vec![Label::Normal, Label::Anomalous]),
        (ModelKind::OneHidden { hidden_units: 6 }, classes3.clone()),
    ] {
        let cfg = ModelConfig::new(kind, 12, classes);
        let report = gradient_check(&cfg, 4, 1e-4).unwrap();
        assert!(report.passed, "{kind:?}: {report:?}");
        assert!(!gradient_check(&cfg, 4, 0.0).unwrap().passed);
    }
}

#[test]
fn json_roundtrip_preserves_predictions() {
    let data = toy_set(8, 8);
    let cfg = ModelConfig {
        max_epochs: 3,
        ..toy_cfg(ModelKind::OneHidden { hidden_units: 4 })
    };
    let model = train(|_| Ok(data.clone()), &cfg).unwrap();
    let json = model.to_json().unwrap();
    let back = TrainedModel::from_json(&json).unwrap();
    assert_eq!(back, model);
    for s in &data {
        let a = predict(&model, &s.spectrum).unwrap();
        let b = predict(&back, &s.spectrum).unwrap();
        assert_eq!(
            a.probabilities.iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            b.probabilities.iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
    }
    assert_eq!(back.to_json().unwrap(), json);
}

#[test]
fn class_permutation_permutes_probabilities() {
    let cfg = ModelConfig {
        seed: 11,
        ..ModelConfig::new(ModelKind::OneHidden { hidden_units: 5 }, 7, vec![Label::Normal, ITSC, RBD])
    };
    let model = TrainedModel::initialize(&cfg).unwrap();
    let permuted = model.with_class_order(&[Label::Normal, RBD, ITSC]).unwrap();
    let x = spectrum((0..7).map(|k| (k as f64 * 0.37).sin().abs()).collect());
    let a = predict(&model, &x).unwrap().probabilities;
    let b = predict(&permuted, &x).unwrap().probabilities;
    assert_eq!(a[0], b[0]);
    assert_eq!(a[1], b[2]);
    assert_eq!(a[2], b[1]);
    assert!(model.with_class_order(&[RBD, Label::Normal, ITSC]).is_err());
}

#[test]
fn evaluate_perfect_model() {
    let data = toy_set(16, 9);
    let model = train(|_| Ok(data.clone()), &toy_cfg(ModelKind::Logistic)).unwrap();
    let m = evaluate(&model, &data).unwrap();
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.macro_f1, 1.0);
}

#[test]
fn config_validation() {
    let mut cfg = ModelConfig::new(ModelKind::Logistic, 4, vec![Label::Anomalous, Label::Normal]);
    assert!(cfg.validate().is_err());
    cfg.classes = vec![Label::Normal];
    assert!(cfg.validate().is_err());
    cfg.classes = vec![Label::Normal, Label::Normal];
    assert!(cfg.validate().is_err());
    cfg.classes = vec![Label::Normal, Label::Anomalous];
    cfg.plateau_factor = 1.0;
    assert!(cfg.validate().is_err());
}
