//! The six verbs. Each takes a validated [`RunConfig`] and returns the files
//! it wrote; nothing here touches process state.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sgda_core::augment::{build_epoch_dataset, class_counts};
use sgda_core::dataset::FrozenDataset;
use sgda_core::infer::batch_diagnose;
use sgda_core::pipeline::{prepare_parents, train_on_parents, Parents};
use sgda_core::signal::load_signal_csv;
use sgda_core::synth::generate;
use sgda_core::{Label, RawSignal, TrainedModel};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Files written by a command, plus a human-readable summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub file: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sampling_rate_hz: f64,
    pub signals: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub config: Value,
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    let fail = |e: std::io::Error| CliError::runtime(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn input_dir(cfg: &RunConfig) -> CliResult<&Path> {
    cfg.paths
        .input
        .as_deref()
        .ok_or_else(|| CliError::config("paths.input is required for this command"))
}

fn model_path(cfg: &RunConfig) -> CliResult<&Path> {
    cfg.paths
        .model
        .as_deref()
        .ok_or_else(|| CliError::config("paths.model is required for this command"))
}

/// Load one CSV; the source id is the file name so reports do not depend on
/// where the data lives.
pub fn load_signal(path: &Path, sampling_rate_hz: f64) -> CliResult<RawSignal> {
    let raw = load_signal_csv(path, sampling_rate_hz).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(RawSignal::new(raw.channels().to_vec(), sampling_rate_hz, name)?)
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn parse_label(entry: &ManifestEntry, manifest: &Path) -> CliResult<Label> {
    entry.label.parse().map_err(|_| {
        CliError::data(format!(
            "{}: unknown label `{}` for {}",
            manifest.display(),
            entry.label,
            entry.file
        ))
    })
}

/// Signals listed in a manifest, with their labels.
fn load_manifest_signals(path: &Path, cfg: &RunConfig) -> CliResult<Vec<(RawSignal, Option<Label>)>> {
    let manifest = read_manifest(path)?;
    if manifest.sampling_rate_hz != cfg.motor.sampling_rate_hz {
        return Err(CliError::data(format!(
            "{}: sampling rate {} Hz differs from motor.sampling_rate_hz {} Hz",
            path.display(),
            manifest.sampling_rate_hz,
            cfg.motor.sampling_rate_hz
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .signals
        .iter()
        .map(|e| {
            let label = parse_label(e, path)?;
            Ok((load_signal(&base.join(&e.file), cfg.motor.sampling_rate_hz)?, Some(label)))
        })
        .collect()
}

/// A directory's signals: from its manifest if present, otherwise every
/// `*.csv` in name order, unlabeled.
pub fn load_dir(dir: &Path, cfg: &RunConfig) -> CliResult<Vec<(RawSignal, Option<Label>)>> {
    let manifest = dir.join(MANIFEST);
    if manifest.is_file() {
        return load_manifest_signals(&manifest, cfg);
    }
    let entries = fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| Ok((load_signal(p, cfg.motor.sampling_rate_hz)?, None)))
        .collect()
}

/// Healthy training signals only: any fault label is refused.
fn load_healthy(cfg: &RunConfig) -> CliResult<Vec<RawSignal>> {
    let dir = input_dir(cfg)?;
    let signals = load_dir(dir, cfg)?;
    if signals.is_empty() {
        return Err(CliError::data(format!("{}: no signal CSVs found", dir.display())));
    }
    signals
        .into_iter()
        .map(|(s, label)| match label {
            None | Some(Label::Normal) => Ok(s),
            Some(l) => Err(CliError::data(format!(
                "{} is labeled {l}: training uses healthy signals only; fault signatures are synthesized in the frequency domain",
                s.source_id()
            ))),
        })
        .collect()
}

fn parents(cfg: &RunConfig) -> CliResult<Parents> {
    let signals = load_healthy(cfg)?;
    Ok(prepare_parents(&signals, &cfg.train_segment(), cfg.normalization, cfg.epsilon)?)
}

pub fn freqs(cfg: &RunConfig) -> CliResult<Outcome> {
    let map = cfg.fault_map()?;
    let out = output_dir(cfg);
    let mut csv = String::from("fault,abbrev,frequency_hz\n");
    let mut summary = String::new();
    for set in map.iter() {
        summary.push_str(&format!("{:<4}", set.fault.abbrev()));
        for f in &set.frequencies_hz {
            csv.push_str(&format!("{},{},{}\n", set.fault.name(), set.fault.abbrev(), f));
            summary.push_str(&format!(" {f:.3}"));
        }
        if set.dropped > 0 {
            summary.push_str(&format!("  ({} out-of-band dropped)", set.dropped));
        }
        summary.push('\n');
    }
    let json_path = out.join("freqs.json");
    let csv_path = out.join("freqs.csv");
    write_json(
        &json_path,
        &json!({
            "rotor_frequency_hz": cfg.motor.rotor_frequency(),
            "orders": cfg.orders,
            "frequencies": map,
            "config": cfg.echo(),
        }),
    )?;
    write_atomic(&csv_path, csv.as_bytes())?;
    Ok(Outcome {
        files: vec![json_path, csv_path],
        summary,
    })
}

pub fn synth(cfg: &RunConfig) -> CliResult<Outcome> {
    let plan = cfg.synth_plan()?;
    if plan.is_empty() {
        return Err(CliError::config("invalid synth: no signals requested"));
    }
    let out = output_dir(cfg);
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for (i, (scfg, label)) in plan.iter().enumerate() {
        let tag = match label {
            Label::Fault(f) => f.abbrev().to_lowercase(),
            other => other.as_str().to_lowercase(),
        };
        let name = format!("{i:04}_{tag}.csv");
        let signal = generate(scfg)?;
        let mut bytes = Vec::new();
        signal.write_csv(&mut bytes)?;
        let path = out.join(&name);
        write_atomic(&path, &bytes)?;
        files.push(path);
        entries.push(ManifestEntry {
            file: name,
            label: label.to_string(),
            seed: Some(scfg.seed),
        });
    }
    let manifest = Manifest {
        sampling_rate_hz: cfg.motor.sampling_rate_hz,
        signals: entries,
        config: cfg.echo(),
    };
    let path = out.join(MANIFEST);
    write_json(&path, &manifest)?;
    files.push(path);
    Ok(Outcome {
        summary: format!("wrote {} signals to {}", plan.len(), out.display()),
        files,
    })
}

pub fn dataset_file_name(epoch: u64) -> String {
    format!("dataset_epoch_{epoch:04}.sgda")
}

pub fn preprocess(cfg: &RunConfig) -> CliResult<Outcome> {
    let parents = parents(cfg)?;
    let augment = cfg.augment_config()?;
    let classes = cfg.classes();
    let out = output_dir(cfg);
    let mut files = Vec::new();
    let mut epochs = Vec::new();
    for &epoch in &cfg.preprocess.epochs {
        let samples = build_epoch_dataset(&parents.spectra, &augment, cfg.task, epoch)?;
        let counts = class_counts(&samples);
        let frozen = FrozenDataset::from_samples(&samples, &classes, epoch, cfg.echo())?;
        let path = out.join(dataset_file_name(epoch));
        write_atomic(&path, &frozen.to_bytes()?)?;
        files.push(path);
        epochs.push(json!({ "epoch": epoch, "rows": samples.len(), "class_counts": counts }));
    }
    let path = out.join("preprocess.json");
    write_json(
        &path,
        &json!({
            "parents": parents.spectra.len(),
            "bins": cfg.train_segment().bin_count(),
            "normalization": parents.context,
            "epochs": epochs,
            "config": cfg.echo(),
        }),
    )?;
    files.push(path);
    Ok(Outcome {
        summary: format!(
            "{} parent spectra, {} frozen epoch dataset(s) in {}",
            parents.spectra.len(),
            cfg.preprocess.epochs.len(),
            out.display()
        ),
        files,
    })
}

pub fn train(cfg: &RunConfig) -> CliResult<Outcome> {
    let parents = parents(cfg)?;
    let model_cfg = cfg.model_config()?;
    let model = train_on_parents(&parents, &cfg.augment_config()?, cfg.task, &model_cfg, cfg.epsilon)?;

    let classes = cfg.classes();
    let mut log = String::from("epoch,loss,macro_f1,learning_rate");
    for c in &classes {
        log.push_str(&format!(",count_{c}"));
    }
    log.push('\n');
    let mut summary = String::new();
    for e in &model.train_log {
        log.push_str(&format!("{},{},{},{}", e.epoch, e.loss, e.macro_f1, e.learning_rate));
        let mut counts = String::new();
        for c in &classes {
            let n = e.class_counts.get(c).copied().unwrap_or(0);
            log.push_str(&format!(",{n}"));
            counts.push_str(&format!(" {c}={n}"));
        }
        log.push('\n');
        summary.push_str(&format!(
            "epoch {:>3} loss {:.5} macro-F1 {:.4} lr {:.2e} |{counts}\n",
            e.epoch, e.loss, e.macro_f1, e.learning_rate
        ));
    }
    let out = output_dir(cfg);
    let model_file = cfg.paths.model.clone().unwrap_or_else(|| out.join("model.json"));
    let mut text = model.to_json()?;
    text.push('\n');
    write_atomic(&model_file, text.as_bytes())?;
    let log_file = out.join("train_log.csv");
    write_atomic(&log_file, log.as_bytes())?;
    let cfg_file = out.join("run_config.json");
    write_json(&cfg_file, &cfg.echo())?;
    summary.push_str(&format!(
        "trained on {} parent spectra; model written to {}",
        parents.spectra.len(),
        model_file.display()
    ));
    Ok(Outcome {
        files: vec![model_file, log_file, cfg_file],
        summary,
    })
}

pub fn load_model(path: &Path) -> CliResult<TrainedModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    TrainedModel::from_json(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn check_model(cfg: &RunConfig, model: &TrainedModel) -> CliResult<()> {
    if model.normalization.mode != cfg.normalization {
        return Err(CliError::config(format!(
            "normalization is {} but the model was trained with {}",
            cfg.normalization.name(),
            model.normalization.mode.name()
        )));
    }
    Ok(())
}

/// Diagnose explicit signal files, or every signal in `paths.input`.
pub fn diagnose(cfg: &RunConfig, signals: &[PathBuf]) -> CliResult<Outcome> {
    let model = load_model(model_path(cfg)?)?;
    check_model(cfg, &model)?;
    let inputs = if signals.is_empty() {
        load_dir(input_dir(cfg)?, cfg)?
    } else {
        signals
            .iter()
            .map(|p| Ok((load_signal(p, cfg.motor.sampling_rate_hz)?, None)))
            .collect::<CliResult<Vec<_>>>()?
    };
    if inputs.is_empty() {
        return Err(CliError::data("no signals to diagnose"));
    }
    let report = batch_diagnose(&inputs, &model, &cfg.inference_segment(), cfg.normalization)?;
    let out = output_dir(cfg);
    let json_path = out.join("diagnosis.json");
    write_json(&json_path, &json!({ "report": report, "config": cfg.echo() }))?;
    let csv_path = out.join("diagnosis.csv");
    write_atomic(&csv_path, report.summary_csv(&model.class_order).as_bytes())?;

    let mut summary = String::new();
    for o in &report.outcomes {
        match (&o.report, &o.error) {
            (Some(r), _) => summary.push_str(&format!(
                "{}: {} (confidence {:.3}{})\n",
                o.source_id,
                r.verdict,
                r.confidence,
                if r.tie_flag { ", tie" } else { "" }
            )),
            (None, Some(e)) => summary.push_str(&format!("{}: error: {e}\n", o.source_id)),
            (None, None) => {}
        }
    }
    Ok(Outcome {
        files: vec![json_path, csv_path],
        summary,
    })
}

/// Score a model on a labeled manifest at segment and signal level.
pub fn evaluate(cfg: &RunConfig) -> CliResult<Outcome> {
    let model = load_model(model_path(cfg)?)?;
    check_model(cfg, &model)?;
    let manifest = match &cfg.paths.manifest {
        Some(p) => p.clone(),
        None => input_dir(cfg)?.join(MANIFEST),
    };
    let inputs = load_manifest_signals(&manifest, cfg)?;
    if inputs.is_empty() {
        return Err(CliError::data(format!("{}: manifest lists no signals", manifest.display())));
    }
    let report = batch_diagnose(&inputs, &model, &cfg.inference_segment(), cfg.normalization)?;
    let failed: Vec<String> = report
        .outcomes
        .iter()
        .filter_map(|o| o.error.as_ref().map(|e| format!("{}: {e}", o.source_id)))
        .collect();
    let (Some(seg), Some(sig)) = (&report.segment_metrics, &report.signal_metrics) else {
        return Err(CliError::data(format!("no signal could be scored: {}", failed.join("; "))));
    };

    let out = output_dir(cfg);
    let metrics_path = out.join("metrics.json");
    write_json(
        &metrics_path,
        &json!({
            "segment": seg,
            "signal": sig,
            "failed_signals": failed,
            "config": cfg.echo(),
        }),
    )?;
    let seg_path = out.join("confusion_segment.csv");
    write_atomic(&seg_path, seg.confusion_csv().as_bytes())?;
    let sig_path = out.join("confusion_signal.csv");
    write_atomic(&sig_path, sig.confusion_csv().as_bytes())?;
    let summary_path = out.join("summary.csv");
    write_atomic(&summary_path, report.summary_csv(&model.class_order).as_bytes())?;
    let levels = out.join("levels.csv");
    write_atomic(
        &levels,
        format!(
            "level,samples,accuracy,macro_f1\nsegment,{},{},{}\nsignal,{},{},{}\n",
            seg.samples, seg.accuracy, seg.macro_f1, sig.samples, sig.accuracy, sig.macro_f1
        )
        .as_bytes(),
    )?;
    Ok(Outcome {
        summary: format!(
            "segment level: accuracy {:.4} macro-F1 {:.4} ({} segments)\nsignal level:  accuracy {:.4} macro-F1 {:.4} ({} signals)",
            seg.accuracy, seg.macro_f1, seg.samples, sig.accuracy, sig.macro_f1, sig.samples
        ),
        files: vec![metrics_path, seg_path, sig_path, summary_path, levels],
    })
}
