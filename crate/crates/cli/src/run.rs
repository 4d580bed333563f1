//! `train`: executes one configured run and writes its directory.
//!
//! Layout of `<output root>/<name>/`:
//!
//! ```text
//! config.toml         byte-for-byte copy of the input configuration
//! model.rdlk          final checkpoint
//! metrics.csv/.json   per-epoch metrics
//! error_curve.csv/.json
//! predictions.csv     index,label,prediction on the test set
//! rdm/<tap>.csv       test-set RDMs (+ .json sidecar, .svg heatmap)
//! record.json         run summary
//! failure.json        only when training aborted
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rdl_core::data::{gcn, load_idx, synth_clusters, Dataset};
use rdl_core::eval::{write_error_curve_csv, write_error_curve_json, EpochErrors};
use rdl_core::nn::{checkpoint, Network, SgdState};
use rdl_core::rdl::{RdlObjective, RdlSettings, TeacherRdmProvider};
use rdl_core::rdm::{compute_rdm, heatmap_svg, write_csv, write_sidecar, PairwiseMetric};
use rdl_core::rng;
use rdl_core::train::{error_rate, train_epoch, Auxiliary, EpochConfig};
use rdl_core::transfer::{finetune_init, hints_pretrain, DeepSupervision, HintsReport, TransferMethod};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DataConfig, LoadedConfig};
use crate::error::{io_err, CliError};

pub const OUTPUT_ROOT_ENV: &str = "RDL_OUTPUT_ROOT";

/// Reads a checkpoint, naming the file if it cannot be read.
pub fn load_checkpoint(path: &Path) -> Result<Network, CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(checkpoint::from_bytes(&bytes)?)
}

/// Output root from the environment, `runs` by default.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
    pub train_error: f64,
    pub test_error: Option<f64>,
    pub validation_error: Option<f64>,
    pub alpha: Option<f64>,
    pub aux_loss: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub method: String,
    pub seed: u64,
    pub generator: String,
    /// Directory of the original configuration; relative paths in
    /// `config.toml` resolve against it.
    pub config_dir: PathBuf,
    pub config_sha256: String,
    pub checkpoint: String,
    pub final_test_error: f64,
    pub test_count: usize,
    pub test_fingerprint: String,
    pub taps: Vec<String>,
    pub epochs: Vec<EpochRow>,
    pub hints: Option<HintsReport>,
    pub rdm_exports: Vec<String>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

pub struct Data {
    pub train: Dataset,
    pub validation: Option<Dataset>,
    pub test: Dataset,
}

pub fn load_data(cfg: &LoadedConfig) -> Result<Data, CliError> {
    let c = &cfg.config;
    let (train, validation_count, test, use_gcn) = match &c.data {
        DataConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_offset,
            train_count,
            validation_count,
            test_count,
            gcn,
        } => {
            let full = load_idx(&cfg.resolve(train_images), &cfg.resolve(train_labels))?;
            let end = match train_count {
                Some(n) => train_offset + n,
                None => full.len(),
            };
            if end > full.len() || *train_offset >= end {
                return Err(CliError::Config(vec![format!(
                    "training range {}..{} outside the {} available samples",
                    train_offset,
                    end,
                    full.len()
                )]));
            }
            let idx: Vec<usize> = (*train_offset..end).collect();
            let mut train = full.subset(&idx);
            let mut test = load_idx(&cfg.resolve(test_images), &cfg.resolve(test_labels))?;
            if let Some(n) = test_count {
                test = test.head(*n);
            }
            let classes = train.num_classes.max(test.num_classes);
            train.num_classes = classes;
            test.num_classes = classes;
            (train, *validation_count, test, *gcn)
        }
        DataConfig::Synthetic {
            num_classes,
            train_per_class,
            test_per_class,
            dims,
            separation,
            data_seed,
            validation_count,
            gcn,
        } => {
            let per = train_per_class + test_per_class;
            let all = synth_clusters(*num_classes, per, *dims, *separation, *data_seed)?;
            let (mut tr, mut te) = (Vec::new(), Vec::new());
            for i in 0..all.len() {
                if i % per < *train_per_class {
                    tr.push(i)
                } else {
                    te.push(i)
                }
            }
            (all.subset(&tr), *validation_count, all.subset(&te), *gcn)
        }
    };
    let (mut train, mut validation) = if validation_count > 0 {
        let (t, v) = train.split(validation_count, rng::derive(c.seed, "split", &[]))?;
        (t, Some(v))
    } else {
        (train, None)
    };
    let mut test = test;
    if use_gcn {
        train.images = gcn(&train.images)?;
        test.images = gcn(&test.images)?;
        if let Some(v) = validation.as_mut() {
            v.images = gcn(&v.images)?;
        }
    }
    Ok(Data { train, validation, test })
}

/// Up to `per_class` test indices per class, grouped by class.
pub fn per_class_indices(labels: &[usize], num_classes: usize, per_class: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for c in 0..num_classes {
        out.extend(labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).take(per_class));
    }
    out
}

/// Writes `<tap>.csv`, `<tap>.json` and `<tap>.svg` for every tap into
/// `dir`; returns the CSV paths relative to `dir`'s parent.
pub fn export_rdms(
    net: &Network,
    data: &Dataset,
    taps: &[String],
    per_class: usize,
    metric: PairwiseMetric,
    dir: &Path,
) -> Result<Vec<String>, CliError> {
    let idx = per_class_indices(&data.labels, data.num_classes, per_class);
    if idx.len() < 2 {
        return Err(CliError::Config(vec!["fewer than 2 images available for RDM export".into()]));
    }
    let subset = data.subset(&idx);
    let labels: Vec<String> = idx.iter().map(|&i| format!("{}:{}", data.labels[i], i)).collect();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for tap in taps {
        let acts = net.activations(&subset.images, tap, 500)?;
        let rdm = compute_rdm(&acts, metric)?;
        let csv = dir.join(format!("{}.csv", tap));
        write_csv(&rdm, &csv)?;
        write_sidecar(&rdm, &labels, &dir.join(format!("{}.json", tap)))?;
        let svg_path = dir.join(format!("{}.svg", tap));
        fs::write(&svg_path, heatmap_svg(&rdm, 4, &format!("{} ({})", tap, metric))).map_err(io_err(&svg_path))?;
        let dir_name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        written.push(format!("{}/{}.csv", dir_name, tap));
    }
    Ok(written)
}

fn write_metrics(rows: &[EpochRow], taps: &[String], dir: &Path) -> Result<(), CliError> {
    let path = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(rdl_core::Error::from)?;
    let mut header: Vec<String> = [
        "epoch",
        "learning_rate",
        "loss",
        "train_error",
        "test_error",
        "validation_error",
        "alpha",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(taps.iter().map(|t| format!("aux_loss_{}", t)));
    w.write_record(&header).map_err(rdl_core::Error::from)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec = vec![
            r.epoch.to_string(),
            r.learning_rate.to_string(),
            r.loss.to_string(),
            r.train_error.to_string(),
            opt(r.test_error),
            opt(r.validation_error),
            opt(r.alpha),
        ];
        rec.extend(taps.iter().map(|t| opt(r.aux_loss.get(t).copied())));
        w.write_record(&rec).map_err(rdl_core::Error::from)?;
    }
    w.flush().map_err(io_err(&path))?;
    write_json(&dir.join("metrics.json"), rows)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(rdl_core::Error::from)?;
    fs::write(path, text).map_err(io_err(path))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{:02x}", b)).collect()
}

/// Runs the configured experiment into `<output_root>/<name>`.
pub fn train(cfg: &LoadedConfig, output_root: &Path) -> Result<RunRecord, CliError> {
    let c = &cfg.config;
    c.validate()?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());

    let data = load_data(cfg)?;
    let arch = c.architecture()?;
    if arch.input[..] != *data.train.image_shape() {
        return Err(CliError::Config(vec![format!(
            "architecture input {:?} does not match the data's image shape {:?}",
            arch.input,
            data.train.image_shape()
        )]));
    }
    let mut student = Network::new(&arch, rng::derive(c.seed, "student_init", &[]))?;
    let outputs: usize = student.output_shape().iter().product();
    if data.train.num_classes > outputs {
        return Err(CliError::Config(vec![format!(
            "{} classes but the network has {} outputs",
            data.train.num_classes, outputs
        )]));
    }
    let teacher = match &c.method.teacher {
        Some(p) => Some(load_checkpoint(&cfg.resolve(p))?),
        None => None,
    };
    let taps: Vec<String> = student.taps().iter().map(|t| t.name.clone()).collect();
    let method = c.transfer_method(&taps)?;
    method.validate(&student, teacher.as_ref())?;

    let dir = output_root.join(&c.name);
    if dir.exists() {
        return Err(CliError::RunExists(dir));
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let config_copy = dir.join("config.toml");
    fs::write(&config_copy, &cfg.text).map_err(io_err(&config_copy))?;

    let mut hints = None;
    match (&method, teacher.as_ref()) {
        (TransferMethod::Finetune { .. }, Some(t)) => {
            let replace = c.finetune.as_ref().is_some_and(|f| f.replace_readout);
            let readout = if replace {
                student.layers().iter().rev().find(|l| l.spec().has_params()).map(|l| l.spec().clone())
            } else {
                None
            };
            student = finetune_init(&student, t, readout.as_ref())?;
        }
        (
            TransferMethod::Hints {
                student_tap,
                teacher_tap,
                epochs,
                identity_init,
            },
            Some(t),
        ) => {
            let hc = rdl_core::transfer::HintsConfig {
                student_tap: student_tap.clone(),
                teacher_tap: teacher_tap.clone(),
                epochs: *epochs,
                batch_size: c.optimizer.batch_size,
                learning_rate: c.optimizer.learning_rate,
                momentum: c.optimizer.momentum,
                seed: rng::derive(c.seed, "hints", &[]),
                identity_init: *identity_init,
            };
            hints = Some(hints_pretrain(&mut student, t, &data.train.images, &hc)?);
        }
        _ => {}
    }

    let mut sgd = SgdState::new(c.optimizer.learning_rate, c.optimizer.momentum, student.params())?;
    let schedule = c.alpha_schedule()?;
    let mut dsn = None;
    let mut rdl = None;
    match &method {
        TransferMethod::DeepSupervision { taps, .. } => {
            dsn = Some(DeepSupervision::attach(
                &student,
                taps,
                outputs,
                schedule.expect("deep supervision has a schedule"),
                &sgd,
                rng::derive(c.seed, "dsn", &[]),
            )?);
        }
        TransferMethod::Rdl {
            tap_map,
            budget,
            metric,
            ..
        } => {
            let provider = TeacherRdmProvider::live(teacher.clone().expect("validated"), tap_map.clone(), *metric)?;
            let settings = RdlSettings {
                taps: tap_map.keys().cloned().collect(),
                budget: *budget,
                schedule: schedule.expect("rdl has a schedule"),
            };
            rdl = Some(RdlObjective::new(&student, provider, settings)?);
        }
        _ => {}
    }

    let train_seed = rng::derive(c.seed, "train", &[]);
    let mut rows = Vec::with_capacity(c.schedule.epochs);
    for epoch in 0..c.schedule.epochs {
        let lr = match c.schedule.lr_halving_interval {
            0 => c.optimizer.learning_rate,
            k => c.optimizer.learning_rate * 0.5f64.powi((epoch / k) as i32),
        };
        sgd.learning_rate = lr;
        if let Some(d) = dsn.as_mut() {
            d.set_learning_rate(lr);
        }
        let aux: Option<&mut dyn Auxiliary> = match (dsn.as_mut(), rdl.as_mut()) {
            (Some(d), _) => Some(d),
            (_, Some(r)) => Some(r),
            _ => None,
        };
        let ecfg = EpochConfig::new(epoch, c.optimizer.batch_size, train_seed);
        let m = match train_epoch(&mut student, &mut sgd, &data.train.images, &data.train.labels, &ecfg, aux) {
            Ok(m) => m,
            Err(e) => {
                let failure = match &e {
                    rdl_core::Error::Batch { epoch, batch, .. } => {
                        serde_json::json!({ "epoch": epoch, "batch": batch, "message": e.to_string() })
                    }
                    _ => serde_json::json!({ "epoch": epoch, "message": e.to_string() }),
                };
                write_json(&dir.join("failure.json"), &failure)?;
                return Err(e.into());
            }
        };
        let last = epoch + 1 == c.schedule.epochs;
        let test_error = if c.eval.error_curve || last {
            Some(error_rate(&student, &data.test.images, &data.test.labels)?)
        } else {
            None
        };
        let validation_error = match &data.validation {
            Some(v) if c.eval.error_curve || last => Some(error_rate(&student, &v.images, &v.labels)?),
            _ => None,
        };
        rows.push(EpochRow {
            epoch,
            learning_rate: lr,
            loss: m.loss,
            train_error: m.train_error,
            test_error,
            validation_error,
            alpha: m.alpha,
            aux_loss: m.aux_loss,
        });
    }

    let ckpt = dir.join("model.rdlk");
    checkpoint::save(&student, &ckpt)?;
    let preds = student.predict(&data.test.images, 500)?;
    let wrong = preds.iter().zip(&data.test.labels).filter(|(p, l)| p != l).count();
    let final_test_error = if preds.is_empty() { 0.0 } else { wrong as f64 / preds.len() as f64 };
    let mut pred_csv = String::from("index,label,prediction\n");
    for (i, (p, l)) in preds.iter().zip(&data.test.labels).enumerate() {
        pred_csv.push_str(&format!("{},{},{}\n", i, l, p));
    }
    let pred_path = dir.join("predictions.csv");
    fs::write(&pred_path, pred_csv).map_err(io_err(&pred_path))?;

    let aux_taps: Vec<String> = match &method {
        TransferMethod::Rdl { tap_map, .. } => tap_map.keys().cloned().collect(),
        TransferMethod::DeepSupervision { taps, .. } => taps.clone(),
        _ => Vec::new(),
    };
    write_metrics(&rows, &aux_taps, &dir)?;
    let curve: Vec<EpochErrors> = rows
        .iter()
        .filter_map(|r| {
            r.test_error.map(|t| EpochErrors {
                epoch: r.epoch,
                train_error: r.train_error,
                test_error: t,
            })
        })
        .collect();
    write_error_curve_csv(&curve, &dir.join("error_curve.csv"))?;
    write_error_curve_json(&curve, &dir.join("error_curve.json"))?;

    let rdm_exports = export_rdms(
        &student,
        &data.test,
        &taps,
        c.eval.rdm_export_per_class,
        c.eval.metric()?,
        &dir.join("rdm"),
    )?;

    let record = RunRecord {
        name: c.name.clone(),
        method: method.tag().to_string(),
        seed: c.seed,
        generator: rng::GENERATOR.to_string(),
        config_dir: fs::canonicalize(cfg.base_dir().join(".")).unwrap_or_else(|_| cfg.base_dir()),
        config_sha256: sha256_hex(cfg.text.as_bytes()),
        checkpoint: "model.rdlk".into(),
        final_test_error,
        test_count: data.test.len(),
        test_fingerprint: data.test.fingerprint(),
        taps,
        epochs: rows,
        hints,
        rdm_exports,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("record.json"), &record)?;
    Ok(record)
}
