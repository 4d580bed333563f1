//! `compare`: pairwise statistics over finished run directories.
//!
//! Runs are ordered by name before anything is computed, so the report
//! does not depend on the order in which directories are given. Output
//! goes to `<output root>/compare-<hash of the run names>/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rdl_core::eval::{
    bootstrap_rdm_distance, classical_mds, mds_sidecar, mds_svg, write_mcnemar_csv, BootstrapConfig,
    McNemarRow, PairedOutcomes,
};
use rdl_core::nn::Network;
use rdl_core::rdm::RdmComparison;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;
use crate::error::{io_err, CliError};
use crate::run::{load_checkpoint, load_data, RunRecord};

/// Seed of the bootstrap subsets drawn by `compare`.
pub const COMPARE_SEED: u64 = 0;

pub struct LoadedRun {
    pub dir: PathBuf,
    pub record: RunRecord,
    pub config: LoadedConfig,
    pub network: Network,
    pub predictions: Vec<usize>,
}

fn bad(dir: &Path, reason: impl Into<String>) -> CliError {
    CliError::BadRun {
        path: dir.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, CliError> {
    let rec_path = dir.join("record.json");
    let text = fs::read_to_string(&rec_path).map_err(io_err(&rec_path))?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|e| bad(dir, format!("record.json: {}", e)))?;
    let cfg_path = dir.join("config.toml");
    let mut config = LoadedConfig::read(&cfg_path)?;
    // Relative paths in the snapshot refer to the original config location.
    config.path = record.config_dir.join("config.toml");
    let network = load_checkpoint(&dir.join(&record.checkpoint))?;
    let pred_path = dir.join("predictions.csv");
    let pred_text = fs::read_to_string(&pred_path).map_err(io_err(&pred_path))?;
    let predictions = pred_text
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|p| p.parse::<usize>().ok())
                .ok_or_else(|| bad(dir, format!("bad predictions line `{}`", l)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if predictions.len() != record.test_count {
        return Err(bad(dir, "prediction count differs from the recorded test size"));
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        record,
        config,
        network,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapDistances {
    pub method: RdmComparison,
    /// Row-major `k x k` mean bootstrap distances.
    pub matrix: Vec<f64>,
    /// Degenerate subsets skipped, per model pair `i < j` in row-major order.
    pub skipped: Vec<usize>,
    pub mds_points: BTreeMap<String, [f64; 2]>,
    pub mds_stress: f64,
    pub mds_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub models: Vec<String>,
    pub methods: Vec<String>,
    pub test_errors: Vec<f64>,
    /// Row-major `k x k` McNemar p-values; the diagonal is 1.
    pub p_values: Vec<f64>,
    pub pairs: Vec<McNemarRow>,
    pub bootstrap: BootstrapConfig,
    pub pool_size: usize,
    /// tap -> one entry per RDM comparison method
    pub rdm_distances: BTreeMap<String, Vec<TapDistances>>,
}

pub fn compare(dirs: &[PathBuf], output_root: &Path) -> Result<(PathBuf, ComparisonReport), CliError> {
    if dirs.is_empty() {
        return Err(CliError::Config(vec!["compare needs at least one run directory".into()]));
    }
    let mut runs = dirs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| a.record.name.cmp(&b.record.name).then_with(|| a.dir.cmp(&b.dir)));
    let fp = &runs[0].record.test_fingerprint;
    if let Some(r) = runs.iter().find(|r| &r.record.test_fingerprint != fp) {
        return Err(CliError::TestSetMismatch(format!(
            "{} and {} were evaluated on different test sets",
            runs[0].record.name, r.record.name
        )));
    }
    let data = load_data(&runs[0].config)?;
    if &data.test.fingerprint() != fp {
        return Err(CliError::TestSetMismatch(format!(
            "the test set on disk no longer matches the one {} was evaluated on",
            runs[0].record.name
        )));
    }
    let labels = &data.test.labels;
    let k = runs.len();
    let mut models: Vec<String> = Vec::with_capacity(k);
    for r in &runs {
        let mut name = r.record.name.clone();
        let mut n = 2;
        while models.contains(&name) {
            name = format!("{}#{}", r.record.name, n);
            n += 1;
        }
        models.push(name);
    }

    let mut p_values = vec![1.0; k * k];
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let o = PairedOutcomes::from_predictions(&runs[i].predictions, &runs[j].predictions, labels)?;
            let row = McNemarRow::new(&models[i], &models[j], &o);
            p_values[i * k + j] = row.p_value;
            p_values[j * k + i] = row.p_value;
            pairs.push(row);
        }
    }

    let eval = &runs[0].config.config.eval;
    let pool = eval.pool_size.min(data.test.len());
    let pool_images = data.test.head(pool).images;
    let metric = eval.metric()?;
    let methods = eval.methods()?;
    let bootstrap = BootstrapConfig {
        samples: eval.bootstrap_samples,
        sample_size: eval.sample_size.min(pool),
        metric,
        method: methods.first().copied().unwrap_or(RdmComparison::Correlation),
        with_replacement: eval.with_replacement,
        seed: COMPARE_SEED,
    };
    let common_taps: Vec<String> = runs[0]
        .network
        .taps()
        .iter()
        .map(|t| t.name.clone())
        .filter(|t| runs.iter().all(|r| r.network.tap_layer(t).is_ok()))
        .collect();

    let hash: String = Sha256::digest(models.join("\n").as_bytes())
        .iter()
        .take(6)
        .map(|b| format!("{:02x}", b))
        .collect();
    let out = output_root.join(format!("compare-{}", hash));
    fs::create_dir_all(&out).map_err(io_err(&out))?;

    let mut rdm_distances = BTreeMap::new();
    for tap in &common_taps {
        let acts = runs
            .iter()
            .map(|r| r.network.activations(&pool_images, tap, 500))
            .collect::<Result<Vec<_>, _>>()?;
        let mut per_method = Vec::new();
        for &method in &methods {
            let cfg = BootstrapConfig { method, ..bootstrap };
            let mut matrix = vec![0.0; k * k];
            let mut skipped = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    let (d, s) = match bootstrap_rdm_distance(&acts[i], &acts[j], &cfg) {
                        Ok(r) => (r.mean, r.skipped),
                        Err(rdl_core::Error::Degenerate(_)) => (f64::NAN, cfg.samples),
                        Err(e) => return Err(e.into()),
                    };
                    matrix[i * k + j] = d;
                    matrix[j * k + i] = d;
                    skipped.push(s);
                }
            }
            let stem = format!("{}_{}", tap, method.as_str());
            let (mds_points, mds_stress, mds_warning) = if matrix.iter().all(|v| v.is_finite()) {
                let emb = classical_mds(&matrix, k)?;
                let svg = mds_svg(&emb, &models, &format!("{} / {}", tap, method.as_str()))?;
                let svg_path = out.join(format!("mds_{}.svg", stem));
                fs::write(&svg_path, svg).map_err(io_err(&svg_path))?;
                let side = mds_sidecar(&emb, &models);
                write_json(&out.join(format!("mds_{}.json", stem)), &side)?;
                (side.points, emb.stress, emb.warning)
            } else {
                let w = "distance matrix has undefined entries; no embedding".to_string();
                (BTreeMap::new(), f64::NAN, Some(w))
            };
            write_matrix(&out.join(format!("rdm_distance_{}.csv", stem)), &models, &matrix)?;
            per_method.push(TapDistances {
                method,
                matrix,
                skipped,
                mds_points,
                mds_stress,
                mds_warning,
            });
        }
        rdm_distances.insert(tap.clone(), per_method);
    }

    write_mcnemar_csv(&pairs, &out.join("mcnemar.csv"))?;
    write_matrix(&out.join("mcnemar_p.csv"), &models, &p_values)?;
    let mut errors = String::from("model,method,test_error\n");
    for (m, r) in models.iter().zip(&runs) {
        errors.push_str(&format!("{},{},{}\n", m, r.record.method, r.record.final_test_error));
    }
    let err_path = out.join("errors.csv");
    fs::write(&err_path, errors).map_err(io_err(&err_path))?;

    let report = ComparisonReport {
        methods: runs.iter().map(|r| r.record.method.clone()).collect(),
        test_errors: runs.iter().map(|r| r.record.final_test_error).collect(),
        models,
        p_values,
        pairs,
        bootstrap,
        pool_size: pool,
        rdm_distances,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok((out, report))
}

fn write_matrix(path: &Path, names: &[String], m: &[f64]) -> Result<(), CliError> {
    let k = names.len();
    let mut s = format!("model,{}\n", names.join(","));
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| m[i * k + j].to_string()).collect();
        s.push_str(&format!("{},{}\n", names[i], row.join(",")));
    }
    fs::write(path, s).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(rdl_core::Error::from)?;
    fs::write(path, text).map_err(io_err(path))
}
