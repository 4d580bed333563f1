//! `rdm-export`: RDMs of a checkpoint's tap on a dataset.

use std::path::{Path, PathBuf};

use rdl_core::data::{load_dataset_cache, load_idx, Dataset};
use rdl_core::rdm::PairwiseMetric;

use crate::error::CliError;
use crate::run::{export_rdms, load_checkpoint};

/// Loads either a `.rdld` cache or an IDX image file; for IDX the labels
/// file is found by replacing `images-idx3` with `labels-idx1` in the name.
pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    if path.extension().is_some_and(|e| e == "rdld") {
        return Ok(load_dataset_cache(path)?);
    }
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if !name.contains("images-idx3") {
        return Err(CliError::Config(vec![format!(
            "{}: expected a .rdld cache or an IDX file named *images-idx3*",
            path.display()
        )]));
    }
    let labels = path.with_file_name(name.replace("images-idx3", "labels-idx1"));
    Ok(load_idx(path, &labels)?)
}

pub struct ExportRequest<'a> {
    pub checkpoint: &'a Path,
    pub dataset: &'a Path,
    pub tap: &'a str,
    pub per_class: usize,
    pub metric: PairwiseMetric,
}

/// Writes `<tap>.csv/.json/.svg` into `<output_root>/rdm-<checkpoint stem>-<tap>/`.
pub fn rdm_export(req: &ExportRequest<'_>, output_root: &Path) -> Result<PathBuf, CliError> {
    let net = load_checkpoint(req.checkpoint)?;
    net.tap_layer(req.tap)?;
    let data = load_dataset(req.dataset)?;
    let stem = req
        .checkpoint
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let dir = output_root.join(format!("rdm-{}-{}", stem, req.tap));
    export_rdms(&net, &data, &[req.tap.to_string()], req.per_class, req.metric, &dir)?;
    Ok(dir.join(format!("{}.csv", req.tap)))
}
