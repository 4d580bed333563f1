//! Datasets: IDX ingestion, deterministic splits, preprocessing and
//! synthetic class clusters.

mod cache;
mod idx;
mod preprocess;

use rand::seq::index;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

pub use cache::{load_dataset_cache, save_dataset_cache};
pub use idx::{load_idx, write_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use preprocess::{augment_hflip, flip_with_mask, gcn, hflip_mask, synth_clusters, GCN_EPSILON};

/// Labelled images, `[n, channels, height, width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Free-text description of where the data came from.
    pub provenance: String,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, num_classes: usize, provenance: impl Into<String>) -> Result<Self> {
        if images.shape().is_empty() || images.rows() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.shape().first().copied().unwrap_or(0),
                labels: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!("label {} outside [0, {})", l, num_classes)));
        }
        images.check_finite("dataset", || "images".into())?;
        Ok(Dataset {
            images,
            labels,
            num_classes,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample image shape.
    pub fn image_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            images: self.images.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            provenance: self.provenance.clone(),
        }
    }

    /// First `count` samples.
    pub fn head(&self, count: usize) -> Dataset {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Random disjoint split; returns `(train, validation)` index lists,
    /// each in ascending order.
    pub fn split_indices(&self, validation_count: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.len();
        if validation_count > n || (validation_count == n && n > 0) {
            return Err(Error::invalid(format!(
                "validation count {} must be below the dataset size {}",
                validation_count, n
            )));
        }
        let mut r = rng::stream(seed, "split", &[]);
        let mut val = index::sample(&mut r, n, validation_count).into_vec();
        val.sort_unstable();
        let mut in_val = vec![false; n];
        val.iter().for_each(|&i| in_val[i] = true);
        let train = (0..n).filter(|&i| !in_val[i]).collect();
        Ok((train, val))
    }

    pub fn split(&self, validation_count: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let (train, val) = self.split_indices(validation_count, seed)?;
        Ok((self.subset(&train), self.subset(&val)))
    }

    /// Hex SHA-256 over shape, pixel values and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for &d in self.images.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for v in self.images.data() {
            h.update(v.to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{:02x}", b)).collect()
    }
}
