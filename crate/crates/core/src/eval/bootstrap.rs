use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rdm::{compute_rdm, rdm_distance, PairwiseMetric, RdmComparison};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub samples: usize,
    pub sample_size: usize,
    pub metric: PairwiseMetric,
    pub method: RdmComparison,
    /// Draw each subset with replacement instead of as a plain subset.
    pub with_replacement: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean: f64,
    /// One distance per non-skipped subset, in draw order.
    pub distances: Vec<f64>,
    /// Subsets skipped because an RDM was degenerate under the method.
    pub skipped: usize,
}

/// Subset indices for bootstrap iteration `iter`.
pub fn bootstrap_indices(pool: usize, cfg: &BootstrapConfig, iter: usize) -> Vec<usize> {
    let mut r = rng::stream(cfg.seed, "bootstrap", &[iter as u64]);
    if cfg.with_replacement {
        (0..cfg.sample_size).map(|_| r.gen_range(0..pool)).collect()
    } else {
        index::sample(&mut r, pool, cfg.sample_size).into_vec()
    }
}

/// Mean RDM distance between two models over random image subsets.
/// `acts_a` and `acts_b` hold the two models' activations for the same
/// image pool, row-aligned.
pub fn bootstrap_rdm_distance(acts_a: &Tensor, acts_b: &Tensor, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    let pool = acts_a.rows();
    if acts_b.rows() != pool {
        return Err(Error::shape(format!("pools of {} and {} images", pool, acts_b.rows())));
    }
    if cfg.samples == 0 || cfg.sample_size < 2 {
        return Err(Error::invalid("bootstrap needs samples >= 1 and sample size >= 2"));
    }
    if cfg.sample_size > pool {
        return Err(Error::invalid(format!("sample size {} exceeds pool of {}", cfg.sample_size, pool)));
    }
    let mut distances = Vec::with_capacity(cfg.samples);
    let mut skipped = 0;
    for iter in 0..cfg.samples {
        let idx = bootstrap_indices(pool, cfg, iter);
        let d = compute_rdm(&acts_a.select_rows(&idx), cfg.metric)
            .and_then(|ra| Ok((ra, compute_rdm(&acts_b.select_rows(&idx), cfg.metric)?)))
            .and_then(|(ra, rb)| rdm_distance(&ra, &rb, cfg.method));
        match d {
            Ok(d) => distances.push(d),
            Err(Error::Degenerate(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if distances.is_empty() {
        return Err(Error::Degenerate(format!("all {} bootstrap subsets were degenerate", skipped)));
    }
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(BootstrapResult {
        mean,
        distances,
        skipped,
    })
}
