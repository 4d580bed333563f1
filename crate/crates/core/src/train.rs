//! Mini-batch training loop shared by every method.
//!
//! Methods that add auxiliary gradients (RDL, deep supervision) plug in
//! through [`Auxiliary`]; their per-tap gradients are added to the
//! backprop stream at the tap before that layer is backpropagated.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, softmax_xent, ForwardPass, GradSeed, LayerSpec, Mode, Network, SgdState};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochConfig {
    /// 0-based epoch index; selects the shuffle and dropout substreams.
    pub epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Weight of the output cross-entropy gradient; 0 trains on the
    /// auxiliary objective alone.
    pub output_weight: f64,
}

impl EpochConfig {
    pub fn new(epoch: usize, batch_size: usize, seed: u64) -> Self {
        EpochConfig {
            epoch,
            batch_size,
            seed,
            output_weight: 1.0,
        }
    }
}

/// What an auxiliary objective sees for one mini-batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchContext<'a> {
    pub epoch: usize,
    pub batch: usize,
    pub seed: u64,
    pub images: &'a Tensor,
    pub labels: &'a [usize],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuxStep {
    /// Already alpha-weighted gradients w.r.t. tap activations.
    pub tap_grads: BTreeMap<String, Tensor>,
    pub losses: BTreeMap<String, f64>,
}

pub trait Auxiliary {
    fn alpha(&self, epoch: usize) -> Result<f64>;

    /// Computes losses and alpha-weighted tap gradients for one batch. With
    /// `alpha == 0` implementations must return no gradients and leave any
    /// state of their own unchanged.
    fn step(&mut self, net: &Network, pass: &ForwardPass, ctx: &BatchContext<'_>, alpha: f64) -> Result<AuxStep>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean output cross-entropy over training samples.
    pub loss: f64,
    /// Fraction of training samples misclassified (train-mode forward).
    pub train_error: f64,
    pub alpha: Option<f64>,
    /// Mean auxiliary loss per tap, averaged over batches.
    pub aux_loss: BTreeMap<String, f64>,
}

/// Splits `0..n` into shuffled mini-batches for `epoch`.
pub fn batch_order(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, "shuffle", &[epoch as u64]));
    Ok(idx.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Logit-level cross-entropy for a pass; the logits are the input of a
/// final softmax layer if there is one, the raw output otherwise.
fn output_loss(net: &Network, pass: &ForwardPass, labels: &[usize]) -> Result<(f64, Tensor, bool)> {
    let n = net.layers().len();
    let softmax_last = n >= 2 && net.layers()[n - 1].spec() == &LayerSpec::Softmax;
    let logits = if softmax_last { pass.layer_output(n - 2) } else { pass.output() };
    let (loss, grad) = softmax_xent(logits, labels)?;
    Ok((loss, grad, softmax_last))
}

pub fn train_epoch(
    net: &mut Network,
    sgd: &mut SgdState,
    images: &Tensor,
    labels: &[usize],
    cfg: &EpochConfig,
    mut aux: Option<&mut dyn Auxiliary>,
) -> Result<EpochMetrics> {
    if images.rows() != labels.len() {
        return Err(Error::CountMismatch {
            images: images.rows(),
            labels: labels.len(),
        });
    }
    if !(cfg.output_weight >= 0.0) {
        return Err(Error::invalid("output weight must be >= 0"));
    }
    let alpha = match aux.as_deref() {
        Some(a) => Some(a.alpha(cfg.epoch)?),
        None => None,
    };
    let batches = batch_order(images.rows(), cfg.batch_size, cfg.seed, cfg.epoch)?;
    let mut loss_sum = 0.0;
    let mut wrong = 0usize;
    let mut aux_sums: BTreeMap<String, f64> = BTreeMap::new();
    for (b, idx) in batches.iter().enumerate() {
        let x = images.select_rows(idx);
        let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let ctx = BatchContext {
            epoch: cfg.epoch,
            batch: b,
            seed: cfg.seed,
            images: &x,
            labels: &y,
        };
        let step = train_batch(net, sgd, &ctx, cfg.output_weight, aux.as_deref_mut(), alpha.unwrap_or(0.0))
            .map_err(|e| Error::Batch {
                epoch: cfg.epoch,
                batch: b,
                source: Box::new(e),
            })?;
        loss_sum += step.loss * idx.len() as f64;
        wrong += step.wrong;
        for (tap, l) in step.aux_losses {
            *aux_sums.entry(tap).or_default() += l;
        }
    }
    let n = images.rows().max(1) as f64;
    let nb = batches.len().max(1) as f64;
    Ok(EpochMetrics {
        epoch: cfg.epoch,
        loss: loss_sum / n,
        train_error: wrong as f64 / n,
        alpha,
        aux_loss: aux_sums.into_iter().map(|(k, v)| (k, v / nb)).collect(),
    })
}

struct BatchResult {
    loss: f64,
    wrong: usize,
    aux_losses: BTreeMap<String, f64>,
}

fn train_batch(
    net: &mut Network,
    sgd: &mut SgdState,
    ctx: &BatchContext<'_>,
    output_weight: f64,
    aux: Option<&mut (dyn Auxiliary + '_)>,
    alpha: f64,
) -> Result<BatchResult> {
    let dropout_seed = rng::derive(ctx.seed, "dropout", &[ctx.epoch as u64, ctx.batch as u64]);
    let pass = net.forward(ctx.images, Mode::Train, dropout_seed)?;
    let (loss, mut grad, softmax_last) = output_loss(net, &pass, ctx.labels)?;
    let out = pass.output();
    let wrong = (0..out.rows()).filter(|&i| argmax(out.row(i)) != ctx.labels[i]).count();

    let step = match aux {
        Some(a) => a.step(net, &pass, ctx, alpha)?,
        None => AuxStep::default(),
    };
    if output_weight != 1.0 {
        grad.data_mut().iter_mut().for_each(|g| *g *= output_weight);
    }
    let seed = if output_weight == 0.0 {
        GradSeed::None
    } else if softmax_last {
        GradSeed::Logits(&grad)
    } else {
        GradSeed::Output(&grad)
    };
    let grads = net.backward(&pass, seed, &step.tap_grads, false)?;
    let flat = grads.flat(net);
    sgd.step(net.params_mut(), &flat)?;
    Ok(BatchResult {
        loss,
        wrong,
        aux_losses: step.losses,
    })
}

/// Fraction of misclassified samples under eval-mode predictions.
pub fn error_rate(net: &Network, images: &Tensor, labels: &[usize]) -> Result<f64> {
    if images.rows() != labels.len() {
        return Err(Error::CountMismatch {
            images: images.rows(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let preds = net.predict(images, 500)?;
    let wrong = preds.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(wrong as f64 / labels.len() as f64)
}
