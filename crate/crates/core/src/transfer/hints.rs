use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Architecture, GradSeed, LayerSpec, Mode, Network, SgdState};
use crate::rng;
use crate::tensor::Tensor;
use crate::train::batch_order;

#[derive(Debug, Clone, PartialEq)]
pub struct HintsConfig {
    pub student_tap: String,
    pub teacher_tap: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Start the regressor at the identity map (needs equal widths)
    /// instead of a Glorot draw.
    pub identity_init: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintsReport {
    /// Eval-mode hint loss before pretraining and after each epoch.
    pub losses: Vec<f64>,
}

/// Default pretraining budget: 20% of the training epochs, at least one.
pub fn default_hint_epochs(total_epochs: usize) -> usize {
    ((total_epochs as f64 * 0.2).round() as usize).max(1)
}

/// Middle tap of a network (the lower one for an even count).
pub fn default_hint_tap(net: &Network) -> Option<&str> {
    let taps = net.taps();
    if taps.is_empty() {
        None
    } else {
        Some(&taps[(taps.len() - 1) / 2].name)
    }
}

fn flat_rows(t: &Tensor) -> Tensor {
    let n = t.rows();
    let k = t.row_len();
    t.clone().reshape(vec![n, k]).expect("same element count")
}

/// `sum (pred - target)^2 / (rows * width)` and its gradient.
fn mse(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
    let denom = pred.len() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut sum = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let e = p - t;
        sum += e * e;
        *g = 2.0 * e / denom;
    }
    (sum / denom, grad)
}

fn hint_loss(student: &Network, regressor: &Network, teacher: &Network, cfg: &HintsConfig, images: &Tensor) -> Result<f64> {
    let s = flat_rows(&student.activations(images, &cfg.student_tap, 500)?);
    let t = flat_rows(&teacher.activations(images, &cfg.teacher_tap, 500)?);
    let pred = regressor.forward(&s, Mode::Eval, 0)?;
    Ok(mse(pred.output(), &t).0)
}

/// Trains the student's layers up to `student_tap`, through a disposable
/// affine regressor, to predict the teacher's activations at
/// `teacher_tap`. Later student layers are left untouched.
pub fn hints_pretrain(student: &mut Network, teacher: &Network, images: &Tensor, cfg: &HintsConfig) -> Result<HintsReport> {
    let s_layer = student.tap_layer(&cfg.student_tap)?;
    let t_layer = teacher.tap_layer(&cfg.teacher_tap)?;
    let s_width: usize = student.layers()[s_layer].output_shape().iter().product();
    let t_width: usize = teacher.layers()[t_layer].output_shape().iter().product();
    let arch = Architecture::new(&[s_width]).layer(LayerSpec::FullyConnected { features: t_width });
    let mut regressor = Network::new(&arch, rng::derive(cfg.seed, "hints_regressor", &[]))?;
    if cfg.identity_init {
        if s_width != t_width {
            return Err(Error::shape(format!(
                "identity regressor needs equal widths, got {} and {}",
                s_width, t_width
            )));
        }
        let mut params = regressor.params_mut();
        let w = params.next().unwrap();
        w.data_mut().iter_mut().enumerate().for_each(|(i, v)| {
            *v = if i / s_width == i % s_width { 1.0 } else { 0.0 };
        });
    }
    let mut sgd = SgdState::new(cfg.learning_rate, cfg.momentum, student.params())?;
    let mut reg_sgd = SgdState::new(cfg.learning_rate, cfg.momentum, regressor.params())?;
    let mut losses = vec![hint_loss(student, &regressor, teacher, cfg, images)?];
    for epoch in 0..cfg.epochs {
        for (b, idx) in batch_order(images.rows(), cfg.batch_size, cfg.seed, epoch)?.iter().enumerate() {
            let x = images.select_rows(idx);
            let target = flat_rows(&teacher.forward_to(&x, Mode::Eval, 0, t_layer + 1)?.layer_output(t_layer).clone());
            let dropout_seed = rng::derive(cfg.seed, "hints_dropout", &[epoch as u64, b as u64]);
            let pass = student.forward_to(&x, Mode::Train, dropout_seed, s_layer + 1)?;
            let acts = pass.layer_output(s_layer);
            let rp = regressor.forward(&flat_rows(acts), Mode::Train, 0)?;
            let (_, g) = mse(rp.output(), &target);
            let rg = regressor.backward(&rp, GradSeed::Output(&g), &BTreeMap::new(), true)?;
            let gx = rg.input.clone().expect("input gradient requested").reshape(acts.shape().to_vec())?;
            let sg = student.backward(&pass, GradSeed::Layer { layer: s_layer, grad: &gx }, &BTreeMap::new(), false)?;
            let flat = sg.flat(student);
            sgd.step(student.params_mut(), &flat)?;
            let flat = rg.flat(&regressor);
            reg_sgd.step(regressor.params_mut(), &flat)?;
        }
        losses.push(hint_loss(student, &regressor, teacher, cfg, images)?);
    }
    Ok(HintsReport { losses })
}
