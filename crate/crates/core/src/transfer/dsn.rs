use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{softmax_xent, Architecture, ForwardPass, GradSeed, LayerSpec, Mode, Network, SgdState};
use crate::rdl::AlphaSchedule;
use crate::rng;
use crate::train::{AuxStep, Auxiliary, BatchContext};

#[derive(Debug, Clone)]
struct Head {
    tap: String,
    net: Network,
    sgd: SgdState,
}

/// Linear softmax classifiers attached at internal taps. Each head's
/// cross-entropy gradient, scaled by the schedule's alpha, is injected at
/// its tap; the heads are updated with the same scaled gradient.
#[derive(Debug, Clone)]
pub struct DeepSupervision {
    heads: Vec<Head>,
    schedule: AlphaSchedule,
}

impl DeepSupervision {
    pub fn attach(
        student: &Network,
        taps: &[String],
        num_classes: usize,
        schedule: AlphaSchedule,
        sgd: &SgdState,
        seed: u64,
    ) -> Result<Self> {
        let mut heads = Vec::with_capacity(taps.len());
        for (k, tap) in taps.iter().enumerate() {
            let arch = Architecture::new(student.tap_shape(tap)?)
                .layer(LayerSpec::LinearReadout { features: num_classes })
                .layer(LayerSpec::Softmax);
            let net = Network::new(&arch, rng::derive(seed, "dsn_head", &[k as u64]))?;
            let head_sgd = SgdState::new(sgd.learning_rate, sgd.momentum, net.params())?;
            heads.push(Head {
                tap: tap.clone(),
                net,
                sgd: head_sgd,
            });
        }
        Ok(DeepSupervision { heads, schedule })
    }

    pub fn taps(&self) -> Vec<&str> {
        self.heads.iter().map(|h| h.tap.as_str()).collect()
    }

    /// Parameters added by the heads.
    pub fn param_count(&self) -> usize {
        self.heads.iter().map(|h| h.net.param_count()).sum()
    }

    pub fn head(&self, tap: &str) -> Option<&Network> {
        self.heads.iter().find(|h| h.tap == tap).map(|h| &h.net)
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        for h in &mut self.heads {
            h.sgd.learning_rate = lr;
        }
    }
}

impl Auxiliary for DeepSupervision {
    fn alpha(&self, epoch: usize) -> Result<f64> {
        self.schedule.alpha_at(epoch)
    }

    fn step(&mut self, net: &Network, pass: &ForwardPass, ctx: &BatchContext<'_>, alpha: f64) -> Result<AuxStep> {
        let mut out = AuxStep::default();
        for h in &mut self.heads {
            let acts = pass.layer_output(net.tap_layer(&h.tap)?);
            let hp = h.net.forward(acts, Mode::Train, 0)?;
            let (loss, mut g) = softmax_xent(hp.layer_output(0), ctx.labels)?;
            out.losses.insert(h.tap.clone(), loss);
            if alpha == 0.0 {
                continue;
            }
            g.data_mut().iter_mut().for_each(|v| *v *= alpha);
            let grads = h.net.backward(&hp, GradSeed::Logits(&g), &BTreeMap::new(), true)?;
            let tap_grad = grads
                .input
                .clone()
                .ok_or_else(|| Error::invalid("head produced no input gradient"))?;
            let flat = grads.flat(&h.net);
            h.sgd.step(h.net.params_mut(), &flat)?;
            out.tap_grads.insert(h.tap.clone(), tap_grad);
        }
        Ok(out)
    }
}
