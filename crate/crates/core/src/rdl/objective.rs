use std::collections::BTreeMap;

use super::loss::{aux_grad_sampled, rdm_mse};
use super::pairs::{sample_pairs, PairBudget};
use super::schedule::AlphaSchedule;
use super::teacher::TeacherRdmProvider;
use crate::error::{Error, Result};
use crate::nn::{ForwardPass, Network, SgdState};
use crate::rdm::compute_rdm;
use crate::rng;
use crate::tensor::Tensor;
use crate::train::{train_epoch, AuxStep, Auxiliary, BatchContext, EpochConfig, EpochMetrics};

#[derive(Debug, Clone, PartialEq)]
pub struct RdlSettings {
    /// Student taps receiving the auxiliary gradient.
    pub taps: Vec<String>,
    pub budget: PairBudget,
    pub schedule: AlphaSchedule,
}

/// RDL as an [`Auxiliary`] objective. Reported losses are the exact
/// auxiliary loss over all pairs; gradients use one fresh pair sample per
/// tap and batch.
#[derive(Debug, Clone)]
pub struct RdlObjective {
    provider: TeacherRdmProvider,
    settings: RdlSettings,
}

impl RdlObjective {
    pub fn new(student: &Network, provider: TeacherRdmProvider, settings: RdlSettings) -> Result<Self> {
        if settings.taps.is_empty() {
            return Err(Error::invalid("RDL needs at least one tap"));
        }
        for tap in &settings.taps {
            student.tap_layer(tap)?;
            if !provider.tap_map().contains_key(tap) {
                return Err(Error::UnknownTap(format!("{} (no teacher mapping)", tap)));
            }
        }
        Ok(RdlObjective { provider, settings })
    }

    pub fn provider(&self) -> &TeacherRdmProvider {
        &self.provider
    }

    pub fn settings(&self) -> &RdlSettings {
        &self.settings
    }
}

impl Auxiliary for RdlObjective {
    fn alpha(&self, epoch: usize) -> Result<f64> {
        self.settings.schedule.alpha_at(epoch)
    }

    fn step(&mut self, net: &Network, pass: &ForwardPass, ctx: &BatchContext<'_>, alpha: f64) -> Result<AuxStep> {
        let metric = self.provider.metric();
        let teacher = self.provider.rdms(ctx.images, &self.settings.taps)?;
        let mut out = AuxStep::default();
        for (k, tap) in self.settings.taps.iter().enumerate() {
            let acts = pass.layer_output(net.tap_layer(tap)?);
            let target = &teacher[tap];
            let n = acts.rows();
            if target.n() != n {
                return Err(Error::shape(format!("teacher RDM of {} for a batch of {}", target.n(), n)));
            }
            let student = compute_rdm(acts, metric)?;
            out.losses.insert(tap.clone(), rdm_mse(&student, target, n));
            if alpha == 0.0 {
                continue;
            }
            let pair_seed = rng::derive(ctx.seed, "pairs", &[ctx.epoch as u64, ctx.batch as u64, k as u64]);
            let sample = sample_pairs(n, self.settings.budget, pair_seed)?;
            let mut g = aux_grad_sampled(acts, target, &sample, metric)?;
            g.data_mut().iter_mut().for_each(|v| *v *= alpha);
            out.tap_grads.insert(tap.clone(), g);
        }
        Ok(out)
    }
}

/// One RDL epoch of `student` against the objective's teacher.
pub fn rdl_train_epoch(
    student: &mut Network,
    objective: &mut RdlObjective,
    images: &Tensor,
    labels: &[usize],
    sgd: &mut SgdState,
    cfg: &EpochConfig,
) -> Result<EpochMetrics> {
    train_epoch(student, sgd, images, labels, cfg, Some(objective))
}

/// Mean exact auxiliary loss per tap over fixed consecutive batches, in
/// eval mode.
pub fn eval_aux_loss(
    student: &Network,
    objective: &mut RdlObjective,
    images: &Tensor,
    batch_size: usize,
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut batches = 0usize;
    let mut start = 0;
    while start + 1 < images.rows() {
        let end = (start + batch_size.max(2)).min(images.rows());
        let idx: Vec<usize> = (start..end).collect();
        let x = images.select_rows(&idx);
        let pass = student.forward(&x, crate::nn::Mode::Eval, 0)?;
        let teacher = objective.provider.rdms(&x, &objective.settings.taps)?;
        for tap in &objective.settings.taps {
            let acts = pass.layer_output(student.tap_layer(tap)?);
            let s = compute_rdm(acts, objective.provider.metric())?;
            *sums.entry(tap.clone()).or_default() += rdm_mse(&s, &teacher[tap], acts.rows());
        }
        batches += 1;
        start = end;
    }
    Ok(sums.into_iter().map(|(k, v)| (k, v / batches.max(1) as f64)).collect())
}
