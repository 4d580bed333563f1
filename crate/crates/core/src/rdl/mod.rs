//! Auxiliary RDM-matching objective: loss, exact and pair-sampled
//! gradients, alpha schedules, teacher RDM supply and the training step.

mod loss;
mod objective;
mod pairs;
mod schedule;
mod teacher;

pub use loss::{aux_grad_exact, aux_grad_sampled, aux_loss, combine_gradients, normalization_ratio};
pub use objective::{eval_aux_loss, rdl_train_epoch, RdlObjective, RdlSettings};
pub use pairs::{sample_pairs, PairBudget, PairSample};
pub use schedule::{alpha_at, AlphaRule, AlphaSchedule};
pub use teacher::{batch_hash, CacheEntry, RdmCache, TeacherRdmProvider};
