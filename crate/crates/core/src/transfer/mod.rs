//! Comparison methods: finetuning from copied weights, deep supervision
//! with auxiliary softmax heads, and hint pretraining.

mod dsn;
mod finetune;
mod hints;
mod method;

pub use dsn::DeepSupervision;
pub use finetune::finetune_init;
pub use hints::{default_hint_epochs, default_hint_tap, hints_pretrain, HintsConfig, HintsReport};
pub use method::TransferMethod;
