//! Representational distance learning.
//!
//! A student network is trained with auxiliary losses that pull its
//! representational distance matrices (RDMs) toward those of a frozen
//! teacher, alongside finetuning, deep supervision and hint-based transfer
//! baselines, plus the evaluation stack used to compare them.

pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rdl;
pub mod rdm;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod transfer;

pub use error::{Error, Result};
pub use tensor::Tensor;
