//! Configuration, run orchestration and comparison for the `rdl` binary.

pub mod compare;
pub mod config;
pub mod error;
pub mod export;
pub mod run;
