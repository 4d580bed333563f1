use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("run directory {0} already exists")]
    RunExists(PathBuf),

    #[error("mismatched test sets: {0}")]
    TestSetMismatch(String),

    #[error("invalid run directory {path}: {reason}")]
    BadRun { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] rdl_core::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::RunExists(_) => "run_exists",
            CliError::TestSetMismatch(_) => "test_set_mismatch",
            CliError::BadRun { .. } => "bad_run",
            CliError::Core(rdl_core::Error::Batch { .. }) => "training",
            CliError::Core(_) => "core",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Config(list) => v["violations"] = json!(list),
            CliError::Core(rdl_core::Error::Batch { epoch, batch, .. }) => {
                v["epoch"] = json!(epoch);
                v["batch"] = json!(batch);
            }
            _ => {}
        }
        v
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
