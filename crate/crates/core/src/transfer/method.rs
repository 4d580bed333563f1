use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network};
use crate::rdl::PairBudget;
use crate::rdm::PairwiseMetric;

/// How a student is trained relative to a teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TransferMethod {
    Baseline,
    Finetune {
        /// Final layer to reinitialize when the output size changes.
        readout: Option<LayerSpec>,
    },
    DeepSupervision {
        taps: Vec<String>,
        alpha0: f64,
    },
    Hints {
        student_tap: String,
        teacher_tap: String,
        epochs: usize,
        identity_init: bool,
    },
    Rdl {
        /// student tap -> teacher tap
        tap_map: BTreeMap<String, String>,
        budget: PairBudget,
        metric: PairwiseMetric,
        alpha0: f64,
    },
}

impl TransferMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            TransferMethod::Baseline => "baseline",
            TransferMethod::Finetune { .. } => "finetune",
            TransferMethod::DeepSupervision { .. } => "deep_supervision",
            TransferMethod::Hints { .. } => "hints",
            TransferMethod::Rdl { .. } => "rdl",
        }
    }

    pub fn needs_teacher(&self) -> bool {
        matches!(
            self,
            TransferMethod::Finetune { .. } | TransferMethod::Hints { .. } | TransferMethod::Rdl { .. }
        )
    }

    /// Checks settings against the networks; every violation is listed.
    pub fn validate(&self, student: &Network, teacher: Option<&Network>) -> Result<()> {
        let mut problems = Vec::new();
        let check_student = |tap: &str, problems: &mut Vec<String>| {
            if student.tap_layer(tap).is_err() {
                problems.push(format!("student has no tap `{}`", tap));
            }
        };
        let check_teacher = |tap: &str, problems: &mut Vec<String>| {
            if let Some(t) = teacher {
                if t.tap_layer(tap).is_err() {
                    problems.push(format!("teacher has no tap `{}`", tap));
                }
            }
        };
        if self.needs_teacher() && teacher.is_none() {
            problems.push(format!("method `{}` needs a teacher", self.tag()));
        }
        match self {
            TransferMethod::Baseline | TransferMethod::Finetune { .. } => {}
            TransferMethod::DeepSupervision { taps, alpha0 } => {
                for t in taps {
                    check_student(t, &mut problems);
                }
                if !(*alpha0 >= 0.0) {
                    problems.push(format!("alpha0 {} must be >= 0", alpha0));
                }
            }
            TransferMethod::Hints {
                student_tap,
                teacher_tap,
                ..
            } => {
                check_student(student_tap, &mut problems);
                check_teacher(teacher_tap, &mut problems);
            }
            TransferMethod::Rdl { tap_map, alpha0, .. } => {
                if tap_map.is_empty() {
                    problems.push("rdl tap map is empty".into());
                }
                for (s, t) in tap_map {
                    check_student(s, &mut problems);
                    check_teacher(t, &mut problems);
                }
                if !(*alpha0 >= 0.0) {
                    problems.push(format!("alpha0 {} must be >= 0", alpha0));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    #[test]
    fn validation_lists_every_problem() {
        let net = Network::new(&Architecture::mnist_cnn(), 0).unwrap();
        let m = TransferMethod::Rdl {
            tap_map: [("pool2".to_string(), "x".to_string()), ("y".to_string(), "fc".to_string())]
                .into_iter()
                .collect(),
            budget: PairBudget::Fraction(0.05),
            metric: PairwiseMetric::MeanSquaredError,
            alpha0: -1.0,
        };
        let err = m.validate(&net, Some(&net)).unwrap_err().to_string();
        assert!(err.contains("teacher has no tap `x`"));
        assert!(err.contains("student has no tap `y`"));
        assert!(err.contains("alpha0"));
        assert!(TransferMethod::Baseline.validate(&net, None).is_ok());
        assert!(m.needs_teacher());
        let e = TransferMethod::Finetune { readout: None }.validate(&net, None).unwrap_err();
        assert!(e.to_string().contains("needs a teacher"));
    }
}
