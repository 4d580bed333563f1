use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint correctness counts of two classifiers A and B on a shared test set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedOutcomes {
    /// both wrong
    pub n00: u64,
    /// A right, B wrong
    pub n01: u64,
    /// A wrong, B right
    pub n10: u64,
    /// both right
    pub n11: u64,
}

/// Which of two classifiers made fewer errors on the discordant items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Better {
    First,
    Second,
    Tie,
}

impl Better {
    pub fn arrow(self) -> &'static str {
        match self {
            Better::First => "<",
            Better::Second => "^",
            Better::Tie => "=",
        }
    }
}

impl PairedOutcomes {
    pub fn from_predictions(a: &[usize], b: &[usize], labels: &[usize]) -> Result<Self> {
        if a.len() != labels.len() || b.len() != labels.len() {
            return Err(Error::shape(format!(
                "prediction lengths {} and {} for {} labels",
                a.len(),
                b.len(),
                labels.len()
            )));
        }
        let mut o = PairedOutcomes::default();
        for ((&pa, &pb), &y) in a.iter().zip(b).zip(labels) {
            match (pa == y, pb == y) {
                (false, false) => o.n00 += 1,
                (true, false) => o.n01 += 1,
                (false, true) => o.n10 += 1,
                (true, true) => o.n11 += 1,
            }
        }
        Ok(o)
    }

    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    pub fn better(&self) -> Better {
        match self.n01.cmp(&self.n10) {
            std::cmp::Ordering::Greater => Better::First,
            std::cmp::Ordering::Less => Better::Second,
            std::cmp::Ordering::Equal => Better::Tie,
        }
    }
}

/// Two-sided exact McNemar test:
/// `p = min(1, 2 * sum_{i <= k} C(m, i) / 2^m)` with `m = n01 + n10` and
/// `k = min(n01, n10)`. Evaluated in the log domain.
pub fn mcnemar_exact(o: &PairedOutcomes) -> f64 {
    let m = o.n01 + o.n10;
    if m == 0 {
        return 1.0;
    }
    let k = o.n01.min(o.n10);
    let log_half_m = m as f64 * 0.5f64.ln();
    let mut log_c = 0.0;
    let mut terms = Vec::with_capacity(k as usize + 1);
    for i in 0..=k {
        if i > 0 {
            log_c += ((m - i + 1) as f64).ln() - (i as f64).ln();
        }
        terms.push(log_c + log_half_m);
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    (2.0 * log_sum.exp()).min(1.0)
}
