use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// `alpha_t = alpha0 * (1 - t / t_max)`
    RdlLinear,
    /// `alpha_{t+1} = alpha_t * 0.1 * (1 - t / t_max)`, `alpha_0 = alpha0`
    DsnDecay,
}

/// Per-epoch weight of an auxiliary loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub alpha0: f64,
    pub t_max: usize,
    pub rule: AlphaRule,
}

impl AlphaSchedule {
    pub fn new(alpha0: f64, t_max: usize, rule: AlphaRule) -> Result<Self> {
        if !(alpha0 >= 0.0 && alpha0.is_finite()) {
            return Err(Error::invalid(format!("alpha0 {} must be finite and >= 0", alpha0)));
        }
        if t_max == 0 {
            return Err(Error::invalid("t_max must be at least 1"));
        }
        Ok(AlphaSchedule { alpha0, t_max, rule })
    }

    /// Weight for epoch `epoch` (0-based), `0 <= epoch <= t_max`.
    pub fn alpha_at(&self, epoch: usize) -> Result<f64> {
        if epoch > self.t_max {
            return Err(Error::invalid(format!(
                "epoch {} outside [0, {}]",
                epoch, self.t_max
            )));
        }
        let t_max = self.t_max as f64;
        Ok(match self.rule {
            AlphaRule::RdlLinear => self.alpha0 * (1.0 - epoch as f64 / t_max),
            AlphaRule::DsnDecay => {
                let mut a = self.alpha0;
                for t in 0..epoch {
                    a = a * 0.1 * (1.0 - t as f64 / t_max);
                }
                a
            }
        })
    }
}

pub fn alpha_at(schedule: &AlphaSchedule, epoch: usize) -> Result<f64> {
    schedule.alpha_at(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_rule() {
        let s = AlphaSchedule::new(1.0, 10, AlphaRule::RdlLinear).unwrap();
        assert_eq!(s.alpha_at(0).unwrap(), 1.0);
        assert_eq!(s.alpha_at(5).unwrap(), 0.5);
        assert_eq!(s.alpha_at(10).unwrap(), 0.0);
        assert!(s.alpha_at(11).is_err());
    }

    #[test]
    fn dsn_recurrence() {
        let s = AlphaSchedule::new(1.0, 10, AlphaRule::DsnDecay).unwrap();
        assert_eq!(s.alpha_at(0).unwrap(), 1.0);
        assert!((s.alpha_at(1).unwrap() - 0.1).abs() < 1e-17);
        assert!((s.alpha_at(2).unwrap() - 0.009).abs() < 1e-17);
    }

    #[test]
    fn both_rules_nonincreasing() {
        for rule in [AlphaRule::RdlLinear, AlphaRule::DsnDecay] {
            let s = AlphaSchedule::new(2.5, 20, rule).unwrap();
            let seq: Vec<f64> = (0..=20).map(|t| s.alpha_at(t).unwrap()).collect();
            assert!(seq.windows(2).all(|w| w[1] <= w[0]), "{:?}", rule);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(AlphaSchedule::new(-1.0, 10, AlphaRule::RdlLinear).is_err());
        assert!(AlphaSchedule::new(1.0, 0, AlphaRule::RdlLinear).is_err());
        assert!(AlphaSchedule::new(f64::NAN, 3, AlphaRule::DsnDecay).is_err());
    }
}
