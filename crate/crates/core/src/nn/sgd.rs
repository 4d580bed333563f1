use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Classical (heavy-ball) momentum SGD:
/// `v <- momentum * v - lr * g`, `p <- p + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Tensor>,
}

impl SgdState {
    pub fn new<'a>(learning_rate: f64, momentum: f64, params: impl IntoIterator<Item = &'a Tensor>) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be positive", learning_rate)));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", momentum)));
        }
        Ok(SgdState {
            learning_rate,
            momentum,
            velocity: params.into_iter().map(|p| Tensor::zeros(p.shape())).collect(),
        })
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    /// Applies one update. `grads[i] == None` leaves parameter `i` and its
    /// velocity untouched.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Tensor>,
        grads: &[Option<&Tensor>],
    ) -> Result<()> {
        let params: Vec<&mut Tensor> = params.into_iter().collect();
        if params.len() != self.velocity.len() || grads.len() != params.len() {
            return Err(Error::shape(format!(
                "sgd: {} parameters, {} velocities, {} gradients",
                params.len(),
                self.velocity.len(),
                grads.len()
            )));
        }
        for (i, ((p, v), g)) in params.iter().zip(&self.velocity).zip(grads).enumerate() {
            if let Some(g) = g {
                p.ensure_same_shape(g, &format!("sgd gradient {}", i))?;
                p.ensure_same_shape(v, &format!("sgd velocity {}", i))?;
                g.check_finite("sgd", || format!("gradient {}", i))?;
            }
        }
        for (i, ((p, v), g)) in params.into_iter().zip(&mut self.velocity).zip(grads).enumerate() {
            let Some(g) = g else { continue };
            for ((pv, vv), &gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                *vv = self.momentum * *vv - self.learning_rate * gv;
                *pv += *vv;
            }
            p.check_finite("sgd", || format!("parameter {}", i))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn plain_sgd_step() {
        let mut p = scalar(0.0);
        let mut s = SgdState::new(0.1, 0.0, [&p]).unwrap();
        let g = scalar(1.0);
        s.step([&mut p], &[Some(&g)]).unwrap();
        assert_eq!(p.data(), &[-0.1]);
    }

    #[test]
    fn momentum_recurrence_two_steps() {
        let mut p = scalar(0.0);
        let mut s = SgdState::new(0.1, 0.9, [&p]).unwrap();
        let g = scalar(1.0);
        s.step([&mut p], &[Some(&g)]).unwrap();
        s.step([&mut p], &[Some(&g)]).unwrap();
        // v1 = -0.1, v2 = 0.9 * -0.1 - 0.1 = -0.19, p2 = -0.29
        assert!((p.data()[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_zero_velocity_is_noop() {
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 3.5]).unwrap();
        let before = p.clone();
        let mut s = SgdState::new(0.1, 0.9, [&p]).unwrap();
        let g = Tensor::zeros(&[3]);
        s.step([&mut p], &[Some(&g)]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn rejects_bad_hyperparameters_and_non_finite() {
        let p = scalar(0.0);
        assert!(SgdState::new(0.0, 0.9, [&p]).is_err());
        assert!(SgdState::new(0.1, 1.0, [&p]).is_err());
        let mut p = scalar(0.0);
        let mut s = SgdState::new(0.1, 0.9, [&p]).unwrap();
        let g = scalar(f64::NAN);
        assert!(matches!(s.step([&mut p], &[Some(&g)]), Err(Error::NonFinite { .. })));
        assert_eq!(p.data(), &[0.0]);
    }
}
