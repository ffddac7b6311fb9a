use crate::error::{CoreError, Result};
use crate::params::ParamStore;
use crate::real::Real;

/// Stochastic gradient descent with classical momentum:
/// `v <- momentum * v - lr * grad; p <- p + v`.
///
/// Parameters with `requires_grad == false` are frozen and never touched.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub learning_rate: T,
    pub momentum: T,
    velocity: Vec<Vec<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(learning_rate: T, momentum: T) -> Self {
        Self {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut ParamStore<T>) -> Result<()> {
        if self.velocity.len() != params.len() {
            self.velocity = params
                .iter()
                .map(|(_, t)| vec![T::zero(); t.numel()])
                .collect();
        }
        // validate before mutating anything
        for (name, t) in params.iter() {
            if t.requires_grad && t.grad().is_none() {
                return Err(CoreError::Contract(format!(
                    "parameter '{name}' has no gradient"
                )));
            }
        }
        let (lr, mu) = (self.learning_rate, self.momentum);
        for ((_, t), v) in params.iter_mut().zip(&mut self.velocity) {
            if !t.requires_grad {
                continue;
            }
            let grad = t.grad().expect("checked above").to_vec();
            for ((p, vi), g) in t.data_mut().iter_mut().zip(v.iter_mut()).zip(grad) {
                *vi = mu * *vi - lr * g;
                *p = *p + *vi;
            }
        }
        Ok(())
    }

    /// Clears the momentum buffers.
    pub fn reset(&mut self) {
        self.velocity.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store(value: f64, grad: Option<f64>) -> ParamStore<f64> {
        let mut ps = ParamStore::new();
        let mut t = Tensor::full(&[2], value).with_grad();
        if let Some(g) = grad {
            t.set_grad(vec![g; 2]).unwrap();
        }
        ps.push("w", t);
        ps
    }

    #[test]
    fn zero_learning_rate_is_noop() {
        let mut ps = store(1.5, Some(3.0));
        Sgd::new(0.0, 0.9).step(&mut ps).unwrap();
        assert_eq!(ps.get(0).data(), &[1.5, 1.5]);
    }

    #[test]
    fn plain_step_subtracts_gradient() {
        let mut ps = store(1.0, Some(0.25));
        Sgd::new(1.0, 0.0).step(&mut ps).unwrap();
        assert_eq!(ps.get(0).data(), &[0.75, 0.75]);
    }

    #[test]
    fn momentum_recurrence() {
        let mut ps = store(0.0, Some(1.0));
        let mut opt = Sgd::new(0.1, 0.9);
        opt.step(&mut ps).unwrap();
        assert!((ps.get(0).data()[0] - -0.1).abs() < 1e-15);
        opt.step(&mut ps).unwrap();
        assert!((ps.get(0).data()[0] - -0.29).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_names_parameter() {
        let mut ps = store(0.0, None);
        let err = Sgd::new(0.1, 0.0).step(&mut ps).unwrap_err().to_string();
        assert!(err.contains("'w'"), "{err}");
    }

    #[test]
    fn frozen_parameters_are_skipped() {
        let mut ps = store(2.0, None);
        ps.get_mut(0).requires_grad = false;
        Sgd::new(0.1, 0.9).step(&mut ps).unwrap();
        assert_eq!(ps.get(0).data(), &[2.0, 2.0]);
    }
}
