//! Stochastic gradient descent with classical momentum and decoupled-free
//! (coupled, i.e. L2-into-gradient) weight decay.

use std::collections::HashMap;

use gopnet_tensor::{ParamStore, Scalar, Tensor};

use crate::error::TrainError;

pub struct Sgd<T: Scalar> {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: HashMap<String, Vec<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Sgd<T> {
        Sgd {
            lr,
            momentum,
            weight_decay,
            velocity: HashMap::new(),
        }
    }

    /// One update: g <- g + wd*theta; v <- mu*v + g; theta <- theta - lr*v.
    /// Parameters whose gradient is absent (unused in the loss) are skipped.
    /// `lr` is the effective rate for this step, typically after schedule
    /// scaling.
    pub fn step(&mut self, store: &mut ParamStore<T>, lr: f64) -> Result<(), TrainError> {
        let mu = T::from_f64(self.momentum);
        let wd = T::from_f64(self.weight_decay);
        let rate = T::from_f64(lr);
        let mut updates: Vec<(String, Tensor<T>)> = Vec::new();
        for (path, tensor) in store.trainable_iter() {
            let Some(grad) = tensor.grad() else { continue };
            let theta = tensor.data();
            let vel = self
                .velocity
                .entry(path.to_string())
                .or_insert_with(|| vec![T::zero(); theta.len()]);
            if vel.len() != theta.len() {
                return Err(TrainError::Numeric(format!(
                    "velocity for '{path}' has stale size {} vs {}",
                    vel.len(),
                    theta.len()
                )));
            }
            let mut next = Vec::with_capacity(theta.len());
            for ((&g, &x), v) in grad.iter().zip(theta.iter()).zip(vel.iter_mut()) {
                let g = g + wd * x;
                *v = mu * *v + g;
                next.push(x - rate * *v);
            }
            updates.push((path.to_string(), Tensor::param(tensor.shape(), next)?));
        }
        for (path, tensor) in updates {
            store.set(&path, tensor)?;
        }
        Ok(())
    }
}
