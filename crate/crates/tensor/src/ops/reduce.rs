use crate::autograd::GradFn;
use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

struct SumAllGrad<T: Scalar> {
    input: Tensor<T>,
}

struct MeanAllGrad<T: Scalar> {
    input: Tensor<T>,
}

struct CrossEntropyGrad<T: Scalar> {
    logits: Tensor<T>,
    probs: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> Tensor<T> {
    /// Sum of every element, as a scalar tensor.
    pub fn sum_all(&self) -> Tensor<T> {
        let mut acc = T::zero();
        for &v in self.data().iter() {
            acc = acc + v;
        }
        Tensor::result(Shape::scalar(), vec![acc], self.requires_grad(), || {
            Box::new(SumAllGrad { input: self.clone() })
        })
    }

    /// Mean of every element, as a scalar tensor.
    pub fn mean_all(&self) -> Tensor<T> {
        let inv = T::from_f64(1.0 / self.shape().len() as f64);
        let mut acc = T::zero();
        for &v in self.data().iter() {
            acc = acc + v;
        }
        Tensor::result(Shape::scalar(), vec![acc * inv], self.requires_grad(), || {
            Box::new(MeanAllGrad { input: self.clone() })
        })
    }

    /// Mean softmax cross-entropy between class scores of shape
    /// (N, classes, 1, 1, 1) and integer labels, computed through a stable
    /// log-sum-exp.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Tensor<T>, TensorError> {
        let [n_n, k_n, t_n, h_n, w_n] = self.shape().dims();
        if t_n != 1 || h_n != 1 || w_n != 1 {
            return Err(TensorError::Precondition(format!(
                "cross entropy expects class scores (N,K,1,1,1), got {}",
                self.shape()
            )));
        }
        if labels.len() != n_n {
            return Err(TensorError::Precondition(format!(
                "{} labels for a batch of {n_n}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k_n) {
            return Err(TensorError::Precondition(format!(
                "label {bad} out of range for {k_n} classes"
            )));
        }
        let data = self.data();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::Numeric(
                "cross entropy input contains a non-finite value".into(),
            ));
        }
        let mut probs = vec![T::zero(); data.len()];
        let mut loss = T::zero();
        for (n, &label) in labels.iter().enumerate() {
            let row = &data[n * k_n..(n + 1) * k_n];
            let mut max = T::neg_infinity();
            for &v in row {
                if v > max {
                    max = v;
                }
            }
            let mut sum = T::zero();
            for (p, &v) in probs[n * k_n..(n + 1) * k_n].iter_mut().zip(row) {
                *p = (v - max).exp();
                sum = sum + *p;
            }
            for p in &mut probs[n * k_n..(n + 1) * k_n] {
                *p = *p / sum;
            }
            // loss_n = log-sum-exp(row) - row[label]
            loss = loss + max + sum.ln() - row[label];
        }
        let loss = loss * T::from_f64(1.0 / n_n as f64);
        let labels = labels.to_vec();
        Ok(Tensor::result(
            Shape::scalar(),
            vec![loss],
            self.requires_grad(),
            || {
                Box::new(CrossEntropyGrad {
                    logits: self.clone(),
                    probs,
                    labels,
                })
            },
        ))
    }
}

impl<T: Scalar> GradFn<T> for SumAllGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        vec![vec![grad_out[0]; self.input.shape().len()]]
    }
}

impl<T: Scalar> GradFn<T> for MeanAllGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let v = grad_out[0] * T::from_f64(1.0 / self.input.shape().len() as f64);
        vec![vec![v; self.input.shape().len()]]
    }
}

impl<T: Scalar> GradFn<T> for CrossEntropyGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.logits.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let n_n = self.labels.len();
        let k_n = self.logits.shape().c();
        let scale = grad_out[0] * T::from_f64(1.0 / n_n as f64);
        let mut g = self.probs.clone();
        for (n, &label) in self.labels.iter().enumerate() {
            let row = &mut g[n * k_n..(n + 1) * k_n];
            row[label] = row[label] - T::one();
            for v in row.iter_mut() {
                *v = *v * scale;
            }
        }
        vec![g]
    }
}
