use crate::autograd::GradFn;
use crate::error::{Axis, TensorError};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

struct SliceChannelsGrad<T: Scalar> {
    input: Tensor<T>,
    c0: usize,
    span: usize,
}

struct ConcatChannelsGrad<T: Scalar> {
    parts: Vec<Tensor<T>>,
}

struct ReshapeGrad<T: Scalar> {
    input: Tensor<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Copies channels `c0..c0+span` out into their own tensor.
    pub fn slice_channels(&self, c0: usize, span: usize) -> Result<Tensor<T>, TensorError> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        if span == 0 || c0 + span > c_n {
            return Err(TensorError::InvalidGeometry(format!(
                "channel slice {c0}..{} out of range for {c_n} channels",
                c0 + span
            )));
        }
        let sp = t_n * h_n * w_n;
        let data = self.data();
        let mut out = Vec::with_capacity(n_n * span * sp);
        for n in 0..n_n {
            let base = (n * c_n + c0) * sp;
            out.extend_from_slice(&data[base..base + span * sp]);
        }
        let shape = Shape::new(n_n, span, t_n, h_n, w_n);
        Ok(Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(SliceChannelsGrad {
                input: self.clone(),
                c0,
                span,
            })
        }))
    }

    /// Splits the channel axis into `parts` equally sized tensors.
    pub fn split_channels(&self, parts: usize) -> Result<Vec<Tensor<T>>, TensorError> {
        let c_n = self.shape().c();
        if parts == 0 || c_n % parts != 0 {
            return Err(TensorError::InvalidGeometry(format!(
                "cannot split {c_n} channels into {parts} equal groups"
            )));
        }
        let span = c_n / parts;
        (0..parts)
            .map(|i| self.slice_channels(i * span, span))
            .collect()
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: Shape) -> Result<Tensor<T>, TensorError> {
        shape.validate()?;
        if shape.len() != self.shape().len() {
            return Err(TensorError::InvalidGeometry(format!(
                "reshape from {} to {} changes element count",
                self.shape(),
                shape
            )));
        }
        let data = self.data().to_vec();
        Ok(Tensor::result(shape, data, self.requires_grad(), || {
            Box::new(ReshapeGrad { input: self.clone() })
        }))
    }
}

/// Stacks tensors along the channel axis; all other axes must agree.
pub fn concat_channels<T: Scalar>(parts: &[Tensor<T>]) -> Result<Tensor<T>, TensorError> {
    let first = parts
        .first()
        .ok_or_else(|| TensorError::Precondition("concat of zero tensors".into()))?;
    let [n_n, _, t_n, h_n, w_n] = first.shape().dims();
    let mut c_total = 0;
    for p in parts {
        let d = p.shape().dims();
        let want = [n_n, d[1], t_n, h_n, w_n];
        if let Some(axis) = (0..5).find(|&i| d[i] != want[i]) {
            return Err(TensorError::DimMismatch {
                axis: Axis::from_index(axis),
                expected: want[axis],
                got: d[axis],
            });
        }
        c_total += d[1];
    }
    let sp = t_n * h_n * w_n;
    let mut out = Vec::with_capacity(n_n * c_total * sp);
    let datas: Vec<_> = parts.iter().map(|p| p.data()).collect();
    for n in 0..n_n {
        for (p, data) in parts.iter().zip(&datas) {
            let c_p = p.shape().c();
            out.extend_from_slice(&data[n * c_p * sp..(n + 1) * c_p * sp]);
        }
    }
    let shape = Shape::new(n_n, c_total, t_n, h_n, w_n);
    let tracked = parts.iter().any(|p| p.requires_grad());
    Ok(Tensor::result(shape, out, tracked, || {
        Box::new(ConcatChannelsGrad {
            parts: parts.to_vec(),
        })
    }))
}

impl<T: Scalar> GradFn<T> for SliceChannelsGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, c_n, t_n, h_n, w_n] = self.input.shape().dims();
        let sp = t_n * h_n * w_n;
        let mut g = vec![T::zero(); self.input.shape().len()];
        for n in 0..n_n {
            let dst = (n * c_n + self.c0) * sp;
            let src = n * self.span * sp;
            g[dst..dst + self.span * sp]
                .copy_from_slice(&grad_out[src..src + self.span * sp]);
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for ConcatChannelsGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        self.parts.clone()
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let n_n = self.parts[0].shape().n();
        let sp = {
            let s = self.parts[0].shape();
            s.t() * s.h() * s.w()
        };
        let c_total: usize = self.parts.iter().map(|p| p.shape().c()).sum();
        let mut grads: Vec<Vec<T>> = self
            .parts
            .iter()
            .map(|p| vec![T::zero(); p.shape().len()])
            .collect();
        for n in 0..n_n {
            let mut c_off = 0;
            for (p, g) in self.parts.iter().zip(&mut grads) {
                let c_p = p.shape().c();
                let src = (n * c_total + c_off) * sp;
                let dst = n * c_p * sp;
                g[dst..dst + c_p * sp].copy_from_slice(&grad_out[src..src + c_p * sp]);
                c_off += c_p;
            }
        }
        grads
    }
}

impl<T: Scalar> GradFn<T> for ReshapeGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        vec![grad_out.to_vec()]
    }
}
