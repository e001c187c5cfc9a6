use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::autograd::GradFn;
use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::shape::Shape;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

struct Inner<T: Scalar> {
    id: u64,
    shape: Shape,
    data: Vec<T>,
    requires_grad: bool,
    // Accumulated by backward; the one mutable cell a tensor carries.
    grad: Mutex<Option<Vec<T>>>,
    // Recorded op for non-leaf values.
    op: Option<Box<dyn GradFn<T>>>,
}

/// Dense 5-D array of floats, immutable after construction except for
/// gradient accumulation. Cloning is cheap and shares storage.
pub struct Tensor<T: Scalar = f64> {
    inner: Arc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Tensor<T>, TensorError> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(TensorError::InvalidGeometry(format!(
                "data length {} does not match shape {} ({} elements)",
                data.len(),
                shape,
                shape.len()
            )));
        }
        Ok(Self::build(shape, data, false, None))
    }

    /// A leaf tensor that accumulates gradients (a parameter or tracked input).
    pub fn param(shape: Shape, data: Vec<T>) -> Result<Tensor<T>, TensorError> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(TensorError::InvalidGeometry(format!(
                "data length {} does not match shape {} ({} elements)",
                data.len(),
                shape,
                shape.len()
            )));
        }
        Ok(Self::build(shape, data, true, None))
    }

    pub fn zeros(shape: Shape) -> Tensor<T> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Tensor<T> {
        debug_assert!(shape.validate().is_ok());
        Self::build(shape, vec![value; shape.len()], false, None)
    }

    pub fn scalar(value: T) -> Tensor<T> {
        Self::build(Shape::scalar(), vec![value], false, None)
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize) -> T) -> Tensor<T> {
        let data = (0..shape.len()).map(|i| f(i)).collect();
        Self::build(shape, data, false, None)
    }

    /// Internal constructor for op outputs. Public so external code (tests,
    /// fault injection) can attach a custom [`GradFn`].
    pub fn with_grad_fn(shape: Shape, data: Vec<T>, op: Box<dyn GradFn<T>>) -> Tensor<T> {
        debug_assert_eq!(data.len(), shape.len());
        Self::build(shape, data, true, Some(op))
    }

    pub(crate) fn build(
        shape: Shape,
        data: Vec<T>,
        requires_grad: bool,
        op: Option<Box<dyn GradFn<T>>>,
    ) -> Tensor<T> {
        Tensor {
            inner: Arc::new(Inner {
                id: fresh_id(),
                shape,
                data,
                requires_grad,
                grad: Mutex::new(None),
                op,
            }),
        }
    }

    /// Wraps an op result: tracked (and recorded) only if some input is tracked.
    pub(crate) fn result(
        shape: Shape,
        data: Vec<T>,
        tracked: bool,
        op: impl FnOnce() -> Box<dyn GradFn<T>>,
    ) -> Tensor<T> {
        if tracked {
            Self::build(shape, data, true, Some(op()))
        } else {
            Self::build(shape, data, false, None)
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> Shape {
        self.inner.shape
    }

    pub fn data(&self) -> &[T] {
        &self.inner.data
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// A copy of this tensor's values as a fresh untracked leaf.
    pub fn detach(&self) -> Tensor<T> {
        Self::build(self.inner.shape, self.inner.data.clone(), false, None)
    }

    /// Same values, tracked as a trainable leaf.
    pub fn to_param(&self) -> Tensor<T> {
        Self::build(self.inner.shape, self.inner.data.clone(), true, None)
    }

    pub(crate) fn op(&self) -> Option<&dyn GradFn<T>> {
        self.inner.op.as_deref()
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.lock().unwrap().clone()
    }

    /// Accumulated gradient, or zeros when backward never reached this tensor.
    pub fn grad_or_zeros(&self) -> Vec<T> {
        self.grad()
            .unwrap_or_else(|| vec![T::zero(); self.inner.shape.len()])
    }

    pub fn has_grad(&self) -> bool {
        self.inner.grad.lock().unwrap().is_some()
    }

    pub fn clear_grad(&self) {
        *self.inner.grad.lock().unwrap() = None;
    }

    pub(crate) fn accumulate_grad(&self, update: &[T]) {
        let mut cell = self.inner.grad.lock().unwrap();
        match cell.as_mut() {
            Some(g) => {
                for (gi, ui) in g.iter_mut().zip(update) {
                    *gi = *gi + *ui;
                }
            }
            None => *cell = Some(update.to_vec()),
        }
    }

    /// Scalar value of a 1-element tensor.
    pub fn item(&self) -> Result<T, TensorError> {
        if !self.inner.shape.is_scalar() {
            return Err(TensorError::Precondition(format!(
                "expected a scalar tensor, got shape {}",
                self.inner.shape
            )));
        }
        Ok(self.inner.data[0])
    }

    pub fn value(&self, n: usize, c: usize, t: usize, h: usize, w: usize) -> T {
        self.inner.data[self.inner.shape.offset(n, c, t, h, w)]
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Tensor(id={}, shape={}, grad={})",
            self.inner.id,
            self.inner.shape,
            if self.inner.requires_grad { "on" } else { "off" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        let s = Shape::new(1, 2, 1, 1, 3);
        assert!(Tensor::<f64>::from_vec(s, vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::from_vec(s, vec![0.0; 5]).is_err());
    }

    #[test]
    fn grad_accumulates_across_calls() {
        let t = Tensor::<f64>::param(Shape::new(1, 1, 1, 1, 2), vec![1.0, 2.0]).unwrap();
        t.accumulate_grad(&[1.0, 1.0]);
        t.accumulate_grad(&[0.5, -1.0]);
        assert_eq!(t.grad().unwrap(), vec![1.5, 0.0]);
        t.clear_grad();
        assert!(t.grad().is_none());
        assert_eq!(t.grad_or_zeros(), vec![0.0, 0.0]);
    }
}
