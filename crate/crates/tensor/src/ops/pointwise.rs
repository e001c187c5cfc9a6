use crate::autograd::GradFn;
use crate::error::TensorError;
use crate::ops::{reduce_to_shape, zip_broadcast};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

struct SigmoidGrad<T: Scalar> {
    input: Tensor<T>,
    output: Vec<T>,
}

struct ReluGrad<T: Scalar> {
    input: Tensor<T>,
}

struct ScaleGrad<T: Scalar> {
    input: Tensor<T>,
    factor: T,
}

struct AddGrad<T: Scalar> {
    a: Tensor<T>,
    b: Tensor<T>,
    out_shape: Shape,
}

struct MulGrad<T: Scalar> {
    a: Tensor<T>,
    b: Tensor<T>,
    out_shape: Shape,
}

impl<T: Scalar> Tensor<T> {
    /// Logistic sigmoid, numerically stable on both tails.
    pub fn sigmoid(&self) -> Tensor<T> {
        let data: Vec<T> = self
            .data()
            .iter()
            .map(|&x| {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            })
            .collect();
        let out = data.clone();
        Tensor::result(self.shape(), data, self.requires_grad(), || {
            Box::new(SigmoidGrad {
                input: self.clone(),
                output: out,
            })
        })
    }

    pub fn relu(&self) -> Tensor<T> {
        let data: Vec<T> = self
            .data()
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        Tensor::result(self.shape(), data, self.requires_grad(), || {
            Box::new(ReluGrad { input: self.clone() })
        })
    }

    pub fn scale(&self, factor: T) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|&x| x * factor).collect();
        Tensor::result(self.shape(), data, self.requires_grad(), || {
            Box::new(ScaleGrad {
                input: self.clone(),
                factor,
            })
        })
    }

    /// Elementwise sum; either operand may broadcast along axes of extent one.
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let out_shape = self.shape().broadcast_with(&other.shape())?;
        let data = zip_broadcast(
            self.data(),
            self.shape(),
            other.data(),
            other.shape(),
            out_shape,
            |a, b| a + b,
        );
        let tracked = self.requires_grad() || other.requires_grad();
        Ok(Tensor::result(out_shape, data, tracked, || {
            Box::new(AddGrad {
                a: self.clone(),
                b: other.clone(),
                out_shape,
            })
        }))
    }

    /// Elementwise product; either operand may broadcast along axes of extent one.
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let out_shape = self.shape().broadcast_with(&other.shape())?;
        let data = zip_broadcast(
            self.data(),
            self.shape(),
            other.data(),
            other.shape(),
            out_shape,
            |a, b| a * b,
        );
        let tracked = self.requires_grad() || other.requires_grad();
        Ok(Tensor::result(out_shape, data, tracked, || {
            Box::new(MulGrad {
                a: self.clone(),
                b: other.clone(),
                out_shape,
            })
        }))
    }
}

impl<T: Scalar> GradFn<T> for SigmoidGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let g = self
            .output
            .iter()
            .zip(grad_out)
            .map(|(&y, &g)| g * y * (T::one() - y))
            .collect();
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for ReluGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let g = self
            .input
            .data()
            .iter()
            .zip(grad_out)
            .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
            .collect();
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for ScaleGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        vec![grad_out.iter().map(|&g| g * self.factor).collect()]
    }
}

impl<T: Scalar> GradFn<T> for AddGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.a.clone(), self.b.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let ga = if self.a.requires_grad() {
            reduce_to_shape(grad_out, self.out_shape, self.a.shape())
        } else {
            Vec::new()
        };
        let gb = if self.b.requires_grad() {
            reduce_to_shape(grad_out, self.out_shape, self.b.shape())
        } else {
            Vec::new()
        };
        vec![ga, gb]
    }
}

impl<T: Scalar> GradFn<T> for MulGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.a.clone(), self.b.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let out_shape = self.out_shape;
        let ga = if self.a.requires_grad() {
            let prod = zip_broadcast(
                grad_out,
                out_shape,
                &self.b.data(),
                self.b.shape(),
                out_shape,
                |g, b| g * b,
            );
            reduce_to_shape(&prod, out_shape, self.a.shape())
        } else {
            Vec::new()
        };
        let gb = if self.b.requires_grad() {
            let prod = zip_broadcast(
                grad_out,
                out_shape,
                &self.a.data(),
                self.a.shape(),
                out_shape,
                |g, a| g * a,
            );
            reduce_to_shape(&prod, out_shape, self.b.shape())
        } else {
            Vec::new()
        };
        vec![ga, gb]
    }
}

#[cfg(test)]
mod tests {
    use crate::shape::Shape;
    use crate::tensor::Tensor;

    #[test]
    fn sigmoid_matches_closed_form() {
        let x: Tensor = Tensor::from_vec(Shape::new(1, 1, 1, 1, 3), vec![-500.0, 0.0, 500.0])
            .unwrap();
        let y = x.sigmoid();
        let d = y.data();
        assert!(d[0] >= 0.0 && d[0] < 1e-100);
        assert_eq!(d[1], 0.5);
        assert_eq!(d[2], 1.0);
    }

    #[test]
    fn add_broadcasts_channel_vector() {
        let x: Tensor =
            Tensor::from_vec(Shape::new(1, 2, 1, 1, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = Tensor::from_vec(Shape::new(1, 2, 1, 1, 1), vec![10.0, 20.0]).unwrap();
        let y = x.add(&c).unwrap();
        assert_eq!(y.data(), &[11.0, 12.0, 23.0, 24.0]);
    }

    #[test]
    fn mul_broadcast_gradient_reduces() {
        let x = Tensor::param(Shape::new(1, 2, 1, 1, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor::param(Shape::new(1, 2, 1, 1, 1), vec![5.0, 7.0]).unwrap();
        let y = x.mul(&w).unwrap();
        let loss = y.sum_all();
        loss.backward().unwrap();
        assert_eq!(w.grad().unwrap(), vec![3.0, 7.0]);
        assert_eq!(x.grad().unwrap(), vec![5.0, 5.0, 7.0, 7.0]);
    }

    #[test]
    fn incompatible_shapes_refuse_to_add() {
        let a: Tensor = Tensor::zeros(Shape::new(1, 2, 1, 1, 3));
        let b: Tensor = Tensor::zeros(Shape::new(1, 3, 1, 1, 3));
        assert!(a.add(&b).is_err());
    }
}
