//! Batched matrix helpers. A "matrix" here is a tensor of shape (B, M, K, 1, 1):
//! batch on the first axis, rows on the channel axis, columns on the time axis.

use rayon::prelude::*;

use crate::autograd::GradFn;
use crate::error::{Axis, TensorError};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

fn expect_matrix<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize), TensorError> {
    let [b, m, k, h, w] = t.shape().dims();
    if h != 1 || w != 1 {
        return Err(TensorError::Precondition(format!(
            "{what} must be a matrix tensor (B,M,K,1,1), got {}",
            t.shape()
        )));
    }
    Ok((b, m, k))
}

struct FlattenGrad<T: Scalar> {
    input: Tensor<T>,
}

struct UnflattenGrad<T: Scalar> {
    input: Tensor<T>,
}

struct TransposeGrad<T: Scalar> {
    input: Tensor<T>,
}

struct MatmulGrad<T: Scalar> {
    a: Tensor<T>,
    b: Tensor<T>,
}

struct SoftmaxGrad<T: Scalar> {
    input: Tensor<T>,
    output: Vec<T>,
    width: usize,
}

fn transpose_data<T: Scalar>(data: &[T], b_n: usize, m_n: usize, k_n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); data.len()];
    for b in 0..b_n {
        let src = &data[b * m_n * k_n..(b + 1) * m_n * k_n];
        let dst = &mut out[b * m_n * k_n..(b + 1) * m_n * k_n];
        for m in 0..m_n {
            for k in 0..k_n {
                dst[k * m_n + m] = src[m * k_n + k];
            }
        }
    }
    out
}

impl<T: Scalar> Tensor<T> {
    /// Rearranges (N,C,T,H,W) into position-major matrix form (N, T*H*W, C, 1, 1)
    /// so each row is the feature vector at one spatio-temporal position.
    pub fn flatten_positions(&self) -> Tensor<T> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        let l = t_n * h_n * w_n;
        let data = self.data();
        let mut out = vec![T::zero(); data.len()];
        for n in 0..n_n {
            let src = &data[n * c_n * l..(n + 1) * c_n * l];
            let dst = &mut out[n * c_n * l..(n + 1) * c_n * l];
            for c in 0..c_n {
                for (pos, &v) in src[c * l..(c + 1) * l].iter().enumerate() {
                    dst[pos * c_n + c] = v;
                }
            }
        }
        let shape = Shape::new(n_n, l, c_n, 1, 1);
        Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(FlattenGrad { input: self.clone() })
        })
    }

    /// Inverse of [`flatten_positions`]: (N, L, C, 1, 1) back to (N,C,T,H,W)
    /// with L = t*h*w.
    pub fn unflatten_positions(
        &self,
        t: usize,
        h: usize,
        w: usize,
    ) -> Result<Tensor<T>, TensorError> {
        let (n_n, l, c_n) = expect_matrix(self, "unflatten input")?;
        if l != t * h * w {
            return Err(TensorError::InvalidGeometry(format!(
                "cannot unflatten {l} positions into {t}x{h}x{w}"
            )));
        }
        let data = self.data();
        let mut out = vec![T::zero(); data.len()];
        for n in 0..n_n {
            let src = &data[n * l * c_n..(n + 1) * l * c_n];
            let dst = &mut out[n * l * c_n..(n + 1) * l * c_n];
            for pos in 0..l {
                for c in 0..c_n {
                    dst[c * l + pos] = src[pos * c_n + c];
                }
            }
        }
        let shape = Shape::new(n_n, c_n, t, h, w);
        Ok(Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(UnflattenGrad { input: self.clone() })
        }))
    }

    /// Swaps rows and columns of a matrix tensor: (B,M,K) -> (B,K,M).
    pub fn transpose_mat(&self) -> Result<Tensor<T>, TensorError> {
        let (b_n, m_n, k_n) = expect_matrix(self, "transpose input")?;
        let out = transpose_data(&self.data(), b_n, m_n, k_n);
        let shape = Shape::new(b_n, k_n, m_n, 1, 1);
        Ok(Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(TransposeGrad { input: self.clone() })
        }))
    }

    /// Batched matrix product: (B,M,K) x (B,K,N) -> (B,M,N).
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let (b_n, m_n, k_n) = expect_matrix(self, "matmul left operand")?;
        let (b2, k2, n2) = expect_matrix(other, "matmul right operand")?;
        if b_n != b2 {
            return Err(TensorError::DimMismatch {
                axis: Axis::Batch,
                expected: b_n,
                got: b2,
            });
        }
        if k_n != k2 {
            return Err(TensorError::DimMismatch {
                axis: Axis::Channel,
                expected: k_n,
                got: k2,
            });
        }
        let a_data = self.data();
        let b_data = other.data();
        let mut out = vec![T::zero(); b_n * m_n * n2];
        out.par_chunks_mut(n2).enumerate().for_each(|(bm, row)| {
            let b = bm / m_n;
            let m = bm % m_n;
            let a_row = &a_data[(b * m_n + m) * k_n..][..k_n];
            let b_mat = &b_data[b * k_n * n2..(b + 1) * k_n * n2];
            for (k, &av) in a_row.iter().enumerate() {
                let b_row = &b_mat[k * n2..(k + 1) * n2];
                for (r, &bv) in row.iter_mut().zip(b_row) {
                    *r = *r + av * bv;
                }
            }
        });
        let shape = Shape::new(b_n, m_n, n2, 1, 1);
        let tracked = self.requires_grad() || other.requires_grad();
        Ok(Tensor::result(shape, out, tracked, || {
            Box::new(MatmulGrad {
                a: self.clone(),
                b: other.clone(),
            })
        }))
    }

    /// Softmax along the last (column) axis of a matrix tensor, with the usual
    /// max subtraction for stability. Non-finite inputs are rejected.
    pub fn softmax_rows(&self) -> Result<Tensor<T>, TensorError> {
        let (_, _, k_n) = expect_matrix(self, "softmax input")?;
        let data = self.data();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::Numeric(
                "softmax input contains a non-finite value".into(),
            ));
        }
        let mut out = vec![T::zero(); data.len()];
        for (row, orow) in data.chunks(k_n).zip(out.chunks_mut(k_n)) {
            let mut max = T::neg_infinity();
            for &v in row {
                if v > max {
                    max = v;
                }
            }
            let mut sum = T::zero();
            for (o, &v) in orow.iter_mut().zip(row) {
                *o = (v - max).exp();
                sum = sum + *o;
            }
            for o in orow.iter_mut() {
                *o = *o / sum;
            }
        }
        let saved = out.clone();
        Ok(Tensor::result(self.shape(), out, self.requires_grad(), || {
            Box::new(SoftmaxGrad {
                input: self.clone(),
                output: saved,
                width: k_n,
            })
        }))
    }
}

impl<T: Scalar> GradFn<T> for FlattenGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, c_n, t_n, h_n, w_n] = self.input.shape().dims();
        let l = t_n * h_n * w_n;
        let mut g = vec![T::zero(); grad_out.len()];
        for n in 0..n_n {
            let src = &grad_out[n * l * c_n..(n + 1) * l * c_n];
            let dst = &mut g[n * l * c_n..(n + 1) * l * c_n];
            for pos in 0..l {
                for c in 0..c_n {
                    dst[c * l + pos] = src[pos * c_n + c];
                }
            }
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for UnflattenGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, l, c_n, _, _] = self.input.shape().dims();
        let mut g = vec![T::zero(); grad_out.len()];
        for n in 0..n_n {
            let src = &grad_out[n * c_n * l..(n + 1) * c_n * l];
            let dst = &mut g[n * c_n * l..(n + 1) * c_n * l];
            for c in 0..c_n {
                for pos in 0..l {
                    dst[pos * c_n + c] = src[c * l + pos];
                }
            }
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for TransposeGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [b_n, m_n, k_n, _, _] = self.input.shape().dims();
        // grad_out is (B,K,M); transpose it back to (B,M,K)
        vec![transpose_data(grad_out, b_n, k_n, m_n)]
    }
}

impl<T: Scalar> GradFn<T> for MatmulGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.a.clone(), self.b.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [_, m_n, k_n, _, _] = self.a.shape().dims();
        let n2 = self.b.shape().t();
        let a_data = self.a.data();
        let b_data = self.b.data();

        let ga = if self.a.requires_grad() {
            let mut ga = vec![T::zero(); a_data.len()];
            ga.par_chunks_mut(k_n).enumerate().for_each(|(bm, row)| {
                let b = bm / m_n;
                let m = bm % m_n;
                let go_row = &grad_out[(b * m_n + m) * n2..][..n2];
                let b_mat = &b_data[b * k_n * n2..(b + 1) * k_n * n2];
                for (k, r) in row.iter_mut().enumerate() {
                    let b_row = &b_mat[k * n2..(k + 1) * n2];
                    let mut acc = T::zero();
                    for (&g, &bv) in go_row.iter().zip(b_row) {
                        acc = acc + g * bv;
                    }
                    *r = acc;
                }
            });
            ga
        } else {
            Vec::new()
        };

        let gb = if self.b.requires_grad() {
            let mut gb = vec![T::zero(); b_data.len()];
            gb.par_chunks_mut(k_n * n2).enumerate().for_each(|(b, gmat)| {
                for m in 0..m_n {
                    let go_row = &grad_out[(b * m_n + m) * n2..][..n2];
                    let a_row = &a_data[(b * m_n + m) * k_n..][..k_n];
                    for (k, &av) in a_row.iter().enumerate() {
                        let grow = &mut gmat[k * n2..(k + 1) * n2];
                        for (gr, &g) in grow.iter_mut().zip(go_row) {
                            *gr = *gr + av * g;
                        }
                    }
                }
            });
            gb
        } else {
            Vec::new()
        };

        vec![ga, gb]
    }
}

impl<T: Scalar> GradFn<T> for SoftmaxGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let k = self.width;
        let mut g = vec![T::zero(); grad_out.len()];
        for ((y_row, go_row), g_row) in self
            .output
            .chunks(k)
            .zip(grad_out.chunks(k))
            .zip(g.chunks_mut(k))
        {
            let mut dot = T::zero();
            for (&y, &go) in y_row.iter().zip(go_row) {
                dot = dot + y * go;
            }
            for ((gi, &y), &go) in g_row.iter_mut().zip(y_row).zip(go_row) {
                *gi = y * (go - dot);
            }
        }
        vec![g]
    }
}

#[cfg(test)]
mod tests {
    use crate::shape::Shape;
    use crate::tensor::Tensor;

    #[test]
    fn flatten_then_unflatten_is_identity() {
        let x: Tensor = Tensor::from_fn(Shape::new(2, 3, 2, 2, 2), |i| i as f64);
        let y = x.flatten_positions();
        assert_eq!(y.shape().dims(), [2, 8, 3, 1, 1]);
        // position 0 of sample 0 carries channel values (0, 8, 16)
        assert_eq!(y.value(0, 0, 0, 0, 0), 0.0);
        assert_eq!(y.value(0, 0, 1, 0, 0), 8.0);
        assert_eq!(y.value(0, 0, 2, 0, 0), 16.0);
        let z = y.unflatten_positions(2, 2, 2).unwrap();
        assert_eq!(z.data(), x.data());
    }

    #[test]
    fn matmul_small_oracle() {
        // [[1,2],[3,4]] x [[5,6],[7,8]] = [[19,22],[43,50]]
        let a: Tensor =
            Tensor::from_vec(Shape::new(1, 2, 2, 1, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(Shape::new(1, 2, 2, 1, 1), vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_inner_mismatch_errors() {
        let a: Tensor = Tensor::zeros(Shape::new(1, 2, 3, 1, 1));
        let b: Tensor = Tensor::zeros(Shape::new(1, 2, 2, 1, 1));
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one_and_order() {
        let x: Tensor = Tensor::from_vec(
            Shape::new(1, 2, 3, 1, 1),
            vec![1.0, 2.0, 3.0, -1.0, 0.0, 1000.0],
        )
        .unwrap();
        let y = x.softmax_rows().unwrap();
        let d = y.data();
        assert!((d[0] + d[1] + d[2] - 1.0).abs() < 1e-12);
        assert!(d[0] < d[1] && d[1] < d[2]);
        // extreme logit saturates without overflow
        assert!((d[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_nan() {
        let x: Tensor =
            Tensor::from_vec(Shape::new(1, 1, 2, 1, 1), vec![f64::NAN, 0.0]).unwrap();
        assert!(x.softmax_rows().is_err());
    }

    #[test]
    fn transpose_round_trip() {
        let a: Tensor = Tensor::from_vec(
            Shape::new(1, 2, 3, 1, 1),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let t = a.transpose_mat().unwrap();
        assert_eq!(t.shape().dims(), [1, 3, 2, 1, 1]);
        assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let back = t.transpose_mat().unwrap();
        assert_eq!(back.data(), a.data());
    }
}
