use crate::autograd::GradFn;
use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

/// Pooling variants used by the network, dispatchable from configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolMode {
    /// 3x3x3 max pooling, stride 1, zero-free padding 1 (shape preserving).
    Max3Same,
    /// Mean over the full time axis, keeping (N,C,1,H,W).
    TemporalMean,
    /// Non-overlapping spatial mean over r x r blocks.
    SpatialMean(usize),
    /// Mean over time, height and width, keeping (N,C,1,1,1).
    GlobalMean,
    /// Max over time, height and width, keeping (N,C,1,1,1).
    GlobalMax,
}

struct Max3SameGrad<T: Scalar> {
    input: Tensor<T>,
    argmax: Vec<usize>,
}

struct TemporalMeanGrad<T: Scalar> {
    input: Tensor<T>,
}

struct SpatialMeanGrad<T: Scalar> {
    input: Tensor<T>,
    r: usize,
}

struct GlobalMeanGrad<T: Scalar> {
    input: Tensor<T>,
}

struct GlobalMaxGrad<T: Scalar> {
    input: Tensor<T>,
    argmax: Vec<usize>,
}

impl<T: Scalar> Tensor<T> {
    pub fn pool(&self, mode: PoolMode) -> Result<Tensor<T>, TensorError> {
        match mode {
            PoolMode::Max3Same => Ok(self.max_pool3_same()),
            PoolMode::TemporalMean => Ok(self.temporal_mean()),
            PoolMode::SpatialMean(r) => self.spatial_mean(r),
            PoolMode::GlobalMean => Ok(self.global_mean()),
            PoolMode::GlobalMax => Ok(self.global_max()),
        }
    }

    /// Max over the 3x3x3 neighbourhood of every position; borders use the
    /// in-bounds part of the window, so the output shape equals the input's.
    pub fn max_pool3_same(&self) -> Tensor<T> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        let data = self.data();
        let sp = t_n * h_n * w_n;
        let mut out = Vec::with_capacity(data.len());
        let mut argmax = Vec::with_capacity(data.len());
        for nc in 0..n_n * c_n {
            let base = nc * sp;
            for t in 0..t_n {
                for h in 0..h_n {
                    for w in 0..w_n {
                        let mut best = T::neg_infinity();
                        let mut best_idx = 0usize;
                        for dt in t.saturating_sub(1)..(t + 2).min(t_n) {
                            for dh in h.saturating_sub(1)..(h + 2).min(h_n) {
                                for dw in w.saturating_sub(1)..(w + 2).min(w_n) {
                                    let idx = base + (dt * h_n + dh) * w_n + dw;
                                    if data[idx] > best {
                                        best = data[idx];
                                        best_idx = idx;
                                    }
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(best_idx);
                    }
                }
            }
        }
        Tensor::result(self.shape(), out, self.requires_grad(), || {
            Box::new(Max3SameGrad {
                input: self.clone(),
                argmax,
            })
        })
    }

    pub fn temporal_mean(&self) -> Tensor<T> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        let data = self.data();
        let hw = h_n * w_n;
        let inv = T::from_f64(1.0 / t_n as f64);
        let mut out = vec![T::zero(); n_n * c_n * hw];
        for nc in 0..n_n * c_n {
            let in_base = nc * t_n * hw;
            let out_base = nc * hw;
            for t in 0..t_n {
                let row = &data[in_base + t * hw..in_base + (t + 1) * hw];
                for (o, &v) in out[out_base..out_base + hw].iter_mut().zip(row) {
                    *o = *o + v;
                }
            }
            for o in &mut out[out_base..out_base + hw] {
                *o = *o * inv;
            }
        }
        let shape = Shape::new(n_n, c_n, 1, h_n, w_n);
        Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(TemporalMeanGrad { input: self.clone() })
        })
    }

    /// Non-overlapping r x r spatial averaging; height and width must divide.
    pub fn spatial_mean(&self, r: usize) -> Result<Tensor<T>, TensorError> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        if r == 0 || h_n % r != 0 || w_n % r != 0 {
            return Err(TensorError::InvalidGeometry(format!(
                "spatial mean with block {r} does not tile {h_n}x{w_n}"
            )));
        }
        let ho = h_n / r;
        let wo = w_n / r;
        let data = self.data();
        let inv = T::from_f64(1.0 / (r * r) as f64);
        let mut out = Vec::with_capacity(n_n * c_n * t_n * ho * wo);
        for nct in 0..n_n * c_n * t_n {
            let base = nct * h_n * w_n;
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut acc = T::zero();
                    for dh in 0..r {
                        let row = base + (oh * r + dh) * w_n + ow * r;
                        for dw in 0..r {
                            acc = acc + data[row + dw];
                        }
                    }
                    out.push(acc * inv);
                }
            }
        }
        let shape = Shape::new(n_n, c_n, t_n, ho, wo);
        Ok(Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(SpatialMeanGrad {
                input: self.clone(),
                r,
            })
        }))
    }

    pub fn global_mean(&self) -> Tensor<T> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        let sp = t_n * h_n * w_n;
        let data = self.data();
        let inv = T::from_f64(1.0 / sp as f64);
        let out: Vec<T> = (0..n_n * c_n)
            .map(|nc| {
                let mut acc = T::zero();
                for &v in &data[nc * sp..(nc + 1) * sp] {
                    acc = acc + v;
                }
                acc * inv
            })
            .collect();
        let shape = Shape::new(n_n, c_n, 1, 1, 1);
        Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(GlobalMeanGrad { input: self.clone() })
        })
    }

    pub fn global_max(&self) -> Tensor<T> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        let sp = t_n * h_n * w_n;
        let data = self.data();
        let mut out = Vec::with_capacity(n_n * c_n);
        let mut argmax = Vec::with_capacity(n_n * c_n);
        for nc in 0..n_n * c_n {
            let mut best = T::neg_infinity();
            let mut best_idx = nc * sp;
            for (i, &v) in data[nc * sp..(nc + 1) * sp].iter().enumerate() {
                if v > best {
                    best = v;
                    best_idx = nc * sp + i;
                }
            }
            out.push(best);
            argmax.push(best_idx);
        }
        let shape = Shape::new(n_n, c_n, 1, 1, 1);
        Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(GlobalMaxGrad {
                input: self.clone(),
                argmax,
            })
        })
    }
}

impl<T: Scalar> GradFn<T> for Max3SameGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let mut g = vec![T::zero(); self.input.shape().len()];
        for (&idx, &go) in self.argmax.iter().zip(grad_out) {
            g[idx] = g[idx] + go;
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for TemporalMeanGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, c_n, t_n, h_n, w_n] = self.input.shape().dims();
        let hw = h_n * w_n;
        let inv = T::from_f64(1.0 / t_n as f64);
        let mut g = vec![T::zero(); self.input.shape().len()];
        for nc in 0..n_n * c_n {
            let go = &grad_out[nc * hw..(nc + 1) * hw];
            for t in 0..t_n {
                let base = nc * t_n * hw + t * hw;
                for (gi, &v) in g[base..base + hw].iter_mut().zip(go) {
                    *gi = v * inv;
                }
            }
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for SpatialMeanGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, c_n, t_n, h_n, w_n] = self.input.shape().dims();
        let r = self.r;
        let (ho, wo) = (h_n / r, w_n / r);
        let inv = T::from_f64(1.0 / (r * r) as f64);
        let mut g = vec![T::zero(); self.input.shape().len()];
        for nct in 0..n_n * c_n * t_n {
            let in_base = nct * h_n * w_n;
            let out_base = nct * ho * wo;
            for oh in 0..ho {
                for ow in 0..wo {
                    let v = grad_out[out_base + oh * wo + ow] * inv;
                    for dh in 0..r {
                        let row = in_base + (oh * r + dh) * w_n + ow * r;
                        for dw in 0..r {
                            g[row + dw] = v;
                        }
                    }
                }
            }
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for GlobalMeanGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, c_n, t_n, h_n, w_n] = self.input.shape().dims();
        let sp = t_n * h_n * w_n;
        let inv = T::from_f64(1.0 / sp as f64);
        let mut g = vec![T::zero(); self.input.shape().len()];
        for nc in 0..n_n * c_n {
            let v = grad_out[nc] * inv;
            for gi in &mut g[nc * sp..(nc + 1) * sp] {
                *gi = v;
            }
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for GlobalMaxGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let mut g = vec![T::zero(); self.input.shape().len()];
        for (&idx, &go) in self.argmax.iter().zip(grad_out) {
            g[idx] = g[idx] + go;
        }
        vec![g]
    }
}

#[cfg(test)]
mod tests {
    use crate::shape::Shape;
    use crate::tensor::Tensor;

    #[test]
    fn max_pool_keeps_shape_and_takes_window_max() {
        let x: Tensor = Tensor::from_vec(
            Shape::new(1, 1, 1, 2, 3),
            vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0],
        )
        .unwrap();
        let y = x.max_pool3_same();
        assert_eq!(y.shape(), x.shape());
        assert_eq!(y.data(), &[5.0, 5.0, 5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn spatial_mean_blocks() {
        let x: Tensor = Tensor::from_vec(
            Shape::new(1, 1, 1, 2, 4),
            vec![1.0, 3.0, 10.0, 20.0, 5.0, 7.0, 30.0, 40.0],
        )
        .unwrap();
        let y = x.spatial_mean(2).unwrap();
        assert_eq!(y.shape().dims(), [1, 1, 1, 1, 2]);
        assert_eq!(y.data(), &[4.0, 25.0]);
    }

    #[test]
    fn spatial_mean_rejects_non_tiling_block() {
        let x: Tensor = Tensor::zeros(Shape::new(1, 1, 1, 3, 3));
        assert!(x.spatial_mean(2).is_err());
    }

    #[test]
    fn global_reductions() {
        let x: Tensor = Tensor::from_vec(
            Shape::new(1, 2, 1, 1, 2),
            vec![1.0, 3.0, -2.0, 8.0],
        )
        .unwrap();
        assert_eq!(x.global_mean().data(), &[2.0, 3.0]);
        assert_eq!(x.global_max().data(), &[3.0, 8.0]);
    }

    #[test]
    fn temporal_mean_averages_frames() {
        let x: Tensor = Tensor::from_vec(
            Shape::new(1, 1, 2, 1, 2),
            vec![1.0, 2.0, 3.0, 6.0],
        )
        .unwrap();
        let y = x.temporal_mean();
        assert_eq!(y.shape().dims(), [1, 1, 1, 1, 2]);
        assert_eq!(y.data(), &[2.0, 4.0]);
    }

    #[test]
    fn max_pool_gradient_routes_to_argmax() {
        let x = Tensor::param(Shape::new(1, 1, 1, 1, 3), vec![1.0, 9.0, 2.0]).unwrap();
        let y = x.max_pool3_same();
        y.sum_all().backward().unwrap();
        // every output position picked index 1
        assert_eq!(x.grad().unwrap(), vec![0.0, 3.0, 0.0]);
    }
}
