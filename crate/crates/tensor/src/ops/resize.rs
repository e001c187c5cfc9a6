use crate::autograd::GradFn;
use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

struct RepeatTemporalGrad<T: Scalar> {
    input: Tensor<T>,
    t_out: usize,
}

struct BilinearGrad<T: Scalar> {
    input: Tensor<T>,
    out_shape: Shape,
}

/// Source taps for one output coordinate under the half-pixel convention:
/// returns the two clamped source indices and the blend fraction.
fn taps(dst: usize, in_len: usize, out_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let src = (dst as f64 + 0.5) * scale - 0.5;
    let floor = src.floor();
    let frac = (src - floor).clamp(0.0, 1.0);
    let i0 = (floor.max(0.0) as usize).min(in_len - 1);
    let i1 = (i0 + 1).min(in_len - 1);
    // a negative src clamps both taps to the first sample
    if floor < 0.0 {
        (0, 0, 0.0)
    } else {
        (i0, i1, frac)
    }
}

impl<T: Scalar> Tensor<T> {
    /// Tiles a single-frame tensor (N,C,1,H,W) out to `t_out` frames.
    pub fn repeat_temporal(&self, t_out: usize) -> Result<Tensor<T>, TensorError> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        if t_n != 1 {
            return Err(TensorError::Precondition(format!(
                "temporal repeat expects a single frame, got {t_n}"
            )));
        }
        if t_out == 0 {
            return Err(TensorError::InvalidGeometry(
                "temporal repeat target must be positive".into(),
            ));
        }
        let data = self.data();
        let hw = h_n * w_n;
        let mut out = Vec::with_capacity(n_n * c_n * t_out * hw);
        for nc in 0..n_n * c_n {
            let frame = &data[nc * hw..(nc + 1) * hw];
            for _ in 0..t_out {
                out.extend_from_slice(frame);
            }
        }
        let shape = Shape::new(n_n, c_n, t_out, h_n, w_n);
        Ok(Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(RepeatTemporalGrad {
                input: self.clone(),
                t_out,
            })
        }))
    }

    /// Bilinear resampling of the spatial plane to `h_out` x `w_out` using
    /// half-pixel centres with edge clamping; the time axis is untouched.
    pub fn bilinear_spatial(&self, h_out: usize, w_out: usize) -> Result<Tensor<T>, TensorError> {
        let [n_n, c_n, t_n, h_n, w_n] = self.shape().dims();
        if h_out == 0 || w_out == 0 {
            return Err(TensorError::InvalidGeometry(
                "bilinear target extents must be positive".into(),
            ));
        }
        let h_taps: Vec<(usize, usize, f64)> =
            (0..h_out).map(|oh| taps(oh, h_n, h_out)).collect();
        let w_taps: Vec<(usize, usize, f64)> =
            (0..w_out).map(|ow| taps(ow, w_n, w_out)).collect();
        let data = self.data();
        let mut out = Vec::with_capacity(n_n * c_n * t_n * h_out * w_out);
        for nct in 0..n_n * c_n * t_n {
            let plane = &data[nct * h_n * w_n..(nct + 1) * h_n * w_n];
            for &(h0, h1, fh) in &h_taps {
                let row0 = &plane[h0 * w_n..(h0 + 1) * w_n];
                let row1 = &plane[h1 * w_n..(h1 + 1) * w_n];
                let fh1 = T::from_f64(fh);
                let fh0 = T::from_f64(1.0 - fh);
                for &(w0, w1, fw) in &w_taps {
                    let fw1 = T::from_f64(fw);
                    let fw0 = T::from_f64(1.0 - fw);
                    let top = row0[w0] * fw0 + row0[w1] * fw1;
                    let bot = row1[w0] * fw0 + row1[w1] * fw1;
                    out.push(top * fh0 + bot * fh1);
                }
            }
        }
        let shape = Shape::new(n_n, c_n, t_n, h_out, w_out);
        Ok(Tensor::result(shape, out, self.requires_grad(), || {
            Box::new(BilinearGrad {
                input: self.clone(),
                out_shape: shape,
            })
        }))
    }
}

impl<T: Scalar> GradFn<T> for RepeatTemporalGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, c_n, _, h_n, w_n] = self.input.shape().dims();
        let hw = h_n * w_n;
        let mut g = vec![T::zero(); self.input.shape().len()];
        for nc in 0..n_n * c_n {
            let gslice = &mut g[nc * hw..(nc + 1) * hw];
            for t in 0..self.t_out {
                let go = &grad_out[(nc * self.t_out + t) * hw..][..hw];
                for (gi, &v) in gslice.iter_mut().zip(go) {
                    *gi = *gi + v;
                }
            }
        }
        vec![g]
    }
}

impl<T: Scalar> GradFn<T> for BilinearGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, c_n, t_n, h_n, w_n] = self.input.shape().dims();
        let [_, _, _, h_out, w_out] = self.out_shape.dims();
        let h_taps: Vec<(usize, usize, f64)> =
            (0..h_out).map(|oh| taps(oh, h_n, h_out)).collect();
        let w_taps: Vec<(usize, usize, f64)> =
            (0..w_out).map(|ow| taps(ow, w_n, w_out)).collect();
        let mut g = vec![T::zero(); self.input.shape().len()];
        for nct in 0..n_n * c_n * t_n {
            let gplane = nct * h_n * w_n;
            let oplane = nct * h_out * w_out;
            for (oh, &(h0, h1, fh)) in h_taps.iter().enumerate() {
                let fh1 = T::from_f64(fh);
                let fh0 = T::from_f64(1.0 - fh);
                for (ow, &(w0, w1, fw)) in w_taps.iter().enumerate() {
                    let fw1 = T::from_f64(fw);
                    let fw0 = T::from_f64(1.0 - fw);
                    let go = grad_out[oplane + oh * w_out + ow];
                    let i00 = gplane + h0 * w_n + w0;
                    let i01 = gplane + h0 * w_n + w1;
                    let i10 = gplane + h1 * w_n + w0;
                    let i11 = gplane + h1 * w_n + w1;
                    g[i00] = g[i00] + go * fh0 * fw0;
                    g[i01] = g[i01] + go * fh0 * fw1;
                    g[i10] = g[i10] + go * fh1 * fw0;
                    g[i11] = g[i11] + go * fh1 * fw1;
                }
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
    fn repeat_tiles_frames() {
        let x: Tensor = Tensor::from_vec(Shape::new(1, 1, 1, 1, 2), vec![3.0, 4.0]).unwrap();
        let y = x.repeat_temporal(3).unwrap();
        assert_eq!(y.shape().dims(), [1, 1, 3, 1, 2]);
        assert_eq!(y.data(), &[3.0, 4.0, 3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn bilinear_doubling_interpolates_midpoints() {
        let x: Tensor = Tensor::from_vec(Shape::new(1, 1, 1, 1, 2), vec![0.0, 4.0]).unwrap();
        let y = x.bilinear_spatial(1, 4).unwrap();
        // half-pixel centres: src = (o + 0.5)/2 - 0.5 = [-0.25, 0.25, 0.75, 1.25]
        assert_eq!(y.data(), &[0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn bilinear_identity_when_sizes_match() {
        let x: Tensor = Tensor::from_vec(
            Shape::new(1, 1, 1, 2, 2),
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let y = x.bilinear_spatial(2, 2).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn bilinear_gradient_sums_to_output_count() {
        // resampling is linear with unit row sums, so grads of sum() are
        // the per-cell tap weights and must total h_out * w_out
        let x = Tensor::param(Shape::new(1, 1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = x.bilinear_spatial(4, 4).unwrap();
        y.sum_all().backward().unwrap();
        let total: f64 = x.grad().unwrap().iter().sum();
        assert!((total - 16.0).abs() < 1e-12);
    }
}
