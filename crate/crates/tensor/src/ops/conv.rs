use rayon::prelude::*;

use crate::autograd::GradFn;
use crate::error::{Axis, TensorError};
use crate::scalar::Scalar;
use crate::shape::Shape;
use crate::tensor::Tensor;

fn out_extent(input: usize, k: usize, pad: usize, stride: usize) -> Result<usize, TensorError> {
    let padded = input + 2 * pad;
    if padded < k {
        return Err(TensorError::InvalidGeometry(format!(
            "kernel extent {k} exceeds input extent {input} with padding {pad}"
        )));
    }
    Ok((padded - k) / stride + 1)
}

/// Output positions whose tap at kernel offset `k_off` lands in bounds:
/// `0 <= o*stride + k_off < len`. Padding is implicit zeros, so positions
/// outside this range contribute nothing and are skipped entirely.
fn valid_range(len: usize, out_len: usize, k_off: isize, stride: usize) -> std::ops::Range<usize> {
    let lo = if k_off >= 0 {
        0
    } else {
        ((-k_off) as usize).div_ceil(stride)
    };
    let last = len as isize - 1 - k_off;
    if last < 0 {
        return 0..0;
    }
    let hi = ((last as usize) / stride + 1).min(out_len);
    if lo >= hi {
        0..0
    } else {
        lo..hi
    }
}

struct Conv3dGrad<T: Scalar> {
    input: Tensor<T>,
    weight: Tensor<T>,
    bias: Option<Tensor<T>>,
    stride: [usize; 3],
    padding: [usize; 3],
    out_shape: Shape,
}

impl<T: Scalar> Tensor<T> {
    /// 3-D cross-correlation over (time, height, width) with zero padding.
    ///
    /// `weight` is laid out as (out_channels, in_channels, kt, kh, kw) and
    /// `bias`, when present, as (1, out_channels, 1, 1, 1).
    pub fn conv3d(
        &self,
        weight: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Tensor<T>, TensorError> {
        let [n_n, cin, ti, hi, wi] = self.shape().dims();
        let [cout, wcin, kt, kh, kw] = weight.shape().dims();
        if cin != wcin {
            return Err(TensorError::DimMismatch {
                axis: Axis::Channel,
                expected: wcin,
                got: cin,
            });
        }
        if stride.iter().any(|&s| s == 0) {
            return Err(TensorError::InvalidGeometry(format!(
                "convolution stride must be positive, got {stride:?}"
            )));
        }
        if let Some(b) = bias {
            if b.shape().dims() != [1, cout, 1, 1, 1] {
                return Err(TensorError::InvalidGeometry(format!(
                    "bias must have shape 1x{cout}x1x1x1, got {}",
                    b.shape()
                )));
            }
        }
        let to = out_extent(ti, kt, padding[0], stride[0])?;
        let ho = out_extent(hi, kh, padding[1], stride[1])?;
        let wo = out_extent(wi, kw, padding[2], stride[2])?;
        let out_shape = Shape::new(n_n, cout, to, ho, wo);

        let in_data = self.data();
        let w_data = weight.data();
        let bias_data = bias.map(|b| b.data());
        let in_sp = ti * hi * wi;
        let out_sp = to * ho * wo;
        let ksp = kt * kh * kw;

        let mut data = vec![T::zero(); out_shape.len()];
        data.par_chunks_mut(out_sp).enumerate().for_each(|(j, out_c)| {
            let n = j / cout;
            let co = j % cout;
            if let Some(b) = &bias_data {
                out_c.fill(b[co]);
            }
            let in_n = &in_data[n * cin * in_sp..(n + 1) * cin * in_sp];
            let w_co = &w_data[co * cin * ksp..(co + 1) * cin * ksp];
            for ci in 0..cin {
                let in_ch = &in_n[ci * in_sp..(ci + 1) * in_sp];
                let w_ch = &w_co[ci * ksp..(ci + 1) * ksp];
                for kti in 0..kt {
                    let t_off = kti as isize - padding[0] as isize;
                    let tr = valid_range(ti, to, t_off, stride[0]);
                    for khi in 0..kh {
                        let h_off = khi as isize - padding[1] as isize;
                        let hr = valid_range(hi, ho, h_off, stride[1]);
                        for kwi in 0..kw {
                            let w_off = kwi as isize - padding[2] as isize;
                            let wr = valid_range(wi, wo, w_off, stride[2]);
                            if wr.is_empty() || hr.is_empty() || tr.is_empty() {
                                continue;
                            }
                            let wv = w_ch[kti * kh * kw + khi * kw + kwi];
                            for ot in tr.clone() {
                                let it = (ot * stride[0]) as isize + t_off;
                                for oh in hr.clone() {
                                    let ih = (oh * stride[1]) as isize + h_off;
                                    let in_row = &in_ch[it as usize * hi * wi + ih as usize * wi..];
                                    let out_row = &mut out_c[ot * ho * wo + oh * wo..];
                                    let mut iw =
                                        ((wr.start * stride[2]) as isize + w_off) as usize;
                                    for ow in wr.clone() {
                                        out_row[ow] = out_row[ow] + wv * in_row[iw];
                                        iw += stride[2];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });

        let tracked = self.requires_grad()
            || weight.requires_grad()
            || bias.map_or(false, |b| b.requires_grad());
        Ok(Tensor::result(out_shape, data, tracked, || {
            Box::new(Conv3dGrad {
                input: self.clone(),
                weight: weight.clone(),
                bias: bias.cloned(),
                stride,
                padding,
                out_shape,
            })
        }))
    }
}

impl<T: Scalar> GradFn<T> for Conv3dGrad<T> {
    fn parents(&self) -> Vec<Tensor<T>> {
        let mut p = vec![self.input.clone(), self.weight.clone()];
        if let Some(b) = &self.bias {
            p.push(b.clone());
        }
        p
    }

    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>> {
        let [n_n, cin, ti, hi, wi] = self.input.shape().dims();
        let [cout, _, kt, kh, kw] = self.weight.shape().dims();
        let [_, _, to, ho, wo] = self.out_shape.dims();
        let [st, sh, sw] = self.stride;
        let [pt, ph, pw] = self.padding;
        let in_sp = ti * hi * wi;
        let out_sp = to * ho * wo;
        let ksp = kt * kh * kw;
        let in_data = self.input.data();
        let w_data = self.weight.data();

        let grad_input = if self.input.requires_grad() {
            let mut gin = vec![T::zero(); self.input.shape().len()];
            gin.par_chunks_mut(in_sp).enumerate().for_each(|(j, gi)| {
                let n = j / cin;
                let ci = j % cin;
                for co in 0..cout {
                    let go = &grad_out[(n * cout + co) * out_sp..][..out_sp];
                    let w_ch = &w_data[(co * cin + ci) * ksp..][..ksp];
                    for kti in 0..kt {
                        let t_off = kti as isize - pt as isize;
                        let tr = valid_range(ti, to, t_off, st);
                        for khi in 0..kh {
                            let h_off = khi as isize - ph as isize;
                            let hr = valid_range(hi, ho, h_off, sh);
                            for kwi in 0..kw {
                                let w_off = kwi as isize - pw as isize;
                                let wr = valid_range(wi, wo, w_off, sw);
                                if wr.is_empty() || hr.is_empty() || tr.is_empty() {
                                    continue;
                                }
                                let wv = w_ch[kti * kh * kw + khi * kw + kwi];
                                for ot in tr.clone() {
                                    let it = ((ot * st) as isize + t_off) as usize;
                                    for oh in hr.clone() {
                                        let ih = ((oh * sh) as isize + h_off) as usize;
                                        let gi_row = &mut gi[it * hi * wi + ih * wi..];
                                        let go_row = &go[ot * ho * wo + oh * wo..];
                                        let mut iw =
                                            ((wr.start * sw) as isize + w_off) as usize;
                                        for ow in wr.clone() {
                                            gi_row[iw] = gi_row[iw] + wv * go_row[ow];
                                            iw += sw;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            });
            gin
        } else {
            Vec::new()
        };

        let grad_weight = if self.weight.requires_grad() {
            let mut gw = vec![T::zero(); self.weight.shape().len()];
            gw.par_chunks_mut(cin * ksp).enumerate().for_each(|(co, gw_co)| {
                for ci in 0..cin {
                    for kti in 0..kt {
                        let t_off = kti as isize - pt as isize;
                        let tr = valid_range(ti, to, t_off, st);
                        for khi in 0..kh {
                            let h_off = khi as isize - ph as isize;
                            let hr = valid_range(hi, ho, h_off, sh);
                            for kwi in 0..kw {
                                let w_off = kwi as isize - pw as isize;
                                let wr = valid_range(wi, wo, w_off, sw);
                                let mut acc = T::zero();
                                for n in 0..n_n {
                                    let go = &grad_out[(n * cout + co) * out_sp..][..out_sp];
                                    let in_ch = &in_data[(n * cin + ci) * in_sp..][..in_sp];
                                    for ot in tr.clone() {
                                        let it = ((ot * st) as isize + t_off) as usize;
                                        for oh in hr.clone() {
                                            let ih = ((oh * sh) as isize + h_off) as usize;
                                            let in_row = &in_ch[it * hi * wi + ih * wi..];
                                            let go_row = &go[ot * ho * wo + oh * wo..];
                                            let mut iw =
                                                ((wr.start * sw) as isize + w_off) as usize;
                                            for ow in wr.clone() {
                                                acc = acc + go_row[ow] * in_row[iw];
                                                iw += sw;
                                            }
                                        }
                                    }
                                }
                                gw_co[ci * ksp + kti * kh * kw + khi * kw + kwi] = acc;
                            }
                        }
                    }
                }
            });
            gw
        } else {
            Vec::new()
        };

        let mut grads = vec![grad_input, grad_weight];
        if let Some(b) = &self.bias {
            let gb = if b.requires_grad() {
                let mut gb = vec![T::zero(); cout];
                for n in 0..n_n {
                    for (co, g) in gb.iter_mut().enumerate() {
                        let go = &grad_out[(n * cout + co) * out_sp..][..out_sp];
                        for &v in go {
                            *g = *g + v;
                        }
                    }
                }
                gb
            } else {
                Vec::new()
            };
            grads.push(gb);
        }
        grads
    }
}
