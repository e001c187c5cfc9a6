pub mod conv;
pub mod layout;
pub mod matrix;
pub mod pointwise;
pub mod pool;
pub mod reduce;
pub mod resize;

use crate::scalar::Scalar;
use crate::shape::Shape;

/// Per-axis strides for reading `shape` as if broadcast to `out`:
/// broadcast axes get stride zero.
pub(crate) fn broadcast_strides(shape: Shape, out: Shape) -> [usize; 5] {
    let real = shape.strides();
    let mut s = [0usize; 5];
    for i in 0..5 {
        s[i] = if shape.0[i] == out.0[i] { real[i] } else { 0 };
    }
    s
}

/// Elementwise combine of two broadcast operands into `out`'s layout.
pub(crate) fn zip_broadcast<T: Scalar>(
    a: &[T],
    a_shape: Shape,
    b: &[T],
    b_shape: Shape,
    out: Shape,
    f: impl Fn(T, T) -> T,
) -> Vec<T> {
    let sa = broadcast_strides(a_shape, out);
    let sb = broadcast_strides(b_shape, out);
    let d = out.dims();
    let mut data = Vec::with_capacity(out.len());
    for n in 0..d[0] {
        for c in 0..d[1] {
            for t in 0..d[2] {
                for h in 0..d[3] {
                    let base_a = n * sa[0] + c * sa[1] + t * sa[2] + h * sa[3];
                    let base_b = n * sb[0] + c * sb[1] + t * sb[2] + h * sb[3];
                    let mut ia = base_a;
                    let mut ib = base_b;
                    for _ in 0..d[4] {
                        data.push(f(a[ia], b[ib]));
                        ia += sa[4];
                        ib += sb[4];
                    }
                }
            }
        }
    }
    data
}

/// Sums a gradient laid out as `out` down to `target`'s shape (the reverse
/// of broadcasting).
pub(crate) fn reduce_to_shape<T: Scalar>(grad: &[T], out: Shape, target: Shape) -> Vec<T> {
    if out == target {
        return grad.to_vec();
    }
    let st = broadcast_strides(target, out);
    let d = out.dims();
    let mut reduced = vec![T::zero(); target.len()];
    let mut idx = 0usize;
    for n in 0..d[0] {
        for c in 0..d[1] {
            for t in 0..d[2] {
                for h in 0..d[3] {
                    let base = n * st[0] + c * st[1] + t * st[2] + h * st[3];
                    let mut it = base;
                    for _ in 0..d[4] {
                        reduced[it] = reduced[it] + grad[idx];
                        idx += 1;
                        it += st[4];
                    }
                }
            }
        }
    }
    reduced
}
