//! Checks the optimised kernels against independent nested-loop references
//! and every differentiable op against central finite differences.

use gopnet_tensor::check::{grad_check, GradCheckConfig};
use gopnet_tensor::{concat_channels, ParamStore, Shape, Tensor, TensorError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_tensor(shape: Shape, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Textbook convolution: loop over every output coordinate and sum taps,
/// skipping out-of-bounds positions. Deliberately shares no code with the
/// strided kernel it validates.
fn conv_reference(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    b: Option<&Tensor<f64>>,
    stride: [usize; 3],
    pad: [usize; 3],
) -> Vec<f64> {
    let [n_n, cin, ti, hi, wi] = x.shape().dims();
    let [cout, _, kt, kh, kw] = w.shape().dims();
    let to = (ti + 2 * pad[0] - kt) / stride[0] + 1;
    let ho = (hi + 2 * pad[1] - kh) / stride[1] + 1;
    let wo = (wi + 2 * pad[2] - kw) / stride[2] + 1;
    let mut out = Vec::with_capacity(n_n * cout * to * ho * wo);
    for n in 0..n_n {
        for co in 0..cout {
            for ot in 0..to {
                for oh in 0..ho {
                    for ow in 0..wo {
                        let mut acc = b.map_or(0.0, |b| b.value(0, co, 0, 0, 0));
                        for ci in 0..cin {
                            for dt in 0..kt {
                                for dh in 0..kh {
                                    for dw in 0..kw {
                                        let it = (ot * stride[0] + dt) as isize - pad[0] as isize;
                                        let ih = (oh * stride[1] + dh) as isize - pad[1] as isize;
                                        let iw = (ow * stride[2] + dw) as isize - pad[2] as isize;
                                        if it < 0
                                            || ih < 0
                                            || iw < 0
                                            || it >= ti as isize
                                            || ih >= hi as isize
                                            || iw >= wi as isize
                                        {
                                            continue;
                                        }
                                        acc += w.value(co, ci, dt, dh, dw)
                                            * x.value(
                                                n,
                                                ci,
                                                it as usize,
                                                ih as usize,
                                                iw as usize,
                                            );
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
    }
    out
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    let mut worst = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        worst = worst.max((x - y).abs());
    }
    assert!(worst <= tol, "{what}: max abs diff {worst}");
}

#[test]
fn conv_matches_reference_over_geometry_battery() {
    let cases: Vec<(Shape, Shape, bool, [usize; 3], [usize; 3])> = vec![
        // cubic kernel, same padding
        (Shape::new(2, 3, 3, 5, 5), Shape::new(4, 3, 3, 3, 3), true, [1, 1, 1], [1, 1, 1]),
        // spatial-only kernel with spatial stride
        (Shape::new(1, 2, 4, 6, 6), Shape::new(3, 2, 1, 3, 3), false, [1, 2, 2], [0, 1, 1]),
        // temporal-only kernel
        (Shape::new(2, 2, 6, 2, 2), Shape::new(2, 2, 5, 1, 1), true, [1, 1, 1], [2, 0, 0]),
        // pointwise
        (Shape::new(2, 5, 2, 3, 3), Shape::new(7, 5, 1, 1, 1), true, [1, 1, 1], [0, 0, 0]),
        // full downsampling
        (Shape::new(1, 3, 4, 8, 8), Shape::new(2, 3, 3, 3, 3), false, [2, 2, 2], [1, 1, 1]),
    ];
    for (i, (xs, ws, with_bias, stride, pad)) in cases.into_iter().enumerate() {
        let x = random_tensor(xs, 100 + i as u64);
        let w = random_tensor(ws, 200 + i as u64);
        let b = with_bias.then(|| random_tensor(Shape::new(1, ws.n(), 1, 1, 1), 300 + i as u64));
        let got = x.conv3d(&w, b.as_ref(), stride, pad).unwrap();
        let want = conv_reference(&x, &w, b.as_ref(), stride, pad);
        assert_close(got.data(), &want, 1e-12, &format!("case {i}"));
    }
}

#[test]
fn conv_forward_is_bitwise_deterministic() {
    let x = random_tensor(Shape::new(2, 4, 3, 9, 9), 11);
    let w = random_tensor(Shape::new(6, 4, 3, 3, 3), 12);
    let a = x.conv3d(&w, None, [1, 1, 1], [1, 1, 1]).unwrap();
    let b = x.conv3d(&w, None, [1, 1, 1], [1, 1, 1]).unwrap();
    let same = a
        .data()
        .iter()
        .zip(b.data())
        .all(|(p, q)| p.to_bits() == q.to_bits());
    assert!(same);
}

#[test]
fn matmul_matches_reference() {
    let a = random_tensor(Shape::new(3, 4, 5, 1, 1), 21);
    let b = random_tensor(Shape::new(3, 5, 6, 1, 1), 22);
    let c = a.matmul(&b).unwrap();
    let mut want = vec![0.0; 3 * 4 * 6];
    for bb in 0..3 {
        for m in 0..4 {
            for n2 in 0..6 {
                let mut acc = 0.0;
                for k in 0..5 {
                    acc += a.value(bb, m, k, 0, 0) * b.value(bb, k, n2, 0, 0);
                }
                want[(bb * 4 + m) * 6 + n2] = acc;
            }
        }
    }
    assert_close(c.data(), &want, 1e-12, "matmul");
}

#[test]
fn softmax_matches_naive_on_moderate_inputs() {
    let x = random_tensor(Shape::new(2, 3, 7, 1, 1), 31);
    let y = x.softmax_rows().unwrap();
    for b in 0..2 {
        for m in 0..3 {
            let mut denom = 0.0;
            for k in 0..7 {
                denom += x.value(b, m, k, 0, 0).exp();
            }
            for k in 0..7 {
                let naive = x.value(b, m, k, 0, 0).exp() / denom;
                assert!((y.value(b, m, k, 0, 0) - naive).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn cross_entropy_matches_negative_log_prob() {
    let logits = random_tensor(Shape::new(4, 5, 1, 1, 1), 41);
    let labels = [3usize, 0, 4, 2];
    let loss = logits.cross_entropy(&labels).unwrap().item().unwrap();
    let mut want = 0.0;
    for (n, &y) in labels.iter().enumerate() {
        let mut denom = 0.0;
        for k in 0..5 {
            denom += logits.value(n, k, 0, 0, 0).exp();
        }
        want -= (logits.value(n, y, 0, 0, 0).exp() / denom).ln();
    }
    want /= labels.len() as f64;
    assert!((loss - want).abs() < 1e-12, "{loss} vs {want}");
}

// ---------------------------------------------------------------------------
// finite-difference battery: every differentiable op, probed against central
// differences through an arbitrary linear functional of its output
// ---------------------------------------------------------------------------

fn fd_check(
    name: &str,
    shape: Shape,
    seed: u64,
    f: impl Fn(&Tensor<f64>) -> Result<Tensor<f64>, TensorError>,
) {
    let mut store = ParamStore::new();
    store.insert("x", random_tensor(shape, seed).to_param()).unwrap();
    let report = grad_check(
        &store,
        |s| {
            let y = f(s.tensor("x")?)?;
            let probe = Tensor::from_fn(y.shape(), |i| ((i % 7) as f64 - 3.0) * 0.25 + 0.13);
            Ok(y.mul(&probe)?.sum_all())
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(
        report.passed(),
        "{name}: {} failures, max rel err {}",
        report.failures.len(),
        report.max_rel_err
    );
}

#[test]
fn gradients_of_pointwise_ops() {
    let s = Shape::new(2, 3, 2, 3, 3);
    fd_check("sigmoid", s, 1, |x| Ok(x.sigmoid()));
    fd_check("relu", s, 2, |x| Ok(x.relu()));
    fd_check("scale", s, 3, |x| Ok(x.scale(-1.7)));
    fd_check("add-broadcast", s, 4, |x| {
        let c = Tensor::from_fn(Shape::new(1, 3, 1, 1, 1), |i| i as f64 - 1.0);
        x.add(&c)
    });
    fd_check("mul-broadcast", s, 5, |x| {
        let c = Tensor::from_fn(Shape::new(2, 1, 1, 3, 3), |i| (i as f64) * 0.1 - 0.4);
        x.mul(&c)
    });
}

#[test]
fn gradients_of_conv() {
    fd_check("conv-same", Shape::new(1, 2, 3, 4, 4), 6, |x| {
        let w = Tensor::from_fn(Shape::new(3, 2, 3, 3, 3), |i| ((i % 11) as f64 - 5.0) * 0.07);
        x.conv3d(&w, None, [1, 1, 1], [1, 1, 1])
    });
    fd_check("conv-strided", Shape::new(2, 2, 2, 6, 6), 7, |x| {
        let w = Tensor::from_fn(Shape::new(2, 2, 1, 3, 3), |i| ((i % 5) as f64 - 2.0) * 0.11);
        x.conv3d(&w, None, [1, 2, 2], [0, 1, 1])
    });
}

#[test]
fn gradients_of_conv_weight_and_bias() {
    let mut store = ParamStore::new();
    store
        .insert("w", random_tensor(Shape::new(2, 3, 1, 3, 3), 8).to_param())
        .unwrap();
    store
        .insert("b", random_tensor(Shape::new(1, 2, 1, 1, 1), 9).to_param())
        .unwrap();
    let x = random_tensor(Shape::new(2, 3, 2, 4, 4), 10);
    let report = grad_check(
        &store,
        move |s| {
            let y = x.conv3d(s.tensor("w")?, Some(s.tensor("b")?), [1, 1, 1], [0, 1, 1])?;
            let probe = Tensor::from_fn(y.shape(), |i| ((i % 5) as f64 - 2.0) * 0.3);
            Ok(y.mul(&probe)?.sum_all())
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(report.passed(), "max rel err {}", report.max_rel_err);
}

#[test]
fn gradients_of_pooling_and_resize() {
    let s = Shape::new(1, 2, 3, 4, 4);
    fd_check("max-pool", s, 11, |x| Ok(x.max_pool3_same()));
    fd_check("temporal-mean", s, 12, |x| Ok(x.temporal_mean()));
    fd_check("spatial-mean", s, 13, |x| x.spatial_mean(2));
    fd_check("global-mean", s, 14, |x| Ok(x.global_mean()));
    fd_check("global-max", s, 15, |x| Ok(x.global_max()));
    fd_check("repeat-temporal", Shape::new(1, 2, 1, 3, 3), 16, |x| x.repeat_temporal(4));
    fd_check("bilinear-up", Shape::new(1, 2, 2, 2, 2), 17, |x| x.bilinear_spatial(5, 5));
    fd_check("bilinear-down", Shape::new(1, 1, 1, 6, 6), 18, |x| x.bilinear_spatial(3, 3));
}

#[test]
fn gradients_of_matrix_ops() {
    fd_check("softmax", Shape::new(2, 3, 5, 1, 1), 19, |x| x.softmax_rows());
    fd_check("transpose", Shape::new(2, 3, 4, 1, 1), 20, |x| x.transpose_mat());
    fd_check("flatten", Shape::new(2, 3, 2, 2, 2), 21, |x| Ok(x.flatten_positions()));
    fd_check("unflatten", Shape::new(2, 8, 3, 1, 1), 22, |x| x.unflatten_positions(2, 2, 2));
    fd_check("matmul-left", Shape::new(2, 3, 4, 1, 1), 23, |x| {
        let rhs = Tensor::from_fn(Shape::new(2, 4, 5, 1, 1), |i| ((i % 9) as f64 - 4.0) * 0.12);
        x.matmul(&rhs)
    });
    fd_check("matmul-right", Shape::new(2, 4, 5, 1, 1), 24, |x| {
        let lhs = Tensor::from_fn(Shape::new(2, 3, 4, 1, 1), |i| ((i % 9) as f64 - 4.0) * 0.12);
        lhs.matmul(x)
    });
}

#[test]
fn gradients_of_layout_and_reductions() {
    fd_check("slice", Shape::new(2, 4, 2, 2, 2), 25, |x| x.slice_channels(1, 2));
    fd_check("concat-split", Shape::new(1, 4, 2, 2, 2), 26, |x| {
        let parts = x.split_channels(2)?;
        concat_channels(&[parts[1].clone(), parts[0].clone()])
    });
    fd_check("reshape", Shape::new(2, 3, 1, 1, 4), 27, |x| {
        x.reshape(Shape::new(2, 1, 3, 1, 4))
    });
    fd_check("cross-entropy", Shape::new(3, 4, 1, 1, 1), 28, |x| {
        x.cross_entropy(&[0, 2, 3])
    });
    fd_check("attention-shaped-composite", Shape::new(1, 4, 2, 2, 2), 29, |x| {
        // softmax(Q K^T / sqrt(d)) V with Q=K=V=x, the shape of the real
        // cross-attention fusion
        let q = x.flatten_positions();
        let scores = q
            .matmul(&q.transpose_mat()?)?
            .scale(1.0 / (x.shape().c() as f64).sqrt());
        let att = scores.softmax_rows()?.matmul(&q)?;
        att.unflatten_positions(2, 2, 2)
    });
}

#[test]
fn conv_backward_exact_on_integer_data() {
    // loss = sum(probe * conv(x, w) + probe*b) is linear in x, w and b, so a
    // finite difference with step 1.0 on integer-valued data is exact.
    let xs = Shape::new(2, 2, 2, 6, 6);
    let ws = Shape::new(2, 2, 1, 3, 3);
    let bs = Shape::new(1, 2, 1, 1, 1);
    let stride = [1, 2, 2];
    let pad = [0, 1, 1];
    let x0: Vec<f64> = (0..xs.len()).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
    let w0: Vec<f64> = (0..ws.len()).map(|i| ((i * 3 + 1) % 7) as f64 - 3.0).collect();
    let b0: Vec<f64> = vec![1.0, -2.0];

    let loss = |xd: &[f64], wd: &[f64], bd: &[f64]| -> f64 {
        let x = Tensor::<f64>::from_vec(xs, xd.to_vec()).unwrap();
        let w = Tensor::from_vec(ws, wd.to_vec()).unwrap();
        let b = Tensor::from_vec(bs, bd.to_vec()).unwrap();
        let y = x.conv3d(&w, Some(&b), stride, pad).unwrap();
        let probe = Tensor::from_fn(y.shape(), |i| ((i % 5) as f64) - 2.0);
        y.mul(&probe).unwrap().sum_all().item().unwrap()
    };

    // analytic
    let x = Tensor::param(xs, x0.clone()).unwrap();
    let w = Tensor::param(ws, w0.clone()).unwrap();
    let b = Tensor::param(bs, b0.clone()).unwrap();
    let y = x.conv3d(&w, Some(&b), stride, pad).unwrap();
    let probe = Tensor::from_fn(y.shape(), |i| ((i % 5) as f64) - 2.0);
    y.mul(&probe).unwrap().sum_all().backward().unwrap();

    for (name, base, grad, which) in [
        ("x", &x0, x.grad().unwrap(), 0usize),
        ("w", &w0, w.grad().unwrap(), 1),
        ("b", &b0, b.grad().unwrap(), 2),
    ] {
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += 1.0;
            let mut minus = base.clone();
            minus[i] -= 1.0;
            let (fp, fm) = match which {
                0 => (loss(&plus, &w0, &b0), loss(&minus, &w0, &b0)),
                1 => (loss(&x0, &plus, &b0), loss(&x0, &minus, &b0)),
                _ => (loss(&x0, &w0, &plus), loss(&x0, &w0, &minus)),
            };
            let fd = (fp - fm) / 2.0;
            assert!(
                (fd - grad[i]).abs() < 1e-9,
                "{name}[{i}]: analytic {} vs exact fd {}",
                grad[i],
                fd
            );
        }
    }
}
