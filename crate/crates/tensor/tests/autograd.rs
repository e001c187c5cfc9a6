//! Behavioural tests of the reverse-mode engine: accumulation, reuse rules,
//! error paths, and a negative control proving the finite-difference checker
//! can actually catch a wrong gradient.

use gopnet_tensor::check::{grad_check, GradCheckConfig};
use gopnet_tensor::{GradFn, ParamStore, Shape, Tensor, TensorError};

#[test]
fn value_used_twice_accumulates_both_paths() {
    let x = Tensor::param(Shape::scalar(), vec![3.0]).unwrap();
    // loss = x*x + 2x  =>  dloss/dx = 2x + 2 = 8
    let sq = x.mul(&x).unwrap();
    let lin = x.scale(2.0);
    let loss = sq.add(&lin).unwrap().sum_all();
    loss.backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![8.0]);
}

#[test]
fn gradients_accumulate_across_backward_calls() {
    let x = Tensor::param(Shape::scalar(), vec![2.0]).unwrap();
    let a = x.scale(3.0).sum_all();
    let b = x.scale(5.0).sum_all();
    a.backward().unwrap();
    b.backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![8.0]);
}

#[test]
fn backward_twice_on_same_loss_is_an_error() {
    let x = Tensor::param(Shape::scalar(), vec![1.0]).unwrap();
    let loss = x.scale(2.0).sum_all();
    loss.backward().unwrap();
    let err = loss.backward().unwrap_err();
    assert!(matches!(err, TensorError::State(_)), "got {err:?}");
    // clearing the loss gradient arms it again
    loss.clear_grad();
    loss.backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![4.0]);
}

#[test]
fn backward_needs_scalar_and_tracked_loss() {
    let x = Tensor::param(Shape::new(1, 1, 1, 1, 2), vec![1.0, 2.0]).unwrap();
    let y = x.scale(2.0);
    assert!(matches!(y.backward(), Err(TensorError::Precondition(_))));

    let free: Tensor = Tensor::scalar(4.0);
    assert!(matches!(free.backward(), Err(TensorError::Precondition(_))));
}

#[test]
fn untracked_branches_receive_no_gradient() {
    let x = Tensor::param(Shape::scalar(), vec![2.0]).unwrap();
    let frozen = x.detach();
    let loss = x.mul(&frozen).unwrap().sum_all();
    loss.backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0]);
    assert!(frozen.grad().is_none());
}

#[test]
fn deep_chain_does_not_overflow_the_stack() {
    let x = Tensor::param(Shape::scalar(), vec![1.0]).unwrap();
    let mut y = x.scale(1.0);
    for _ in 0..20_000 {
        y = y.scale(1.0);
    }
    y.sum_all().backward().unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0]);
}

#[test]
fn diamond_graph_gets_single_complete_gradient() {
    // x feeds two branches that rejoin; x must see the sum of both exactly once
    let x = Tensor::param(Shape::new(1, 1, 1, 1, 2), vec![1.0, 4.0]).unwrap();
    let left = x.scale(2.0);
    let right = x.sigmoid();
    let joined = left.add(&right).unwrap();
    joined.sum_all().backward().unwrap();
    let g = x.grad().unwrap();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    for (i, &xv) in [1.0f64, 4.0].iter().enumerate() {
        let want = 2.0 + sig(xv) * (1.0 - sig(xv));
        assert!((g[i] - want).abs() < 1e-12);
    }
}

/// A deliberately broken op: forward is identity, backward doubles the true
/// gradient. The checker must flag it.
struct DoubledIdentity {
    input: Tensor<f64>,
}

impl GradFn<f64> for DoubledIdentity {
    fn parents(&self) -> Vec<Tensor<f64>> {
        vec![self.input.clone()]
    }

    fn backward(&self, grad_out: &[f64]) -> Vec<Vec<f64>> {
        vec![grad_out.iter().map(|g| g * 2.0).collect()]
    }
}

#[test]
fn checker_catches_a_wrong_backward_rule() {
    let mut store = ParamStore::new();
    store
        .insert(
            "x",
            Tensor::param(Shape::new(1, 1, 1, 1, 3), vec![0.4, -0.2, 0.9]).unwrap(),
        )
        .unwrap();
    let report = grad_check(
        &store,
        |s| {
            let x = s.tensor("x")?;
            let fake = Tensor::with_grad_fn(
                x.shape(),
                x.data().to_vec(),
                Box::new(DoubledIdentity { input: x.clone() }),
            );
            let probe = Tensor::from_vec(x.shape(), vec![1.0, -2.0, 0.5])?;
            Ok(fake.mul(&probe)?.sum_all())
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(!report.passed(), "a 2x-wrong gradient slipped through");
    assert!(report.max_rel_err > 0.4);
}

#[test]
fn checker_detects_nondeterministic_losses() {
    use std::sync::atomic::{AtomicU64, Ordering};
    let counter = AtomicU64::new(0);
    let mut store = ParamStore::new();
    store
        .insert("x", Tensor::param(Shape::scalar(), vec![1.0]).unwrap())
        .unwrap();
    let err = grad_check(
        &store,
        |s| {
            let drift = counter.fetch_add(1, Ordering::SeqCst) as f64;
            Ok(s.tensor("x")?.scale(1.0 + drift).sum_all())
        },
        &GradCheckConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, TensorError::NonDeterministic(_)), "got {err:?}");
}

#[test]
fn composite_graph_passes_fd_check() {
    // one of everything chained together, checked end to end
    let mut store = ParamStore::new();
    let mut seed = 0.37;
    let mut next = move || {
        seed = (seed * 9301.0 + 49297.0) % 233280.0;
        seed / 233280.0 - 0.5
    };
    store
        .insert(
            "w1",
            Tensor::from_fn(Shape::new(4, 2, 1, 3, 3), |_| next() * 0.5).to_param(),
        )
        .unwrap();
    store
        .insert(
            "w2",
            Tensor::from_fn(Shape::new(3, 4, 1, 1, 1), |_| next() * 0.5).to_param(),
        )
        .unwrap();
    let x = Tensor::from_fn(Shape::new(2, 2, 2, 4, 4), |i| ((i % 13) as f64 - 6.0) * 0.1);
    let report = grad_check(
        &store,
        move |s| {
            let h = x
                .conv3d(s.tensor("w1")?, None, [1, 1, 1], [0, 1, 1])?
                .max_pool3_same()
                .sigmoid();
            let gate = h.temporal_mean().repeat_temporal(2)?;
            let z = h.mul(&gate)?.conv3d(s.tensor("w2")?, None, [1, 1, 1], [0, 0, 0])?;
            z.global_mean().reshape(Shape::new(2, 3, 1, 1, 1))?.cross_entropy(&[1, 2])
        },
        &GradCheckConfig::default(),
    )
    .unwrap();
    assert!(
        report.passed(),
        "composite: {} failures, max rel err {}",
        report.failures.len(),
        report.max_rel_err
    );
}
