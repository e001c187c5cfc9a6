use gopnet_tensor::{ParamStore, Scalar, Tensor};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::layers::Conv3;

/// Classification head: global average over time and space followed by a
/// pointwise projection to per-class scores of shape (N, classes, 1, 1, 1).
#[derive(Debug, Clone)]
pub struct ClassifierHead {
    pub classes: usize,
    proj: Conv3,
}

impl ClassifierHead {
    pub fn new(path: &str, channels: usize, classes: usize) -> ClassifierHead {
        ClassifierHead {
            classes,
            proj: Conv3::point(format!("{path}.proj"), channels, classes),
        }
    }

    pub fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        self.proj.register(store, rng)
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        self.proj.forward(store, &x.global_mean())
    }

    pub fn param_count(&self) -> usize {
        self.proj.param_count()
    }
}

/// Averages score tensors from the heads that are present. All inputs must
/// share the exact same shape; the result is their arithmetic mean.
pub fn fuse_scores<T: Scalar>(scores: &[&Tensor<T>]) -> Result<Tensor<T>, ModelError> {
    let first = scores
        .first()
        .ok_or_else(|| ModelError::Config("no scores to fuse".into()))?;
    let mut total = (*first).clone();
    for s in &scores[1..] {
        if s.shape() != first.shape() {
            return Err(ModelError::Config(format!(
                "score shapes differ: {} vs {}",
                first.shape(),
                s.shape()
            )));
        }
        total = total.add(s)?;
    }
    Ok(total.scale(T::from_f64(1.0 / scores.len() as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gopnet_tensor::Shape;
    use rand::SeedableRng;

    #[test]
    fn head_reduces_to_per_class_scores() {
        let head = ClassifierHead::new("head.rgb", 8, 5);
        let mut store = ParamStore::new();
        head.register(&mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let x = Tensor::from_fn(Shape::new(2, 8, 3, 4, 4), |i| (i as f64 * 0.01).sin());
        let y = head.forward(&store, &x).unwrap();
        assert_eq!(y.shape().dims(), [2, 5, 1, 1, 1]);
        assert_eq!(head.param_count(), 8 * 5 + 5);
    }

    #[test]
    fn head_on_constant_input_equals_projection_of_the_constant() {
        // Global mean of a constant is the constant, so the head must agree
        // with projecting a single-position tensor holding the same values.
        let head = ClassifierHead::new("h", 4, 3);
        let mut store = ParamStore::new();
        head.register(&mut store, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let x = Tensor::from_fn(Shape::new(1, 4, 2, 2, 2), |i| (i / 8) as f64 - 1.5);
        let tiny = Tensor::from_vec(
            Shape::new(1, 4, 1, 1, 1),
            vec![-1.5, -0.5, 0.5, 1.5],
        )
        .unwrap();
        let a = head.forward(&store, &x).unwrap();
        let b = head.forward(&store, &tiny).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fusing_opposite_scores_averages_them() {
        let a = Tensor::from_vec(Shape::new(1, 2, 1, 1, 1), vec![3.0, 0.0]).unwrap();
        let b = Tensor::from_vec(Shape::new(1, 2, 1, 1, 1), vec![0.0, 3.0]).unwrap();
        let c = Tensor::from_vec(Shape::new(1, 2, 1, 1, 1), vec![0.0, 0.0]).unwrap();
        let fused = fuse_scores(&[&a, &b, &c]).unwrap();
        assert_eq!(fused.data().to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn fusing_a_single_score_is_the_identity() {
        let a: Tensor = Tensor::from_vec(Shape::new(1, 3, 1, 1, 1), vec![1.0, -2.0, 0.5]).unwrap();
        let fused = fuse_scores(&[&a]).unwrap();
        assert_eq!(fused.data().to_vec(), a.data().to_vec());
    }

    #[test]
    fn fusion_is_symmetric_under_permutation() {
        let a: Tensor = Tensor::from_vec(Shape::new(1, 2, 1, 1, 1), vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(Shape::new(1, 2, 1, 1, 1), vec![-4.0, 0.25]).unwrap();
        let ab = fuse_scores(&[&a, &b]).unwrap();
        let ba = fuse_scores(&[&b, &a]).unwrap();
        assert_eq!(ab.data().to_vec(), ba.data().to_vec());
    }

    #[test]
    fn mismatched_or_empty_scores_are_rejected() {
        let a: Tensor = Tensor::zeros(Shape::new(1, 2, 1, 1, 1));
        let b: Tensor = Tensor::zeros(Shape::new(2, 2, 1, 1, 1));
        assert!(fuse_scores(&[&a, &b]).is_err());
        assert!(fuse_scores::<f64>(&[]).is_err());
    }
}
