use gopnet_tensor::{ParamStore, Scalar, Shape, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;

/// A 3-D convolution bound to parameter-store paths `<path>.weight` /
/// `<path>.bias`. The struct itself is weightless; parameters live in the
/// store so checkpointing, SGD and gradient checking all see one flat
/// namespace.
#[derive(Debug, Clone)]
pub struct Conv3 {
    path: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

impl Conv3 {
    pub fn new(
        path: impl Into<String>,
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Conv3 {
        Conv3 {
            path: path.into(),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    /// 1x1x1 pointwise convolution, stride 1.
    pub fn point(path: impl Into<String>, in_channels: usize, out_channels: usize) -> Conv3 {
        Conv3::new(path, in_channels, out_channels, [1, 1, 1], [1, 1, 1], [0, 0, 0])
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    fn weight_path(&self) -> String {
        format!("{}.weight", self.path)
    }

    fn bias_path(&self) -> String {
        format!("{}.bias", self.path)
    }

    /// Creates and stores the parameters: Kaiming-uniform fan-in weights
    /// (bound 1/sqrt(fan_in), fan_in = Cin * kernel volume — the standard
    /// leaky-slope convention, which keeps this mostly-ReLU-free stack from
    /// amplifying activations) and zero biases. Draw order is element
    /// order, so a fixed seed gives fixed weights.
    pub fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        let [kt, kh, kw] = self.kernel;
        let fan_in = (self.in_channels * kt * kh * kw) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let w_shape = Shape::new(self.out_channels, self.in_channels, kt, kh, kw);
        let data: Vec<T> = (0..w_shape.len())
            .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        store.insert(&self.weight_path(), Tensor::param(w_shape, data)?)?;
        let b_shape = Shape::new(1, self.out_channels, 1, 1, 1);
        store.insert(
            &self.bias_path(),
            Tensor::param(b_shape, vec![T::from_f64(0.0); self.out_channels])?,
        )?;
        Ok(())
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        let w = store.tensor(&self.weight_path())?;
        let b = store.tensor(&self.bias_path())?;
        Ok(x.conv3d(w, Some(b), self.stride, self.padding)?)
    }

    pub fn param_count(&self) -> usize {
        let [kt, kh, kw] = self.kernel;
        self.in_channels * self.out_channels * kt * kh * kw + self.out_channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn registration_is_seed_deterministic_and_bounded() {
        let conv = Conv3::new("c", 3, 4, [1, 3, 3], [1, 1, 1], [0, 1, 1]);
        let mut a = ParamStore::<f64>::new();
        conv.register(&mut a, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut b = ParamStore::<f64>::new();
        conv.register(&mut b, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.tensor("c.weight").unwrap().data(), b.tensor("c.weight").unwrap().data());

        let bound = 1.0 / (3.0f64 * 9.0).sqrt();
        assert!(a
            .tensor("c.weight")
            .unwrap()
            .data()
            .iter()
            .all(|v| v.abs() < bound));
        assert!(a.tensor("c.bias").unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(a.param_count(), conv.param_count());
    }

    #[test]
    fn forward_reads_its_own_paths() {
        let conv = Conv3::point("p", 2, 3);
        let mut store = ParamStore::<f64>::new();
        conv.register(&mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let x = Tensor::from_vec(Shape::new(1, 2, 1, 2, 2), vec![1.0; 8]).unwrap();
        let y = conv.forward(&store, &x).unwrap();
        assert_eq!(y.shape().dims(), [1, 3, 1, 2, 2]);
    }
}
