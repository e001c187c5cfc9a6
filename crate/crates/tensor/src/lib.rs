//! Dense 5-D tensor engine with reverse-mode differentiation.
//!
//! Tensors carry a fixed (N, C, T, H, W) shape — batch, channels, time,
//! height, width — and are immutable after construction except for gradient
//! accumulation. The operator set is the one the video blocks need: 3-D
//! convolution, pooling, resizing, pointwise maps, batched matrix products,
//! channel split/concat, and a fused cross-entropy. Every differentiable
//! operation records a node on the value it returns, so calling
//! [`Tensor::backward`] on a scalar walks the recorded graph and accumulates
//! gradients into every tracked tensor on the path.
//!
//! Analytic gradients are validated by [`check::grad_check`], a central
//! finite-difference probe that is independent of the recorded graph.

mod autograd;
mod error;
mod params;
mod scalar;
mod shape;
mod tensor;

pub mod check;
pub mod io;
pub mod ops;

pub use autograd::GradFn;
pub use error::{Axis, TensorError};
pub use params::{ParamEntry, ParamStore};
pub use scalar::{Dtype, Scalar};
pub use shape::Shape;
pub use tensor::Tensor;

/// The verification-default element type. 32-bit tensors are available for
/// speed runs but are not used by the gradient checks.
pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;

pub use ops::layout::concat_channels;
pub use ops::pool::PoolMode;
