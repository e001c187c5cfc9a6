//! Two-stream compressed-video action recognizer.
//!
//! One backbone consumes RGB keyframe clips, the other consumes motion
//! vector + residual clips extracted directly from the compressed stream.
//! The motion backbone is built from multi-scale blocks with per-branch
//! denoising gates; the two streams exchange information through
//! motion-complement units after every stage and a cross-modal attention
//! fusion at the end. A classifier head sits on each stream and on the
//! fused features, and their scores are averaged.
//!
//! All parameters live in a [`gopnet_tensor::ParamStore`] keyed by path,
//! so forward passes can run against perturbed or loaded parameter sets,
//! which is what the training loop, checkpointing and finite-difference
//! gradient checks all rely on.

pub mod blocks;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod head;
pub mod interact;
pub mod layers;
pub mod network;

pub use blocks::{Bottleneck, DenoiseGate, MultiScaleBlock};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_HEADER,
};
pub use config::{
    BottleneckConfig, CmaConfig, DmConfig, Modality, ModelConfig, MsbConfig, SmcConfig,
};
pub use error::ModelError;
pub use head::{fuse_scores, ClassifierHead};
pub use interact::{CrossModalAttention, MotionComplement};
pub use layers::Conv3;
pub use network::{ModelOutput, TwoStreamModel, MVR_CHANNELS, RGB_CHANNELS};
