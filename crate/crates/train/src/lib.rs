//! Synthetic dataset generation, training, evaluation and ablation for the
//! two-stream compressed-video recognizer.
//!
//! The dataset is motion-defined by construction: five texture classes
//! whose labels are functions of how the scene moves, two of which are
//! indistinguishable from any single frame, so the motion/residual stream
//! carries signal the appearance stream cannot recover.

pub mod ablation;
pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod sgd;
pub mod trainer;

pub use ablation::{ablation_csv, run_ablation, variant_config, AblationRow, VARIANTS};
pub use data::{Batch, ClipSettings, Dataset, Item, RgbStats, Split};
pub use dataset::{generate_dataset, DatasetConfig, DatasetSummary, CLASS_NAMES, MANIFEST_NAME};
pub use error::TrainError;
pub use eval::{argmax_lowest, evaluate_clips, evaluate_heads, score_split, EvalResult, HeadEval};
pub use sgd::Sgd;
pub use trainer::{train, EpochStats, TrainConfig};
