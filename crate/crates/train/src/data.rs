//! Dataset loading and batch assembly.
//!
//! Loads every encoded stream named by the manifest into memory together
//! with its accumulated motion fields, computes RGB standardization
//! statistics from the training split's keyframes, and assembles batched
//! clip tensors for the model.

use std::path::Path;

use gopnet_codec::{accumulate_stream, read_stream, sample_clip, AccumulatedFields, GopStream, SampleMode};
use gopnet_tensor::{Shape, Tensor};
use rand::RngCore;

use crate::dataset::MANIFEST_NAME;
use crate::error::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split, TrainError> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(TrainError::Data(format!(
                "unknown split '{other}', expected train, val or test"
            ))),
        }
    }
}

pub struct Item {
    pub stream: GopStream,
    pub accum: Vec<AccumulatedFields>,
    pub label: usize,
    pub split: Split,
    pub name: String,
}

/// Per-channel keyframe statistics of the training split, in [0,1] units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RgbStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub struct Dataset {
    pub items: Vec<Item>,
    pub classes: usize,
    pub stats: RgbStats,
}

/// How clips are cut from a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipSettings {
    pub n_frames: usize,
    pub crop: (usize, usize),
}

pub struct Batch {
    /// (N, 3, T, crop_h, crop_w), standardized per channel.
    pub rgb: Tensor<f64>,
    /// (N, 5, T, crop_h, crop_w), raw motion/residual scaling.
    pub mvr: Tensor<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    /// Loads the directory written by the dataset generator.
    pub fn load(dir: &Path) -> Result<Dataset, TrainError> {
        let manifest_path = dir.join(MANIFEST_NAME);
        let manifest = std::fs::read_to_string(&manifest_path).map_err(|e| {
            TrainError::Data(format!("cannot read {}: {e}", manifest_path.display()))
        })?;
        let mut items = Vec::new();
        for (ln, line) in manifest.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (name, label, split) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(n), Some(l), Some(s), None) => (n, l, s),
                _ => {
                    return Err(TrainError::Data(format!(
                        "manifest line {}: expected name<TAB>label<TAB>split",
                        ln + 1
                    )))
                }
            };
            let label: usize = label.parse().map_err(|_| {
                TrainError::Data(format!("manifest line {}: bad label '{label}'", ln + 1))
            })?;
            let split = Split::parse(split)
                .map_err(|e| TrainError::Data(format!("manifest line {}: {e}", ln + 1)))?;
            let stream = read_stream(dir.join(name))?;
            let accum = accumulate_stream(&stream)?;
            items.push(Item {
                stream,
                accum,
                label,
                split,
                name: name.to_string(),
            });
        }
        if items.is_empty() {
            return Err(TrainError::Data("manifest names no videos".into()));
        }
        let classes = items.iter().map(|i| i.label).max().unwrap() + 1;
        let stats = keyframe_stats(&items)?;
        Ok(Dataset {
            items,
            classes,
            stats,
        })
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Assembles one batch. Training mode consumes the RNG for crops and
    /// flips; test mode is a pure function of its arguments.
    pub fn make_batch(
        &self,
        indices: &[usize],
        clip: ClipSettings,
        mut rng: Option<&mut dyn RngCore>,
        clip_index: usize,
        n_clips: usize,
    ) -> Result<Batch, TrainError> {
        if indices.is_empty() {
            return Err(TrainError::Data("empty batch".into()));
        }
        let (ch, cw) = clip.crop;
        let n = indices.len();
        let frame_vol = clip.n_frames * ch * cw;
        let mut rgb = Vec::with_capacity(n * 3 * frame_vol);
        let mut mvr = Vec::with_capacity(n * 5 * frame_vol);
        let mut labels = Vec::with_capacity(n);
        for &i in indices {
            let item = self.items.get(i).ok_or_else(|| {
                TrainError::Data(format!("batch index {i} out of range ({})", self.items.len()))
            })?;
            let mode = match rng.as_deref_mut() {
                Some(r) => SampleMode::Train(r),
                None => SampleMode::Test,
            };
            let sample = sample_clip::<f64>(
                &item.stream,
                &item.accum,
                clip.n_frames,
                clip.crop,
                mode,
                clip_index,
                n_clips,
            )?;
            let raw = sample.rgb_clip.data();
            for c in 0..3 {
                let (m, s) = (self.stats.mean[c], self.stats.std[c]);
                for &v in &raw[c * frame_vol..(c + 1) * frame_vol] {
                    rgb.push((v - m) / s);
                }
            }
            mvr.extend_from_slice(&sample.mvr_clip.data());
            labels.push(item.label);
        }
        Ok(Batch {
            rgb: Tensor::from_vec(Shape::new(n, 3, clip.n_frames, ch, cw), rgb)?,
            mvr: Tensor::from_vec(Shape::new(n, 5, clip.n_frames, ch, cw), mvr)?,
            labels,
        })
    }
}

/// Mean and standard deviation per RGB channel over every keyframe pixel of
/// the training split, in [0,1] units, with a small floor on the deviation.
fn keyframe_stats(items: &[Item]) -> Result<RgbStats, TrainError> {
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    let mut count = 0usize;
    for item in items.iter().filter(|i| i.split == Split::Train) {
        for gop in item.stream.gops() {
            let f = &gop.iframe;
            for (j, &v) in f.data().iter().enumerate() {
                let c = j % 3;
                let x = v as f64 / 255.0;
                sum[c] += x;
                sq[c] += x * x;
            }
            count += f.data().len() / 3;
        }
    }
    if count == 0 {
        return Err(TrainError::Data(
            "training split is empty; cannot compute input statistics".into(),
        ));
    }
    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    for c in 0..3 {
        mean[c] = sum[c] / count as f64;
        let var = (sq[c] / count as f64 - mean[c] * mean[c]).max(0.0);
        std[c] = var.sqrt().max(1e-3);
    }
    Ok(RgbStats { mean, std })
}
