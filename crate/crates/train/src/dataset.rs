//! Synthetic labeled video generator.
//!
//! Five motion classes over per-video random textures:
//!
//! | label | name               | appearance        | motion                      |
//! |-------|--------------------|-------------------|-----------------------------|
//! | 0     | translate_right    | vertical stripes  | whole scene +2 px/frame in x|
//! | 1     | translate_down     | horizontal bars   | whole scene +2 px/frame in y|
//! | 2     | oscillate_vertical | diagonal stripes  | y sweeps 0,+1..+3..0,-1..-3 |
//! | 3     | translate_up       | horizontal bars   | whole scene -2 px/frame in y|
//! | 4     | grow               | rings             | zoom in, 4% per frame       |
//!
//! Classes 1 and 3 share an appearance family and differ only in motion
//! direction, so a single static frame cannot separate them. The oscillation
//! period equals the group-of-pictures size, so class 2 revisits offset zero
//! exactly at every keyframe. Classes 0-3 shift toroidally over a texture
//! that tiles, so motion search recovers the true translation almost
//! everywhere.
//!
//! Horizontal flips negate horizontal motion, so class labels here hang off
//! statistics a flip cannot touch: vertical motion (sign, growth and
//! oscillation), radial structure, and for class 0 sustained horizontal
//! motion of either direction. The flip augmentation applied during clip
//! sampling therefore never moves a video across class boundaries.

use std::fmt::Write as _;
use std::path::Path;

use gopnet_codec::{encode, write_stream, Frame, GopStream, RawVideo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TrainError;

pub const CLASS_NAMES: [&str; 5] = [
    "translate_right",
    "translate_down",
    "oscillate_vertical",
    "translate_up",
    "grow",
];

pub const MANIFEST_NAME: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub videos_per_class: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub gop_size: usize,
    pub search_range: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> DatasetConfig {
        DatasetConfig {
            videos_per_class: 20,
            frames: 24,
            height: 64,
            width: 64,
            gop_size: 12,
            search_range: 4,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.videos_per_class < 5 {
            return Err(TrainError::Config(format!(
                "need at least 5 videos per class for a train/val/test split, got {}",
                self.videos_per_class
            )));
        }
        if self.frames <= self.gop_size {
            return Err(TrainError::Config(format!(
                "want at least two groups of pictures: {} frames with group size {}",
                self.frames, self.gop_size
            )));
        }
        if self.height % 16 != 0 || self.width % 16 != 0 {
            return Err(TrainError::Config(format!(
                "frame extents {}x{} must be multiples of the macroblock size 16",
                self.height, self.width
            )));
        }
        if self.search_range == 0 {
            return Err(TrainError::Config("search range must be positive".into()));
        }
        Ok(())
    }

    /// Split sizes per class: 70% train, 10% val, remainder test.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let v = self.videos_per_class;
        let n_train = (v * 7) / 10;
        let n_val = (v / 10).max(1);
        (n_train, n_val, v - n_train - n_val)
    }
}

/// Per-frame whole-scene offset (dy, dx) for translation/oscillation classes.
fn offsets(class: usize, t: usize, gop_size: usize) -> (i64, i64) {
    match class {
        0 => (0, 2 * t as i64),
        1 => (2 * t as i64, 0),
        2 => (oscillation(t, gop_size), 0),
        3 => (-2 * t as i64, 0),
        _ => (0, 0),
    }
}

/// The oscillation waveform: 0,1,2,3,2,1,0,-1,-2,-3,-2,-1 for period 12.
/// Zero at every multiple of the period, so the keyframes of an oscillating
/// video all show the unshifted scene.
fn oscillation(t: usize, period: usize) -> i64 {
    let phase = (t % period) as i64;
    let half = (period / 2) as i64;
    let amplitude = (half / 2).clamp(1, 3);
    if phase <= half {
        phase.min(half - phase).min(amplitude)
    } else {
        -((phase - half).min(period as i64 - phase).min(amplitude))
    }
}

/// One video's texture: a class-specific stripe family plus toroidal value
/// noise, with per-video random phases, gains and colors. Values in [0,255].
struct Texture {
    h: usize,
    w: usize,
    base: Vec<f64>, // interleaved rgb
}

impl Texture {
    fn build(class: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Texture {
        let grid = 8usize;
        let (gh, gw) = (h / grid, w / grid);
        let noise_grid: Vec<f64> = (0..gh * gw).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phase: f64 = rng.gen_range(0.0..8.0);
        let stripe_gain: f64 = rng.gen_range(0.7..1.0);
        let noise_gain: f64 = rng.gen_range(0.5..0.9);
        let color: [f64; 3] = [
            rng.gen_range(0.6..1.0),
            rng.gen_range(0.6..1.0),
            rng.gen_range(0.6..1.0),
        ];
        let tau = std::f64::consts::TAU;
        let mut base = vec![0.0; h * w * 3];
        for y in 0..h {
            for x in 0..w {
                let stripe = match class {
                    0 => (tau * (x as f64 + phase) / 8.0).sin(),
                    1 | 3 => (tau * (y as f64 + phase) / 8.0).sin(),
                    2 => (tau * ((x + y) as f64 + phase) / 8.0).sin(),
                    _ => {
                        let dy = y as f64 - h as f64 / 2.0;
                        let dx = x as f64 - w as f64 / 2.0;
                        (tau * ((dy * dy + dx * dx).sqrt() + phase) / 8.0).sin()
                    }
                };
                // bilinear toroidal interpolation of the coarse noise grid
                let ny = y as f64 / grid as f64;
                let nx = x as f64 / grid as f64;
                let (iy, ix) = (ny.floor() as usize % gh, nx.floor() as usize % gw);
                let (fy, fx) = (ny.fract(), nx.fract());
                let g = |a: usize, b: usize| noise_grid[(a % gh) * gw + (b % gw)];
                let noise = g(iy, ix) * (1.0 - fy) * (1.0 - fx)
                    + g(iy, ix + 1) * (1.0 - fy) * fx
                    + g(iy + 1, ix) * fy * (1.0 - fx)
                    + g(iy + 1, ix + 1) * fy * fx;
                for c in 0..3 {
                    let v = 128.0 + (60.0 * stripe * stripe_gain + 40.0 * noise * noise_gain) * color[c];
                    base[(y * w + x) * 3 + c] = v.clamp(0.0, 255.0);
                }
            }
        }
        Texture { h, w, base }
    }

    fn at(&self, y: i64, x: i64, c: usize) -> f64 {
        let yy = y.rem_euclid(self.h as i64) as usize;
        let xx = x.rem_euclid(self.w as i64) as usize;
        self.base[(yy * self.w + xx) * 3 + c]
    }

    /// Bilinear sample with edge clamping, for the zooming class.
    fn sample(&self, y: f64, x: f64, c: usize) -> f64 {
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(self.h - 1), (x0 + 1).min(self.w - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let p = |yy: usize, xx: usize| self.base[(yy * self.w + xx) * 3 + c];
        p(y0, x0) * (1.0 - fy) * (1.0 - fx)
            + p(y0, x1) * (1.0 - fy) * fx
            + p(y1, x0) * fy * (1.0 - fx)
            + p(y1, x1) * fy * fx
    }
}

/// Deterministically synthesizes video `index` of `class`.
pub fn synth_video(cfg: &DatasetConfig, class: usize, index: usize) -> Result<RawVideo, TrainError> {
    cfg.validate()?;
    if class >= CLASS_NAMES.len() {
        return Err(TrainError::Config(format!(
            "class {class} out of range, have {}",
            CLASS_NAMES.len()
        )));
    }
    let seed = cfg
        .seed
        .wrapping_add((class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tex = Texture::build(class, cfg.height, cfg.width, &mut rng);
    let mut frames = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let frame = if class == 4 {
            let scale = 1.0 + 0.04 * t as f64;
            let (cy, cx) = (cfg.height as f64 / 2.0, cfg.width as f64 / 2.0);
            Frame::from_fn(cfg.height, cfg.width, |y, x, c| {
                let sy = (y as f64 - cy) / scale + cy;
                let sx = (x as f64 - cx) / scale + cx;
                tex.sample(sy, sx, c).round().clamp(0.0, 255.0) as u8
            })
        } else {
            let (oy, ox) = offsets(class, t, cfg.gop_size);
            Frame::from_fn(cfg.height, cfg.width, |y, x, c| {
                tex.at(y as i64 - oy, x as i64 - ox, c).round().clamp(0.0, 255.0) as u8
            })
        };
        frames.push(frame);
    }
    Ok(RawVideo::new(frames, 25.0)?)
}

/// Encoded form of [`synth_video`].
pub fn synth_stream(cfg: &DatasetConfig, class: usize, index: usize) -> Result<GopStream, TrainError> {
    let video = synth_video(cfg, class, index)?;
    Ok(encode(&video, cfg.gop_size, cfg.search_range)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSummary {
    pub videos: usize,
    pub classes: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Generates the full dataset under `out_dir`: one encoded stream per video
/// plus a tab-separated manifest of `relative-path<TAB>label<TAB>split`.
pub fn generate_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<DatasetSummary, TrainError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let (n_train, n_val, n_test) = cfg.split_sizes();
    let mut manifest = String::new();
    for class in 0..CLASS_NAMES.len() {
        for index in 0..cfg.videos_per_class {
            let stream = synth_stream(cfg, class, index)?;
            let name = format!("{}_{index:03}.gops", CLASS_NAMES[class]);
            write_stream(&stream, out_dir.join(&name))?;
            let split = if index < n_train {
                "train"
            } else if index < n_train + n_val {
                "val"
            } else {
                "test"
            };
            writeln!(manifest, "{name}\t{class}\t{split}").expect("string write");
        }
    }
    std::fs::write(out_dir.join(MANIFEST_NAME), manifest)?;
    Ok(DatasetSummary {
        videos: CLASS_NAMES.len() * cfg.videos_per_class,
        classes: CLASS_NAMES.len(),
        train: n_train * CLASS_NAMES.len(),
        val: n_val * CLASS_NAMES.len(),
        test: n_test * CLASS_NAMES.len(),
    })
}
