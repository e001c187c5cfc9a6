use gopnet_tensor::{ParamStore, Scalar, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blocks::{Bottleneck, MultiScaleBlock};
use crate::config::{BottleneckConfig, CmaConfig, Modality, ModelConfig, MsbConfig, SmcConfig};
use crate::error::ModelError;
use crate::head::{fuse_scores, ClassifierHead};
use crate::interact::{CrossModalAttention, MotionComplement};
use crate::layers::Conv3;

/// Channels of an appearance clip (red, green, blue).
pub const RGB_CHANNELS: usize = 3;
/// Channels of a motion clip (dy, dx, three residual planes).
pub const MVR_CHANNELS: usize = 5;

enum Block {
    Multi(MultiScaleBlock),
    Plain(Bottleneck),
}

impl Block {
    fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        match self {
            Block::Multi(b) => b.register(store, rng),
            Block::Plain(b) => b.register(store, rng),
        }
    }

    fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        match self {
            Block::Multi(b) => b.forward(store, x),
            Block::Plain(b) => b.forward(store, x),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Block::Multi(b) => b.param_count(),
            Block::Plain(b) => b.param_count(),
        }
    }
}

struct Stage {
    /// Pointwise stride-2 projection into this stage's width; absent on the
    /// first stage, whose width is set by the stem.
    entry: Option<Conv3>,
    blocks: Vec<Block>,
}

struct Stream {
    stem: Conv3,
    stages: Vec<Stage>,
}

impl Stream {
    /// Builds one backbone stream. `multi_scale` selects multi-scale blocks
    /// (motion stream) over plain bottlenecks.
    fn new(prefix: &str, in_channels: usize, cfg: &ModelConfig, multi_scale: bool) -> Result<Stream, ModelError> {
        let stem = Conv3::new(
            format!("{prefix}.stem"),
            in_channels,
            cfg.widths[0],
            [1, 3, 3],
            [1, 2, 2],
            [0, 1, 1],
        );
        let mut stages = Vec::new();
        for (s, &width) in cfg.widths.iter().enumerate() {
            let entry = (s > 0).then(|| {
                Conv3::new(
                    format!("{prefix}.s{}.entry", s + 1),
                    cfg.widths[s - 1],
                    width,
                    [1, 1, 1],
                    [1, 2, 2],
                    [0, 0, 0],
                )
            });
            let mut blocks = Vec::new();
            for b in 0..cfg.blocks_per_stage {
                let path = format!("{prefix}.s{}.b{}", s + 1, b + 1);
                blocks.push(if multi_scale {
                    Block::Multi(MultiScaleBlock::new(
                        MsbConfig {
                            in_channels: width,
                            mid_channels: width / 4,
                            out_channels: width,
                            with_dm: cfg.msb_with_dm,
                            fixed_temporal_kernel: cfg.msb_fixed_temporal_kernel,
                            literal_cascade: cfg.msb_literal_cascade,
                        },
                        &path,
                    )?)
                } else {
                    Block::Plain(Bottleneck::new(
                        BottleneckConfig {
                            in_channels: width,
                            mid_channels: width / 4,
                            out_channels: width,
                            with_dm: !multi_scale && prefix == "mvr" && cfg.bottleneck_with_dm,
                        },
                        &path,
                    )?)
                });
            }
            stages.push(Stage { entry, blocks });
        }
        Ok(Stream { stem, stages })
    }

    fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        self.stem.register(store, rng)?;
        for stage in &self.stages {
            if let Some(e) = &stage.entry {
                e.register(store, rng)?;
            }
            for b in &stage.blocks {
                b.register(store, rng)?;
            }
        }
        Ok(())
    }

    fn forward_stage<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        s: usize,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        let stage = &self.stages[s];
        let mut z = match &stage.entry {
            Some(e) => e.forward(store, x)?,
            None => x.clone(),
        };
        for b in &stage.blocks {
            z = b.forward(store, &z)?;
        }
        Ok(z)
    }

    fn param_count(&self) -> usize {
        let mut n = self.stem.param_count();
        for stage in &self.stages {
            if let Some(e) = &stage.entry {
                n += e.param_count();
            }
            n += stage.blocks.iter().map(Block::param_count).sum::<usize>();
        }
        n
    }
}

/// Scores produced by one forward pass. Heads that do not exist under the
/// configured modality are `None`; `score` always holds the averaged result
/// of the present heads, shaped (N, classes, 1, 1, 1).
#[derive(Debug, Clone)]
pub struct ModelOutput<T: Scalar = f64> {
    pub z_rgb: Option<Tensor<T>>,
    pub z_mvr: Option<Tensor<T>>,
    pub z_fused: Option<Tensor<T>>,
    pub score: Tensor<T>,
}

/// The full two-stream recognizer: an appearance backbone over RGB clips, a
/// motion backbone over motion/residual clips, per-stage motion-complement
/// units, cross-modal attention fusion, and one classifier head per stream
/// plus one on the fused features.
pub struct TwoStreamModel<T: Scalar = f64> {
    pub cfg: ModelConfig,
    rgb: Option<Stream>,
    mvr: Option<Stream>,
    smc: Vec<MotionComplement>,
    cma: Option<CrossModalAttention>,
    head_rgb: Option<ClassifierHead>,
    head_mvr: Option<ClassifierHead>,
    head_fused: Option<ClassifierHead>,
    pub params: ParamStore<T>,
}

impl<T: Scalar> TwoStreamModel<T> {
    /// Builds the model and initializes every parameter deterministically
    /// from `seed`: weights are Kaiming-uniform, biases zero, drawn in a
    /// fixed registration order (appearance stream, motion stream,
    /// interaction units, fusion, heads).
    pub fn build(cfg: ModelConfig, seed: u64) -> Result<TwoStreamModel<T>, ModelError> {
        cfg.validate()?;
        let has_rgb = cfg.modality != Modality::MvrOnly;
        let has_mvr = cfg.modality != Modality::RgbOnly;
        let rgb = has_rgb
            .then(|| Stream::new("rgb", RGB_CHANNELS, &cfg, false))
            .transpose()?;
        let mvr = has_mvr
            .then(|| Stream::new("mvr", MVR_CHANNELS, &cfg, cfg.mvr_msb))
            .transpose()?;
        let mut smc = Vec::new();
        if cfg.use_smc {
            for (s, &width) in cfg.widths.iter().enumerate() {
                let mut sc = SmcConfig::new(width, cfg.smc_ratio)?;
                sc.additive_only = cfg.smc_additive_only;
                smc.push(MotionComplement::new(sc, &format!("smc.s{}", s + 1))?);
            }
        }
        let cma = cfg
            .use_cma
            .then(|| {
                CrossModalAttention::new(
                    CmaConfig {
                        channels: cfg.final_width(),
                        d_k: cfg.d_k,
                    },
                    "cma",
                )
            })
            .transpose()?;
        let head_rgb =
            has_rgb.then(|| ClassifierHead::new("head.rgb", cfg.final_width(), cfg.classes));
        let head_mvr =
            has_mvr.then(|| ClassifierHead::new("head.mvr", cfg.final_width(), cfg.classes));
        let head_fused = cfg
            .use_cma
            .then(|| ClassifierHead::new("head.fused", cfg.d_k, cfg.classes));

        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(s) = &rgb {
            s.register(&mut params, &mut rng)?;
        }
        if let Some(s) = &mvr {
            s.register(&mut params, &mut rng)?;
        }
        for unit in &smc {
            unit.register(&mut params, &mut rng)?;
        }
        if let Some(c) = &cma {
            c.register(&mut params, &mut rng)?;
        }
        for head in [&head_rgb, &head_mvr, &head_fused].into_iter().flatten() {
            head.register(&mut params, &mut rng)?;
        }
        Ok(TwoStreamModel {
            cfg,
            rgb,
            mvr,
            smc,
            cma,
            head_rgb,
            head_mvr,
            head_fused,
            params,
        })
    }

    /// Forward pass against an arbitrary parameter store (used by training,
    /// checkpoint loading and finite-difference checks alike).
    pub fn forward_with(
        &self,
        store: &ParamStore<T>,
        rgb_clip: Option<&Tensor<T>>,
        mvr_clip: Option<&Tensor<T>>,
    ) -> Result<ModelOutput<T>, ModelError> {
        match (&self.rgb, rgb_clip) {
            (Some(_), None) => {
                return Err(ModelError::Config("model expects an appearance clip".into()))
            }
            (None, Some(_)) => {
                return Err(ModelError::Config("model takes no appearance clip".into()))
            }
            _ => {}
        }
        match (&self.mvr, mvr_clip) {
            (Some(_), None) => {
                return Err(ModelError::Config("model expects a motion clip".into()))
            }
            (None, Some(_)) => return Err(ModelError::Config("model takes no motion clip".into())),
            _ => {}
        }
        // Stems follow the usual backbone recipe: convolution then rectifier.
        // The rectifier matters doubly for the motion stream, whose blocks
        // are deliberately gate-based rather than rectified: it lets signed,
        // zero-mean motion inputs form magnitude features that survive the
        // global pooling in the heads.
        let mut f_rgb = match (&self.rgb, rgb_clip) {
            (Some(s), Some(x)) => Some(s.stem.forward(store, x)?.relu()),
            _ => None,
        };
        let mut f_mvr = match (&self.mvr, mvr_clip) {
            (Some(s), Some(x)) => Some(s.stem.forward(store, x)?.relu()),
            _ => None,
        };
        for s in 0..self.cfg.widths.len() {
            if let (Some(stream), Some(f)) = (&self.rgb, &f_rgb) {
                f_rgb = Some(stream.forward_stage(store, s, f)?);
            }
            if let (Some(stream), Some(f)) = (&self.mvr, &f_mvr) {
                f_mvr = Some(stream.forward_stage(store, s, f)?);
            }
            if let Some(unit) = self.smc.get(s) {
                let (fi, fp) = (f_rgb.as_ref().unwrap(), f_mvr.as_ref().unwrap());
                f_rgb = Some(unit.forward(store, fi, fp)?);
            }
        }
        let z_rgb = match (&self.head_rgb, &f_rgb) {
            (Some(h), Some(f)) => Some(h.forward(store, f)?),
            _ => None,
        };
        let z_mvr = match (&self.head_mvr, &f_mvr) {
            (Some(h), Some(f)) => Some(h.forward(store, f)?),
            _ => None,
        };
        let z_fused = match (&self.cma, &self.head_fused) {
            (Some(cma), Some(h)) => {
                let fused =
                    cma.forward(store, f_rgb.as_ref().unwrap(), f_mvr.as_ref().unwrap())?;
                Some(h.forward(store, &fused)?)
            }
            _ => None,
        };
        let present: Vec<&Tensor<T>> = [&z_rgb, &z_mvr, &z_fused].into_iter().flatten().collect();
        let score = fuse_scores(&present)?;
        Ok(ModelOutput {
            z_rgb,
            z_mvr,
            z_fused,
            score,
        })
    }

    /// Forward pass against the model's own parameters.
    pub fn forward(
        &self,
        rgb_clip: Option<&Tensor<T>>,
        mvr_clip: Option<&Tensor<T>>,
    ) -> Result<ModelOutput<T>, ModelError> {
        self.forward_with(&self.params, rgb_clip, mvr_clip)
    }

    /// Closed-form parameter count; always equals `params.param_count()`.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        for s in [&self.rgb, &self.mvr].into_iter().flatten() {
            n += s.param_count();
        }
        n += self.smc.iter().map(MotionComplement::param_count).sum::<usize>();
        if let Some(c) = &self.cma {
            n += c.param_count();
        }
        for h in [&self.head_rgb, &self.head_mvr, &self.head_fused].into_iter().flatten() {
            n += h.param_count();
        }
        n
    }
}
