use crate::error::ModelError;

/// Configuration of one denoising gate: which multi-scale branch it sits on
/// (branches 2-4) and how many channels it sees. The spatial pooling factor
/// is `2^(branch-1)`, capped at forward time to the feature's spatial extent
/// so small desk-scale maps remain valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmConfig {
    pub branch: usize,
    pub channels: usize,
}

impl DmConfig {
    pub fn new(branch: usize, channels: usize) -> Result<DmConfig, ModelError> {
        if !(2..=4).contains(&branch) {
            return Err(ModelError::Config(format!(
                "denoising gate branch must be 2, 3 or 4, got {branch}"
            )));
        }
        if channels == 0 {
            return Err(ModelError::Config("denoising gate needs at least one channel".into()));
        }
        Ok(DmConfig { branch, channels })
    }

    /// Nominal spatial pooling factor: 2, 4 or 8 for branches 2, 3, 4.
    pub fn pool_factor(&self) -> usize {
        1 << (self.branch - 1)
    }
}

/// Configuration of one multi-scale block: entry projection, four-way split
/// with cascaded spatio-temporal branches, fusion projection, residual
/// shortcut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsbConfig {
    pub in_channels: usize,
    pub mid_channels: usize,
    pub out_channels: usize,
    /// Apply the denoising gate in front of each branch's convolutions.
    pub with_dm: bool,
    /// Use temporal kernel 3 on every branch instead of the 1/3/5 ladder.
    pub fixed_temporal_kernel: bool,
    /// Feed branches 3 and 4 with the transform of the *raw* previous split
    /// rather than the previous branch's actual (cascaded) output.
    pub literal_cascade: bool,
}

impl MsbConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mid_channels == 0 || self.mid_channels % 4 != 0 {
            return Err(ModelError::Config(format!(
                "multi-scale block mid channels must be a positive multiple of 4, got {}",
                self.mid_channels
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(ModelError::Config("multi-scale block channels must be positive".into()));
        }
        Ok(())
    }

    pub fn branch_channels(&self) -> usize {
        self.mid_channels / 4
    }

    /// Temporal kernel extents for branches 2, 3, 4.
    pub fn temporal_kernels(&self) -> [usize; 3] {
        if self.fixed_temporal_kernel {
            [3, 3, 3]
        } else {
            [1, 3, 5]
        }
    }
}

/// Configuration of a plain bottleneck block (the RGB stream's unit), with
/// an optional denoising gate on the middle features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottleneckConfig {
    pub in_channels: usize,
    pub mid_channels: usize,
    pub out_channels: usize,
    pub with_dm: bool,
}

/// Configuration of one motion-complement unit: channel width at its stage
/// and the bottleneck ratio of its spatial attention (C -> C/ratio -> C).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmcConfig {
    pub channels: usize,
    pub ratio: usize,
    /// Force both attention maps to one, reducing the unit to `F_I + F_P`.
    pub additive_only: bool,
}

impl SmcConfig {
    pub fn new(channels: usize, ratio: usize) -> Result<SmcConfig, ModelError> {
        let cfg = SmcConfig {
            channels,
            ratio,
            additive_only: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.ratio == 0 || self.channels == 0 || self.channels % self.ratio != 0 {
            return Err(ModelError::Config(format!(
                "motion-complement channels {} must be a positive multiple of ratio {}",
                self.channels, self.ratio
            )));
        }
        Ok(())
    }

    /// The full-scale channel plan per backbone layer 1-4, ratio 16.
    pub fn full_scale(layer: usize) -> Result<SmcConfig, ModelError> {
        if !(1..=4).contains(&layer) {
            return Err(ModelError::Config(format!("layer must be 1..=4, got {layer}")));
        }
        SmcConfig::new(256 << (layer - 1), 16)
    }

    pub fn hidden_channels(&self) -> usize {
        self.channels / self.ratio
    }
}

/// Configuration of the cross-modal attention fusion: input width and key
/// dimension shared by all six projections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmaConfig {
    pub channels: usize,
    pub d_k: usize,
}

impl Default for CmaConfig {
    /// Full-scale defaults: 2048-channel final features, 128-dim keys.
    fn default() -> CmaConfig {
        CmaConfig {
            channels: 2048,
            d_k: 128,
        }
    }
}

/// Which input streams the model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    RgbOnly,
    MvrOnly,
    Both,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::RgbOnly => "rgb",
            Modality::MvrOnly => "mvr",
            Modality::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Modality, ModelError> {
        match s {
            "rgb" => Ok(Modality::RgbOnly),
            "mvr" => Ok(Modality::MvrOnly),
            "both" => Ok(Modality::Both),
            other => Err(ModelError::Parse(format!(
                "unknown modality '{other}', expected rgb, mvr or both"
            ))),
        }
    }
}

/// Whole-network configuration: stage plan, block choices, interaction
/// units, heads. The default is the reduced desk-scale plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub classes: usize,
    /// Channel width per backbone stage; spatial extent halves at each
    /// stage entry after the first.
    pub widths: Vec<usize>,
    pub blocks_per_stage: usize,
    /// Nominal clip length the model is trained on (documentation only; the
    /// forward pass accepts any T).
    pub clip_len: usize,
    pub smc_ratio: usize,
    pub d_k: usize,
    pub modality: Modality,
    pub use_smc: bool,
    pub use_cma: bool,
    pub smc_additive_only: bool,
    /// Multi-scale blocks in the motion stream (plain bottlenecks when off).
    pub mvr_msb: bool,
    pub msb_with_dm: bool,
    pub msb_fixed_temporal_kernel: bool,
    pub msb_literal_cascade: bool,
    /// Denoising gate inside the motion stream's bottlenecks (only
    /// meaningful when `mvr_msb` is off).
    pub bottleneck_with_dm: bool,
    /// Supervise the per-stream heads in addition to the fused score.
    pub supervise_streams: bool,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            classes: 5,
            widths: vec![16, 32, 64, 128],
            blocks_per_stage: 1,
            clip_len: 8,
            smc_ratio: 16,
            d_k: 32,
            modality: Modality::Both,
            use_smc: true,
            use_cma: true,
            smc_additive_only: false,
            mvr_msb: true,
            msb_with_dm: true,
            msb_fixed_temporal_kernel: false,
            msb_literal_cascade: false,
            bottleneck_with_dm: false,
            supervise_streams: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.classes < 2 {
            return Err(ModelError::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.widths.is_empty() {
            return Err(ModelError::Config("stage plan must have at least one stage".into()));
        }
        if self.blocks_per_stage == 0 || self.clip_len == 0 || self.d_k == 0 {
            return Err(ModelError::Config(
                "blocks per stage, clip length and key dimension must be positive".into(),
            ));
        }
        for (s, &w) in self.widths.iter().enumerate() {
            let has_mvr = self.modality != Modality::RgbOnly;
            if has_mvr && self.mvr_msb && w % 16 != 0 {
                return Err(ModelError::Config(format!(
                    "stage {}: width {w} must be a multiple of 16 for the four-way multi-scale split",
                    s + 1
                )));
            }
            if w == 0 || w % 4 != 0 {
                return Err(ModelError::Config(format!(
                    "stage {}: width {w} must be a positive multiple of 4 (bottleneck ratio)",
                    s + 1
                )));
            }
            if self.use_smc && w % self.smc_ratio != 0 {
                return Err(ModelError::Config(format!(
                    "stage {}: width {w} not divisible by attention ratio {}",
                    s + 1,
                    self.smc_ratio
                )));
            }
        }
        if (self.use_smc || self.use_cma) && self.modality != Modality::Both {
            return Err(ModelError::Config(
                "stream interaction units require both modalities".into(),
            ));
        }
        Ok(())
    }

    pub fn final_width(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    /// Serializes to the structured text used by config files and the
    /// checkpoint header.
    pub fn to_kv_lines(&self) -> String {
        let widths = self
            .widths
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "classes={}\nwidths={}\nblocks_per_stage={}\nclip_len={}\nsmc_ratio={}\nd_k={}\n\
             modality={}\nuse_smc={}\nuse_cma={}\nsmc_additive_only={}\nmvr_msb={}\n\
             msb_with_dm={}\nmsb_fixed_temporal_kernel={}\nmsb_literal_cascade={}\n\
             bottleneck_with_dm={}\nsupervise_streams={}\n",
            self.classes,
            widths,
            self.blocks_per_stage,
            self.clip_len,
            self.smc_ratio,
            self.d_k,
            self.modality.as_str(),
            self.use_smc,
            self.use_cma,
            self.smc_additive_only,
            self.mvr_msb,
            self.msb_with_dm,
            self.msb_fixed_temporal_kernel,
            self.msb_literal_cascade,
            self.bottleneck_with_dm,
            self.supervise_streams,
        )
    }

    /// Parses `key=value` lines produced by [`to_kv_lines`]. Unknown keys
    /// are rejected; missing keys keep their defaults.
    pub fn from_kv_lines(text: &str) -> Result<ModelConfig, ModelError> {
        let mut cfg = ModelConfig::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ModelError::Parse(format!("line {}: expected key=value, got '{line}'", ln + 1))
            })?;
            cfg.apply_kv(key.trim(), value.trim())
                .map_err(|e| ModelError::Parse(format!("line {}: {e}", ln + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` setting.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        fn num(key: &str, value: &str) -> Result<usize, ModelError> {
            value
                .parse()
                .map_err(|_| ModelError::Parse(format!("{key}: invalid number '{value}'")))
        }
        fn flag(key: &str, value: &str) -> Result<bool, ModelError> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(ModelError::Parse(format!(
                    "{key}: expected true or false, got '{value}'"
                ))),
            }
        }
        match key {
            "classes" => self.classes = num(key, value)?,
            "widths" => {
                self.widths = value
                    .split(',')
                    .map(|p| num("widths", p.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "blocks_per_stage" => self.blocks_per_stage = num(key, value)?,
            "clip_len" => self.clip_len = num(key, value)?,
            "smc_ratio" => self.smc_ratio = num(key, value)?,
            "d_k" => self.d_k = num(key, value)?,
            "modality" => self.modality = Modality::parse(value)?,
            "use_smc" => self.use_smc = flag(key, value)?,
            "use_cma" => self.use_cma = flag(key, value)?,
            "smc_additive_only" => self.smc_additive_only = flag(key, value)?,
            "mvr_msb" => self.mvr_msb = flag(key, value)?,
            "msb_with_dm" => self.msb_with_dm = flag(key, value)?,
            "msb_fixed_temporal_kernel" => self.msb_fixed_temporal_kernel = flag(key, value)?,
            "msb_literal_cascade" => self.msb_literal_cascade = flag(key, value)?,
            "bottleneck_with_dm" => self.bottleneck_with_dm = flag(key, value)?,
            "supervise_streams" => self.supervise_streams = flag(key, value)?,
            other => {
                return Err(ModelError::Parse(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }
}
