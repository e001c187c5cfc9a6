use gopnet_tensor::{concat_channels, ParamStore, PoolMode, Scalar, Tensor};
use rand_chacha::ChaCha8Rng;

use crate::config::{BottleneckConfig, DmConfig, MsbConfig};
use crate::error::ModelError;
use crate::layers::Conv3;

/// Denoising gate: attenuates each element of X by a sigmoid mask built from
/// its temporal mean (T) and a smoothed, downsampled-then-upsampled copy of
/// that mean (S): `out = sigmoid(T + S) * X`. Because the mask lies strictly
/// inside (0, 1), `|out| <= |X|` elementwise.
#[derive(Debug, Clone)]
pub struct DenoiseGate {
    pub cfg: DmConfig,
    smooth: Conv3,
}

impl DenoiseGate {
    pub fn new(cfg: DmConfig, path: &str) -> DenoiseGate {
        let c = cfg.channels;
        DenoiseGate {
            cfg,
            smooth: Conv3::new(format!("{path}.smooth"), c, c, [1, 3, 3], [1, 1, 1], [0, 1, 1]),
        }
    }

    pub fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        self.smooth.register(store, rng)
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        let [_, c, t, h, w] = x.shape().dims();
        if c != self.cfg.channels {
            return Err(ModelError::Config(format!(
                "denoising gate built for {} channels, input has {c}",
                self.cfg.channels
            )));
        }
        let t_mean = x.pool(PoolMode::TemporalMean)?; // (N,C,1,H,W)
        // Nominal pooling factor, reduced to the nearest divisor of both
        // spatial extents so tiny or odd feature maps stay legal.
        let mut r = self.cfg.pool_factor().min(h).min(w);
        while h % r != 0 || w % r != 0 {
            r -= 1;
        }
        let s = t_mean.pool(PoolMode::SpatialMean(r))?;
        let s = self.smooth.forward(store, &s)?;
        let s = s.bilinear_spatial(h, w)?;
        let gate = t_mean.add(&s)?.sigmoid().repeat_temporal(t)?;
        Ok(gate.mul(x)?)
    }

    pub fn param_count(&self) -> usize {
        self.smooth.param_count()
    }
}

/// Multi-scale block: a pointwise entry projection, an even four-way channel
/// split, cascaded spatio-temporal branches with per-branch denoising gates
/// and temporal kernels 1/3/5, a pointwise fusion, and a residual shortcut.
#[derive(Debug, Clone)]
pub struct MultiScaleBlock {
    pub cfg: MsbConfig,
    entry: Conv3,
    gates: Vec<Option<DenoiseGate>>,
    st_spatial: Vec<Conv3>,
    st_temporal: Vec<Conv3>,
    fuse: Conv3,
    shortcut: Option<Conv3>,
}

impl MultiScaleBlock {
    pub fn new(cfg: MsbConfig, path: &str) -> Result<MultiScaleBlock, ModelError> {
        cfg.validate()?;
        let b = cfg.branch_channels();
        let kernels = cfg.temporal_kernels();
        let mut gates = Vec::new();
        let mut st_spatial = Vec::new();
        let mut st_temporal = Vec::new();
        for (bi, branch) in (2..=4).enumerate() {
            let bp = format!("{path}.branch{branch}");
            gates.push(if cfg.with_dm {
                Some(DenoiseGate::new(DmConfig::new(branch, b)?, &format!("{bp}.gate")))
            } else {
                None
            });
            st_spatial.push(Conv3::new(
                format!("{bp}.spatial"),
                b,
                b,
                [1, 3, 3],
                [1, 1, 1],
                [0, 1, 1],
            ));
            let k = kernels[bi];
            st_temporal.push(Conv3::new(
                format!("{bp}.temporal"),
                b,
                b,
                [k, 1, 1],
                [1, 1, 1],
                [(k - 1) / 2, 0, 0],
            ));
        }
        let shortcut = (cfg.in_channels != cfg.out_channels)
            .then(|| Conv3::point(format!("{path}.shortcut"), cfg.in_channels, cfg.out_channels));
        Ok(MultiScaleBlock {
            entry: Conv3::point(format!("{path}.entry"), cfg.in_channels, cfg.mid_channels),
            fuse: Conv3::point(format!("{path}.fuse"), cfg.mid_channels, cfg.out_channels),
            cfg,
            gates,
            st_spatial,
            st_temporal,
            shortcut,
        })
    }

    pub fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        self.entry.register(store, rng)?;
        for bi in 0..3 {
            if let Some(g) = &self.gates[bi] {
                g.register(store, rng)?;
            }
            self.st_spatial[bi].register(store, rng)?;
            self.st_temporal[bi].register(store, rng)?;
        }
        self.fuse.register(store, rng)?;
        if let Some(sc) = &self.shortcut {
            sc.register(store, rng)?;
        }
        Ok(())
    }

    /// One branch's transform: optional denoising gate, then the spatial and
    /// temporal convolutions.
    fn branch<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        bi: usize,
        input: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        let z = match &self.gates[bi] {
            Some(g) => g.forward(store, input)?,
            None => input.clone(),
        };
        let z = self.st_spatial[bi].forward(store, &z)?;
        self.st_temporal[bi].forward(store, &z)
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        let y = self.entry.forward(store, x)?;
        let splits = y.split_channels(4)?;
        let mut outs = vec![splits[0].clone()];
        // carry = what gets added into the next branch's input.
        let mut carry: Option<Tensor<T>> = None;
        for bi in 0..3 {
            let raw = &splits[bi + 1];
            let input = match &carry {
                None => raw.clone(),
                Some(c) => raw.add(c)?,
            };
            let out = self.branch(store, bi, &input)?;
            if bi < 2 {
                // The literal (non-cascaded) reading feeds the next branch
                // with the transform of the raw split instead of `out`. For
                // the first branch input == raw, so the two coincide.
                carry = Some(if self.cfg.literal_cascade && bi > 0 {
                    self.branch(store, bi, raw)?
                } else {
                    out.clone()
                });
            }
            outs.push(out);
        }
        let z = concat_channels(&outs)?;
        let z = self.fuse.forward(store, &z)?;
        let sc = match &self.shortcut {
            Some(c) => c.forward(store, x)?,
            None => x.clone(),
        };
        Ok(z.add(&sc)?)
    }

    pub fn param_count(&self) -> usize {
        let mut n = self.entry.param_count() + self.fuse.param_count();
        for bi in 0..3 {
            if let Some(g) = &self.gates[bi] {
                n += g.param_count();
            }
            n += self.st_spatial[bi].param_count() + self.st_temporal[bi].param_count();
        }
        if let Some(sc) = &self.shortcut {
            n += sc.param_count();
        }
        n
    }
}

/// Standard pre-activation-free bottleneck: pointwise reduce, 3x3x3 conv,
/// pointwise expand, ReLU after each conv and after the residual sum. An
/// optional denoising gate sits on the middle features.
#[derive(Debug, Clone)]
pub struct Bottleneck {
    pub cfg: BottleneckConfig,
    reduce: Conv3,
    middle: Conv3,
    expand: Conv3,
    gate: Option<DenoiseGate>,
    shortcut: Option<Conv3>,
}

impl Bottleneck {
    pub fn new(cfg: BottleneckConfig, path: &str) -> Result<Bottleneck, ModelError> {
        if cfg.in_channels == 0 || cfg.mid_channels == 0 || cfg.out_channels == 0 {
            return Err(ModelError::Config("bottleneck channels must be positive".into()));
        }
        let gate = if cfg.with_dm {
            // The gate has no branch index here; use the smallest factor.
            Some(DenoiseGate::new(
                DmConfig::new(2, cfg.mid_channels)?,
                &format!("{path}.gate"),
            ))
        } else {
            None
        };
        let shortcut = (cfg.in_channels != cfg.out_channels)
            .then(|| Conv3::point(format!("{path}.shortcut"), cfg.in_channels, cfg.out_channels));
        Ok(Bottleneck {
            reduce: Conv3::point(format!("{path}.reduce"), cfg.in_channels, cfg.mid_channels),
            middle: Conv3::new(
                format!("{path}.middle"),
                cfg.mid_channels,
                cfg.mid_channels,
                [3, 3, 3],
                [1, 1, 1],
                [1, 1, 1],
            ),
            expand: Conv3::point(format!("{path}.expand"), cfg.mid_channels, cfg.out_channels),
            gate,
            shortcut,
            cfg,
        })
    }

    pub fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        self.reduce.register(store, rng)?;
        self.middle.register(store, rng)?;
        if let Some(g) = &self.gate {
            g.register(store, rng)?;
        }
        self.expand.register(store, rng)?;
        if let Some(sc) = &self.shortcut {
            sc.register(store, rng)?;
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        let z = self.reduce.forward(store, x)?.relu();
        let z = self.middle.forward(store, &z)?.relu();
        let z = match &self.gate {
            Some(g) => g.forward(store, &z)?,
            None => z,
        };
        let z = self.expand.forward(store, &z)?;
        let sc = match &self.shortcut {
            Some(c) => c.forward(store, x)?,
            None => x.clone(),
        };
        Ok(z.add(&sc)?.relu())
    }

    pub fn param_count(&self) -> usize {
        let mut n =
            self.reduce.param_count() + self.middle.param_count() + self.expand.param_count();
        if let Some(g) = &self.gate {
            n += g.param_count();
        }
        if let Some(sc) = &self.shortcut {
            n += sc.param_count();
        }
        n
    }
}
