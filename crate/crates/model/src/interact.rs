use gopnet_tensor::{ParamStore, Scalar, Shape, Tensor};
use rand_chacha::ChaCha8Rng;

use crate::config::{CmaConfig, SmcConfig};
use crate::error::ModelError;
use crate::layers::Conv3;

/// Complements appearance features with gated motion features.
///
/// The motion tensor is re-weighted twice before being added to the
/// appearance tensor: a spatial attention map built from a channel
/// squeeze/expand over max-pooled motion features, then a per-channel
/// weight derived from a small convolution across the channel profile of
/// the globally max-pooled result. With `additive_only` the whole gating
/// apparatus is dropped and the two tensors are summed directly.
#[derive(Debug, Clone)]
pub struct MotionComplement {
    pub cfg: SmcConfig,
    att_reduce: Option<Conv3>,
    att_expand: Option<Conv3>,
    channel_mix: Option<Conv3>,
}

impl MotionComplement {
    pub fn new(cfg: SmcConfig, path: &str) -> Result<MotionComplement, ModelError> {
        cfg.validate()?;
        if cfg.additive_only {
            return Ok(MotionComplement {
                cfg,
                att_reduce: None,
                att_expand: None,
                channel_mix: None,
            });
        }
        let c = cfg.channels;
        let hidden = cfg.hidden_channels();
        Ok(MotionComplement {
            att_reduce: Some(Conv3::point(format!("{path}.att_reduce"), c, hidden)),
            att_expand: Some(Conv3::point(format!("{path}.att_expand"), hidden, c)),
            channel_mix: Some(Conv3::new(
                format!("{path}.channel_mix"),
                1,
                1,
                [3, 1, 1],
                [1, 1, 1],
                [1, 0, 0],
            )),
            cfg,
        })
    }

    pub fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        for conv in [&self.att_reduce, &self.att_expand, &self.channel_mix].into_iter().flatten() {
            conv.register(store, rng)?;
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        appearance: &Tensor<T>,
        motion: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        if appearance.shape() != motion.shape() {
            return Err(ModelError::Config(format!(
                "interaction inputs differ: {} vs {}",
                appearance.shape(),
                motion.shape()
            )));
        }
        let [n, c, _, _, _] = motion.shape().dims();
        if c != self.cfg.channels {
            return Err(ModelError::Config(format!(
                "interaction built for {} channels, input has {c}",
                self.cfg.channels
            )));
        }
        if self.cfg.additive_only {
            return Ok(appearance.add(motion)?);
        }
        let (reduce, expand, mix) = (
            self.att_reduce.as_ref().unwrap(),
            self.att_expand.as_ref().unwrap(),
            self.channel_mix.as_ref().unwrap(),
        );
        let pooled = motion.max_pool3_same();
        let att = expand.forward(store, &reduce.forward(store, &pooled)?.relu())?;
        let refined = motion.mul(&att.sigmoid())?;

        // Channel profile: global max per channel, mixed across neighbouring
        // channels by viewing (N,C,1,1,1) as a length-C temporal signal.
        let profile = refined.global_max().reshape(Shape::new(n, 1, c, 1, 1))?;
        let weight = mix
            .forward(store, &profile)?
            .sigmoid()
            .reshape(Shape::new(n, c, 1, 1, 1))?;
        Ok(appearance.add(&refined.mul(&weight)?)?)
    }

    pub fn param_count(&self) -> usize {
        [&self.att_reduce, &self.att_expand, &self.channel_mix]
            .into_iter()
            .flatten()
            .map(Conv3::param_count)
            .sum()
    }
}

/// Bidirectional cross-attention between the two streams.
///
/// Each stream is projected to a shared `d_k`-channel space; queries from one
/// stream attend over keys/values of the other across all spatio-temporal
/// positions, and the two attended tensors are summed into a fused feature
/// map of `d_k` channels.
#[derive(Debug, Clone)]
pub struct CrossModalAttention {
    pub cfg: CmaConfig,
    q_rgb: Conv3,
    k_rgb: Conv3,
    v_rgb: Conv3,
    q_mvr: Conv3,
    k_mvr: Conv3,
    v_mvr: Conv3,
}

impl CrossModalAttention {
    pub fn new(cfg: CmaConfig, path: &str) -> Result<CrossModalAttention, ModelError> {
        if cfg.channels == 0 || cfg.d_k == 0 {
            return Err(ModelError::Config(
                "cross-attention channels and d_k must be positive".into(),
            ));
        }
        let (c, d) = (cfg.channels, cfg.d_k);
        Ok(CrossModalAttention {
            q_rgb: Conv3::point(format!("{path}.q_rgb"), c, d),
            k_rgb: Conv3::point(format!("{path}.k_rgb"), c, d),
            v_rgb: Conv3::point(format!("{path}.v_rgb"), c, d),
            q_mvr: Conv3::point(format!("{path}.q_mvr"), c, d),
            k_mvr: Conv3::point(format!("{path}.k_mvr"), c, d),
            v_mvr: Conv3::point(format!("{path}.v_mvr"), c, d),
            cfg,
        })
    }

    pub fn register<T: Scalar>(
        &self,
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ModelError> {
        for conv in [
            &self.q_rgb, &self.k_rgb, &self.v_rgb, &self.q_mvr, &self.k_mvr, &self.v_mvr,
        ] {
            conv.register(store, rng)?;
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        appearance: &Tensor<T>,
        motion: &Tensor<T>,
    ) -> Result<Tensor<T>, ModelError> {
        if appearance.shape() != motion.shape() {
            return Err(ModelError::Config(format!(
                "cross-attention inputs differ: {} vs {}",
                appearance.shape(),
                motion.shape()
            )));
        }
        let [_, c, t, h, w] = appearance.shape().dims();
        if c != self.cfg.channels {
            return Err(ModelError::Config(format!(
                "cross-attention built for {} channels, input has {c}",
                self.cfg.channels
            )));
        }
        let flat = |conv: &Conv3, x: &Tensor<T>| -> Result<Tensor<T>, ModelError> {
            Ok(conv.forward(store, x)?.flatten_positions())
        };
        let (qi, ki, vi) = (
            flat(&self.q_rgb, appearance)?,
            flat(&self.k_rgb, appearance)?,
            flat(&self.v_rgb, appearance)?,
        );
        let (qp, kp, vp) = (
            flat(&self.q_mvr, motion)?,
            flat(&self.k_mvr, motion)?,
            flat(&self.v_mvr, motion)?,
        );
        let scale = T::from_f64(1.0 / (self.cfg.d_k as f64).sqrt());
        let attend = |q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>| -> Result<Tensor<T>, ModelError> {
            let scores = q.matmul(&k.transpose_mat()?)?.scale(scale).softmax_rows()?;
            Ok(scores.matmul(v)?)
        };
        // Motion queries attend over appearance, and vice versa.
        let from_rgb = attend(&qp, &ki, &vi)?;
        let from_mvr = attend(&qi, &kp, &vp)?;
        Ok(from_rgb.add(&from_mvr)?.unflatten_positions(t, h, w)?)
    }

    pub fn param_count(&self) -> usize {
        [
            &self.q_rgb, &self.k_rgb, &self.v_rgb, &self.q_mvr, &self.k_mvr, &self.v_mvr,
        ]
        .iter()
        .map(|c| c.param_count())
        .sum()
    }
}
