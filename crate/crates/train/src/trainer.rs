//! Training loop: epoch/batch iteration, learning-rate schedule, loss
//! assembly over the per-stream and fused heads, divergence detection.

use gopnet_model::TwoStreamModel;
use gopnet_tensor::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{ClipSettings, Dataset, Split};
use crate::error::TrainError;
use crate::eval::{argmax_lowest, evaluate_clips};
use crate::sgd::Sgd;

/// Optimization settings. Clip geometry lives here; clip length lives in
/// the model configuration so the two key sets stay disjoint and a single
/// config file can feed both parsers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// 1-based epochs at which the rate drops by 10x (cumulative).
    pub lr_decay_epochs: Vec<usize>,
    pub seed: u64,
    pub crop_h: usize,
    pub crop_w: usize,
    /// Clips per video at final evaluation time.
    pub eval_clips: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            batch_size: 8,
            lr: 1e-4,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_decay_epochs: vec![20],
            seed: 0,
            crop_h: 32,
            crop_w: 32,
            eval_clips: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Config(
                "epochs and batch size must be positive".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainError::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.crop_h == 0 || self.crop_w == 0 {
            return Err(TrainError::Config("crop extents must be positive".into()));
        }
        if self.lr_decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TrainError::Config(
                "decay epochs must be strictly increasing".into(),
            ));
        }
        if self.eval_clips == 0 {
            return Err(TrainError::Config("need at least one evaluation clip".into()));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (1-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.lr * 0.1f64.powi(drops as i32)
    }

    pub fn to_kv_lines(&self) -> String {
        let decay = self
            .lr_decay_epochs
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "epochs={}\nbatch_size={}\nlr={}\nmomentum={}\nweight_decay={}\n\
             lr_decay_epochs={}\nseed={}\ncrop_h={}\ncrop_w={}\neval_clips={}\n",
            self.epochs,
            self.batch_size,
            self.lr,
            self.momentum,
            self.weight_decay,
            decay,
            self.seed,
            self.crop_h,
            self.crop_w,
            self.eval_clips,
        )
    }

    pub fn from_kv_lines(text: &str) -> Result<TrainConfig, TrainError> {
        let mut cfg = TrainConfig::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                TrainError::Config(format!("line {}: expected key=value, got '{line}'", ln + 1))
            })?;
            cfg.apply_kv(key.trim(), value.trim())
                .map_err(|e| TrainError::Config(format!("line {}: {e}", ln + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` setting. Keys are disjoint from the model
    /// configuration's keys.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        fn num(key: &str, value: &str) -> Result<usize, TrainError> {
            value
                .parse()
                .map_err(|_| TrainError::Config(format!("{key}: invalid number '{value}'")))
        }
        fn real(key: &str, value: &str) -> Result<f64, TrainError> {
            value
                .parse()
                .map_err(|_| TrainError::Config(format!("{key}: invalid number '{value}'")))
        }
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.lr = real(key, value)?,
            "momentum" => self.momentum = real(key, value)?,
            "weight_decay" => self.weight_decay = real(key, value)?,
            "lr_decay_epochs" => {
                self.lr_decay_epochs = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|p| num("lr_decay_epochs", p.trim()))
                        .collect::<Result<_, _>>()?
                };
            }
            "seed" => {
                self.seed = value.parse().map_err(|_| {
                    TrainError::Config(format!("seed: invalid number '{value}'"))
                })?;
            }
            "crop_h" => self.crop_h = num(key, value)?,
            "crop_w" => self.crop_w = num(key, value)?,
            "eval_clips" => self.eval_clips = num(key, value)?,
            other => {
                return Err(TrainError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    pub fn clip(&self, clip_len: usize) -> ClipSettings {
        ClipSettings {
            n_frames: clip_len,
            crop: (self.crop_h, self.crop_w),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    /// Wall-clock spent in this epoch, including its validation pass.
    pub seconds: f64,
}

impl EpochStats {
    pub fn log_line(&self) -> String {
        let val = match self.val_acc {
            Some(v) => format!(" val_acc={v:.4}"),
            None => String::new(),
        };
        format!(
            "epoch={} lr={:.6} loss={:.6} train_acc={:.4}{val} seconds={:.2}",
            self.epoch, self.lr, self.loss, self.train_acc, self.seconds
        )
    }
}

/// Training loss: mean cross-entropy over the per-stream logits plus the
/// fused score, equally weighted; just the score when per-stream
/// supervision is off.
fn batch_loss(
    model: &TwoStreamModel<f64>,
    out: &gopnet_model::ModelOutput<f64>,
    labels: &[usize],
) -> Result<Tensor<f64>, TrainError> {
    if !model.cfg.supervise_streams {
        return Ok(out.score.cross_entropy(labels)?);
    }
    let heads: Vec<&Tensor<f64>> = [out.z_rgb.as_ref(), out.z_mvr.as_ref(), Some(&out.score)]
        .into_iter()
        .flatten()
        .collect();
    let mut total: Option<Tensor<f64>> = None;
    for z in &heads {
        let ce = z.cross_entropy(labels)?;
        total = Some(match total {
            Some(t) => t.add(&ce)?,
            None => ce,
        });
    }
    Ok(total.expect("score head always present").scale(1.0 / heads.len() as f64))
}

/// True when the failure stems from non-finite values rather than bad
/// input, i.e. the optimization itself diverged.
fn is_divergence(e: &TrainError) -> bool {
    use gopnet_tensor::TensorError;
    matches!(
        e,
        TrainError::Tensor(TensorError::Numeric(_))
            | TrainError::Model(gopnet_model::ModelError::Tensor(TensorError::Numeric(_)))
    )
}

/// Runs the full optimization loop, mutating the model's parameters in
/// place. Calls `on_epoch` after each epoch and returns the stats history.
/// Validation accuracy is a single-clip center-crop pass, skipped when the
/// dataset has no validation items.
pub fn train(
    model: &mut TwoStreamModel<f64>,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>, TrainError> {
    cfg.validate()?;
    let clip = cfg.clip(model.cfg.clip_len);
    let train_indices = data.indices(Split::Train);
    if train_indices.is_empty() {
        return Err(TrainError::Data("training split is empty".into()));
    }
    let has_val = !data.indices(Split::Val).is_empty();
    let needs_rgb = model.cfg.modality != gopnet_model::Modality::MvrOnly;
    let needs_mvr = model.cfg.modality != gopnet_model::Modality::RgbOnly;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Sgd::new(cfg.lr, cfg.momentum, cfg.weight_decay);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let started = std::time::Instant::now();
        let lr = cfg.lr_at(epoch);
        let mut order = train_indices.clone();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // Temporal jitter: vary the clip grid across batches so the
            // model never keys on one fixed set of frame offsets and
            // multi-clip evaluation sees the grids it was trained on.
            let clip_index = rng.gen_range(0..cfg.eval_clips.max(1));
            let batch = data.make_batch(
                chunk,
                clip,
                Some(&mut rng),
                clip_index,
                cfg.eval_clips.max(1),
            )?;
            model.params.zero_grads();
            let step = (|| {
                let out = model.forward_with(
                    &model.params,
                    needs_rgb.then_some(&batch.rgb),
                    needs_mvr.then_some(&batch.mvr),
                )?;
                let loss = batch_loss(model, &out, &batch.labels)?;
                Ok((out, loss))
            })();
            let (out, loss) = step.map_err(|e: TrainError| {
                if is_divergence(&e) {
                    TrainError::Numeric(format!(
                        "training diverged at epoch {epoch} ({e}); try a learning rate below {lr}"
                    ))
                } else {
                    e
                }
            })?;
            let loss_value = loss.item()?;
            if !loss_value.is_finite() {
                return Err(TrainError::Numeric(format!(
                    "loss became {loss_value} at epoch {epoch}; try a learning rate below {lr}"
                )));
            }
            loss.backward()?;
            opt.step(&mut model.params, lr)?;
            loss_sum += loss_value * chunk.len() as f64;
            let scores = out.score.data();
            let classes = out.score.shape().0[1];
            for (i, &label) in batch.labels.iter().enumerate() {
                let row = &scores[i * classes..(i + 1) * classes];
                if argmax_lowest(row) == label {
                    correct += 1;
                }
            }
            seen += chunk.len();
        }
        let val_acc = if has_val {
            Some(evaluate_clips(model, data, Split::Val, 1, clip)?.top1)
        } else {
            None
        };
        let stats = EpochStats {
            epoch,
            lr,
            loss: loss_sum / seen as f64,
            train_acc: correct as f64 / seen as f64,
            val_acc,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_applies_cumulative_tenths() {
        let cfg = TrainConfig {
            lr: 1.0,
            lr_decay_epochs: vec![3, 5],
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(1), 1.0);
        assert_eq!(cfg.lr_at(2), 1.0);
        assert!((cfg.lr_at(3) - 0.1).abs() < 1e-15);
        assert!((cfg.lr_at(4) - 0.1).abs() < 1e-15);
        assert!((cfg.lr_at(5) - 0.01).abs() < 1e-15);
        assert!((cfg.lr_at(9) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn kv_round_trip_preserves_everything() {
        let mut cfg = TrainConfig::default();
        cfg.epochs = 3;
        cfg.lr = 0.125;
        cfg.lr_decay_epochs = vec![2];
        cfg.eval_clips = 5;
        let text = cfg.to_kv_lines();
        assert_eq!(TrainConfig::from_kv_lines(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_decay_list_round_trips() {
        let mut cfg = TrainConfig::default();
        cfg.lr_decay_epochs = Vec::new();
        let text = cfg.to_kv_lines();
        assert_eq!(
            TrainConfig::from_kv_lines(&text).unwrap().lr_decay_epochs,
            Vec::<usize>::new()
        );
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(TrainConfig::from_kv_lines("optimizer=adam\n").is_err());
        assert!(TrainConfig::from_kv_lines("lr=fast\n").is_err());
        let err = TrainConfig::from_kv_lines("epochs=0\n").err().unwrap();
        assert!(err.to_string().contains("epochs"));
    }

    #[test]
    fn momentum_bounds_are_enforced() {
        let mut cfg = TrainConfig::default();
        cfg.momentum = 1.0;
        assert!(cfg.validate().is_err());
        cfg.momentum = -0.1;
        assert!(cfg.validate().is_err());
        cfg.momentum = 0.0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn decay_schedule_must_strictly_increase() {
        let mut cfg = TrainConfig::default();
        cfg.lr_decay_epochs = vec![5, 5];
        assert!(cfg.validate().is_err());
        cfg.lr_decay_epochs = vec![7, 3];
        assert!(cfg.validate().is_err());
        cfg.lr_decay_epochs = vec![3, 7];
        assert!(cfg.validate().is_ok());
    }
}
