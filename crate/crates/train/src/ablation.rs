//! Ablation harness: named model variants trained under one seed/budget,
//! reported as a parameter-count + accuracy table.

use std::collections::HashMap;

use gopnet_model::{Modality, ModelConfig, TwoStreamModel};

use crate::data::{Dataset, Split};
use crate::error::TrainError;
use crate::eval::evaluate_clips;
use crate::trainer::{train, EpochStats, TrainConfig};

/// Every recognized variant name, in report order: the modality rows, the
/// motion-stream block rows, and the stream-interaction rows.
pub const VARIANTS: &[&str] = &[
    "rgb",
    "mvr",
    "full",
    "b1",
    "b1_dm",
    "b1_msb_fixed",
    "b1_msb",
    "cme",
    "b2",
    "b2_add",
    "b2_smc",
    "b2_cma",
];

/// Derives a variant's model configuration from the full-model base.
///
/// `rgb`/`mvr` are the single-stream modality rows; `full` is the base
/// itself. The `b1*` family ablates the motion stream's block design
/// (plain bottlenecks up to the full multi-scale + denoising unit, `cme`),
/// evaluated motion-only. The `b2*` family ablates the two-stream
/// interaction units on top of plain late fusion (`b2`).
pub fn variant_config(name: &str, base: &ModelConfig) -> Result<ModelConfig, TrainError> {
    fn solo(cfg: &mut ModelConfig, modality: Modality) {
        cfg.modality = modality;
        cfg.use_smc = false;
        cfg.use_cma = false;
    }
    let mut cfg = base.clone();
    cfg.modality = Modality::Both;
    cfg.use_smc = true;
    cfg.use_cma = true;
    cfg.smc_additive_only = false;
    cfg.mvr_msb = true;
    cfg.msb_with_dm = true;
    cfg.msb_fixed_temporal_kernel = false;
    cfg.bottleneck_with_dm = false;
    match name {
        "rgb" => solo(&mut cfg, Modality::RgbOnly),
        "mvr" | "cme" => solo(&mut cfg, Modality::MvrOnly),
        "full" => {}
        "b1" => {
            solo(&mut cfg, Modality::MvrOnly);
            cfg.mvr_msb = false;
        }
        "b1_dm" => {
            solo(&mut cfg, Modality::MvrOnly);
            cfg.mvr_msb = false;
            cfg.bottleneck_with_dm = true;
        }
        "b1_msb" => {
            solo(&mut cfg, Modality::MvrOnly);
            cfg.msb_with_dm = false;
        }
        "b1_msb_fixed" => {
            solo(&mut cfg, Modality::MvrOnly);
            cfg.msb_with_dm = false;
            cfg.msb_fixed_temporal_kernel = true;
        }
        "b2" => {
            cfg.use_smc = false;
            cfg.use_cma = false;
        }
        "b2_add" => {
            cfg.use_cma = false;
            cfg.smc_additive_only = true;
        }
        "b2_smc" => {
            cfg.use_cma = false;
        }
        "b2_cma" => {
            cfg.use_smc = false;
        }
        other => {
            return Err(TrainError::Config(format!(
                "unknown variant '{other}'; valid variants: {}",
                VARIANTS.join(", ")
            )));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub params: usize,
    /// Test top-1 averaged over the requested seeds.
    pub top1: f64,
}

/// Trains each named variant once per seed under an identical budget and
/// reports mean test accuracy. Variants whose derived configuration
/// coincides (e.g. `mvr` and `cme`) share training runs via a cache.
pub fn run_ablation(
    variants: &[String],
    data: &Dataset,
    base: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
    mut progress: impl FnMut(&str, u64, &EpochStats),
) -> Result<Vec<AblationRow>, TrainError> {
    if variants.is_empty() {
        return Err(TrainError::Config("no variants requested".into()));
    }
    if seeds.is_empty() {
        return Err(TrainError::Config("need at least one seed".into()));
    }
    let mut cache: HashMap<(String, u64), f64> = HashMap::new();
    let mut rows = Vec::with_capacity(variants.len());
    for name in variants {
        let cfg = variant_config(name, base)?;
        let key_cfg = cfg.to_kv_lines();
        let mut top1_sum = 0.0;
        let mut params = 0;
        for &seed in seeds {
            let key = (key_cfg.clone(), seed);
            let top1 = match cache.get(&key) {
                Some(&t) => {
                    params = TwoStreamModel::<f64>::build(cfg.clone(), seed)?.param_count();
                    t
                }
                None => {
                    let mut model = TwoStreamModel::<f64>::build(cfg.clone(), seed)?;
                    params = model.param_count();
                    let mut run_cfg = train_cfg.clone();
                    run_cfg.seed = seed;
                    train(&mut model, data, &run_cfg, |s| progress(name, seed, s))?;
                    let clip = run_cfg.clip(model.cfg.clip_len);
                    let result =
                        evaluate_clips(&model, data, Split::Test, run_cfg.eval_clips, clip)?;
                    cache.insert(key, result.top1);
                    result.top1
                }
            };
            top1_sum += top1;
        }
        rows.push(AblationRow {
            variant: name.clone(),
            params,
            top1: top1_sum / seeds.len() as f64,
        });
    }
    Ok(rows)
}

/// Renders the table as comma-separated values with a fixed header.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("variant,params,top1\n");
    for row in rows {
        out.push_str(&format!("{},{},{:.4}\n", row.variant, row.params, row.top1));
    }
    out
}
