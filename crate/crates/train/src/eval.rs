//! Multi-clip evaluation: deterministic center-crop clips at several
//! temporal offsets, video-level scores by summing clip logits.

use gopnet_model::{Modality, TwoStreamModel};

use crate::data::{ClipSettings, Dataset, Split};
use crate::error::TrainError;

/// Index of the largest entry, preferring the lowest index on ties so
/// results are deterministic.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub top1: f64,
    pub correct: usize,
    pub total: usize,
}

/// Accuracy per logit source: the fused score plus whichever heads exist.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadEval {
    pub score: EvalResult,
    pub rgb: Option<EvalResult>,
    pub mvr: Option<EvalResult>,
    pub fused: Option<EvalResult>,
}

const EVAL_BATCH: usize = 8;

/// Per-item logit rows for every output of the model, at one clip position.
struct SplitScores {
    score: Vec<Vec<f64>>,
    rgb: Option<Vec<Vec<f64>>>,
    mvr: Option<Vec<Vec<f64>>>,
    fused: Option<Vec<Vec<f64>>>,
}

fn rows_of(tensor: &gopnet_tensor::Tensor<f64>) -> Vec<Vec<f64>> {
    let classes = tensor.shape().0[1];
    let data = tensor.data();
    (0..tensor.shape().0[0])
        .map(|i| data[i * classes..(i + 1) * classes].to_vec())
        .collect()
}

fn append(dst: &mut Option<Vec<Vec<f64>>>, src: Option<Vec<Vec<f64>>>) {
    if let Some(rows) = src {
        dst.get_or_insert_with(Vec::new).extend(rows);
    }
}

fn score_split_full(
    model: &TwoStreamModel<f64>,
    data: &Dataset,
    split: Split,
    clip: ClipSettings,
    clip_index: usize,
    n_clips: usize,
) -> Result<SplitScores, TrainError> {
    let indices = data.indices(split);
    if indices.is_empty() {
        return Err(TrainError::Data(format!(
            "split '{}' has no items to evaluate",
            split.as_str()
        )));
    }
    let needs_rgb = model.cfg.modality != Modality::MvrOnly;
    let needs_mvr = model.cfg.modality != Modality::RgbOnly;
    let mut all = SplitScores {
        score: Vec::with_capacity(indices.len()),
        rgb: None,
        mvr: None,
        fused: None,
    };
    for chunk in indices.chunks(EVAL_BATCH) {
        let batch = data.make_batch(chunk, clip, None, clip_index, n_clips)?;
        let out = model.forward_with(
            &model.params,
            needs_rgb.then_some(&batch.rgb),
            needs_mvr.then_some(&batch.mvr),
        )?;
        all.score.extend(rows_of(&out.score));
        append(&mut all.rgb, out.z_rgb.as_ref().map(rows_of));
        append(&mut all.mvr, out.z_mvr.as_ref().map(rows_of));
        append(&mut all.fused, out.z_fused.as_ref().map(rows_of));
    }
    Ok(all)
}

/// Fused score logits for one temporal clip position, one row per split
/// item in split order. Deterministic: center crop, no flip.
pub fn score_split(
    model: &TwoStreamModel<f64>,
    data: &Dataset,
    split: Split,
    clip: ClipSettings,
    clip_index: usize,
    n_clips: usize,
) -> Result<Vec<Vec<f64>>, TrainError> {
    Ok(score_split_full(model, data, split, clip, clip_index, n_clips)?.score)
}

fn sum_into(acc: &mut Vec<Vec<f64>>, rows: Vec<Vec<f64>>) {
    if acc.is_empty() {
        *acc = rows;
    } else {
        for (a, row) in acc.iter_mut().zip(rows) {
            for (x, v) in a.iter_mut().zip(row) {
                *x += v;
            }
        }
    }
}

fn accuracy(data: &Dataset, indices: &[usize], rows: &[Vec<f64>]) -> EvalResult {
    let mut correct = 0;
    for (&i, row) in indices.iter().zip(rows) {
        if argmax_lowest(row) == data.items[i].label {
            correct += 1;
        }
    }
    EvalResult {
        top1: correct as f64 / indices.len() as f64,
        correct,
        total: indices.len(),
    }
}

/// Top-1 accuracy per logit source over a split, using `n_clips` uniformly
/// placed clips per video with logits summed before the argmax.
pub fn evaluate_heads(
    model: &TwoStreamModel<f64>,
    data: &Dataset,
    split: Split,
    n_clips: usize,
    clip: ClipSettings,
) -> Result<HeadEval, TrainError> {
    if n_clips == 0 {
        return Err(TrainError::Config("need at least one clip".into()));
    }
    let indices = data.indices(split);
    let mut score: Vec<Vec<f64>> = Vec::new();
    let mut rgb: Option<Vec<Vec<f64>>> = None;
    let mut mvr: Option<Vec<Vec<f64>>> = None;
    let mut fused: Option<Vec<Vec<f64>>> = None;
    for clip_index in 0..n_clips {
        let rows = score_split_full(model, data, split, clip, clip_index, n_clips)?;
        sum_into(&mut score, rows.score);
        if let Some(r) = rows.rgb {
            sum_into(rgb.get_or_insert_with(Vec::new), r);
        }
        if let Some(r) = rows.mvr {
            sum_into(mvr.get_or_insert_with(Vec::new), r);
        }
        if let Some(r) = rows.fused {
            sum_into(fused.get_or_insert_with(Vec::new), r);
        }
    }
    Ok(HeadEval {
        score: accuracy(data, &indices, &score),
        rgb: rgb.map(|r| accuracy(data, &indices, &r)),
        mvr: mvr.map(|r| accuracy(data, &indices, &r)),
        fused: fused.map(|r| accuracy(data, &indices, &r)),
    })
}

/// Top-1 accuracy of the fused score over a split.
pub fn evaluate_clips(
    model: &TwoStreamModel<f64>,
    data: &Dataset,
    split: Split,
    n_clips: usize,
    clip: ClipSettings,
) -> Result<EvalResult, TrainError> {
    Ok(evaluate_heads(model, data, split, n_clips, clip)?.score)
}
