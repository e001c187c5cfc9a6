use gopnet_tensor::{Scalar, Shape, Tensor};
use rand::{Rng, RngCore};

use crate::accumulate::AccumulatedFields;
use crate::error::CodecError;
use crate::gop::GopStream;

/// Model-ready sample drawn from one encoded video: an RGB clip built from
/// governing I-frames and a motion/residual clip built from accumulated
/// fields. Channel layout of `mvr_clip` is fixed as
/// `[dy, dx, res_r, res_g, res_b]`.
#[derive(Debug, Clone)]
pub struct ClipSample<T: Scalar = f64> {
    /// Shape (1, 3, n_frames, crop_h, crop_w), values in [0, 1].
    pub rgb_clip: Tensor<T>,
    /// Shape (1, 5, n_frames, crop_h, crop_w); motion scaled by
    /// 1/search_range, residuals by 1/255.
    pub mvr_clip: Tensor<T>,
    pub label: usize,
}

/// How to place the crop window.
pub enum SampleMode<'a> {
    /// Random crop plus random horizontal flip, driven by the given RNG.
    Train(&'a mut dyn RngCore),
    /// Deterministic center crop, no flip.
    Test,
}

/// Frame indices for clip `clip_index` of `n_clips`: uniform positions
/// `floor((k + 0.5 + clip_index) * total / (n_frames + n_clips - 1))`,
/// clamped to the valid range. Successive clip indices slide the whole
/// window forward so multi-clip evaluation sees different frames.
pub fn clip_frame_indices(
    total: usize,
    n_frames: usize,
    clip_index: usize,
    n_clips: usize,
) -> Vec<usize> {
    let denom = 2 * (n_frames + n_clips - 1);
    (0..n_frames)
        .map(|k| (((2 * k + 1 + 2 * clip_index) * total) / denom).min(total - 1))
        .collect()
}

/// Samples a clip with an explicit crop origin and flip decision. This is the
/// deterministic core; [`sample_clip`] layers the train/test policies on top.
pub fn sample_clip_at<T: Scalar>(
    stream: &GopStream,
    accums: &[AccumulatedFields],
    n_frames: usize,
    crop: (usize, usize),
    origin: (usize, usize),
    flip: bool,
    clip_index: usize,
    n_clips: usize,
) -> Result<ClipSample<T>, CodecError> {
    let (h, w) = (stream.h(), stream.w());
    let (ch, cw) = crop;
    let (y0, x0) = origin;
    if n_frames == 0 || n_clips == 0 {
        return Err(CodecError::Geometry(
            "clip length and clip count must be positive".into(),
        ));
    }
    let total = stream.total_frames();
    if n_frames > total {
        return Err(CodecError::Geometry(format!(
            "clip length {n_frames} exceeds stream length {total}"
        )));
    }
    if clip_index >= n_clips {
        return Err(CodecError::Range(format!(
            "clip index {clip_index} out of range for {n_clips} clips"
        )));
    }
    if ch == 0 || cw == 0 || ch > h || cw > w {
        return Err(CodecError::Geometry(format!(
            "crop {ch}x{cw} invalid for {h}x{w} frames"
        )));
    }
    if y0 + ch > h || x0 + cw > w {
        return Err(CodecError::Geometry(format!(
            "crop origin ({y0}, {x0}) puts {ch}x{cw} window outside {h}x{w} frame"
        )));
    }
    if accums.len() != stream.gops().len() {
        return Err(CodecError::Geometry(format!(
            "{} accumulated field sets for {} GOPs",
            accums.len(),
            stream.gops().len()
        )));
    }

    let indices = clip_frame_indices(total, n_frames, clip_index, n_clips);
    let mv_scale = T::from_f64(1.0 / stream.search_range().max(1) as f64);
    let px_scale = T::from_f64(1.0 / 255.0);
    let dx_sign = T::from_f64(if flip { -1.0 } else { 1.0 });

    // Source column for crop column x, honoring the horizontal mirror.
    let src_x = |x: usize| if flip { x0 + (cw - 1 - x) } else { x0 + x };

    let mut rgb = Vec::with_capacity(3 * n_frames * ch * cw);
    for c in 0..3 {
        for &fi in &indices {
            let (g, _) = stream.frame_location(fi)?;
            let iframe = &stream.gops()[g].iframe;
            for y in 0..ch {
                for x in 0..cw {
                    rgb.push(T::from_f64(iframe.pixel(y0 + y, src_x(x), c) as f64) * px_scale);
                }
            }
        }
    }

    let mut mvr = Vec::with_capacity(5 * n_frames * ch * cw);
    for c in 0..5 {
        for &fi in &indices {
            let (g, off) = stream.frame_location(fi)?;
            if off == 0 {
                // I-frames carry no accumulated motion or residual.
                mvr.extend(std::iter::repeat(T::from_f64(0.0)).take(ch * cw));
                continue;
            }
            let acc = &accums[g];
            if acc.h() != h || acc.w() != w || acc.len() != stream.gops()[g].pframes.len() {
                return Err(CodecError::Geometry(format!(
                    "accumulated fields for GOP {g} do not match the stream"
                )));
            }
            for y in 0..ch {
                for x in 0..cw {
                    let (sy, sx) = (y0 + y, src_x(x));
                    let v = match c {
                        0 => T::from_f64(acc.mv[off - 1][sy * w + sx][0] as f64) * mv_scale,
                        1 => T::from_f64(acc.mv[off - 1][sy * w + sx][1] as f64) * mv_scale * dx_sign,
                        _ => T::from_f64(acc.res[off - 1][((c - 2) * h + sy) * w + sx] as f64) * px_scale,
                    };
                    mvr.push(v);
                }
            }
        }
    }

    let to_geom = |e: gopnet_tensor::TensorError| CodecError::Geometry(e.to_string());
    Ok(ClipSample {
        rgb_clip: Tensor::from_vec(Shape::new(1, 3, n_frames, ch, cw), rgb).map_err(to_geom)?,
        mvr_clip: Tensor::from_vec(Shape::new(1, 5, n_frames, ch, cw), mvr).map_err(to_geom)?,
        label: 0,
    })
}

/// Samples one clip from an encoded stream. Train mode picks a uniform random
/// crop origin and flips horizontally with probability 1/2 (the flip mirrors
/// every plane and negates the dx channel); test mode center-crops and never
/// flips, so it is a pure function of (stream, clip_index).
pub fn sample_clip<T: Scalar>(
    stream: &GopStream,
    accums: &[AccumulatedFields],
    n_frames: usize,
    crop: (usize, usize),
    mode: SampleMode<'_>,
    clip_index: usize,
    n_clips: usize,
) -> Result<ClipSample<T>, CodecError> {
    let (h, w) = (stream.h(), stream.w());
    let (ch, cw) = crop;
    if ch > h || cw > w {
        return Err(CodecError::Geometry(format!(
            "crop {ch}x{cw} larger than {h}x{w} frames"
        )));
    }
    let (origin, flip) = match mode {
        SampleMode::Train(rng) => {
            let y0 = rng.gen_range(0..=h - ch);
            let x0 = rng.gen_range(0..=w - cw);
            ((y0, x0), rng.gen_bool(0.5))
        }
        SampleMode::Test => (((h - ch) / 2, (w - cw) / 2), false),
    };
    sample_clip_at(stream, accums, n_frames, crop, origin, flip, clip_index, n_clips)
}
