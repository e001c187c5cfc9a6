use crate::error::CodecError;
use crate::frame::Frame;
use crate::gop::Gop;
use crate::motion::MACROBLOCK;

/// Per-pixel accumulated motion and residual for every P-frame of one GOP,
/// expressed directly against the I-frame.
///
/// For P-frame `t` (1-based), `mv[t-1]` holds one `[dy, dx]` displacement per
/// pixel such that the decoded value at `p` originates from I-frame pixel
/// `p - [dy, dx]`, and `res[t-1]` holds the summed residual picked up along
/// that chain (three `h*w` planes of i32 — sums of up to `gop len` i16
/// residuals can exceed i16).
///
/// The fields are built by back-tracing the decoder's own sampling: during
/// sequential decoding, pixel `p` of frame `t` reads frame `t-1` at
/// `q = clamp(p - M_t(p))`, so the I-frame source for `p` at time `t` is the
/// source for `q` at time `t-1`, and the accumulated residual is
/// `r_t(p)` plus the residual accumulated at `q`. Tracking the source
/// coordinate itself (rather than summing raw vectors) keeps the equality
/// with the sequential decoder exact even when clamping fires at borders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulatedFields {
    h: usize,
    w: usize,
    pub mv: Vec<Vec<[i32; 2]>>,
    pub res: Vec<Vec<i32>>,
}

impl AccumulatedFields {
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// Number of P-frames covered.
    pub fn len(&self) -> usize {
        self.mv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mv.is_empty()
    }
}

/// Computes accumulated motion/residual fields for every P-frame of `gop`.
pub fn accumulate(gop: &Gop) -> Result<AccumulatedFields, CodecError> {
    let (h, w) = (gop.iframe.h(), gop.iframe.w());
    let bw = w / MACROBLOCK;
    let blocks = (h / MACROBLOCK) * (w / MACROBLOCK);

    // src[p] = I-frame coordinate feeding pixel p at the current depth.
    let mut src: Vec<[u32; 2]> = (0..h * w)
        .map(|i| [(i / w) as u32, (i % w) as u32])
        .collect();
    let mut res_acc = vec![0i32; 3 * h * w];

    let mut mv_out = Vec::with_capacity(gop.pframes.len());
    let mut res_out = Vec::with_capacity(gop.pframes.len());

    for (pi, p) in gop.pframes.iter().enumerate() {
        if p.mv.len() != blocks || p.residual.len() != 3 * h * w {
            return Err(CodecError::Geometry(format!(
                "P-frame {pi} field lengths do not match {h}x{w} frame"
            )));
        }
        let mut next_src = vec![[0u32; 2]; h * w];
        let mut next_res = vec![0i32; 3 * h * w];
        for y in 0..h {
            for x in 0..w {
                let [dy, dx] = p.mv[(y / MACROBLOCK) * bw + x / MACROBLOCK];
                let qy = (y as isize - dy as isize).clamp(0, h as isize - 1) as usize;
                let qx = (x as isize - dx as isize).clamp(0, w as isize - 1) as usize;
                next_src[y * w + x] = src[qy * w + qx];
                for c in 0..3 {
                    next_res[(c * h + y) * w + x] =
                        p.residual[(c * h + y) * w + x] as i32 + res_acc[(c * h + qy) * w + qx];
                }
            }
        }
        src = next_src;
        res_acc = next_res;
        mv_out.push(
            src.iter()
                .enumerate()
                .map(|(i, s)| [(i / w) as i32 - s[0] as i32, (i % w) as i32 - s[1] as i32])
                .collect(),
        );
        res_out.push(res_acc.clone());
    }

    Ok(AccumulatedFields {
        h,
        w,
        mv: mv_out,
        res: res_out,
    })
}

/// Accumulates every GOP of a stream, in order. GOPs are independent, so
/// this parallelizes across them.
pub fn accumulate_stream(stream: &crate::gop::GopStream) -> Result<Vec<AccumulatedFields>, CodecError> {
    use rayon::prelude::*;
    stream.gops().par_iter().map(accumulate).collect()
}

/// Rebuilds frame `t` of the GOP (0 = the I-frame itself) from the I-frame
/// plus accumulated fields, using the same border clamping as the sequential
/// decoder. Exactly equal to sequential decoding for well-formed input.
pub fn reconstruct_from_accumulated(
    gop: &Gop,
    fields: &AccumulatedFields,
    t: usize,
) -> Result<Frame, CodecError> {
    let (h, w) = (gop.iframe.h(), gop.iframe.w());
    if fields.h() != h || fields.w() != w {
        return Err(CodecError::Geometry(format!(
            "accumulated fields are {}x{}, GOP frames are {h}x{w}",
            fields.h(),
            fields.w()
        )));
    }
    if t == 0 {
        return Ok(gop.iframe.clone());
    }
    let idx = t - 1;
    if idx >= fields.len() || t > gop.pframes.len() {
        return Err(CodecError::Range(format!(
            "frame {t} out of range for GOP with {} P-frames",
            gop.pframes.len()
        )));
    }
    let (mv, res) = (&fields.mv[idx], &fields.res[idx]);
    Ok(Frame::from_fn(h, w, |y, x, c| {
        let [dy, dx] = mv[y * w + x];
        let i = gop
            .iframe
            .pixel_clamped(y as isize - dy as isize, x as isize - dx as isize, c);
        (i as i32 + res[(c * h + y) * w + x]).clamp(0, 255) as u8
    }))
}
