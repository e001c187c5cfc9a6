use crate::error::CodecError;
use crate::frame::{Frame, RawVideo};
use crate::motion::{block_match, MACROBLOCK};

/// A predicted frame: one motion vector per macroblock (row-major `[dy, dx]`
/// pairs) plus the exact pixel residual as three `h*w` planes of i16.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PFrame {
    pub mv: Vec<[i16; 2]>,
    pub residual: Vec<i16>,
}

/// One group of pictures: a raw I-frame and its dependent P-frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gop {
    pub iframe: Frame,
    pub pframes: Vec<PFrame>,
}

impl Gop {
    /// Number of frames in the group, counting the I-frame.
    pub fn len(&self) -> usize {
        1 + self.pframes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// An encoded video: ordered GOPs plus the encoder parameters they were
/// produced with. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GopStream {
    gops: Vec<Gop>,
    gop_size: usize,
    search_range: usize,
    h: usize,
    w: usize,
}

impl GopStream {
    pub fn new(gops: Vec<Gop>, gop_size: usize, search_range: usize) -> Result<GopStream, CodecError> {
        if gop_size == 0 {
            return Err(CodecError::Geometry("gop size must be at least 1".into()));
        }
        let first = gops
            .first()
            .ok_or_else(|| CodecError::Geometry("stream must contain at least one GOP".into()))?;
        let (h, w) = (first.iframe.h(), first.iframe.w());
        if h % MACROBLOCK != 0 || w % MACROBLOCK != 0 {
            return Err(CodecError::Geometry(format!(
                "frame extents {h}x{w} not divisible by macroblock size {MACROBLOCK}"
            )));
        }
        let blocks = (h / MACROBLOCK) * (w / MACROBLOCK);
        for (gi, gop) in gops.iter().enumerate() {
            if gop.iframe.h() != h || gop.iframe.w() != w {
                return Err(CodecError::Geometry(format!(
                    "GOP {gi} I-frame is {}x{}, expected {h}x{w}",
                    gop.iframe.h(),
                    gop.iframe.w()
                )));
            }
            let full = gop.len() == gop_size;
            if !full && gi + 1 != gops.len() || gop.len() > gop_size {
                return Err(CodecError::Geometry(format!(
                    "GOP {gi} has {} frames; every GOP but the last must have exactly {gop_size}",
                    gop.len()
                )));
            }
            for (pi, p) in gop.pframes.iter().enumerate() {
                if p.mv.len() != blocks {
                    return Err(CodecError::Geometry(format!(
                        "GOP {gi} P-frame {pi} has {} motion vectors, expected {blocks}",
                        p.mv.len()
                    )));
                }
                if p.residual.len() != 3 * h * w {
                    return Err(CodecError::Geometry(format!(
                        "GOP {gi} P-frame {pi} residual length {} != {}",
                        p.residual.len(),
                        3 * h * w
                    )));
                }
            }
        }
        Ok(GopStream {
            gops,
            gop_size,
            search_range,
            h,
            w,
        })
    }

    pub fn gops(&self) -> &[Gop] {
        &self.gops
    }

    pub fn gop_size(&self) -> usize {
        self.gop_size
    }

    pub fn search_range(&self) -> usize {
        self.search_range
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn total_frames(&self) -> usize {
        self.gops.iter().map(Gop::len).sum()
    }

    /// Maps a global frame index to (GOP index, offset within the GOP);
    /// offset 0 is the I-frame.
    pub fn frame_location(&self, index: usize) -> Result<(usize, usize), CodecError> {
        let mut start = 0;
        for (gi, gop) in self.gops.iter().enumerate() {
            if index < start + gop.len() {
                return Ok((gi, index - start));
            }
            start += gop.len();
        }
        Err(CodecError::Range(format!(
            "frame index {index} out of range for stream with {} frames",
            self.total_frames()
        )))
    }
}

/// Encodes a raw video into a GOP stream. The first frame of every
/// `gop_size`-frame chunk is stored raw; each following frame is encoded
/// against its predecessor by exhaustive block matching. Residuals are exact,
/// so the encoding is lossless.
pub fn encode(video: &RawVideo, gop_size: usize, search_range: usize) -> Result<GopStream, CodecError> {
    let (h, w) = (video.h(), video.w());
    if h % MACROBLOCK != 0 || w % MACROBLOCK != 0 {
        let pad_h = (MACROBLOCK - h % MACROBLOCK) % MACROBLOCK;
        let pad_w = (MACROBLOCK - w % MACROBLOCK) % MACROBLOCK;
        return Err(CodecError::Geometry(format!(
            "frame extents {h}x{w} not divisible by {MACROBLOCK}; pad height by {pad_h} and width by {pad_w}"
        )));
    }
    if gop_size == 0 || gop_size > u16::MAX as usize {
        return Err(CodecError::Geometry(format!(
            "gop size {gop_size} outside 1..={}",
            u16::MAX
        )));
    }
    if search_range > u16::MAX as usize {
        return Err(CodecError::Geometry(format!(
            "search range {search_range} exceeds {}",
            u16::MAX
        )));
    }
    let mut gops = Vec::new();
    for chunk in video.frames.chunks(gop_size) {
        let iframe = chunk[0].clone();
        let mut pframes = Vec::with_capacity(chunk.len() - 1);
        for pair in chunk.windows(2) {
            // Lossless residuals make the decoded predecessor identical to
            // the original, so encoding against the original is equivalent.
            let (mv, residual) = block_match(&pair[0], &pair[1], MACROBLOCK, search_range)?;
            pframes.push(PFrame { mv, residual });
        }
        gops.push(Gop { iframe, pframes });
    }
    GopStream::new(gops, gop_size, search_range)
}

/// Decodes one P-frame against its reference.
pub(crate) fn decode_pframe(reference: &Frame, p: &PFrame) -> Frame {
    let (h, w) = (reference.h(), reference.w());
    let bw = w / MACROBLOCK;
    Frame::from_fn(h, w, |y, x, c| {
        let [dy, dx] = p.mv[(y / MACROBLOCK) * bw + x / MACROBLOCK];
        let pred = reference.pixel_clamped(y as isize - dy as isize, x as isize - dx as isize, c);
        (pred as i32 + p.residual[(c * h + y) * w + x] as i32).clamp(0, 255) as u8
    })
}

/// Sequentially decodes every GOP back into raw frames. For streams produced
/// by [`encode`] this reproduces the input video bit for bit.
pub fn decode_sequential(stream: &GopStream) -> Result<RawVideo, CodecError> {
    let mut frames = Vec::with_capacity(stream.total_frames());
    for gop in stream.gops() {
        let mut prev = gop.iframe.clone();
        frames.push(prev.clone());
        for p in &gop.pframes {
            let cur = decode_pframe(&prev, p);
            frames.push(cur.clone());
            prev = cur;
        }
    }
    RawVideo::new(frames, 25.0)
}
