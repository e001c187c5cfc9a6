use crate::error::CodecError;

/// One RGB frame, 8 bits per sample, interleaved row-major (y, x, channel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(h: usize, w: usize, fill: u8) -> Frame {
        Frame {
            h,
            w,
            data: vec![fill; h * w * 3],
        }
    }

    /// Builds a frame from a generator over (y, x, channel).
    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize, usize) -> u8) -> Frame {
        let mut data = Vec::with_capacity(h * w * 3);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Frame { h, w, data }
    }

    pub fn from_raw(h: usize, w: usize, data: Vec<u8>) -> Result<Frame, CodecError> {
        if h == 0 || w == 0 {
            return Err(CodecError::Geometry(format!(
                "frame extents must be positive, got {h}x{w}"
            )));
        }
        if data.len() != h * w * 3 {
            return Err(CodecError::Geometry(format!(
                "frame data length {} does not match {h}x{w}x3",
                data.len()
            )));
        }
        Ok(Frame { h, w, data })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.w + x) * 3 + c]
    }

    #[inline]
    pub fn set_pixel(&mut self, y: usize, x: usize, c: usize, v: u8) {
        self.data[(y * self.w + x) * 3 + c] = v;
    }

    /// Samples with coordinates clamped to the frame border. Accepts signed
    /// coordinates so motion-compensated reads never go out of bounds.
    #[inline]
    pub fn pixel_clamped(&self, y: isize, x: isize, c: usize) -> u8 {
        let y = y.clamp(0, self.h as isize - 1) as usize;
        let x = x.clamp(0, self.w as isize - 1) as usize;
        self.pixel(y, x, c)
    }
}

/// An uncompressed video: a run of equally sized frames plus a nominal
/// frame rate. The rate is metadata only and is never serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVideo {
    pub frames: Vec<Frame>,
    pub fps: f64,
}

impl RawVideo {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<RawVideo, CodecError> {
        let first = frames
            .first()
            .ok_or_else(|| CodecError::Geometry("video must have at least one frame".into()))?;
        let (h, w) = (first.h(), first.w());
        if h == 0 || w == 0 {
            return Err(CodecError::Geometry(format!(
                "frame extents must be positive, got {h}x{w}"
            )));
        }
        if let Some(bad) = frames.iter().find(|f| f.h() != h || f.w() != w) {
            return Err(CodecError::Geometry(format!(
                "inconsistent frame extents: expected {h}x{w}, found {}x{}",
                bad.h(),
                bad.w()
            )));
        }
        Ok(RawVideo { frames, fps })
    }

    pub fn h(&self) -> usize {
        self.frames[0].h()
    }

    pub fn w(&self) -> usize {
        self.frames[0].w()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_indexing_is_interleaved_row_major() {
        let f = Frame::from_fn(2, 3, |y, x, c| (y * 100 + x * 10 + c) as u8);
        assert_eq!(f.pixel(1, 2, 0), 120);
        assert_eq!(f.data()[(1 * 3 + 2) * 3 + 1], 121);
    }

    #[test]
    fn clamped_sampling_sticks_to_borders() {
        let f = Frame::from_fn(2, 2, |y, x, _| (y * 2 + x) as u8);
        assert_eq!(f.pixel_clamped(-5, 0, 0), 0);
        assert_eq!(f.pixel_clamped(7, 7, 0), 3);
    }

    #[test]
    fn video_rejects_mixed_extents() {
        let frames = vec![Frame::new(16, 16, 0), Frame::new(16, 32, 0)];
        assert!(matches!(
            RawVideo::new(frames, 25.0),
            Err(CodecError::Geometry(_))
        ));
    }

    #[test]
    fn video_rejects_empty() {
        assert!(RawVideo::new(vec![], 25.0).is_err());
    }
}
