//! Binary containers: "GOPS" for encoded streams and "RAWV" for raw video.
//! Both are little-endian throughout and validated field by field on read,
//! with errors reporting the byte offset of the first problem.
//!
//! GOPS layout: magic "GOPS", u32 version=1, u16 gop_size, u16 search_range,
//! u16 height, u16 width, u32 GOP count; then per GOP: the raw I-frame
//! (h*w*3 bytes, interleaved RGB row-major), u16 P-frame count, and per
//! P-frame the motion grid as i16 (dy, dx) pairs row-major followed by the
//! residual as i16 row-major, three planes.
//!
//! RAWV layout: magic "RAWV", u32 version=1, u32 frame count, u16 height,
//! u16 width, u8 channels (always 3), then the frames as interleaved RGB
//! bytes. Deliberately carries no frame-rate field so encode/decode
//! round-trips are byte-identical.

use std::path::Path;

use crate::error::CodecError;
use crate::frame::{Frame, RawVideo};
use crate::gop::{Gop, GopStream, PFrame};
use crate::motion::MACROBLOCK;

const GOPS_MAGIC: &[u8; 4] = b"GOPS";
const RAWV_MAGIC: &[u8; 4] = b"RAWV";
const VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Reader<'a> {
        Reader { buf, pos: 0 }
    }

    fn fail<T>(&self, at: usize, msg: impl Into<String>) -> Result<T, CodecError> {
        Err(CodecError::Format {
            offset: at as u64,
            msg: msg.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CodecError> {
        if self.buf.len() - self.pos < n {
            return self.fail(
                self.pos,
                format!(
                    "truncated while reading {what}: need {n} bytes, {} remain",
                    self.buf.len() - self.pos
                ),
            );
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, CodecError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CodecError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn i16(&mut self, what: &str) -> Result<i16, CodecError> {
        let b = self.take(2, what)?;
        Ok(i16::from_le_bytes([b[0], b[1]]))
    }

    fn finish(&self) -> Result<(), CodecError> {
        if self.pos != self.buf.len() {
            return self.fail(
                self.pos,
                format!("{} trailing bytes after end of data", self.buf.len() - self.pos),
            );
        }
        Ok(())
    }
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn fits_u16(v: usize, what: &str) -> Result<u16, CodecError> {
    u16::try_from(v).map_err(|_| CodecError::Geometry(format!("{what} {v} exceeds {}", u16::MAX)))
}

pub fn stream_to_bytes(stream: &GopStream) -> Result<Vec<u8>, CodecError> {
    let h = fits_u16(stream.h(), "frame height")?;
    let w = fits_u16(stream.w(), "frame width")?;
    let gop_size = fits_u16(stream.gop_size(), "gop size")?;
    let range = fits_u16(stream.search_range(), "search range")?;
    let count = u32::try_from(stream.gops().len())
        .map_err(|_| CodecError::Geometry("too many GOPs for container".into()))?;

    let mut out = Vec::new();
    out.extend_from_slice(GOPS_MAGIC);
    push_u32(&mut out, VERSION);
    push_u16(&mut out, gop_size);
    push_u16(&mut out, range);
    push_u16(&mut out, h);
    push_u16(&mut out, w);
    push_u32(&mut out, count);
    for gop in stream.gops() {
        out.extend_from_slice(gop.iframe.data());
        push_u16(&mut out, fits_u16(gop.pframes.len(), "P-frame count")?);
        for p in &gop.pframes {
            for &[dy, dx] in &p.mv {
                push_u16(&mut out, dy as u16);
                push_u16(&mut out, dx as u16);
            }
            for &r in &p.residual {
                push_u16(&mut out, r as u16);
            }
        }
    }
    Ok(out)
}

pub fn stream_from_bytes(buf: &[u8]) -> Result<GopStream, CodecError> {
    let mut r = Reader::new(buf);
    let magic = r.take(4, "magic")?;
    if magic != GOPS_MAGIC {
        return r.fail(0, format!("bad magic {magic:02x?}, expected \"GOPS\""));
    }
    let at = r.pos;
    let version = r.u32("version")?;
    if version != VERSION {
        return r.fail(at, format!("unsupported version {version}, expected {VERSION}"));
    }
    let at = r.pos;
    let gop_size = r.u16("gop size")? as usize;
    if gop_size == 0 {
        return r.fail(at, "gop size must be at least 1");
    }
    let search_range = r.u16("search range")? as usize;
    let at = r.pos;
    let h = r.u16("height")? as usize;
    if h == 0 || h % MACROBLOCK != 0 {
        return r.fail(at, format!("height {h} not a positive multiple of {MACROBLOCK}"));
    }
    let at = r.pos;
    let w = r.u16("width")? as usize;
    if w == 0 || w % MACROBLOCK != 0 {
        return r.fail(at, format!("width {w} not a positive multiple of {MACROBLOCK}"));
    }
    let at = r.pos;
    let count = r.u32("GOP count")? as usize;
    if count == 0 {
        return r.fail(at, "stream must contain at least one GOP");
    }
    let blocks = (h / MACROBLOCK) * (w / MACROBLOCK);

    let mut gops = Vec::with_capacity(count);
    for gi in 0..count {
        let iframe = Frame::from_raw(h, w, r.take(h * w * 3, "I-frame")?.to_vec())
            .expect("validated extents");
        let at = r.pos;
        let pcount = r.u16("P-frame count")? as usize;
        if pcount > gop_size - 1 {
            return r.fail(
                at,
                format!("GOP {gi} declares {pcount} P-frames, limit is {}", gop_size - 1),
            );
        }
        let mut pframes = Vec::with_capacity(pcount);
        for _ in 0..pcount {
            let mut mv = Vec::with_capacity(blocks);
            for _ in 0..blocks {
                let dy = r.i16("motion vector")?;
                let dx = r.i16("motion vector")?;
                mv.push([dy, dx]);
            }
            let mut residual = Vec::with_capacity(3 * h * w);
            for _ in 0..3 * h * w {
                residual.push(r.i16("residual")?);
            }
            pframes.push(PFrame { mv, residual });
        }
        gops.push(Gop { iframe, pframes });
    }
    r.finish()?;
    GopStream::new(gops, gop_size, search_range)
}

pub fn raw_video_to_bytes(video: &RawVideo) -> Result<Vec<u8>, CodecError> {
    let h = fits_u16(video.h(), "frame height")?;
    let w = fits_u16(video.w(), "frame width")?;
    let count = u32::try_from(video.frames.len())
        .map_err(|_| CodecError::Geometry("too many frames for container".into()))?;
    let mut out = Vec::new();
    out.extend_from_slice(RAWV_MAGIC);
    push_u32(&mut out, VERSION);
    push_u32(&mut out, count);
    push_u16(&mut out, h);
    push_u16(&mut out, w);
    out.push(3);
    for f in &video.frames {
        out.extend_from_slice(f.data());
    }
    Ok(out)
}

pub fn raw_video_from_bytes(buf: &[u8]) -> Result<RawVideo, CodecError> {
    let mut r = Reader::new(buf);
    let magic = r.take(4, "magic")?;
    if magic != RAWV_MAGIC {
        return r.fail(0, format!("bad magic {magic:02x?}, expected \"RAWV\""));
    }
    let at = r.pos;
    let version = r.u32("version")?;
    if version != VERSION {
        return r.fail(at, format!("unsupported version {version}, expected {VERSION}"));
    }
    let at = r.pos;
    let count = r.u32("frame count")? as usize;
    if count == 0 {
        return r.fail(at, "video must contain at least one frame");
    }
    let at = r.pos;
    let h = r.u16("height")? as usize;
    if h == 0 {
        return r.fail(at, "height must be positive");
    }
    let at = r.pos;
    let w = r.u16("width")? as usize;
    if w == 0 {
        return r.fail(at, "width must be positive");
    }
    let at = r.pos;
    let channels = r.u8("channel count")?;
    if channels != 3 {
        return r.fail(at, format!("unsupported channel count {channels}, expected 3"));
    }
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        frames.push(
            Frame::from_raw(h, w, r.take(h * w * 3, "frame")?.to_vec()).expect("validated extents"),
        );
    }
    r.finish()?;
    RawVideo::new(frames, 25.0)
}

pub fn write_stream(stream: &GopStream, path: impl AsRef<Path>) -> Result<(), CodecError> {
    Ok(std::fs::write(path, stream_to_bytes(stream)?)?)
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<GopStream, CodecError> {
    stream_from_bytes(&std::fs::read(path)?)
}

pub fn write_raw_video(video: &RawVideo, path: impl AsRef<Path>) -> Result<(), CodecError> {
    Ok(std::fs::write(path, raw_video_to_bytes(video)?)?)
}

pub fn read_raw_video(path: impl AsRef<Path>) -> Result<RawVideo, CodecError> {
    raw_video_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gops_header_bytes_are_pinned() {
        let iframe = Frame::new(16, 16, 9);
        let stream = GopStream::new(
            vec![Gop {
                iframe,
                pframes: vec![],
            }],
            2,
            3,
        )
        .unwrap();
        let bytes = stream_to_bytes(&stream).unwrap();
        let expect = [
            b'G', b'O', b'P', b'S', // magic
            1, 0, 0, 0, // version
            2, 0, // gop size
            3, 0, // search range
            16, 0, // height
            16, 0, // width
            1, 0, 0, 0, // GOP count
        ];
        assert_eq!(&bytes[..20], &expect);
        assert_eq!(bytes[20], 9); // first I-frame byte
        assert_eq!(bytes.len(), 20 + 16 * 16 * 3 + 2);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let err = stream_from_bytes(b"GOPX\x01\x00\x00\x00").unwrap_err();
        match err {
            CodecError::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_version_reports_offset_four() {
        let err = stream_from_bytes(b"GOPS\x02\x00\x00\x00\x0c\x00").unwrap_err();
        match err {
            CodecError::Format { offset, msg } => {
                assert_eq!(offset, 4);
                assert!(msg.contains("version"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let iframe = Frame::new(16, 16, 0);
        let stream = GopStream::new(vec![Gop { iframe, pframes: vec![] }], 1, 0).unwrap();
        let mut bytes = stream_to_bytes(&stream).unwrap();
        bytes.push(0);
        assert!(matches!(
            stream_from_bytes(&bytes),
            Err(CodecError::Format { .. })
        ));
    }

    #[test]
    fn rawv_round_trips() {
        let frames = (0..3)
            .map(|k| Frame::from_fn(4, 6, |y, x, c| (k * 50 + y * 10 + x + c) as u8))
            .collect();
        let video = RawVideo::new(frames, 25.0).unwrap();
        let bytes = raw_video_to_bytes(&video).unwrap();
        assert_eq!(&bytes[..4], b"RAWV");
        let back = raw_video_from_bytes(&bytes).unwrap();
        assert_eq!(back, video);
    }
}
