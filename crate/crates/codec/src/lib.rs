//! Synthetic compressed-video codec.
//!
//! A deliberately simple GOP-structured codec: each group of pictures stores
//! one raw I-frame followed by P-frames encoded as per-macroblock integer
//! motion vectors plus exact (lossless) pixel residuals. On top of the
//! sequential decoder sits an accumulation pass that re-expresses every
//! P-frame directly against its I-frame — per-pixel displacement and summed
//! residual — and a clip sampler that turns a stream into model-ready
//! RGB and motion/residual tensors.
//!
//! Everything here is integer-exact: encode/decode round-trips are bitwise,
//! and accumulated reconstruction matches sequential decoding frame for
//! frame.

mod accumulate;
mod clip;
mod container;
mod error;
mod frame;
mod gop;
mod motion;

pub use accumulate::{accumulate, accumulate_stream, reconstruct_from_accumulated, AccumulatedFields};
pub use clip::{clip_frame_indices, sample_clip, sample_clip_at, ClipSample, SampleMode};
pub use container::{
    raw_video_from_bytes, raw_video_to_bytes, read_raw_video, read_stream, stream_from_bytes,
    stream_to_bytes, write_raw_video, write_stream,
};
pub use error::CodecError;
pub use frame::{Frame, RawVideo};
pub use gop::{decode_sequential, encode, Gop, GopStream, PFrame};
pub use motion::{block_match, MACROBLOCK};
