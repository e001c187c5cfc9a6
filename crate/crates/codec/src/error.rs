use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    /// Frame extents, block sizes, or field lengths do not line up.
    #[error("geometry: {0}")]
    Geometry(String),
    /// An index (frame, GOP, clip) is outside the valid range.
    #[error("range: {0}")]
    Range(String),
    /// A serialized container is malformed; `offset` is the byte position
    /// at which the problem was detected.
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
