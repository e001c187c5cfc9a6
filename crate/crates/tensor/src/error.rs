use std::fmt;

/// Named tensor axis, used so dimension errors can point at the offender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Batch,
    Channel,
    Time,
    Height,
    Width,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::Batch => 0,
            Axis::Channel => 1,
            Axis::Time => 2,
            Axis::Height => 3,
            Axis::Width => 4,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::Batch,
            1 => Axis::Channel,
            2 => Axis::Time,
            3 => Axis::Height,
            _ => Axis::Width,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Axis::Batch => "batch",
            Axis::Channel => "channel",
            Axis::Time => "time",
            Axis::Height => "height",
            Axis::Width => "width",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("dimension mismatch on {axis} axis: expected {expected}, got {got}")]
    DimMismatch {
        axis: Axis,
        expected: usize,
        got: usize,
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("state error: {0}")]
    State(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("graph is not deterministic: {0}")]
    NonDeterministic(String),
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
