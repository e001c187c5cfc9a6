//! Binary tensor container. Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "MTEN"
//! version u32      currently 1
//! shape   5 x u64  (N, C, T, H, W)
//! dtype   u8       0 = f64, 1 = f32
//! data    shape product x dtype size, raw values
//! ```
//!
//! Read errors carry the byte offset where parsing stopped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::TensorError;
use crate::scalar::{Dtype, Scalar};
use crate::shape::Shape;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"MTEN";
pub const VERSION: u32 = 1;

/// Header of a stored tensor, readable without loading the payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorInfo {
    pub shape: Shape,
    pub dtype: Dtype,
}

/// A loaded tensor of either precision.
pub enum AnyTensor {
    F64(Tensor<f64>),
    F32(Tensor<f32>),
}

impl AnyTensor {
    pub fn info(&self) -> TensorInfo {
        match self {
            AnyTensor::F64(t) => TensorInfo {
                shape: t.shape(),
                dtype: Dtype::F64,
            },
            AnyTensor::F32(t) => TensorInfo {
                shape: t.shape(),
                dtype: Dtype::F32,
            },
        }
    }

    /// Values widened to f64 for inspection.
    pub fn values_f64(&self) -> Vec<f64> {
        match self {
            AnyTensor::F64(t) => t.data().to_vec(),
            AnyTensor::F32(t) => t.data().iter().map(|&v| v as f64).collect(),
        }
    }
}

/// Tracks the byte offset so parse errors can point at the exact position.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn new(inner: R) -> Self {
        Cursor { inner, offset: 0 }
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<(), TensorError> {
        let start = self.offset;
        let mut done = 0;
        while done < buf.len() {
            let n = self.inner.read(&mut buf[done..])?;
            if n == 0 {
                return Err(TensorError::Format {
                    offset: start + done as u64,
                    msg: format!(
                        "unexpected end of data while reading {what} ({done} of {} bytes)",
                        buf.len()
                    ),
                });
            }
            done += n;
            self.offset += n as u64;
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32, TensorError> {
        let mut b = [0u8; 4];
        self.fill(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64, TensorError> {
        let mut b = [0u8; 8];
        self.fill(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn u8(&mut self, what: &str) -> Result<u8, TensorError> {
        let mut b = [0u8; 1];
        self.fill(&mut b, what)?;
        Ok(b[0])
    }
}

pub fn write_tensor<T: Scalar, W: Write>(w: &mut W, t: &Tensor<T>) -> Result<(), TensorError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in t.shape().dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&[T::DTYPE.tag()])?;
    let mut buf = Vec::with_capacity(t.shape().len() * T::DTYPE.size_bytes());
    for &v in t.data().iter() {
        v.write_le(&mut buf);
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_header<R: Read>(cur: &mut Cursor<R>) -> Result<TensorInfo, TensorError> {
    let mut magic = [0u8; 4];
    cur.fill(&mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(TensorError::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(TensorError::Format {
            offset: 4,
            msg: format!("unsupported version {version}, expected {VERSION}"),
        });
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        let v = cur.u64("shape")?;
        *d = usize::try_from(v).map_err(|_| TensorError::Format {
            offset: cur.offset - 8,
            msg: format!("shape extent {v} exceeds addressable size"),
        })?;
    }
    let shape = Shape(dims);
    shape.validate().map_err(|e| TensorError::Format {
        offset: 8,
        msg: format!("invalid stored shape: {e}"),
    })?;
    // guard against absurd headers before allocating the payload buffer
    dims.iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .filter(|&n| n <= (1 << 32))
        .ok_or(TensorError::Format {
            offset: 8,
            msg: format!("stored shape {shape} is implausibly large"),
        })?;
    let tag_offset = cur.offset;
    let tag = cur.u8("dtype")?;
    let dtype = Dtype::from_tag(tag).ok_or(TensorError::Format {
        offset: tag_offset,
        msg: format!("unknown dtype tag {tag}"),
    })?;
    Ok(TensorInfo { shape, dtype })
}

fn read_payload<T: Scalar, R: Read>(
    cur: &mut Cursor<R>,
    shape: Shape,
) -> Result<Tensor<T>, TensorError> {
    let count = shape.len();
    let width = T::DTYPE.size_bytes();
    let mut buf = vec![0u8; count * width];
    cur.fill(&mut buf, "tensor data")?;
    let data: Vec<T> = buf.chunks_exact(width).map(T::read_le).collect();
    Tensor::from_vec(shape, data)
}

/// Reads a tensor whose stored precision must match `T`.
pub fn read_tensor<T: Scalar, R: Read>(r: &mut R) -> Result<Tensor<T>, TensorError> {
    let mut cur = Cursor::new(r);
    let info = read_header(&mut cur)?;
    if info.dtype != T::DTYPE {
        return Err(TensorError::Format {
            offset: 44,
            msg: format!(
                "stored dtype is {:?} but {:?} was requested",
                info.dtype,
                T::DTYPE
            ),
        });
    }
    read_payload(&mut cur, info.shape)
}

/// Reads a tensor in whichever precision it was stored.
pub fn read_tensor_any<R: Read>(r: &mut R) -> Result<AnyTensor, TensorError> {
    let mut cur = Cursor::new(r);
    let info = read_header(&mut cur)?;
    match info.dtype {
        Dtype::F64 => Ok(AnyTensor::F64(read_payload(&mut cur, info.shape)?)),
        Dtype::F32 => Ok(AnyTensor::F32(read_payload(&mut cur, info.shape)?)),
    }
}

pub fn save_tensor<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<(), TensorError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor<T: Scalar>(path: &Path) -> Result<Tensor<T>, TensorError> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensor(&mut r)
}

pub fn load_tensor_any(path: &Path) -> Result<AnyTensor, TensorError> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensor_any(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::Shape;

    fn sample() -> Tensor<f64> {
        Tensor::from_fn(Shape::new(1, 2, 1, 2, 3), |i| (i as f64) * 0.5 - 3.0)
    }

    #[test]
    fn round_trip_f64() {
        let t = sample();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back: Tensor<f64> = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert_eq!(back.data(), t.data());
    }

    #[test]
    fn round_trip_f32_via_any() {
        let t: Tensor<f32> = Tensor::from_fn(Shape::new(1, 1, 1, 1, 4), |i| i as f32 * 0.25);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        match read_tensor_any(&mut buf.as_slice()).unwrap() {
            AnyTensor::F32(back) => assert_eq!(back.data(), t.data()),
            AnyTensor::F64(_) => panic!("dtype tag mishandled"),
        }
    }

    #[test]
    fn dtype_mismatch_is_reported() {
        let t = sample();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let err = read_tensor::<f32, _>(&mut buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("dtype"));
    }

    #[test]
    fn truncation_reports_offset() {
        let t = sample();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 5);
        let err = read_tensor::<f64, _>(&mut buf.as_slice()).unwrap_err();
        match err {
            TensorError::Format { offset, .. } => assert!(offset > 44),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE".to_vec();
        assert!(read_tensor::<f64, _>(&mut buf.as_slice()).is_err());
    }
}
