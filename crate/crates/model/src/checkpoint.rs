//! Model checkpoint container.
//!
//! Layout:
//!
//! ```text
//! gopnet-checkpoint v1\n          ASCII header line
//! key=value\n ...                 model configuration lines
//! tensors=<count>\n               number of records that follow
//! <count> binary records:
//!   u32 LE   path byte length
//!   bytes    parameter path (UTF-8)
//!   u8       1 = trainable parameter, 0 = buffer
//!   blob     the tensor in the standalone tensor container format
//! ```
//!
//! Records are written in lexicographic path order. Loading rebuilds the
//! architecture from the configuration, then overwrites every parameter;
//! unknown trainable paths and missing parameters are errors, while unknown
//! buffers (for example input statistics) are carried along verbatim.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use gopnet_tensor::{io as tio, ParamStore, Scalar, Tensor};

use crate::config::ModelConfig;
use crate::error::ModelError;
use crate::network::TwoStreamModel;

pub const CHECKPOINT_HEADER: &str = "gopnet-checkpoint v1";

pub fn write_checkpoint<T: Scalar, W: Write>(
    w: &mut W,
    cfg: &ModelConfig,
    store: &ParamStore<T>,
) -> Result<(), ModelError> {
    writeln!(w, "{CHECKPOINT_HEADER}")?;
    w.write_all(cfg.to_kv_lines().as_bytes())?;
    writeln!(w, "tensors={}", store.len())?;
    for (path, entry) in store.iter() {
        w.write_all(&(path.len() as u32).to_le_bytes())?;
        w.write_all(path.as_bytes())?;
        w.write_all(&[entry.trainable as u8])?;
        tio::write_tensor(w, &entry.tensor)?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), ModelError> {
    r.read_exact(buf)
        .map_err(|e| ModelError::Parse(format!("checkpoint ends inside {what}: {e}")))
}

pub fn read_checkpoint<T: Scalar, R: BufRead>(r: &mut R) -> Result<TwoStreamModel<T>, ModelError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != CHECKPOINT_HEADER {
        return Err(ModelError::Parse(format!(
            "not a checkpoint: first line is '{}'",
            line.trim_end()
        )));
    }
    let mut kv = String::new();
    let count: usize = loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(ModelError::Parse("checkpoint ends before tensor records".into()));
        }
        let trimmed = line.trim_end();
        if let Some(n) = trimmed.strip_prefix("tensors=") {
            break n
                .parse()
                .map_err(|_| ModelError::Parse(format!("invalid tensor count '{n}'")))?;
        }
        kv.push_str(trimmed);
        kv.push('\n');
    };
    let cfg = ModelConfig::from_kv_lines(&kv)?;
    let mut model = TwoStreamModel::<T>::build(cfg, 0)?;

    let mut seen = HashSet::new();
    for _ in 0..count {
        let mut len_bytes = [0u8; 4];
        read_exact(r, &mut len_bytes, "a path length")?;
        let len = u32::from_le_bytes(len_bytes) as usize;
        let mut path_bytes = vec![0u8; len];
        read_exact(r, &mut path_bytes, "a parameter path")?;
        let path = String::from_utf8(path_bytes)
            .map_err(|_| ModelError::Parse("parameter path is not UTF-8".into()))?;
        let mut flag = [0u8; 1];
        read_exact(r, &mut flag, "a trainable flag")?;
        if !seen.insert(path.clone()) {
            return Err(ModelError::Parse(format!("duplicate record for '{path}'")));
        }
        let tensor = tio::read_tensor::<T, _>(r)?;
        match (flag[0], model.params.get(&path).is_some()) {
            (1, true) => {
                let t = Tensor::param(tensor.shape(), tensor.data().to_vec())?;
                model.params.set(&path, t)?;
            }
            (0, true) => model.params.set(&path, tensor)?,
            (0, false) => model.params.insert_buffer(&path, tensor)?,
            (1, false) => {
                return Err(ModelError::Parse(format!(
                    "checkpoint trains unknown parameter '{path}'"
                )))
            }
            (f, _) => {
                return Err(ModelError::Parse(format!(
                    "invalid trainable flag {f} for '{path}'"
                )))
            }
        }
    }
    let missing: Vec<&str> = model
        .params
        .iter()
        .filter(|(p, e)| e.trainable && !seen.contains(*p))
        .map(|(p, _)| p)
        .collect();
    if !missing.is_empty() {
        return Err(ModelError::Parse(format!(
            "checkpoint is missing {} parameter(s), first: '{}'",
            missing.len(),
            missing[0]
        )));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(ModelError::Parse("trailing bytes after the last tensor record".into()));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    cfg: &ModelConfig,
    store: &ParamStore<T>,
) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, cfg, store)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<TwoStreamModel<T>, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    read_checkpoint(&mut r)
}
