//! Flat binary checkpoints for parameter stores.
//!
//! Layout, all integers little-endian:
//!   magic "BBCP" | version u32 | count u32
//! then per parameter, in store (lexicographic) order:
//!   name_len u32 | name bytes (UTF-8) | shape 4×u32 | values f64 × numel
//!
//! Only values are persisted; optimizer moments are not part of a checkpoint.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::params::ParamStore;
use crate::tensor::Tensor4;
use crate::TensorError;

const MAGIC: [u8; 4] = *b"BBCP";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint does not match the model: {0}")]
    Mismatch(#[from] TensorError),
}

/// Writes every parameter's value to `path`.
pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<(), CheckpointError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, param) in store.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        for dim in param.value.shape() {
            out.write_all(&(dim as u32).to_le_bytes())?;
        }
        for v in param.value.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint as (name, tensor) records in file order.
pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor4)>, CheckpointError> {
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let count = read_u32(&mut input)? as usize;

    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut input)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        input.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Corrupt("parameter name is not UTF-8".into()))?;
        let mut shape = [0usize; 4];
        for dim in &mut shape {
            *dim = read_u32(&mut input)? as usize;
        }
        if shape.iter().any(|&d| d == 0) {
            return Err(CheckpointError::Corrupt(format!("{name}: zero dimension in shape {shape:?}")));
        }
        let numel = shape.iter().product::<usize>();
        let mut data = vec![0.0f64; numel];
        let mut buf = [0u8; 8];
        for v in &mut data {
            input.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let tensor = Tensor4::from_vec(shape, data)
            .map_err(|e| CheckpointError::Corrupt(format!("{name}: {e}")))?;
        records.push((name, tensor));
    }
    Ok(records)
}

/// Loads a checkpoint into an existing store. Every record must name an
/// existing parameter of the same shape; parameters absent from the file keep
/// their current values.
pub fn restore_into(store: &mut ParamStore, path: &Path) -> Result<(), CheckpointError> {
    for (name, tensor) in load_checkpoint(path)? {
        store.set_value(&name, tensor)?;
    }
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
