//! Bit-exact binary containers for tensors and named-tensor checkpoints.
//!
//! Tensor file (`.tnsr`): magic `TNSR`, u32 version = 1, u32 dtype
//! (1 = f32, 2 = f64), u32 rank, rank x u64 dims, then raw little-endian
//! row-major data. Checkpoint file (`.tckp`): magic `TCKP`, u32 version = 1,
//! u32 entry count, then per entry a u32 name length, the UTF-8 name and an
//! embedded tensor record. All integers are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::tensor::{DType, Tensor, TensorError};

const TENSOR_MAGIC: &[u8; 4] = b"TNSR";
const CHECKPOINT_MAGIC: &[u8; 4] = b"TCKP";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype tag {0}")]
    UnsupportedDtype(u32),
    #[error("truncated file: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("entry name is not valid UTF-8")]
    BadName,
    #[error("invalid tensor payload: {0}")]
    Tensor(#[from] TensorError),
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), IoError> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(IoError::Truncated {
                needed: buf.len() - filled,
            });
        }
        filled += n;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, IoError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, IoError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn write_tensor_record(w: &mut impl Write, t: &Tensor) -> Result<(), IoError> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&t.dtype().tag().to_le_bytes())?;
    w.write_all(&(t.dims().len() as u32).to_le_bytes())?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    match t.dtype() {
        DType::F32 => {
            for &v in t.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        DType::F64 => {
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_tensor_record(r: &mut impl Read) -> Result<Tensor, IoError> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(IoError::BadMagic {
            expected: *TENSOR_MAGIC,
            found: magic,
        });
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let dtype = match read_u32(r)? {
        1 => DType::F32,
        2 => DType::F64,
        tag => return Err(IoError::UnsupportedDtype(tag)),
    };
    let rank = read_u32(r)? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_u64(r)? as usize);
    }
    let count: usize = dims.iter().product();
    let tensor = match dtype {
        DType::F32 => {
            let mut data = Vec::with_capacity(count);
            let mut b = [0u8; 4];
            for _ in 0..count {
                read_exact(r, &mut b)?;
                data.push(f32::from_le_bytes(b));
            }
            Tensor::from_f32(dims, data)?
        }
        DType::F64 => {
            let mut data = Vec::with_capacity(count);
            let mut b = [0u8; 8];
            for _ in 0..count {
                read_exact(r, &mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            Tensor::from_vec(dims, data)?
        }
    };
    Ok(tensor)
}

/// Write a tensor to `path` in the TNSR format.
pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor_record(&mut w, t)?;
    w.flush()?;
    Ok(())
}

/// Read a tensor from a TNSR file.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensor_record(&mut r)
}

/// Ordered collection of named tensors, stored in the TCKP format.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace an entry; insertion order is preserved on disk.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        if let Some(slot) = self.entries.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = t;
        } else {
            self.entries.push((name, t));
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, t) in &self.entries {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            write_tensor_record(&mut w, t)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(IoError::BadMagic {
                expected: *CHECKPOINT_MAGIC,
                found: magic,
            });
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(IoError::UnsupportedVersion(version));
        }
        let count = read_u32(&mut r)? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| IoError::BadName)?;
            let tensor = read_tensor_record(&mut r)?;
            entries.push((name, tensor));
        }
        Ok(Self { entries })
    }
}
