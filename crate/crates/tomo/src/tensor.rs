//! Dense row-major tensors.
//!
//! All numerical code in this crate computes in `f64`; the `dtype` tag only
//! controls on-disk storage width. A tensor tagged [`DType::F32`] keeps its
//! values rounded to `f32` so that file round-trips are bit-exact.

use thiserror::Error;

/// Storage width of a tensor on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    /// Width in bytes of one scalar.
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    /// On-disk tag (1 = f32, 2 = f64).
    pub fn tag(self) -> u32 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TensorError {
    #[error("tensor must have at least one dimension")]
    EmptyDims,
    #[error("dimension {index} is zero")]
    ZeroDim { index: usize },
    #[error("dims imply {expected} elements but data holds {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
}

/// Dense tensor with row-major scalar data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    dtype: DType,
    data: Vec<f64>,
}

fn check_dims(dims: &[usize], len: usize) -> Result<(), TensorError> {
    if dims.is_empty() {
        return Err(TensorError::EmptyDims);
    }
    if let Some(index) = dims.iter().position(|&d| d == 0) {
        return Err(TensorError::ZeroDim { index });
    }
    let expected: usize = dims.iter().product();
    if expected != len {
        return Err(TensorError::LengthMismatch {
            expected,
            actual: len,
        });
    }
    Ok(())
}

impl Tensor {
    /// Build an f64 tensor from row-major data. Rejects empty dims, zero dims
    /// and non-finite values.
    pub fn from_vec(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        check_dims(&dims, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { index });
        }
        Ok(Self {
            dims,
            dtype: DType::F64,
            data,
        })
    }

    /// Build an f32-tagged tensor; values are stored widened to f64 and are
    /// exactly representable in f32, so file round-trips are bit-exact.
    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        check_dims(&dims, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { index });
        }
        Ok(Self {
            dims,
            dtype: DType::F32,
            data: data.into_iter().map(f64::from).collect(),
        })
    }

    /// All-zero f64 tensor.
    pub fn zeros(dims: Vec<usize>) -> Result<Self, TensorError> {
        check_dims(&dims, dims.iter().product())?;
        let n = dims.iter().product();
        Ok(Self {
            dims,
            dtype: DType::F64,
            data: vec![0.0; n],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Retag as f32 storage, rounding each value to the nearest f32.
    pub fn to_f32_storage(mut self) -> Self {
        for v in &mut self.data {
            *v = f64::from(*v as f32);
        }
        self.dtype = DType::F32;
        self
    }

    /// Retag as f64 storage (values unchanged).
    pub fn to_f64_storage(mut self) -> Self {
        self.dtype = DType::F64;
        self
    }

    pub fn check_same_dims(&self, other: &Tensor) -> Result<(), TensorError> {
        if self.dims != other.dims {
            return Err(TensorError::DimMismatch {
                expected: self.dims.clone(),
                actual: other.dims.clone(),
            });
        }
        Ok(())
    }
}
