//! Tomographic reconstruction toolkit.
//!
//! Builds sparse ray projectors for parallel-beam X-ray CT and
//! reflector-based ultrasound speed-of-sound tomography, simulates noisy
//! acquisitions from high-resolution phantoms, reconstructs with classical
//! regularized solvers (LSQR, ADMM with TV/TGV) or with a trainable
//! preconditioned unrolled network, and scores results with RMSE/PSNR/SSIM.

pub mod geometry;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod simulate;
pub mod sparse;
pub mod tensor;
pub mod train;
pub mod vn;

pub use io::{read_tensor, write_tensor, Checkpoint};
pub use rng::Rng;
pub use sparse::{spmv, spmv_t, LinearOperator, SparseMatrix};
pub use tensor::{DType, Tensor};
