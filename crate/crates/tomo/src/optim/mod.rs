//! Classical regularized reconstruction: finite-difference operators, LSQR
//! and a generic scaled-form ADMM covering L2TV, L1TV and L2TGV.

mod admm;
mod lsqr;
mod operators;

pub use admm::{admm_reconstruct, objective, tune_lambda, AdmmConfig, AdmmIter, AdmmResult};
pub use lsqr::{lsqr, shrink, shrink_scalar, LsqrResult};
pub use operators::{block_matrix, grad_operator, swap_halves, sym_grad_operator};

use thiserror::Error;

use crate::sparse::SparseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("operand length {got} does not match {expected}")]
    Dims { expected: usize, got: usize },
    #[error("NaN breakdown in LSQR at iteration {iter}")]
    NanBreakdown { iter: usize },
    #[error("non-finite iterate in ADMM at outer iteration {iter}")]
    NonFinite { iter: usize },
    #[error("candidate list is empty")]
    NoCandidates,
}

/// Data-fidelity norm of the reconstruction objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataNorm {
    L1,
    L2,
}

/// Regularizer of the reconstruction objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    Tv,
    Tgv,
}

/// One regularized inversion instance: `min_x ||Lx - b||_p^p + lambda R(x)`.
#[derive(Debug, Clone)]
pub struct ReconProblem<'a> {
    pub l: &'a SparseMatrix,
    pub b: &'a [f64],
    pub p: DataNorm,
    pub reg: Regularizer,
    pub lambda: f64,
    /// Image dims (n1, n2); `l.cols()` must equal `n1 * n2`.
    pub grid: (usize, usize),
}

impl<'a> ReconProblem<'a> {
    pub fn new(
        l: &'a SparseMatrix,
        b: &'a [f64],
        p: DataNorm,
        reg: Regularizer,
        lambda: f64,
        grid: (usize, usize),
    ) -> Result<Self, SolveError> {
        if l.cols() != grid.0 * grid.1 {
            return Err(SolveError::Dims {
                expected: grid.0 * grid.1,
                got: l.cols(),
            });
        }
        if l.rows() != b.len() {
            return Err(SolveError::Dims {
                expected: l.rows(),
                got: b.len(),
            });
        }
        assert!(lambda >= 0.0);
        Ok(Self {
            l,
            b,
            p,
            reg,
            lambda,
            grid,
        })
    }
}
