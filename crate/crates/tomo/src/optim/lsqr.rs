//! LSQR least-squares solver built on Golub-Kahan bidiagonalization.

use crate::sparse::LinearOperator;

use super::SolveError;

/// Solution and per-iteration residual norms `||A x_k - b||_2`.
#[derive(Debug, Clone)]
pub struct LsqrResult {
    pub x: Vec<f64>,
    pub residual_norms: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Minimize `||A x - b||_2`, starting from `x0` when given (the shifted
/// system `A d = b - A x0` is solved and `x0 + d` returned).
pub fn lsqr(
    a: &dyn LinearOperator,
    b: &[f64],
    iters: usize,
    x0: Option<&[f64]>,
) -> Result<LsqrResult, SolveError> {
    assert!(iters >= 1);
    if b.len() != a.rows() {
        return Err(SolveError::Dims {
            expected: a.rows(),
            got: b.len(),
        });
    }
    let rhs: Vec<f64> = match x0 {
        Some(x0) => {
            if x0.len() != a.cols() {
                return Err(SolveError::Dims {
                    expected: a.cols(),
                    got: x0.len(),
                });
            }
            let ax0 = a.apply(x0);
            b.iter().zip(&ax0).map(|(bi, ai)| bi - ai).collect()
        }
        None => b.to_vec(),
    };

    let mut x = vec![0.0; a.cols()];
    let mut residual_norms = Vec::with_capacity(iters);

    let mut u = rhs.clone();
    let mut beta = norm(&u);
    let mut exact_from_start = false;
    if beta > 0.0 {
        for v in &mut u {
            *v /= beta;
        }
    } else {
        exact_from_start = true;
    }

    if !exact_from_start {
        let mut v = a.apply_t(&u);
        let mut alpha = norm(&v);
        if alpha > 0.0 {
            for w in &mut v {
                *w /= alpha;
            }
        }
        let mut w = v.clone();
        let mut phi_bar = beta;
        let mut rho_bar = alpha;

        for k in 0..iters {
            if alpha == 0.0 {
                break;
            }
            // Bidiagonalization step.
            let mut next_u = a.apply(&v);
            axpy(&mut next_u, -alpha, &u);
            beta = norm(&next_u);
            if !beta.is_finite() {
                return Err(SolveError::NanBreakdown { iter: k });
            }
            if beta > 0.0 {
                for t in &mut next_u {
                    *t /= beta;
                }
            }
            u = next_u;
            let mut next_v = a.apply_t(&u);
            axpy(&mut next_v, -beta, &v);
            alpha = norm(&next_v);
            if !alpha.is_finite() {
                return Err(SolveError::NanBreakdown { iter: k });
            }
            if alpha > 0.0 {
                for t in &mut next_v {
                    *t /= alpha;
                }
            }
            v = next_v;

            // Givens rotation applied to the bidiagonal system.
            let rho = (rho_bar * rho_bar + beta * beta).sqrt();
            let c = rho_bar / rho;
            let s = beta / rho;
            let theta = s * alpha;
            rho_bar = -c * alpha;
            let phi = c * phi_bar;
            phi_bar *= s;

            axpy(&mut x, phi / rho, &w);
            let scale = theta / rho;
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi = vi - scale * *wi;
            }
            residual_norms.push(phi_bar.abs());
            if !phi_bar.is_finite() {
                return Err(SolveError::NanBreakdown { iter: k });
            }
            if beta == 0.0 {
                break;
            }
        }
    }

    if let Some(x0) = x0 {
        for (xi, x0i) in x.iter_mut().zip(x0) {
            *xi += x0i;
        }
    }
    if residual_norms.is_empty() {
        // Initial guess was already exact (or b - A x0 = 0).
        let r: Vec<f64> = {
            let ax = a.apply(&x);
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        };
        residual_norms.push(norm(&r));
    }
    Ok(LsqrResult { x, residual_norms })
}

/// Elementwise soft threshold `sign(v) * max(|v| - kappa, 0)`.
pub fn shrink_scalar(v: f64, kappa: f64) -> f64 {
    debug_assert!(kappa >= 0.0);
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Soft threshold applied elementwise.
pub fn shrink(v: &[f64], kappa: f64) -> Vec<f64> {
    v.iter().map(|&x| shrink_scalar(x, kappa)).collect()
}
