//! Finite-difference operators and sparse block assembly.

use crate::sparse::SparseMatrix;

/// First-order forward-difference gradient with replicate (Neumann) boundary:
/// boundary rows are empty. Output stacks the row-direction derivative over
/// the column-direction derivative, shape `2*n1*n2 x n1*n2`.
pub fn grad_operator(n1: usize, n2: usize) -> SparseMatrix {
    assert!(n1 >= 2 && n2 >= 2);
    let n = n1 * n2;
    let mut triplets = Vec::with_capacity(4 * n);
    for i in 0..n1 {
        for j in 0..n2 {
            let p = i * n2 + j;
            if i + 1 < n1 {
                triplets.push((p, p, -1.0));
                triplets.push((p, p + n2, 1.0));
            }
            if j + 1 < n2 {
                triplets.push((n + p, p, -1.0));
                triplets.push((n + p, p + 1, 1.0));
            }
        }
    }
    SparseMatrix::from_triplets(2 * n, n, &triplets).expect("indices in range")
}

/// Symmetrized derivative of a two-channel vector field `u = [u1; u2]`,
/// where u1 is the x (column) component and u2 the y (row) component.
/// Backward differences with empty boundary rows; output stacks
/// `(dx u1, dy u2, (dy u1 + dx u2)/2)`, shape `3*n1*n2 x 2*n1*n2`.
pub fn sym_grad_operator(n1: usize, n2: usize) -> SparseMatrix {
    assert!(n1 >= 2 && n2 >= 2);
    let n = n1 * n2;
    let mut triplets = Vec::with_capacity(8 * n);
    for i in 0..n1 {
        for j in 0..n2 {
            let p = i * n2 + j;
            // dx u1: backward difference along columns.
            if j >= 1 {
                triplets.push((p, p, 1.0));
                triplets.push((p, p - 1, -1.0));
            }
            // dy u2: backward difference along rows.
            if i >= 1 {
                triplets.push((n + p, n + p, 1.0));
                triplets.push((n + p, n + p - n2, -1.0));
            }
            // Mixed channel: (dy u1 + dx u2) / 2, each term zero at its edge.
            if i >= 1 {
                triplets.push((2 * n + p, p, 0.5));
                triplets.push((2 * n + p, p - n2, -0.5));
            }
            if j >= 1 {
                triplets.push((2 * n + p, n + p, 0.5));
                triplets.push((2 * n + p, n + p - 1, -0.5));
            }
        }
    }
    SparseMatrix::from_triplets(3 * n, 2 * n, &triplets).expect("indices in range")
}

/// Permutation that swaps the two halves of a stacked 2-channel field.
pub fn swap_halves(n: usize) -> SparseMatrix {
    let triplets: Vec<(usize, usize, f64)> = (0..n)
        .map(|i| (i, n + i, 1.0))
        .chain((0..n).map(|i| (n + i, i, 1.0)))
        .collect();
    SparseMatrix::from_triplets(2 * n, 2 * n, &triplets).expect("permutation")
}

/// Assemble a block matrix from optional scaled sparse blocks.
/// `blocks[bi][bj]` occupies block row `bi` and block column `bj`; block
/// sizes are inferred and must be consistent.
pub fn block_matrix(blocks: &[Vec<Option<(&SparseMatrix, f64)>>]) -> SparseMatrix {
    let block_cols = blocks.iter().map(Vec::len).max().unwrap_or(0);
    let mut row_sizes = vec![0usize; blocks.len()];
    let mut col_sizes = vec![0usize; block_cols];
    for (bi, row) in blocks.iter().enumerate() {
        for (bj, cell) in row.iter().enumerate() {
            if let Some((m, _)) = cell {
                assert!(
                    row_sizes[bi] == 0 || row_sizes[bi] == m.rows(),
                    "inconsistent block row size"
                );
                assert!(
                    col_sizes[bj] == 0 || col_sizes[bj] == m.cols(),
                    "inconsistent block col size"
                );
                row_sizes[bi] = m.rows();
                col_sizes[bj] = m.cols();
            }
        }
    }
    assert!(
        row_sizes.iter().all(|&s| s > 0) && col_sizes.iter().all(|&s| s > 0),
        "every block row/col needs at least one block"
    );
    let row_off: Vec<usize> = std::iter::once(0)
        .chain(row_sizes.iter().scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        }))
        .collect();
    let col_off: Vec<usize> = std::iter::once(0)
        .chain(col_sizes.iter().scan(0, |acc, &s| {
            *acc += s;
            Some(*acc)
        }))
        .collect();

    let mut triplets = Vec::new();
    for (bi, row) in blocks.iter().enumerate() {
        for (bj, cell) in row.iter().enumerate() {
            if let Some((m, scale)) = cell {
                for r in 0..m.rows() {
                    for (c, v) in m.row(r) {
                        triplets.push((row_off[bi] + r, col_off[bj] + c, scale * v));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(
        *row_off.last().unwrap(),
        *col_off.last().unwrap(),
        &triplets,
    )
    .expect("offsets in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn grad_of_constant_is_zero() {
        let g = grad_operator(4, 5);
        let x = vec![2.5; 20];
        assert!(g.apply(&x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_of_column_ramp() {
        let (n1, n2) = (4, 4);
        let g = grad_operator(n1, n2);
        let x: Vec<f64> = (0..n1 * n2).map(|p| (p % n2) as f64).collect();
        let y = g.apply(&x).unwrap();
        let n = n1 * n2;
        for i in 0..n1 {
            for j in 0..n2 {
                let p = i * n2 + j;
                assert_eq!(y[p], 0.0, "row derivative at ({i},{j})");
                let want = if j + 1 < n2 { 1.0 } else { 0.0 };
                assert_eq!(y[n + p], want, "col derivative at ({i},{j})");
            }
        }
    }

    /// Oracle: explicit finite-difference loops on a dense image.
    #[test]
    fn grad_matches_dense_oracle() {
        let (n1, n2) = (5, 5);
        let mut rng = Rng::from_seed(3);
        let x: Vec<f64> = (0..n1 * n2).map(|_| rng.normal()).collect();
        let y = grad_operator(n1, n2).apply(&x).unwrap();
        let n = n1 * n2;
        for i in 0..n1 {
            for j in 0..n2 {
                let p = i * n2 + j;
                let dr = if i + 1 < n1 { x[p + n2] - x[p] } else { 0.0 };
                let dc = if j + 1 < n2 { x[p + 1] - x[p] } else { 0.0 };
                assert!((y[p] - dr).abs() < 1e-14);
                assert!((y[n + p] - dc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sym_grad_of_constant_field_is_zero() {
        let e = sym_grad_operator(4, 4);
        let u = vec![1.7; 32];
        assert!(e.apply(&u).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sym_grad_of_coordinate_field() {
        let (n1, n2) = (4, 4);
        let n = n1 * n2;
        let e = sym_grad_operator(n1, n2);
        // u = (x-coordinate, 0)
        let mut u = vec![0.0; 2 * n];
        for i in 0..n1 {
            for j in 0..n2 {
                u[i * n2 + j] = j as f64;
            }
        }
        let y = e.apply(&u).unwrap();
        for i in 0..n1 {
            for j in 0..n2 {
                let p = i * n2 + j;
                let want = if j >= 1 { 1.0 } else { 0.0 };
                assert_eq!(y[p], want, "dx u1 at ({i},{j})");
                assert_eq!(y[n + p], 0.0);
                assert_eq!(y[2 * n + p], 0.0);
            }
        }
    }

    /// Oracle: dense loops for the symmetrized derivative.
    #[test]
    fn sym_grad_matches_dense_oracle() {
        let (n1, n2) = (5, 4);
        let n = n1 * n2;
        let mut rng = Rng::from_seed(8);
        let u: Vec<f64> = (0..2 * n).map(|_| rng.normal()).collect();
        let y = sym_grad_operator(n1, n2).apply(&u).unwrap();
        for i in 0..n1 {
            for j in 0..n2 {
                let p = i * n2 + j;
                let dx_u1 = if j >= 1 { u[p] - u[p - 1] } else { 0.0 };
                let dy_u2 = if i >= 1 { u[n + p] - u[n + p - n2] } else { 0.0 };
                let dy_u1 = if i >= 1 { u[p] - u[p - n2] } else { 0.0 };
                let dx_u2 = if j >= 1 { u[n + p] - u[n + p - 1] } else { 0.0 };
                assert!((y[p] - dx_u1).abs() < 1e-14);
                assert!((y[n + p] - dy_u2).abs() < 1e-14);
                assert!((y[2 * n + p] - 0.5 * (dy_u1 + dx_u2)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn operators_have_exact_adjoints() {
        let mut rng = Rng::from_seed(21);
        for op in [grad_operator(6, 5), sym_grad_operator(5, 6)] {
            let x: Vec<f64> = (0..op.cols()).map(|_| rng.normal()).collect();
            let y: Vec<f64> = (0..op.rows()).map(|_| rng.normal()).collect();
            let ax = op.apply(&x).unwrap();
            let aty = op.apply_transpose(&y).unwrap();
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn block_matrix_stacks() {
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::from_triplets(2, 2, &[(0, 1, 3.0)]).unwrap();
        let k = block_matrix(&[
            vec![Some((&a, 1.0)), Some((&b, 1.0))],
            vec![None, Some((&a, -2.0))],
        ]);
        assert_eq!(k.rows(), 4);
        assert_eq!(k.cols(), 4);
        let x = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(k.apply(&x).unwrap(), vec![1.0 + 12.0, 2.0, -6.0, -8.0]);
    }
}
