use crate::error::{Error, Result};
use crate::matrix::{BlockVector, CsrBlock};

/// 7-point finite-difference Laplacian on an `nx x ny x nz` grid.
///
/// Dirichlet boundaries are eliminated, so every row keeps the diagonal 6
/// and the matrix is a symmetric positive definite M-matrix. Rows are
/// ordered lexicographically with x fastest.
pub fn gen_poisson3d(nx: usize, ny: usize, nz: usize) -> Result<CsrBlock> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidArgument(format!("grid {nx}x{ny}x{nz} has a zero dimension")));
    }
    let n = nx * ny * nz;
    let plane = nx * ny;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(7 * n);
    let mut vals = Vec::with_capacity(7 * n);
    row_ptr.push(0);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let row = i + nx * (j + ny * k);
                let mut push = |c: usize, v: f64| {
                    cols.push(c);
                    vals.push(v);
                };
                if k > 0 {
                    push(row - plane, -1.0);
                }
                if j > 0 {
                    push(row - nx, -1.0);
                }
                if i > 0 {
                    push(row - 1, -1.0);
                }
                push(row, 6.0);
                if i + 1 < nx {
                    push(row + 1, -1.0);
                }
                if j + 1 < ny {
                    push(row + nx, -1.0);
                }
                if k + 1 < nz {
                    push(row + plane, -1.0);
                }
                row_ptr.push(cols.len());
            }
        }
    }
    CsrBlock::new(n, n, row_ptr, cols, vals)
}

/// Closed-form nonzero count of [`gen_poisson3d`].
pub fn poisson3d_nnz(nx: usize, ny: usize, nz: usize) -> usize {
    7 * nx * ny * nz - 2 * (ny * nz + nx * nz + nx * ny)
}

/// Right-hand side `B = A * ones` with `nrhs` identical columns, so the
/// exact solution is known.
pub fn manufactured_rhs(a: &CsrBlock, nrhs: usize) -> BlockVector {
    let mut data = Vec::with_capacity(a.nrows() * nrhs);
    for i in 0..a.nrows() {
        let s: f64 = a.row(i).map(|(_, v)| v).sum();
        data.extend(std::iter::repeat_n(s, nrhs));
    }
    BlockVector::from_interleaved(a.nrows(), nrhs, data).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_cells() {
        let a = gen_poisson3d(2, 1, 1).unwrap();
        assert_eq!(a.to_dense(), vec![6.0, -1.0, -1.0, 6.0]);
        assert_eq!(gen_poisson3d(1, 1, 1).unwrap().to_dense(), vec![6.0]);
        assert!(gen_poisson3d(0, 3, 3).is_err());
    }

    #[test]
    fn large_grid_count() {
        assert_eq!(150 * 150 * 150, 3_375_000);
        assert_eq!(poisson3d_nnz(150, 150, 150), 23_490_000);
    }

    #[test]
    fn manufactured_rhs_rows() {
        let a = gen_poisson3d(3, 3, 3).unwrap();
        let b = manufactured_rhs(&a, 2);
        // corner: 6 - 3, face centre: 6 - 5, body centre: 0
        assert_eq!(b.row(0), &[3.0, 3.0]);
        assert_eq!(b.row(4), &[1.0, 1.0]);
        assert_eq!(b.row(13), &[0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn structure_matches_closed_form(nx in 1usize..=10, ny in 1usize..=10, nz in 1usize..=10) {
            let a = gen_poisson3d(nx, ny, nz).unwrap();
            prop_assert_eq!(a.nnz(), poisson3d_nnz(nx, ny, nz));
            prop_assert_eq!(a.transpose(), a.clone());
            for i in 0..a.nrows() {
                let off: f64 = a.row(i).filter(|&(c, _)| c != i).map(|(_, v)| -v).sum();
                prop_assert_eq!(a.get(i, i), Some(6.0));
                prop_assert!(off <= 6.0);
            }
        }
    }
}
