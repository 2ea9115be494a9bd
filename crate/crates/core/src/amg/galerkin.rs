use crate::error::{Error, Result};
use crate::matrix::CsrBlock;

/// Row-by-row (Gustavson) sparse product `A B` with a dense accumulator.
/// Output columns are sorted; structural zeros from cancellation are kept.
pub fn spgemm(a: &CsrBlock, b: &CsrBlock) -> Result<CsrBlock> {
    if a.ncols() != b.nrows() {
        return Err(Error::shape(format_args!(
            "cannot multiply {}x{} by {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let ncols = b.ncols();
    let mut acc = vec![0.0f64; ncols];
    let mut mark = vec![usize::MAX; ncols];
    let mut touched = Vec::new();
    let mut row_ptr = Vec::with_capacity(a.nrows() + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for i in 0..a.nrows() {
        for (k, av) in a.row(i) {
            for (j, bv) in b.row(k) {
                if mark[j] != i {
                    mark[j] = i;
                    acc[j] = 0.0;
                    touched.push(j);
                }
                acc[j] += av * bv;
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            cols.push(j);
            vals.push(acc[j]);
        }
        touched.clear();
        row_ptr.push(cols.len());
    }
    Ok(CsrBlock::new(a.nrows(), ncols, row_ptr, cols, vals)?.decompress())
}

/// Coarse operator `R A P`.
pub fn galerkin(r: &CsrBlock, a: &CsrBlock, p: &CsrBlock) -> Result<CsrBlock> {
    spgemm(r, &spgemm(a, p)?)
}
