use crate::matrix::CsrBlock;

/// Boolean strength-of-connection matrix in CSR form: row `i` lists the
/// points `i` strongly depends on, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrengthGraph {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl StrengthGraph {
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for mut r in rows.iter().cloned() {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        StrengthGraph {
            n: rows.len(),
            row_ptr,
            cols,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn is_strong(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// Row `j` of the transpose lists the points that strongly depend on `j`.
    pub fn transpose(&self) -> StrengthGraph {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0; self.cols.len()];
        for i in 0..self.n {
            for &c in self.row(i) {
                cols[next[c]] = i;
                next[c] += 1;
            }
        }
        StrengthGraph {
            n: self.n,
            row_ptr: counts,
            cols,
        }
    }
}

/// Classical rule: `j` is a strong dependency of `i` when
/// `-a_ij >= theta * max_{k != i} (-a_ik)`. Rows without negative
/// off-diagonal entries have no strong dependencies.
pub fn strength_graph(a: &CsrBlock, theta: f64) -> StrengthGraph {
    let mut row_ptr = Vec::with_capacity(a.nrows() + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    for i in 0..a.nrows() {
        let max_neg = a.row(i).filter(|&(c, _)| c != i).map(|(_, v)| -v).fold(0.0f64, f64::max);
        if max_neg > 0.0 {
            let cut = theta * max_neg;
            cols.extend(a.row(i).filter(|&(c, v)| c != i && -v >= cut).map(|(c, _)| c));
        }
        row_ptr.push(cols.len());
    }
    StrengthGraph {
        n: a.nrows(),
        row_ptr,
        cols,
    }
}
