use std::fmt;

use crate::error::{Error, Result};

/// Bit width of the stored column indices of a [`CsrBlock`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IndexWidth {
    W8,
    W16,
    W32,
}

impl IndexWidth {
    pub const ALL: [IndexWidth; 3] = [IndexWidth::W8, IndexWidth::W16, IndexWidth::W32];

    pub fn bits(self) -> u32 {
        match self {
            IndexWidth::W8 => 8,
            IndexWidth::W16 => 16,
            IndexWidth::W32 => 32,
        }
    }

    /// Largest column count representable with this width.
    pub fn capacity(self) -> usize {
        1usize << self.bits()
    }
}

/// Floating-point storage precision of matrix values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PrecisionTag {
    /// 64-bit values.
    #[default]
    Full,
    /// 32-bit values, widened to 64 bits on every multiply-accumulate.
    Reduced,
}

impl fmt::Display for PrecisionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecisionTag::Full => "f64",
            PrecisionTag::Reduced => "f32",
        })
    }
}

/// Smallest index width able to address `ncols` columns.
pub fn choose_width(ncols: usize) -> IndexWidth {
    IndexWidth::ALL
        .into_iter()
        .find(|w| ncols <= w.capacity())
        .unwrap_or(IndexWidth::W32)
}

pub trait ColIndex: Copy + Send + Sync + 'static {
    fn to_usize(self) -> usize;
}

impl ColIndex for u8 {
    #[inline(always)]
    fn to_usize(self) -> usize {
        self as usize
    }
}

impl ColIndex for u16 {
    #[inline(always)]
    fn to_usize(self) -> usize {
        self as usize
    }
}

impl ColIndex for u32 {
    #[inline(always)]
    fn to_usize(self) -> usize {
        self as usize
    }
}

pub trait StoredValue: Copy + Send + Sync + 'static {
    fn widen(self) -> f64;
}

impl StoredValue for f64 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self
    }
}

impl StoredValue for f32 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColIndices {
    W8(Vec<u8>),
    W16(Vec<u16>),
    W32(Vec<u32>),
}

impl ColIndices {
    fn width(&self) -> IndexWidth {
        match self {
            ColIndices::W8(_) => IndexWidth::W8,
            ColIndices::W16(_) => IndexWidth::W16,
            ColIndices::W32(_) => IndexWidth::W32,
        }
    }

    #[inline]
    fn get(&self, k: usize) -> usize {
        match self {
            ColIndices::W8(c) => c[k] as usize,
            ColIndices::W16(c) => c[k] as usize,
            ColIndices::W32(c) => c[k] as usize,
        }
    }

    fn pack(width: IndexWidth, cols: impl Iterator<Item = usize>) -> Self {
        match width {
            IndexWidth::W8 => ColIndices::W8(cols.map(|c| c as u8).collect()),
            IndexWidth::W16 => ColIndices::W16(cols.map(|c| c as u16).collect()),
            IndexWidth::W32 => ColIndices::W32(cols.map(|c| c as u32).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Full(Vec<f64>),
    Reduced(Vec<f32>),
}

impl Values {
    #[inline]
    fn get(&self, k: usize) -> f64 {
        match self {
            Values::Full(v) => v[k],
            Values::Reduced(v) => v[k] as f64,
        }
    }
}

/// One matrix block in compressed sparse row format.
///
/// Column indices inside each row are strictly increasing. The index
/// storage width and value precision are chosen per block.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrBlock {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: ColIndices,
    values: Values,
}

impl CsrBlock {
    /// Builds a full-precision block, validating every CSR invariant.
    /// Indices are stored at the smallest legal width.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        validate_structure(nrows, ncols, &row_ptr, &col_idx)?;
        if values.len() != col_idx.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} column indices",
                values.len(),
                col_idx.len()
            )));
        }
        if ncols > IndexWidth::W32.capacity() {
            return Err(Error::Capacity {
                ncols,
                width: IndexWidth::W32,
            });
        }
        let width = choose_width(ncols);
        Ok(CsrBlock {
            nrows,
            ncols,
            row_ptr,
            cols: ColIndices::pack(width, col_idx.into_iter()),
            values: Values::Full(values),
        })
    }

    /// Builds a block from rows whose entries may be unsorted. Duplicate
    /// columns within a row are rejected.
    pub fn from_unsorted(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        mut col_idx: Vec<usize>,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() == nrows + 1 && values.len() == col_idx.len() {
            for i in 0..nrows {
                let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                if lo > hi || hi > col_idx.len() {
                    break;
                }
                let cols = &col_idx[lo..hi];
                if cols.windows(2).all(|w| w[0] < w[1]) {
                    continue;
                }
                let mut entries: Vec<(usize, f64)> =
                    cols.iter().copied().zip(values[lo..hi].iter().copied()).collect();
                entries.sort_by_key(|e| e.0);
                for (k, (c, v)) in entries.into_iter().enumerate() {
                    col_idx[lo + k] = c;
                    values[lo + k] = v;
                }
            }
        }
        Self::new(nrows, ncols, row_ptr, col_idx, values)
    }

    /// Builds a block from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
        }
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            cols.push(j);
            vals.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::new(nrows, ncols, row_ptr, cols, vals)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
            .expect("identity is a valid CSR block")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_ptr[self.nrows]
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn index_width(&self) -> IndexWidth {
        self.cols.width()
    }

    pub fn precision(&self) -> PrecisionTag {
        match self.values {
            Values::Full(_) => PrecisionTag::Full,
            Values::Reduced(_) => PrecisionTag::Reduced,
        }
    }

    pub fn raw_cols(&self) -> &ColIndices {
        &self.cols
    }

    pub fn raw_values(&self) -> &Values {
        &self.values
    }

    #[inline]
    pub fn col(&self, k: usize) -> usize {
        self.cols.get(k)
    }

    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        self.values.get(k)
    }

    /// Iterates `(column, value)` pairs of row `i`, values widened to f64.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col(k), self.value(k)))
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Entry `(i, j)` if it is structurally present.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = (a + b) / 2;
            match self.col(mid).cmp(&j) {
                std::cmp::Ordering::Less => a = mid + 1,
                std::cmp::Ordering::Greater => b = mid,
                std::cmp::Ordering::Equal => return Some(self.value(mid)),
            }
        }
        None
    }

    pub fn col_indices(&self) -> Vec<usize> {
        (0..self.nnz()).map(|k| self.col(k)).collect()
    }

    pub fn values_f64(&self) -> Vec<f64> {
        (0..self.nnz()).map(|k| self.value(k)).collect()
    }

    /// Re-stores the column indices at `width`; structure and values are
    /// unchanged.
    pub fn compress_indices(&self, width: IndexWidth) -> Result<CsrBlock> {
        if self.ncols > width.capacity() {
            return Err(Error::Capacity {
                ncols: self.ncols,
                width,
            });
        }
        Ok(CsrBlock {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            cols: ColIndices::pack(width, (0..self.nnz()).map(|k| self.col(k))),
            values: self.values.clone(),
        })
    }

    /// Same block with 32-bit indices.
    pub fn decompress(&self) -> CsrBlock {
        self.compress_indices(IndexWidth::W32)
            .expect("every block fits 32-bit indices")
    }

    /// Same block with values stored at `precision`.
    pub fn with_precision(&self, precision: PrecisionTag) -> CsrBlock {
        let values = match (precision, &self.values) {
            (PrecisionTag::Full, Values::Full(v)) => Values::Full(v.clone()),
            (PrecisionTag::Full, Values::Reduced(v)) => {
                Values::Full(v.iter().map(|&x| x as f64).collect())
            }
            (PrecisionTag::Reduced, Values::Full(v)) => {
                Values::Reduced(v.iter().map(|&x| x as f32).collect())
            }
            (PrecisionTag::Reduced, Values::Reduced(v)) => Values::Reduced(v.clone()),
        };
        CsrBlock {
            values,
            ..self.clone_structure()
        }
    }

    fn clone_structure(&self) -> CsrBlock {
        CsrBlock {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            values: Values::Full(Vec::new()),
        }
    }

    /// Full-precision transpose.
    pub fn transpose(&self) -> CsrBlock {
        let mut counts = vec![0usize; self.ncols + 1];
        for k in 0..self.nnz() {
            counts[self.col(k) + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let dst = next[j];
                cols[dst] = i;
                vals[dst] = v;
                next[j] += 1;
            }
        }
        CsrBlock::new(self.ncols, self.nrows, row_ptr[..=self.ncols].to_vec(), cols, vals)
            .expect("transpose of a valid block is valid")
    }

    /// Dense row-major copy; intended for small matrices.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[i * self.ncols + j] = v;
            }
        }
        d
    }

    /// Bytes occupied by the index and value arrays.
    pub fn storage_bytes(&self) -> usize {
        let idx = self.nnz() * (self.index_width().bits() as usize / 8);
        let val = match self.values {
            Values::Full(_) => self.nnz() * 8,
            Values::Reduced(_) => self.nnz() * 4,
        };
        idx + val + self.row_ptr.len() * std::mem::size_of::<usize>()
    }
}

fn validate_structure(nrows: usize, ncols: usize, row_ptr: &[usize], col_idx: &[usize]) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidArgument(m));
    if row_ptr.len() != nrows + 1 {
        return bad(format!("row_ptr has length {}, expected {}", row_ptr.len(), nrows + 1));
    }
    if row_ptr[0] != 0 {
        return bad(format!("row_ptr[0] = {}", row_ptr[0]));
    }
    if row_ptr[nrows] != col_idx.len() {
        return bad(format!(
            "row_ptr[{nrows}] = {} but nnz = {}",
            row_ptr[nrows],
            col_idx.len()
        ));
    }
    for i in 0..nrows {
        let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
        if lo > hi {
            return bad(format!("row_ptr decreases at row {i}"));
        }
        let cols = &col_idx[lo..hi];
        if let Some(&c) = cols.iter().find(|&&c| c >= ncols) {
            return bad(format!("column {c} in row {i} exceeds ncols = {ncols}"));
        }
        if cols.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("columns of row {i} are not strictly increasing"));
        }
    }
    Ok(())
}

/// Runs `$body` with `$rp`, `$cols`, `$vals` bound to the typed storage of
/// a block (one arm per index width / value precision pair).
macro_rules! with_block {
    ($block:expr, |$rp:ident, $cols:ident, $vals:ident| $body:expr) => {{
        use $crate::matrix::csr::{ColIndices, Values};
        let blk = $block;
        let $rp: &[usize] = blk.row_ptr();
        match (blk.raw_cols(), blk.raw_values()) {
            (ColIndices::W8(c), Values::Full(v)) => {
                let ($cols, $vals) = (c.as_slice(), v.as_slice());
                $body
            }
            (ColIndices::W8(c), Values::Reduced(v)) => {
                let ($cols, $vals) = (c.as_slice(), v.as_slice());
                $body
            }
            (ColIndices::W16(c), Values::Full(v)) => {
                let ($cols, $vals) = (c.as_slice(), v.as_slice());
                $body
            }
            (ColIndices::W16(c), Values::Reduced(v)) => {
                let ($cols, $vals) = (c.as_slice(), v.as_slice());
                $body
            }
            (ColIndices::W32(c), Values::Full(v)) => {
                let ($cols, $vals) = (c.as_slice(), v.as_slice());
                $body
            }
            (ColIndices::W32(c), Values::Reduced(v)) => {
                let ($cols, $vals) = (c.as_slice(), v.as_slice());
                $body
            }
        }
    }};
}
pub(crate) use with_block;

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrBlock {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrBlock::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn choose_width_boundaries() {
        assert_eq!(choose_width(1), IndexWidth::W8);
        assert_eq!(choose_width(256), IndexWidth::W8);
        assert_eq!(choose_width(257), IndexWidth::W16);
        assert_eq!(choose_width(65536), IndexWidth::W16);
        assert_eq!(choose_width((1 << 16) + 1), IndexWidth::W32);
    }

    #[test]
    fn w8_roundtrip_100x100() {
        let a = tridiag(100).compress_indices(IndexWidth::W32).unwrap();
        let c = a.compress_indices(IndexWidth::W8).unwrap();
        assert_eq!(c.index_width(), IndexWidth::W8);
        assert_eq!(c.decompress(), a);
        assert_eq!(c.col_indices(), a.col_indices());
    }

    #[test]
    fn capacity_error_for_wide_block() {
        let a = CsrBlock::new(1, 70000, vec![0, 1], vec![69999], vec![1.0]).unwrap();
        match a.compress_indices(IndexWidth::W16) {
            Err(Error::Capacity { ncols: 70000, width: IndexWidth::W16 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(a.compress_indices(IndexWidth::W32).is_ok());
    }

    #[test]
    fn invariants_rejected() {
        assert!(CsrBlock::new(2, 2, vec![0, 1, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrBlock::new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrBlock::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrBlock::new(1, 2, vec![1, 1], vec![], vec![]).is_err());
    }

    #[test]
    fn unsorted_rows_are_normalized() {
        let a = CsrBlock::from_unsorted(1, 3, vec![0, 3], vec![2, 0, 1], vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(a.col_indices(), vec![0, 1, 2]);
        assert_eq!(a.values_f64(), vec![1.0, 2.0, 3.0]);
        assert!(CsrBlock::from_unsorted(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn transpose_and_get() {
        let a = CsrBlock::from_triplets(2, 3, &[(0, 2, 5.0), (1, 0, -1.0), (0, 0, 1.0)]).unwrap();
        let t = a.transpose();
        assert_eq!((t.nrows(), t.ncols()), (3, 2));
        assert_eq!(t.get(2, 0), Some(5.0));
        assert_eq!(t.get(0, 1), Some(-1.0));
        assert_eq!(t.get(1, 0), None);
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn reduced_precision_roundtrip_of_representable_values() {
        let a = tridiag(5);
        let r = a.with_precision(PrecisionTag::Reduced);
        assert_eq!(r.precision(), PrecisionTag::Reduced);
        assert_eq!(r.with_precision(PrecisionTag::Full), a);
    }
}
