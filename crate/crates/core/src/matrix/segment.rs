use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::{choose_width, CsrBlock, Partition, PrecisionTag};

/// Coupling block from an owner's rows to the rows of one peer.
///
/// Columns are compacted to the peer rows actually referenced: compact
/// column `c` stands for peer-local row `col_map[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffDiagBlock {
    pub peer: usize,
    pub block: CsrBlock,
    pub col_map: Vec<usize>,
}

impl OffDiagBlock {
    pub fn peer_local_col(&self, compact: usize) -> usize {
        self.col_map[compact]
    }
}

/// One leaf's row slice split into the local-dependency (diagonal) block
/// and per-peer remote-dependency blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBlockMatrix {
    pub owner: usize,
    pub rows: Range<usize>,
    /// Columns restricted to the owner's column range, reindexed to local.
    pub diag: CsrBlock,
    /// Ordered by ascending peer id; peers without coupling are omitted.
    pub offdiag: Vec<OffDiagBlock>,
}

impl MultiBlockMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.diag.nnz() + self.offdiag.iter().map(|o| o.block.nnz()).sum::<usize>()
    }

    /// Stores every block at the smallest legal index width.
    pub fn compress(&mut self) {
        self.diag = self
            .diag
            .compress_indices(choose_width(self.diag.ncols()))
            .expect("chosen width fits");
        for o in &mut self.offdiag {
            o.block = o
                .block
                .compress_indices(choose_width(o.block.ncols()))
                .expect("chosen width fits");
        }
    }

    pub fn set_precision(&mut self, precision: PrecisionTag) {
        self.diag = self.diag.with_precision(precision);
        for o in &mut self.offdiag {
            o.block = o.block.with_precision(precision);
        }
    }
}

/// Splits a square matrix into one [`MultiBlockMatrix`] per leaf.
pub fn segment_matrix(global: &CsrBlock, part: &Partition) -> Result<Vec<MultiBlockMatrix>> {
    if !global.is_square() {
        return Err(Error::InvalidArgument(format!(
            "segment_matrix needs a square matrix, got {}x{}",
            global.nrows(),
            global.ncols()
        )));
    }
    segment_rect(global, part, part)
}

/// Splits a possibly rectangular matrix: rows follow `rows`, and a column is
/// local to leaf `l` when it lies in `cols.leaf_range(l)`.
pub fn segment_rect(global: &CsrBlock, rows: &Partition, cols: &Partition) -> Result<Vec<MultiBlockMatrix>> {
    if rows.nrows() != global.nrows() || cols.nrows() != global.ncols() {
        return Err(Error::shape(format_args!(
            "partitions {}x{} do not cover a {}x{} matrix",
            rows.nrows(),
            cols.nrows(),
            global.nrows(),
            global.ncols()
        )));
    }
    if rows.leaves() != cols.leaves() {
        return Err(Error::InvalidArgument("row and column partitions differ in leaf count".into()));
    }
    let leaves = rows.leaves();
    let mut out = Vec::with_capacity(leaves);
    for owner in 0..leaves {
        let my_rows = rows.leaf_range(owner);
        let my_cols = cols.leaf_range(owner);
        let n = my_rows.len();

        let mut d_ptr = vec![0usize; n + 1];
        let mut d_cols = Vec::new();
        let mut d_vals = Vec::new();
        // per peer: (row, global col, value) triplets in row order
        let mut remote: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); leaves];
        for (li, gi) in my_rows.clone().enumerate() {
            for (gj, v) in global.row(gi) {
                if my_cols.contains(&gj) {
                    d_cols.push(gj - my_cols.start);
                    d_vals.push(v);
                } else {
                    remote[cols.owner(gj)].push((li, gj, v));
                }
            }
            d_ptr[li + 1] = d_cols.len();
        }
        let diag = CsrBlock::new(n, my_cols.len(), d_ptr, d_cols, d_vals)?;

        let mut offdiag = Vec::new();
        for (peer, entries) in remote.into_iter().enumerate() {
            if entries.is_empty() {
                continue;
            }
            let peer_begin = cols.leaf_range(peer).start;
            let mut col_map: Vec<usize> = entries.iter().map(|e| e.1 - peer_begin).collect();
            col_map.sort_unstable();
            col_map.dedup();
            let mut ptr = vec![0usize; n + 1];
            let mut cidx = Vec::with_capacity(entries.len());
            let mut vals = Vec::with_capacity(entries.len());
            for (li, gj, v) in entries {
                let compact = col_map.binary_search(&(gj - peer_begin)).unwrap();
                cidx.push(compact);
                vals.push(v);
                ptr[li + 1] += 1;
            }
            for i in 0..n {
                ptr[i + 1] += ptr[i];
            }
            let block = CsrBlock::new(n, col_map.len(), ptr, cidx, vals)?;
            offdiag.push(OffDiagBlock { peer, block, col_map });
        }
        out.push(MultiBlockMatrix {
            owner,
            rows: my_rows,
            diag,
            offdiag,
        });
    }
    Ok(out)
}

/// Rebuilds the global matrix from its segments (full precision, 32-bit
/// indices).
pub fn reassemble(blocks: &[MultiBlockMatrix], rows: &Partition, cols: &Partition) -> Result<CsrBlock> {
    let mut row_ptr = vec![0usize; rows.nrows() + 1];
    let mut cidx = Vec::new();
    let mut vals = Vec::new();
    for mb in blocks {
        let col_begin = cols.leaf_range(mb.owner).start;
        for li in 0..mb.nrows() {
            let mut entries: Vec<(usize, f64)> = mb.diag.row(li).map(|(c, v)| (c + col_begin, v)).collect();
            for o in &mb.offdiag {
                let peer_begin = cols.leaf_range(o.peer).start;
                entries.extend(o.block.row(li).map(|(c, v)| (peer_begin + o.col_map[c], v)));
            }
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                cidx.push(c);
                vals.push(v);
            }
            row_ptr[mb.rows.start + li + 1] = cidx.len();
        }
    }
    Ok(CsrBlock::new(rows.nrows(), cols.nrows(), row_ptr, cidx, vals)?.decompress())
}
