use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::matrix::{reassemble, segment_rect, CsrBlock, IndexWidth, MultiBlockMatrix, Partition, PrecisionTag};
use crate::parallel::{build_exchange_plan, ExchangePlan, Topology};

/// A matrix segmented over a worker topology, ready for collective kernels.
///
/// Rows and columns both follow the balanced partition of the topology, so
/// any vector of matching length is distributed the same way.
#[derive(Debug, Clone)]
pub struct DistMatrix {
    rows: Partition,
    cols: Partition,
    blocks: Vec<MultiBlockMatrix>,
    plan: ExchangePlan,
    nnz: usize,
    diag: OnceLock<std::result::Result<Vec<f64>, usize>>,
}

impl DistMatrix {
    /// Segments a square matrix. Index storage is compressed per block.
    pub fn new(global: &CsrBlock, topology: Topology) -> Result<Self> {
        if !global.is_square() {
            return Err(Error::InvalidArgument(format!(
                "operator must be square, got {}x{}",
                global.nrows(),
                global.ncols()
            )));
        }
        Self::rect(global, topology)
    }

    /// Segments a possibly rectangular matrix (transfer operators).
    pub fn rect(global: &CsrBlock, topology: Topology) -> Result<Self> {
        if global.nrows() == 0 || global.ncols() == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let topology = Topology::new(topology.nnumas, topology.ncores)?;
        let rows = Partition::balanced(global.nrows(), topology);
        let cols = Partition::balanced(global.ncols(), topology);
        let mut blocks = segment_rect(global, &rows, &cols)?;
        for b in &mut blocks {
            b.compress();
        }
        let plan = build_exchange_plan(&blocks, &cols);
        Ok(DistMatrix {
            nnz: global.nnz(),
            rows,
            cols,
            blocks,
            plan,
            diag: OnceLock::new(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.cols.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn topology(&self) -> Topology {
        self.rows.topology()
    }

    pub fn row_partition(&self) -> &Partition {
        &self.rows
    }

    pub fn col_partition(&self) -> &Partition {
        &self.cols
    }

    pub fn blocks(&self) -> &[MultiBlockMatrix] {
        &self.blocks
    }

    pub fn plan(&self) -> &ExchangePlan {
        &self.plan
    }

    /// Value precision (all blocks share it).
    pub fn precision(&self) -> PrecisionTag {
        self.blocks[0].diag.precision()
    }

    pub fn set_precision(&mut self, precision: PrecisionTag) {
        for b in &mut self.blocks {
            b.set_precision(precision);
        }
        self.diag = OnceLock::new();
    }

    /// Global diagonal as stored (widened to f64). Missing or zero entries
    /// are a [`Error::SingularDiagonal`].
    pub fn diagonal(&self) -> Result<&[f64]> {
        let cached = self.diag.get_or_init(|| {
            if self.nrows() != self.ncols() {
                return Err(usize::MAX);
            }
            let mut d = Vec::with_capacity(self.nrows());
            for b in &self.blocks {
                for i in 0..b.nrows() {
                    match b.diag.get(i, i) {
                        Some(v) if v != 0.0 => d.push(v),
                        _ => return Err(b.rows.start + i),
                    }
                }
            }
            Ok(d)
        });
        match cached {
            Ok(d) => Ok(d),
            Err(usize::MAX) => Err(Error::InvalidArgument("diagonal of a non-square matrix".into())),
            Err(row) => Err(Error::SingularDiagonal { row: *row }),
        }
    }

    /// Stores every block's indices at `width`, or at the smallest legal
    /// width when `None`.
    pub fn set_index_width(&mut self, width: Option<IndexWidth>) -> Result<()> {
        let mut blocks = self.blocks.clone();
        for b in &mut blocks {
            match width {
                None => b.compress(),
                Some(w) => {
                    b.diag = b.diag.compress_indices(w)?;
                    for o in &mut b.offdiag {
                        o.block = o.block.compress_indices(w)?;
                    }
                }
            }
        }
        self.blocks = blocks;
        Ok(())
    }

    /// Widest index width used by any block.
    pub fn max_index_width(&self) -> IndexWidth {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::once(&b.diag).chain(b.offdiag.iter().map(|o| &o.block)))
            .map(|b| b.index_width())
            .max()
            .unwrap_or(IndexWidth::W8)
    }

    pub fn storage_bytes(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.diag.storage_bytes() + b.offdiag.iter().map(|o| o.block.storage_bytes()).sum::<usize>())
            .sum()
    }

    /// Full-precision global matrix with 32-bit indices.
    pub fn to_global(&self) -> CsrBlock {
        reassemble(&self.blocks, &self.rows, &self.cols).expect("segments are consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::gen_poisson3d;

    #[test]
    fn roundtrip_and_widths() {
        let a = gen_poisson3d(6, 5, 4).unwrap();
        let mut d = DistMatrix::new(&a, Topology::new(2, 2).unwrap()).unwrap();
        assert_eq!(d.to_global(), a.decompress());
        assert_eq!(d.max_index_width(), IndexWidth::W8);
        d.set_index_width(Some(IndexWidth::W32)).unwrap();
        assert_eq!(d.max_index_width(), IndexWidth::W32);
        assert_eq!(d.to_global(), a.decompress());
        d.set_precision(PrecisionTag::Reduced);
        assert_eq!(d.precision(), PrecisionTag::Reduced);
    }

    #[test]
    fn rejects_empty_and_nonsquare() {
        let r = CsrBlock::new(2, 3, vec![0, 1, 1], vec![2], vec![1.0]).unwrap();
        assert!(DistMatrix::new(&r, Topology::SERIAL).is_err());
        assert!(DistMatrix::rect(&r, Topology::SERIAL).is_ok());
    }
}
