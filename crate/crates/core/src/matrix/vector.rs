use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Status flags carried by every [`BlockVector`].
///
/// `zero` certifies that every element is exactly 0.0 so kernels may skip
/// work. `zero` implies `initialized`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VectorFlags {
    pub zero: bool,
    pub initialized: bool,
}

/// Dense block of `nrhs` column vectors of length `nrows`.
///
/// Storage is RHS-interleaved: the `nrhs` values of row `i` are contiguous
/// at `data[i * nrhs..(i + 1) * nrhs]`.
#[derive(Debug, Clone)]
pub struct BlockVector {
    nrows: usize,
    nrhs: usize,
    data: Vec<f64>,
    flags: VectorFlags,
}

impl BlockVector {
    /// Zero vector with the zero flag set.
    pub fn zeros(nrows: usize, nrhs: usize) -> Self {
        BlockVector {
            nrows,
            nrhs,
            data: vec![0.0; nrows * nrhs],
            flags: VectorFlags {
                zero: true,
                initialized: true,
            },
        }
    }

    /// Allocated but not yet written; kernels refuse to read it.
    pub fn uninit(nrows: usize, nrhs: usize) -> Self {
        BlockVector {
            nrows,
            nrhs,
            data: vec![0.0; nrows * nrhs],
            flags: VectorFlags::default(),
        }
    }

    /// Wraps interleaved data.
    pub fn from_interleaved(nrows: usize, nrhs: usize, data: Vec<f64>) -> Result<Self> {
        if nrhs == 0 {
            return Err(Error::InvalidArgument("nrhs must be at least 1".into()));
        }
        if data.len() != nrows * nrhs {
            return Err(Error::shape(format_args!(
                "{} values for a {nrows}x{nrhs} block",
                data.len()
            )));
        }
        Ok(BlockVector {
            nrows,
            nrhs,
            data,
            flags: VectorFlags {
                zero: false,
                initialized: true,
            },
        })
    }

    /// Builds a block from separate columns of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let nrhs = columns.len();
        if nrhs == 0 {
            return Err(Error::InvalidArgument("no columns".into()));
        }
        let nrows = columns[0].len();
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::shape(format_args!("columns of unequal length")));
        }
        let mut data = vec![0.0; nrows * nrhs];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * nrhs + j] = v;
            }
        }
        Self::from_interleaved(nrows, nrhs, data)
    }

    /// Every element set to `value`.
    pub fn filled(nrows: usize, nrhs: usize, value: f64) -> Self {
        if value == 0.0 {
            return Self::zeros(nrows, nrhs);
        }
        BlockVector {
            nrows,
            nrhs,
            data: vec![value; nrows * nrhs],
            flags: VectorFlags {
                zero: false,
                initialized: true,
            },
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn nrhs(&self) -> usize {
        self.nrhs
    }

    pub fn flags(&self) -> VectorFlags {
        self.flags
    }

    pub fn is_zero(&self) -> bool {
        self.flags.zero
    }

    pub fn is_initialized(&self) -> bool {
        self.flags.initialized
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access; clears the zero flag and marks the vector initialized.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.flags = VectorFlags {
            zero: false,
            initialized: true,
        };
        &mut self.data
    }

    pub fn into_interleaved(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, rhs: usize) -> f64 {
        self.data[row * self.nrhs + rhs]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.nrhs..(row + 1) * self.nrhs]
    }

    pub fn column(&self, rhs: usize) -> Vec<f64> {
        self.data.iter().skip(rhs).step_by(self.nrhs).copied().collect()
    }

    /// Overwrites column `rhs`.
    pub fn set_column(&mut self, rhs: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.nrows || rhs >= self.nrhs {
            return Err(Error::shape(format_args!("column does not fit")));
        }
        let m = self.nrhs;
        for (i, &v) in values.iter().enumerate() {
            self.data[i * m + rhs] = v;
        }
        self.flags = VectorFlags {
            zero: false,
            initialized: true,
        };
        Ok(())
    }

    /// Fills with zeros and sets the zero flag.
    pub fn set_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
        self.flags = VectorFlags {
            zero: true,
            initialized: true,
        };
    }

    /// Copies values and flags from `other`.
    pub fn assign(&mut self, other: &BlockVector) -> Result<()> {
        self.check_same_shape(other)?;
        if other.flags.zero {
            self.set_zero();
        } else {
            self.data.copy_from_slice(&other.data);
            self.flags = other.flags;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &BlockVector) -> bool {
        self.nrows == other.nrows && self.nrhs == other.nrhs
    }

    pub(crate) fn check_same_shape(&self, other: &BlockVector) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format_args!(
                "{}x{} vs {}x{}",
                self.nrows, self.nrhs, other.nrows, other.nrhs
            )))
        }
    }

    pub(crate) fn require_initialized(&self) -> Result<()> {
        if self.flags.initialized {
            Ok(())
        } else {
            Err(Error::Uninitialized)
        }
    }

    /// Raw data without touching the flags; callers set flags afterwards.
    pub(crate) fn data_mut_raw(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn mark_written(&mut self) {
        self.flags = VectorFlags {
            zero: false,
            initialized: true,
        };
    }
}

impl PartialEq for BlockVector {
    /// Element-wise comparison; flags do not take part.
    fn eq(&self, other: &Self) -> bool {
        self.nrows == other.nrows && self.nrhs == other.nrhs && self.data == other.data
    }
}

/// One full-precision coefficient per right-hand side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RhsScalars(pub Vec<f64>);

impl RhsScalars {
    pub fn splat(nrhs: usize, value: f64) -> Self {
        RhsScalars(vec![value; nrhs])
    }

    pub fn zeros(nrhs: usize) -> Self {
        Self::splat(nrhs, 0.0)
    }

    pub fn ones(nrhs: usize) -> Self {
        Self::splat(nrhs, 1.0)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        RhsScalars(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &RhsScalars, f: impl Fn(f64, f64) -> f64) -> Self {
        RhsScalars(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn all(&self, value: f64) -> bool {
        self.0.iter().all(|&v| v == value)
    }
}

impl From<Vec<f64>> for RhsScalars {
    fn from(v: Vec<f64>) -> Self {
        RhsScalars(v)
    }
}

impl Deref for RhsScalars {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for RhsScalars {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}
