//! Storage formats: CSR blocks, block vectors, partitions and segmented
//! operators.

pub(crate) mod csr;
mod dist;
mod partition;
mod segment;
mod vector;

pub(crate) use csr::with_block;
pub use csr::{choose_width, ColIndex, ColIndices, CsrBlock, IndexWidth, PrecisionTag, StoredValue, Values};
pub use dist::DistMatrix;
pub use partition::{make_partition, Partition};
pub use segment::{reassemble, segment_matrix, segment_rect, MultiBlockMatrix, OffDiagBlock};
pub use vector::{BlockVector, RhsScalars, VectorFlags};
