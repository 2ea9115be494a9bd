//! Classical algebraic multigrid setup.
mod coarsen;
mod galerkin;
mod interp;
mod strength;

use std::fmt;

pub use coarsen::{coarsen, CoarsenPass, PointKind, Splitting};
pub use galerkin::{galerkin, spgemm};
pub use interp::interpolate;
pub use strength::{strength_graph, StrengthGraph};

use crate::error::{Error, Result};
use crate::matrix::{CsrBlock, DistMatrix, PrecisionTag};
use crate::parallel::Topology;

/// A level whose coarse size exceeds this fraction of its own size ends
/// coarsening.
pub const STALL_RATIO: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct AmgParams {
    pub strength_threshold: f64,
    pub coarse_matrix_size: usize,
    /// Number of leading levels coarsened aggressively.
    pub agg_num_levels: usize,
    pub num_paths: usize,
    pub max_levels: usize,
    pub mixed_precision: bool,
    /// First level stored in reduced precision when `mixed_precision` is set.
    pub reduced_from_level: usize,
}

impl Default for AmgParams {
    fn default() -> Self {
        AmgParams {
            strength_threshold: 0.25,
            coarse_matrix_size: 500,
            agg_num_levels: 0,
            num_paths: 1,
            max_levels: 25,
            mixed_precision: false,
            reduced_from_level: 1,
        }
    }
}

impl AmgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.strength_threshold > 0.0 && self.strength_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "strength threshold {} outside (0, 1]",
                self.strength_threshold
            )));
        }
        if self.max_levels < 2 {
            return Err(Error::InvalidArgument("max_levels must be at least 2".into()));
        }
        if self.coarse_matrix_size == 0 {
            return Err(Error::InvalidArgument("coarse_matrix_size must be positive".into()));
        }
        if self.num_paths == 0 {
            return Err(Error::InvalidArgument("num_paths must be positive".into()));
        }
        if self.mixed_precision && self.reduced_from_level == 0 {
            return Err(Error::InvalidArgument("the finest level is always stored in full precision".into()));
        }
        Ok(())
    }

    fn precision_of(&self, level: usize) -> PrecisionTag {
        if self.mixed_precision && level >= self.reduced_from_level {
            PrecisionTag::Reduced
        } else {
            PrecisionTag::Full
        }
    }
}

/// One multigrid level: the operator and the transfers to the next
/// coarser level (absent on the coarsest).
#[derive(Debug, Clone)]
pub struct Level {
    pub a: DistMatrix,
    pub p: Option<DistMatrix>,
    pub r: Option<DistMatrix>,
    pub precision: PrecisionTag,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<Level>,
    stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub rows: usize,
    pub nnz: usize,
    pub precision: PrecisionTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyStats {
    pub levels: Vec<LevelStats>,
    /// Sum of operator nonzeros over all levels divided by the fine nonzeros.
    pub operator_complexity: f64,
    pub stalled: bool,
}

impl fmt::Display for HierarchyStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5} {:>10} {:>12} {:>9}", "level", "rows", "nnz", "precision")?;
        for (l, s) in self.levels.iter().enumerate() {
            let p = match s.precision {
                PrecisionTag::Full => "f64",
                PrecisionTag::Reduced => "f32",
            };
            writeln!(f, "{l:>5} {:>10} {:>12} {p:>9}", s.rows, s.nnz)?;
        }
        write!(f, "operator complexity {:.3}", self.operator_complexity)?;
        if self.stalled {
            write!(f, " (coarsening stalled)")?;
        }
        Ok(())
    }
}

impl Hierarchy {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn coarsest(&self) -> &Level {
        self.levels.last().unwrap()
    }

    /// True when coarsening stopped because a level no longer shrank.
    pub fn stalled(&self) -> bool {
        self.stalled
    }

    pub fn stats(&self) -> HierarchyStats {
        let levels: Vec<LevelStats> = self
            .levels
            .iter()
            .map(|l| LevelStats {
                rows: l.a.nrows(),
                nnz: l.a.nnz(),
                precision: l.precision,
            })
            .collect();
        let total: usize = levels.iter().map(|l| l.nnz).sum();
        HierarchyStats {
            operator_complexity: total as f64 / levels[0].nnz.max(1) as f64,
            levels,
            stalled: self.stalled,
        }
    }
}

/// Builds the hierarchy for a square fine operator. The setup itself is
/// sequential and deterministic; every level is then segmented over
/// `topology`.
pub fn setup(a_fine: &CsrBlock, params: &AmgParams, topology: Topology) -> Result<Hierarchy> {
    params.validate()?;
    if !a_fine.is_square() || a_fine.nrows() == 0 {
        return Err(Error::InvalidArgument("multigrid needs a non-empty square operator".into()));
    }
    let mut ops: Vec<CsrBlock> = vec![a_fine.with_precision(PrecisionTag::Full)];
    let mut transfers: Vec<CsrBlock> = Vec::new();
    let mut stalled = false;
    while ops.len() < params.max_levels {
        let a = ops.last().unwrap();
        let n = a.nrows();
        if n <= params.coarse_matrix_size {
            break;
        }
        let level = ops.len() - 1;
        let s = strength_graph(a, params.strength_threshold);
        let pass = if level < params.agg_num_levels {
            CoarsenPass::Aggressive {
                num_paths: params.num_paths,
            }
        } else {
            CoarsenPass::Standard
        };
        let mut split = coarsen(&s, pass);
        let p = match interp::build(a, &s, &split) {
            Ok(p) => p,
            Err(missing) => {
                for i in missing {
                    split.make_coarse(i);
                }
                interpolate(a, &s, &split)?
            }
        };
        let nc = p.ncols();
        if nc == 0 || nc as f64 > STALL_RATIO * n as f64 {
            stalled = nc != 0;
            break;
        }
        let r = p.transpose();
        let ac = galerkin(&r, a, &p)?;
        transfers.push(p);
        ops.push(ac);
    }

    let mut levels = Vec::with_capacity(ops.len());
    for (l, a) in ops.iter().enumerate() {
        let precision = params.precision_of(l);
        let mut da = DistMatrix::new(a, topology)?;
        da.set_precision(precision);
        let (p, r) = match transfers.get(l) {
            Some(p) => {
                let mut dp = DistMatrix::rect(p, topology)?;
                let mut dr = DistMatrix::rect(&p.transpose(), topology)?;
                dp.set_precision(precision);
                dr.set_precision(precision);
                (Some(dp), Some(dr))
            }
            None => (None, None),
        };
        levels.push(Level { a: da, p, r, precision });
    }
    Ok(Hierarchy { levels, stalled })
}
