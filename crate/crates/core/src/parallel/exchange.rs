use crate::error::{Error, Result};
use crate::matrix::{BlockVector, MultiBlockMatrix, Partition};
use crate::parallel::{Scope, Team};

/// Rows a leaf imports from one peer (peer-local indices, sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerImport {
    pub peer: usize,
    pub rows: Vec<usize>,
    /// First halo-buffer row of this import.
    pub offset: usize,
}

/// Rows a leaf publishes for one peer (owner-local indices, sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerExport {
    pub peer: usize,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LeafPlan {
    pub imports: Vec<PeerImport>,
    pub exports: Vec<PeerExport>,
    pub halo_rows: usize,
}

/// Precomputed halo-exchange lists for one segmented operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangePlan {
    leaves: Vec<LeafPlan>,
    source: Partition,
}

/// Derives minimal import lists from the off-diagonal block columns and the
/// matching export lists on the owning side.
pub fn build_exchange_plan(blocks: &[MultiBlockMatrix], cols: &Partition) -> ExchangePlan {
    let mut leaves: Vec<LeafPlan> = vec![LeafPlan::default(); blocks.len()];
    for mb in blocks {
        let mut offset = 0;
        for o in &mb.offdiag {
            leaves[mb.owner].imports.push(PeerImport {
                peer: o.peer,
                rows: o.col_map.clone(),
                offset,
            });
            offset += o.col_map.len();
        }
        leaves[mb.owner].halo_rows = offset;
    }
    for owner in 0..leaves.len() {
        let imports: Vec<(usize, Vec<usize>)> = leaves[owner]
            .imports
            .iter()
            .map(|i| (i.peer, i.rows.clone()))
            .collect();
        for (peer, rows) in imports {
            leaves[peer].exports.push(PeerExport { peer: owner, rows });
        }
    }
    for l in &mut leaves {
        l.exports.sort_by_key(|e| e.peer);
    }
    ExchangePlan {
        leaves,
        source: cols.clone(),
    }
}

impl ExchangePlan {
    pub fn leaf(&self, leaf: usize) -> &LeafPlan {
        &self.leaves[leaf]
    }

    pub fn leaves(&self) -> &[LeafPlan] {
        &self.leaves
    }

    /// Partition of the vector the plan reads from.
    pub fn source(&self) -> &Partition {
        &self.source
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.iter().all(|l| l.imports.is_empty())
    }

    /// Copies the rows `leaf` imports into `halo`; `fetch` returns the
    /// values of one global row.
    pub(crate) fn gather<'a>(&self, leaf: usize, m: usize, halo: &mut Vec<f64>, fetch: impl Fn(usize) -> &'a [f64]) {
        let plan = &self.leaves[leaf];
        halo.clear();
        halo.reserve(plan.halo_rows * m);
        for imp in &plan.imports {
            let base = self.source.leaf_range(imp.peer).start;
            for &r in &imp.rows {
                halo.extend_from_slice(fetch(base + r));
            }
        }
    }

    pub(crate) fn check_vector(&self, x: &BlockVector) -> Result<()> {
        if x.nrows() != self.source.nrows() {
            return Err(Error::shape(format_args!(
                "plan expects {} rows, vector has {}",
                self.source.nrows(),
                x.nrows()
            )));
        }
        Ok(())
    }
}

/// Rows one leaf received in a halo exchange.
#[derive(Debug, Clone)]
pub struct HaloBuffer {
    leaf: usize,
    nrhs: usize,
    imports: Vec<PeerImport>,
    data: Vec<f64>,
}

impl HaloBuffer {
    pub fn leaf(&self) -> usize {
        self.leaf
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.nrhs.max(1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Imported values of peer-local row `row` of `peer`; rows outside the
    /// plan are an error.
    pub fn get(&self, peer: usize, row: usize) -> Result<&[f64]> {
        let unplanned = Error::UnplannedRow {
            leaf: self.leaf,
            peer,
            row,
        };
        let imp = match self.imports.iter().find(|i| i.peer == peer) {
            Some(i) => i,
            None => return Err(unplanned),
        };
        match imp.rows.binary_search(&row) {
            Ok(k) => {
                let at = (imp.offset + k) * self.nrhs;
                Ok(&self.data[at..at + self.nrhs])
            }
            Err(_) => Err(unplanned),
        }
    }
}

/// Collective exchange: every leaf receives exactly the rows its plan
/// imports. Owners' rows of `x` must be final before the call.
pub fn halo_exchange(team: &Team, plan: &ExchangePlan, x: &BlockVector) -> Result<Vec<HaloBuffer>> {
    plan.check_vector(x)?;
    if plan.leaves.len() != team.leaves() {
        return Err(Error::shape(format_args!(
            "plan has {} leaves, team has {}",
            plan.leaves.len(),
            team.leaves()
        )));
    }
    let m = x.nrhs();
    let data = x.as_slice();
    let out = team.spmd(|w| {
        w.barrier(Scope::Team);
        let mut halo = Vec::new();
        plan.gather(w.leaf(), m, &mut halo, |g| &data[g * m..(g + 1) * m]);
        HaloBuffer {
            leaf: w.leaf(),
            nrhs: m,
            imports: plan.leaves[w.leaf()].imports.clone(),
            data: halo,
        }
    });
    Ok(out)
}
