use std::ops::Range;

use crate::error::{Error, Result};
use crate::parallel::Topology;

/// Contiguous row ownership over the node / NUMA / core hierarchy.
///
/// Leaves are numbered `numa * ncores + core`; each layer's range is the
/// concatenation of its children's ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    nrows: usize,
    topology: Topology,
    bounds: Vec<usize>,
}

/// Splits `nrows_global` rows as evenly as possible over the leaves of
/// `topology`; the first `n % leaves` leaves get one extra row.
pub fn make_partition(nrows_global: usize, topology: Topology) -> Result<Partition> {
    let topology = Topology::new(topology.nnumas, topology.ncores)?;
    if nrows_global == 0 {
        return Err(Error::InvalidArgument("cannot partition zero rows".into()));
    }
    if nrows_global < topology.leaves() {
        return Err(Error::InvalidArgument(format!(
            "{nrows_global} rows cannot be split over {} workers",
            topology.leaves()
        )));
    }
    Ok(Partition::balanced(nrows_global, topology))
}

impl Partition {
    /// Balanced split that tolerates fewer rows than leaves (trailing leaves
    /// then own empty ranges). Used for coarse multigrid levels.
    pub fn balanced(nrows: usize, topology: Topology) -> Partition {
        let leaves = topology.leaves();
        let (q, r) = (nrows / leaves, nrows % leaves);
        let mut bounds = Vec::with_capacity(leaves + 1);
        bounds.push(0);
        for l in 0..leaves {
            let len = q + usize::from(l < r);
            bounds.push(bounds[l] + len);
        }
        Partition {
            nrows,
            topology,
            bounds,
        }
    }

    /// Partition with explicitly given leaf bounds (`leaves + 1` entries).
    pub fn from_bounds(topology: Topology, bounds: Vec<usize>) -> Result<Partition> {
        if bounds.len() != topology.leaves() + 1 || bounds[0] != 0 {
            return Err(Error::InvalidArgument("partition bounds do not match topology".into()));
        }
        if bounds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("partition bounds decrease".into()));
        }
        Ok(Partition {
            nrows: *bounds.last().unwrap(),
            topology,
            bounds,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn leaves(&self) -> usize {
        self.topology.leaves()
    }

    pub fn leaf_range(&self, leaf: usize) -> Range<usize> {
        self.bounds[leaf]..self.bounds[leaf + 1]
    }

    pub fn leaf_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.leaves()).map(|l| self.leaf_range(l))
    }

    pub fn numa_range(&self, numa: usize) -> Range<usize> {
        let nc = self.topology.ncores;
        self.bounds[numa * nc]..self.bounds[(numa + 1) * nc]
    }

    pub fn node_range(&self) -> Range<usize> {
        0..self.nrows
    }

    /// Leaf owning global row `row`.
    pub fn owner(&self, row: usize) -> usize {
        debug_assert!(row < self.nrows);
        // last leaf whose begin <= row among non-empty leaves
        self.bounds[1..].partition_point(|&b| b <= row)
    }

    pub fn bounds(&self) -> &[usize] {
        &self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranges(p: &Partition) -> Vec<Range<usize>> {
        p.leaf_ranges().collect()
    }

    #[test]
    fn remainder_goes_to_leading_leaves() {
        let p = make_partition(10, Topology::new(1, 3).unwrap()).unwrap();
        assert_eq!(ranges(&p), vec![0..4, 4..7, 7..10]);
    }

    #[test]
    fn numa_layer_concatenates_cores() {
        let p = make_partition(8, Topology::new(2, 2).unwrap()).unwrap();
        assert_eq!(ranges(&p), vec![0..2, 2..4, 4..6, 6..8]);
        assert_eq!(p.numa_range(0), 0..4);
        assert_eq!(p.numa_range(1), 4..8);
        assert_eq!(p.node_range(), 0..8);
    }

    #[test]
    fn poisson_150_cubed_over_12_cores() {
        let n = 150usize.pow(3);
        let p = make_partition(n, Topology::new(1, 12).unwrap()).unwrap();
        let lens: Vec<usize> = p.leaf_ranges().map(|r| r.len()).collect();
        // 3_375_000 = 12 * 281_250, no remainder
        assert_eq!(n % 12, 0);
        assert_eq!(lens, vec![n / 12; 12]);
        let p = make_partition(n + 6, Topology::new(1, 12).unwrap()).unwrap();
        let lens: Vec<usize> = p.leaf_ranges().map(|r| r.len()).collect();
        assert_eq!(&lens[..6], &[281251; 6]);
        assert_eq!(&lens[6..], &[281250; 6]);
    }

    #[test]
    fn invalid_arguments() {
        assert!(make_partition(0, Topology::SERIAL).is_err());
        assert!(make_partition(3, Topology::new(2, 2).unwrap()).is_err());
        assert!(make_partition(5, Topology { nnumas: 0, ncores: 1 }).is_err());
    }

    #[test]
    fn owner_lookup_with_empty_leaves() {
        let p = Partition::balanced(2, Topology::new(1, 4).unwrap());
        assert_eq!(ranges(&p), vec![0..1, 1..2, 2..2, 2..2]);
        assert_eq!(p.owner(0), 0);
        assert_eq!(p.owner(1), 1);
    }

    proptest! {
        #[test]
        fn leaves_cover_rows(n in 1usize..5000, nnumas in 1usize..4, ncores in 1usize..6) {
            let topo = Topology::new(nnumas, ncores).unwrap();
            prop_assume!(n >= topo.leaves());
            let p = make_partition(n, topo).unwrap();
            let mut next = 0;
            for (l, r) in p.leaf_ranges().enumerate() {
                prop_assert_eq!(r.start, next);
                prop_assert!(r.len() >= n / topo.leaves() && r.len() <= n / topo.leaves() + 1);
                for row in r.clone() {
                    prop_assert_eq!(p.owner(row), l);
                }
                next = r.end;
            }
            prop_assert_eq!(next, n);
            for k in 0..nnumas {
                let nr = p.numa_range(k);
                prop_assert_eq!(nr.start, p.leaf_range(k * ncores).start);
                prop_assert_eq!(nr.end, p.leaf_range((k + 1) * ncores - 1).end);
            }
        }
    }
}
