use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Shape of the worker hierarchy: one node holding `nnumas` NUMA groups of
/// `ncores` leaf workers each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Topology {
    pub nnumas: usize,
    pub ncores: usize,
}

impl Topology {
    pub const SERIAL: Topology = Topology { nnumas: 1, ncores: 1 };

    pub fn new(nnumas: usize, ncores: usize) -> Result<Self> {
        if nnumas == 0 || ncores == 0 {
            return Err(Error::InvalidArgument(format!(
                "topology counts must be at least 1 (nnumas={nnumas}, ncores={ncores})"
            )));
        }
        Ok(Topology { nnumas, ncores })
    }

    /// Nodes are fixed at one; the node layer is kept for the reduction stages.
    pub fn nnodes(&self) -> usize {
        1
    }

    pub fn leaves(&self) -> usize {
        self.nnumas * self.ncores
    }

    /// `(numa, core)` coordinate of a leaf.
    pub fn coords(&self, leaf: usize) -> (usize, usize) {
        (leaf / self.ncores, leaf % self.ncores)
    }
}

impl Default for Topology {
    fn default() -> Self {
        Topology::SERIAL
    }
}

impl FromStr for Topology {
    type Err = Error;

    /// Parses `"nnumas=2:ncores=3"`; omitted keys default to 1.
    fn from_str(s: &str) -> Result<Self> {
        let mut nnumas = 1;
        let mut ncores = 1;
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Ok(Topology::SERIAL);
        }
        for part in trimmed.split(':') {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("topology entry '{part}' is not key=value"))
            })?;
            let n: usize = value.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("topology value '{value}' for '{key}' is not a count"))
            })?;
            match key.trim() {
                "nnumas" => nnumas = n,
                "ncores" => ncores = n,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown topology key '{other}' (expected nnumas, ncores)"
                    )))
                }
            }
        }
        Topology::new(nnumas, ncores)
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "nnumas={}:ncores={}", self.nnumas, self.ncores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_topology_strings() {
        let t: Topology = "nnumas=1:ncores=1".parse().unwrap();
        assert_eq!(t.leaves(), 1);
        let t: Topology = "nnumas=2:ncores=3".parse().unwrap();
        assert_eq!((t.nnumas, t.ncores, t.leaves()), (2, 3, 6));
        assert_eq!(t.coords(4), (1, 1));
        assert_eq!(t.to_string(), "nnumas=2:ncores=3");
        let t: Topology = "ncores=4".parse().unwrap();
        assert_eq!((t.nnumas, t.ncores), (1, 4));
    }

    #[test]
    fn rejects_bad_strings() {
        assert!("ncores=0".parse::<Topology>().is_err());
        assert!("nnumas=2;ncores=2".parse::<Topology>().is_err());
        assert!("ncores".parse::<Topology>().is_err());
        assert!("nthreads=2".parse::<Topology>().is_err());
        assert!("ncores=-1".parse::<Topology>().is_err());
    }
}
