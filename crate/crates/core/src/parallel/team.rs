use std::hint;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::error::{Error, Result};
use crate::parallel::Topology;
use crate::stats::Counters;

/// Group of workers taking part in a barrier or reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// The cores of the caller's NUMA group.
    CoreGroup,
    /// All NUMA groups of the caller's node.
    NumaGroup,
    /// Every worker of the team.
    Team,
}

/// Centralized sense-reversing barrier. The generation counter plays the
/// role of the shared sense; a waiter spins until it flips.
#[derive(Debug)]
pub struct Barrier {
    members: usize,
    arrived: AtomicUsize,
    generation: AtomicUsize,
}

impl Barrier {
    pub fn new(members: usize) -> Self {
        Barrier {
            members: members.max(1),
            arrived: AtomicUsize::new(0),
            generation: AtomicUsize::new(0),
        }
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn wait(&self) {
        if self.members == 1 {
            return;
        }
        let gen = self.generation.load(Ordering::Acquire);
        if self.arrived.fetch_add(1, Ordering::AcqRel) + 1 == self.members {
            self.arrived.store(0, Ordering::Relaxed);
            self.generation.fetch_add(1, Ordering::Release);
            return;
        }
        let mut spins = 0u32;
        while self.generation.load(Ordering::Acquire) == gen {
            if spins < 128 {
                hint::spin_loop();
                spins += 1;
            } else {
                thread::yield_now();
            }
        }
    }
}

/// Three-stage sum of per-leaf contributions: cores in ascending id within
/// each NUMA group, then NUMA groups in ascending id, then nodes.
pub fn staged_sum(topology: &Topology, partials: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(partials.len(), topology.leaves(), "one contribution per leaf");
    let numa_sums: Vec<Vec<f64>> = (0..topology.nnumas)
        .map(|k| core_stage(&partials[k * topology.ncores..(k + 1) * topology.ncores]))
        .collect();
    let node_sum = core_stage(&numa_sums);
    // single node: the node stage is the identity
    node_sum
}

fn core_stage(parts: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        debug_assert_eq!(p.len(), acc.len());
        for (a, &v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc
}

/// In-process team of leaf workers laid out as `nnumas x ncores`.
///
/// Collective work is expressed as SPMD regions ([`Team::spmd`]): every
/// worker runs the same closure and may synchronize through
/// [`Worker::barrier`] and [`Worker::allreduce_sum`].
pub struct Team {
    topology: Topology,
    pool: Option<rayon::ThreadPool>,
    core_barriers: Vec<Barrier>,
    numa_barrier: Barrier,
    team_barrier: Barrier,
    slots: Vec<Mutex<Vec<f64>>>,
    counters: Counters,
    in_region: AtomicBool,
}

impl Team {
    pub fn new(topology: Topology) -> Result<Self> {
        let leaves = Topology::new(topology.nnumas, topology.ncores)?.leaves();
        let pool = if leaves > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(leaves)
                    .thread_name(move |i| format!("mrhs-leaf-{i}"))
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("cannot start worker team: {e}")))?,
            )
        } else {
            None
        };
        Ok(Team {
            topology,
            pool,
            core_barriers: (0..topology.nnumas).map(|_| Barrier::new(topology.ncores)).collect(),
            numa_barrier: Barrier::new(leaves),
            team_barrier: Barrier::new(leaves),
            slots: (0..leaves).map(|_| Mutex::new(Vec::new())).collect(),
            counters: Counters::default(),
            in_region: AtomicBool::new(false),
        })
    }

    /// Creates a team from a `"nnumas=..:ncores=.."` string.
    pub fn init(config: &str) -> Result<Self> {
        Team::new(config.parse()?)
    }

    pub fn serial() -> Self {
        Team::new(Topology::SERIAL).expect("serial team")
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn leaves(&self) -> usize {
        self.topology.leaves()
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Runs `f` once on every worker and returns the results in leaf order.
    ///
    /// Regions must not be nested.
    pub fn spmd<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&Worker<'_>) -> R + Sync,
    {
        match &self.pool {
            None => vec![f(&Worker { team: self, leaf: 0 })],
            Some(pool) => {
                let nested = self.in_region.swap(true, Ordering::AcqRel);
                assert!(!nested, "SPMD regions cannot be nested");
                let out = pool.broadcast(|ctx| {
                    f(&Worker {
                        team: self,
                        leaf: ctx.index(),
                    })
                });
                self.in_region.store(false, Ordering::Release);
                out
            }
        }
    }

    fn barrier_for(&self, leaf: usize, scope: Scope) -> &Barrier {
        match scope {
            Scope::CoreGroup => &self.core_barriers[self.topology.coords(leaf).0],
            Scope::NumaGroup => &self.numa_barrier,
            Scope::Team => &self.team_barrier,
        }
    }
}

impl std::fmt::Debug for Team {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Team").field("topology", &self.topology).finish()
    }
}

/// Handle a worker sees inside an SPMD region.
pub struct Worker<'t> {
    team: &'t Team,
    leaf: usize,
}

impl<'t> Worker<'t> {
    pub fn leaf(&self) -> usize {
        self.leaf
    }

    pub fn numa(&self) -> usize {
        self.team.topology.coords(self.leaf).0
    }

    pub fn core(&self) -> usize {
        self.team.topology.coords(self.leaf).1
    }

    pub fn team(&self) -> &'t Team {
        self.team
    }

    pub fn barrier(&self, scope: Scope) {
        self.team.barrier_for(self.leaf, scope).wait();
    }

    /// Sum of `values` over the members of `scope`, identical on every
    /// member. The summation order is fixed by [`staged_sum`].
    pub fn allreduce_sum(&self, values: &[f64], scope: Scope) -> Vec<f64> {
        let topo = self.team.topology;
        if topo.leaves() == 1 {
            return values.to_vec();
        }
        {
            let mut slot = self.team.slots[self.leaf].lock().unwrap();
            slot.clear();
            slot.extend_from_slice(values);
        }
        self.barrier(scope);
        let read = |leaf: usize| self.team.slots[leaf].lock().unwrap().clone();
        let result = match scope {
            Scope::CoreGroup => {
                let numa = self.numa();
                let parts: Vec<Vec<f64>> =
                    (0..topo.ncores).map(|c| read(numa * topo.ncores + c)).collect();
                core_stage(&parts)
            }
            Scope::NumaGroup | Scope::Team => {
                let parts: Vec<Vec<f64>> = (0..topo.leaves()).map(read).collect();
                staged_sum(&topo, &parts)
            }
        };
        self.barrier(scope);
        result
    }
}
