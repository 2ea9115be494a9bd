use crate::amg::Hierarchy;
use crate::blas::{axpby, dot};
use crate::blas2::{residual, spmv};
use crate::error::{Error, Result};
use crate::matrix::{BlockVector, DistMatrix, RhsScalars};
use crate::parallel::Team;
use crate::solvers::{DenseLu, Monitor, Preconditioner, RelaxKind, RelaxStep, SolveStats};

/// Coarsest levels up to this order are solved with a dense LU; larger
/// ones fall back to [`COARSE_SWEEPS`] smoother sweeps.
pub const COARSE_DIRECT_LIMIT: usize = 4096;
pub const COARSE_SWEEPS: usize = 20;

#[derive(Debug)]
enum CoarseSolve {
    Direct(DenseLu),
    Smooth(RelaxStep),
}

/// V-cycle over an AMG hierarchy with per-level smoothers.
#[derive(Debug)]
pub struct MultiGrid {
    hierarchy: Hierarchy,
    pre: Vec<RelaxStep>,
    post: Vec<RelaxStep>,
    coarse: CoarseSolve,
    cycles: usize,
}

impl MultiGrid {
    /// Binds `pre` and `post` smoothers (kind and sweep count) to every
    /// level; `cycles` V-cycles are applied per preconditioner call.
    pub fn new(team: &Team, hierarchy: Hierarchy, pre: (RelaxKind, usize), post: (RelaxKind, usize), cycles: usize) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::InvalidArgument("multigrid needs at least one cycle".into()));
        }
        let levels = hierarchy.levels();
        let mut pre_steps = Vec::with_capacity(levels.len());
        let mut post_steps = Vec::with_capacity(levels.len());
        for lvl in &levels[..levels.len() - 1] {
            pre_steps.push(RelaxStep::new(team, pre.0, pre.1, &lvl.a)?);
            post_steps.push(RelaxStep::new(team, post.0, post.1, &lvl.a)?);
        }
        let last = &hierarchy.coarsest().a;
        let coarse = if last.nrows() <= COARSE_DIRECT_LIMIT {
            CoarseSolve::Direct(DenseLu::factor(&last.to_global())?)
        } else {
            CoarseSolve::Smooth(RelaxStep::new(team, post.0, COARSE_SWEEPS, last)?)
        };
        Ok(MultiGrid {
            hierarchy,
            pre: pre_steps,
            post: post_steps,
            coarse,
            cycles,
        })
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn coarse_is_direct(&self) -> bool {
        matches!(self.coarse, CoarseSolve::Direct(_))
    }

    /// One V-cycle on `A x = b` at the finest level.
    pub fn cycle(&self, team: &Team, b: &BlockVector, x: &mut BlockVector) -> Result<()> {
        self.vcycle(team, 0, b, x)
    }

    fn vcycle(&self, team: &Team, l: usize, b: &BlockVector, x: &mut BlockVector) -> Result<()> {
        let lvl = &self.hierarchy.levels()[l];
        let (n, m) = (b.nrows(), b.nrhs());
        if l + 1 == self.hierarchy.num_levels() {
            return match &self.coarse {
                CoarseSolve::Direct(lu) => lu.solve_into(b, x),
                CoarseSolve::Smooth(step) => step.smooth(team, &lvl.a, b, x),
            };
        }
        let (p, r) = (lvl.p.as_ref().expect("transfer on non-coarsest level"), lvl.r.as_ref().expect("transfer on non-coarsest level"));
        let nc = p.ncols();
        self.pre[l].smooth(team, &lvl.a, b, x)?;
        let mut res = BlockVector::uninit(n, m);
        residual(team, &lvl.a, x, b, &mut res)?;
        let mut bc = BlockVector::uninit(nc, m);
        spmv(team, r, &res, &mut bc)?;
        let mut xc = BlockVector::zeros(nc, m);
        self.vcycle(team, l + 1, &bc, &mut xc)?;
        spmv(team, p, &xc, &mut res)?;
        let ones = RhsScalars::ones(m);
        axpby(team, &ones, &res, &ones, x)?;
        self.post[l].smooth(team, &lvl.a, b, x)
    }
}

impl Preconditioner for MultiGrid {
    fn apply(&self, team: &Team, _a: &DistMatrix, r: &BlockVector, z: &mut BlockVector) -> Result<()> {
        z.set_zero();
        for _ in 0..self.cycles {
            self.cycle(team, r, z)?;
        }
        Ok(())
    }

    fn hierarchy(&self) -> Option<&Hierarchy> {
        Some(&self.hierarchy)
    }
}

/// Stand-alone multigrid: one V-cycle per iteration until the relative
/// residual meets `tol`.
pub fn multigrid_solve(team: &Team, mg: &MultiGrid, b: &BlockVector, x: &mut BlockVector, tol: f64, max_iters: usize) -> Result<SolveStats> {
    let a = &mg.hierarchy.levels()[0].a;
    let mut mon = Monitor::new(team, a, b, x, tol)?;
    let mut r = BlockVector::uninit(b.nrows(), b.nrhs());
    residual(team, a, x, b, &mut r)?;
    if mon.check_true(&dot(team, &r, &r)?) {
        return mon.finish(x, 0);
    }
    for k in 1..=max_iters {
        mg.cycle(team, b, x)?;
        residual(team, a, x, b, &mut r)?;
        if mon.check_true(&dot(team, &r, &r)?) {
            return mon.finish(x, k);
        }
    }
    mon.finish(x, max_iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amg::{setup, AmgParams};
    use crate::blas2::SweepDirection;
    use crate::io::{gen_poisson3d, manufactured_rhs};
    use crate::matrix::CsrBlock;
    use crate::parallel::Topology;
    use crate::solvers::testutil::{dense_solve, max_rel_diff, random_rhs};

    const SGS: RelaxKind = RelaxKind::GaussSeidel {
        direction: SweepDirection::Symmetric,
    };

    fn build(g: &CsrBlock, params: &AmgParams, team: &Team) -> MultiGrid {
        let h = setup(g, params, team.topology()).unwrap();
        MultiGrid::new(team, h, (SGS, 1), (SGS, 1), 1).unwrap()
    }

    #[test]
    fn single_level_is_a_direct_solve() {
        let g = gen_poisson3d(4, 4, 4).unwrap();
        let team = Team::serial();
        let mg = build(&g, &AmgParams::default(), &team);
        assert_eq!(mg.hierarchy.num_levels(), 1);
        assert!(mg.coarse_is_direct());
        let b = random_rhs(64, 2, 9);
        let mut x = BlockVector::zeros(64, 2);
        mg.cycle(&team, &b, &mut x).unwrap();
        assert!(max_rel_diff(&x, &dense_solve(&g, &b)) < 1e-12);
    }

    #[test]
    fn vcycle_contracts_poisson_error() {
        let g = gen_poisson3d(16, 16, 16).unwrap();
        let team = Team::serial();
        let mg = build(&g, &AmgParams::default(), &team);
        assert!(mg.hierarchy.num_levels() >= 2);
        let b = manufactured_rhs(&g, 1);
        let mut x = BlockVector::zeros(g.nrows(), 1);
        let s = multigrid_solve(&team, &mg, &b, &mut x, 0.0, 10).unwrap();
        let h: Vec<f64> = s.history.iter().map(|r| r[0]).collect();
        for k in 2..=10 {
            assert!(h[k] <= 0.5 * h[k - 1], "cycle {k}: {} -> {}", h[k - 1], h[k]);
        }
    }

    #[test]
    fn preconditioner_starts_from_zero() {
        let g = gen_poisson3d(10, 10, 10).unwrap();
        let team = Team::serial();
        let params = AmgParams {
            coarse_matrix_size: 50,
            ..AmgParams::default()
        };
        let mg = build(&g, &params, &team);
        let a = &mg.hierarchy.levels()[0].a;
        let r = random_rhs(1000, 3, 4);
        let mut z1 = BlockVector::filled(1000, 3, 7.0);
        let mut z2 = BlockVector::uninit(1000, 3);
        team.counters().reset();
        mg.apply(&team, a, &r, &mut z1).unwrap();
        // first sweep on every non-coarsest level sees a zero guess
        assert_eq!(team.counters().get("sgs").skipped as usize, mg.hierarchy.num_levels() - 1);
        mg.apply(&team, a, &r, &mut z2).unwrap();
        assert_eq!(z1, z2);
    }

    #[test]
    fn topology_does_not_change_the_answer_much() {
        let g = gen_poisson3d(12, 12, 12).unwrap();
        let b = manufactured_rhs(&g, 2);
        let mut sols = Vec::new();
        for topo in [Topology::SERIAL, Topology::new(2, 2).unwrap()] {
            let team = Team::new(topo).unwrap();
            let mg = build(&g, &AmgParams::default(), &team);
            let mut x = BlockVector::zeros(g.nrows(), 2);
            let s = multigrid_solve(&team, &mg, &b, &mut x, 1e-10, 50).unwrap();
            assert!(s.all_converged());
            sols.push(x);
        }
        assert!(max_rel_diff(&sols[0], &sols[1]) < 1e-8);
    }

    #[test]
    fn zero_cycles_rejected() {
        let g = gen_poisson3d(3, 3, 3).unwrap();
        let team = Team::serial();
        let h = setup(&g, &AmgParams::default(), team.topology()).unwrap();
        assert!(MultiGrid::new(&team, h, (SGS, 1), (SGS, 1), 0).is_err());
    }
}
