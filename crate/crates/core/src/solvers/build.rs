use std::time::Instant;

use crate::amg::{self, AmgParams, Hierarchy};
use crate::error::{Error, Result};
use crate::matrix::{BlockVector, DistMatrix};
use crate::params::{Method, ParamTree, SolverRole};
use crate::parallel::Team;
use crate::solvers::{
    bicgstab_solve, cg_solve, direct::lu_solve, multigrid_solve, BiCGStabVariant, ChebyshevScaling, DenseLu, KrylovOptions,
    MultiGrid, Preconditioner, RelaxKind, RelaxStep, SolveStats,
};

enum Outer {
    Cg(KrylovOptions),
    BiCGStab(KrylovOptions, BiCGStabVariant),
    MultiGrid { mg: MultiGrid, tol: f64, max_iters: usize },
    Relax { step: RelaxStep, tol: f64, max_iters: usize },
    Direct(DenseLu),
}

/// A configured solver bound to one operator: preconditioner, hierarchy and
/// factorizations are built once and reused across solves.
pub struct Solver {
    method: Method,
    outer: Outer,
    precond: Option<Box<dyn Preconditioner>>,
    setup_seconds: f64,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("method", &self.method)
            .field("preconditioned", &self.precond.is_some())
            .field("setup_seconds", &self.setup_seconds)
            .finish()
    }
}

fn relax_kind(config: &ParamTree, role: SolverRole) -> Result<RelaxKind> {
    let method = config.method(role).ok_or_else(|| Error::Config(format!("{role} has no method")))?;
    Ok(match method {
        Method::Jacobi => RelaxKind::Jacobi {
            weight: config.get_f64(role, "weight")?,
        },
        Method::GaussSeidel => RelaxKind::GaussSeidel {
            direction: config.get_str(role, "direction")?.parse()?,
        },
        Method::Chebyshev => RelaxKind::Chebyshev {
            order: config.get_usize(role, "polynomial_order")?,
            scaling: ChebyshevScaling::Jacobi,
        },
        Method::BiCGStab => RelaxKind::BiCGStab {
            variant: config.get_str(role, "variant")?.parse()?,
            merged: config.get_flag(role, "merged")?,
        },
        other => return Err(Error::Config(format!("{other} cannot be used as {role}"))),
    })
}

fn amg_params(config: &ParamTree, role: SolverRole) -> Result<AmgParams> {
    Ok(AmgParams {
        strength_threshold: config.get_f64(role, "mg_strength_threshold")?,
        coarse_matrix_size: config.get_usize(role, "mg_coarse_matrix_size")?,
        agg_num_levels: config.get_usize(role, "mg_agg_num_levels")?,
        num_paths: config.get_usize(role, "mg_num_paths")?,
        max_levels: config.get_usize(role, "mg_max_levels")?,
        mixed_precision: config.get_flag(role, "mg_mixed_precision")?,
        reduced_from_level: config.get_usize(role, "mg_reduced_from_level")?,
    })
}

fn build_multigrid(team: &Team, config: &ParamTree, role: SolverRole, a: &DistMatrix, cycles: usize) -> Result<MultiGrid> {
    let h = amg::setup(&a.to_global(), &amg_params(config, role)?, team.topology())?;
    let pre = (
        relax_kind(config, SolverRole::PreSmoother)?,
        config.get_usize(SolverRole::PreSmoother, "max_iters")?,
    );
    let post = (
        relax_kind(config, SolverRole::PostSmoother)?,
        config.get_usize(SolverRole::PostSmoother, "max_iters")?,
    );
    MultiGrid::new(team, h, pre, post, cycles)
}

fn build_preconditioner(team: &Team, config: &ParamTree, a: &DistMatrix) -> Result<Option<Box<dyn Preconditioner>>> {
    let role = SolverRole::Preconditioner;
    let Some(method) = config.method(role) else {
        return Ok(None);
    };
    let iters = config.get_usize(role, "max_iters")?;
    let pc: Box<dyn Preconditioner> = match method {
        Method::MultiGrid => Box::new(build_multigrid(team, config, role, a, iters)?),
        _ => Box::new(RelaxStep::new(team, relax_kind(config, role)?, iters, a)?),
    };
    Ok(Some(pc))
}

fn krylov_options(config: &ParamTree) -> Result<KrylovOptions> {
    let role = SolverRole::Solver;
    Ok(KrylovOptions {
        tol: config.get_f64(role, "rel_tolerance")?,
        max_iters: config.get_usize(role, "max_iters")?,
        merged: config.get_flag(role, "merged")?,
    })
}

impl Solver {
    /// Validates `config` and performs all setup for operator `a`.
    pub fn build(team: &Team, config: &ParamTree, a: &DistMatrix) -> Result<Self> {
        config.check()?;
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument("solvers need a square operator".into()));
        }
        let start = Instant::now();
        let role = SolverRole::Solver;
        let method = config.method(role).ok_or_else(|| Error::Config("solver role has no method".into()))?;
        let mut precond = None;
        let outer = match method {
            Method::CG => {
                precond = build_preconditioner(team, config, a)?;
                Outer::Cg(krylov_options(config)?)
            }
            Method::BiCGStab => {
                precond = build_preconditioner(team, config, a)?;
                Outer::BiCGStab(krylov_options(config)?, config.get_str(role, "variant")?.parse()?)
            }
            Method::MultiGrid => Outer::MultiGrid {
                mg: build_multigrid(team, config, role, a, 1)?,
                tol: config.get_f64(role, "rel_tolerance")?,
                max_iters: config.get_usize(role, "max_iters")?,
            },
            Method::Jacobi | Method::GaussSeidel => Outer::Relax {
                step: RelaxStep::new(team, relax_kind(config, role)?, 1, a)?,
                tol: config.get_f64(role, "rel_tolerance")?,
                max_iters: config.get_usize(role, "max_iters")?,
            },
            Method::Direct => Outer::Direct(DenseLu::factor(&a.to_global())?),
            Method::Chebyshev => return Err(Error::Config("Chebyshev cannot be used as a solver".into())),
        };
        Ok(Solver {
            method,
            outer,
            precond,
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn setup_seconds(&self) -> f64 {
        self.setup_seconds
    }

    /// The multigrid hierarchy, whether used as solver or preconditioner.
    pub fn hierarchy(&self) -> Option<&Hierarchy> {
        match &self.outer {
            Outer::MultiGrid { mg, .. } => mg.hierarchy(),
            _ => self.precond.as_ref().and_then(|p| p.hierarchy()),
        }
    }

    /// Solves `A X = B` for all columns; `x` holds the initial guess.
    pub fn solve(&self, team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector) -> Result<SolveStats> {
        let pc = self.precond.as_deref();
        match &self.outer {
            Outer::Cg(opts) => cg_solve(team, a, b, x, pc, opts),
            Outer::BiCGStab(opts, variant) => bicgstab_solve(team, a, b, x, pc, opts, *variant),
            Outer::MultiGrid { mg, tol, max_iters } => multigrid_solve(team, mg, b, x, *tol, *max_iters),
            Outer::Relax { step, tol, max_iters } => step.solve(team, a, b, x, *tol, *max_iters),
            Outer::Direct(lu) => lu_solve(team, lu, a, b, x),
        }
    }
}

/// One-shot build and solve.
pub fn solve(team: &Team, config: &ParamTree, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector) -> Result<SolveStats> {
    Solver::build(team, config, a)?.solve(team, a, b, x)
}
