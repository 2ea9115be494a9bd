//! Krylov solvers, multigrid and the relaxation methods used as
//! preconditioners or smoothers.
mod bicgstab;
mod build;
mod cg;
pub(crate) mod direct;
mod multigrid;
mod relax;

use std::time::Instant;

pub use bicgstab::{bicgstab_solve, BiCGStabVariant};
pub use build::{solve, Solver};
pub use cg::cg_solve;
pub use direct::{direct_solve, DenseLu};
pub use multigrid::{multigrid_solve, MultiGrid, COARSE_DIRECT_LIMIT};
pub use relax::{chebyshev_apply, estimate_eig_bounds, ChebyshevScaling, RelaxKind, RelaxStep};

pub use crate::params::SolverRole;

use crate::amg::Hierarchy;
use crate::blas::norm2;
use crate::blas2::residual;
use crate::error::{Error, Result};
use crate::matrix::{BlockVector, DistMatrix, RhsScalars};
use crate::parallel::Team;

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Recomputed `||b_j - A x_j|| / ||b_j||` (absolute norm when `b_j = 0`).
    pub final_rel_residual: RhsScalars,
    pub converged: Vec<bool>,
    pub tolerance: f64,
    /// Wall time of the solve in seconds.
    pub elapsed: f64,
    /// Relative residual per column after each iteration; entry 0 is the
    /// initial residual.
    pub history: Vec<RhsScalars>,
}

impl SolveStats {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn max_rel_residual(&self) -> f64 {
        self.final_rel_residual.max()
    }
}

/// Stopping and fusion settings shared by the Krylov methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Route vector work through the fused kernels.
    pub merged: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            tol: 1e-8,
            max_iters: 100,
            merged: false,
        }
    }
}

/// Approximately solves `M z = r` starting from `z = 0`. Implementations
/// must be fixed linear operators between calls.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, team: &Team, a: &DistMatrix, r: &BlockVector, z: &mut BlockVector) -> Result<()>;

    fn hierarchy(&self) -> Option<&Hierarchy> {
        None
    }
}

pub(crate) fn precondition(
    team: &Team,
    pc: Option<&dyn Preconditioner>,
    a: &DistMatrix,
    r: &BlockVector,
    z: &mut BlockVector,
) -> Result<()> {
    match pc {
        Some(pc) => pc.apply(team, a, r, z),
        None => crate::blas::copy(team, r, z),
    }
}

/// Column-wise `num / den` with the breakdown rule: `0/0` gives 0 (the
/// column has converged exactly and stays frozen); any other division by
/// zero or non-finite result is a breakdown.
pub(crate) fn guarded_div(method: &'static str, reason: &'static str, num: &RhsScalars, den: &RhsScalars) -> Result<RhsScalars> {
    let mut out = Vec::with_capacity(num.len());
    for (column, (&n, &d)) in num.iter().zip(den.iter()).enumerate() {
        let q = if d == 0.0 && n == 0.0 { 0.0 } else { n / d };
        if !q.is_finite() {
            return Err(Error::Breakdown { method, column, reason });
        }
        out.push(q);
    }
    Ok(RhsScalars(out))
}

pub(crate) enum Check {
    Continue,
    Converged,
    /// The recursive residual met the tolerance but the true one did not.
    Drift { true_rel: RhsScalars, recursive: RhsScalars },
}

/// Tracks residual history and decides when to stop.
pub(crate) struct Monitor<'a> {
    team: &'a Team,
    a: &'a DistMatrix,
    b: &'a BlockVector,
    bnorm: RhsScalars,
    tol: f64,
    history: Vec<RhsScalars>,
    start: Instant,
    scratch: BlockVector,
    true_rel: Option<RhsScalars>,
}

impl<'a> Monitor<'a> {
    pub fn new(team: &'a Team, a: &'a DistMatrix, b: &'a BlockVector, x: &BlockVector, tol: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument("solvers need a square operator".into()));
        }
        if b.nrows() != a.nrows() || !b.same_shape(x) {
            return Err(Error::shape(format_args!(
                "operator {}x{}, b {}x{}, x {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.nrhs(),
                x.nrows(),
                x.nrhs()
            )));
        }
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {tol} must be non-negative")));
        }
        x.require_initialized()?;
        let start = Instant::now();
        Ok(Monitor {
            team,
            a,
            b,
            bnorm: norm2(team, b)?,
            tol,
            history: Vec::new(),
            start,
            scratch: BlockVector::uninit(b.nrows(), b.nrhs()),
            true_rel: None,
        })
    }

    pub fn relative(&self, rr: &RhsScalars) -> RhsScalars {
        rr.zip_map(&self.bnorm, |s, nb| {
            let r = s.max(0.0).sqrt();
            if nb > 0.0 {
                r / nb
            } else {
                r
            }
        })
    }

    pub fn true_relative(&mut self, x: &BlockVector) -> Result<RhsScalars> {
        residual(self.team, self.a, x, self.b, &mut self.scratch)?;
        let rr = crate::blas::dot(self.team, &self.scratch, &self.scratch)?;
        Ok(self.relative(&rr))
    }

    /// Records squared residual norms `rr`; when they meet the tolerance the
    /// true residual is recomputed and must meet it too.
    pub fn check(&mut self, rr: &RhsScalars, x: &BlockVector) -> Result<Check> {
        let rec = self.relative(rr);
        self.history.push(rec.clone());
        if rec.max() > self.tol {
            self.true_rel = None;
            return Ok(Check::Continue);
        }
        let t = self.true_relative(x)?;
        if t.max() <= self.tol {
            self.true_rel = Some(t);
            Ok(Check::Converged)
        } else {
            self.true_rel = Some(t.clone());
            Ok(Check::Drift {
                true_rel: t,
                recursive: rec,
            })
        }
    }

    /// Records a residual that is already the true residual.
    pub fn check_true(&mut self, rr: &RhsScalars) -> bool {
        let rel = self.relative(rr);
        let done = rel.max() <= self.tol;
        self.true_rel = Some(rel.clone());
        self.history.push(rel);
        done
    }

    pub fn finish(mut self, x: &BlockVector, iterations: usize) -> Result<SolveStats> {
        let final_rel = match self.true_rel.take() {
            Some(t) => t,
            None => self.true_relative(x)?,
        };
        Ok(SolveStats {
            iterations,
            converged: final_rel.iter().map(|&r| r <= self.tol).collect(),
            final_rel_residual: final_rel,
            tolerance: self.tol,
            elapsed: self.start.elapsed().as_secs_f64(),
            history: self.history,
        })
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::matrix::{BlockVector, CsrBlock};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn dense_solve(a: &CsrBlock, b: &BlockVector) -> BlockVector {
        let n = a.nrows();
        let lu = DMatrix::from_row_slice(n, n, &a.to_dense()).lu();
        let cols: Vec<Vec<f64>> = (0..b.nrhs())
            .map(|j| lu.solve(&DVector::from_vec(b.column(j))).unwrap().as_slice().to_vec())
            .collect();
        BlockVector::from_columns(&cols).unwrap()
    }

    pub fn random_rhs(n: usize, m: usize, seed: u64) -> BlockVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        BlockVector::from_interleaved(n, m, data).unwrap()
    }

    /// Random SPD matrix: sparse symmetric off-diagonals plus a dominant
    /// diagonal.
    pub fn random_spd(n: usize, density: f64, seed: u64) -> CsrBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        let mut rowsum = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..i {
                if rng.gen_bool(density) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    t.push((i, j, v));
                    t.push((j, i, v));
                    rowsum[i] += v.abs();
                    rowsum[j] += v.abs();
                }
            }
        }
        for (i, s) in rowsum.into_iter().enumerate() {
            t.push((i, i, s + rng.gen_range(0.1..1.0)));
        }
        CsrBlock::from_triplets(n, n, &t).unwrap()
    }

    /// Random nonsymmetric, strictly diagonally dominant matrix.
    pub fn random_nonsym(n: usize, density: f64, seed: u64) -> CsrBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if j != i && rng.gen_bool(density) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    t.push((i, j, v));
                    s += v.abs();
                }
            }
            t.push((i, i, s * rng.gen_range(1.1..1.5) + 0.1));
        }
        CsrBlock::from_triplets(n, n, &t).unwrap()
    }

    pub fn max_rel_diff(x: &BlockVector, y: &BlockVector) -> f64 {
        (0..x.nrhs())
            .map(|j| {
                let (a, b) = (x.column(j), y.column(j));
                let num: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                let den: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
                if den > 0.0 {
                    num / den
                } else {
                    num
                }
            })
            .fold(0.0, f64::max)
    }
}
