use crate::blas::{axpby, copy, dot, update_self_dot};
use crate::blas2::{residual, spmv};
use crate::error::{Error, Result};
use crate::matrix::{BlockVector, DistMatrix, RhsScalars};
use crate::parallel::Team;
use crate::solvers::{guarded_div, precondition, Check, KrylovOptions, Monitor, Preconditioner, SolveStats};

/// Preconditioned conjugate gradients for all columns at once, with one
/// set of coefficients per column.
pub fn cg_solve(
    team: &Team,
    a: &DistMatrix,
    b: &BlockVector,
    x: &mut BlockVector,
    precond: Option<&dyn Preconditioner>,
    opts: &KrylovOptions,
) -> Result<SolveStats> {
    let mut mon = Monitor::new(team, a, b, x, opts.tol)?;
    let (n, m) = (b.nrows(), b.nrhs());
    let ones = RhsScalars::ones(m);

    let mut r = BlockVector::uninit(n, m);
    residual(team, a, x, b, &mut r)?;
    let mut rr = dot(team, &r, &r)?;
    if let Check::Converged = mon.check(&rr, x)? {
        return mon.finish(x, 0);
    }
    let mut z = precond.map(|_| BlockVector::uninit(n, m));
    let mut rho = match z.as_mut() {
        Some(z) => {
            precondition(team, precond, a, &r, z)?;
            dot(team, &r, z)?
        }
        None => rr.clone(),
    };
    let mut p = BlockVector::uninit(n, m);
    copy(team, z.as_ref().unwrap_or(&r), &mut p)?;
    let mut q = BlockVector::uninit(n, m);

    for k in 1..=opts.max_iters {
        spmv(team, a, &p, &mut q)?;
        let pq = dot(team, &p, &q)?;
        let alpha = guarded_div("CG", "(p, Ap) vanished", &rho, &pq)?;
        axpby(team, &alpha, &p, &ones, x)?;
        let neg = alpha.map(|v| -v);
        if opts.merged {
            rr = update_self_dot(team, &neg, &q, &ones, &mut r)?;
        } else {
            axpby(team, &neg, &q, &ones, &mut r)?;
            rr = dot(team, &r, &r)?;
        }
        if let Check::Converged = mon.check(&rr, x)? {
            return mon.finish(x, k);
        }
        let rho_new = match z.as_mut() {
            Some(z) => {
                precondition(team, precond, a, &r, z)?;
                let rz = dot(team, &r, z)?;
                if let Some(column) = (0..m).find(|&j| rz[j] == 0.0 && rr[j] != 0.0) {
                    return Err(Error::Breakdown {
                        method: "CG",
                        column,
                        reason: "(r, Mr) vanished",
                    });
                }
                rz
            }
            None => rr.clone(),
        };
        let beta = guarded_div("CG", "rho vanished", &rho_new, &rho)?;
        axpby(team, &ones, z.as_ref().unwrap_or(&r), &beta, &mut p)?;
        rho = rho_new;
    }
    mon.finish(x, opts.max_iters)
}
