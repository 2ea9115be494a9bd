use std::fmt;
use std::str::FromStr;

use crate::blas::{axpby, copy, direction_update, dot, dot_pair, double_axpy, multi_dot, update_two_dots, waxpby};
use crate::blas2::{residual, spmv};
use crate::error::{Error, Result};
use crate::matrix::{BlockVector, DistMatrix, RhsScalars};
use crate::parallel::Team;
use crate::solvers::{guarded_div, precondition, Check, KrylovOptions, Monitor, Preconditioner, SolveStats};

/// Drift between true and recursive residuals beyond this factor is
/// reported as instability by the pipelined variant.
pub const DRIFT_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BiCGStabVariant {
    #[default]
    Classical,
    /// Classical recurrence with the omega, rho and residual-norm products
    /// grouped into one reduction.
    Reordered,
    /// Pipelined recurrence: two reductions per iteration, each independent
    /// of the following operator application.
    Pipelined,
}

impl BiCGStabVariant {
    pub const ALL: [BiCGStabVariant; 3] = [BiCGStabVariant::Classical, BiCGStabVariant::Reordered, BiCGStabVariant::Pipelined];

    pub fn name(self) -> &'static str {
        match self {
            BiCGStabVariant::Classical => "classical",
            BiCGStabVariant::Reordered => "reordered",
            BiCGStabVariant::Pipelined => "pipelined",
        }
    }
}

impl fmt::Display for BiCGStabVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BiCGStabVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BiCGStabVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown BiCGStab variant '{s}'")))
    }
}

/// Right-preconditioned BiCGStab.
pub fn bicgstab_solve(
    team: &Team,
    a: &DistMatrix,
    b: &BlockVector,
    x: &mut BlockVector,
    precond: Option<&dyn Preconditioner>,
    opts: &KrylovOptions,
    variant: BiCGStabVariant,
) -> Result<SolveStats> {
    match variant {
        BiCGStabVariant::Classical | BiCGStabVariant::Reordered => {
            standard(team, a, b, x, precond, opts, variant == BiCGStabVariant::Reordered)
        }
        BiCGStabVariant::Pipelined => pipelined(team, a, b, x, precond, opts),
    }
}

const NAME: &str = "BiCGStab";

fn neg(s: &RhsScalars) -> RhsScalars {
    s.map(|v| -v)
}

fn check_rho(rho: &RhsScalars, rr: &RhsScalars) -> Result<()> {
    match (0..rho.len()).find(|&j| rho[j] == 0.0 && rr[j] != 0.0) {
        Some(column) => Err(Error::Breakdown {
            method: NAME,
            column,
            reason: "rho vanished",
        }),
        None => Ok(()),
    }
}

/// `p := r + beta (p - omega v)`.
fn update_direction(
    team: &Team,
    merged: bool,
    r: &BlockVector,
    beta: &RhsScalars,
    omega: &RhsScalars,
    v: &BlockVector,
    p: &mut BlockVector,
) -> Result<()> {
    let ones = RhsScalars::ones(beta.len());
    if merged {
        direction_update(team, r, beta, &neg(omega), v, p)
    } else {
        axpby(team, &neg(omega), v, &ones, p)?;
        axpby(team, &ones, r, beta, p)
    }
}

/// `x := (x + alpha p) + omega s`.
fn update_solution(
    team: &Team,
    merged: bool,
    alpha: &RhsScalars,
    p: &BlockVector,
    omega: &RhsScalars,
    s: &BlockVector,
    x: &mut BlockVector,
) -> Result<()> {
    let ones = RhsScalars::ones(alpha.len());
    if merged && !x.is_zero() {
        double_axpy(team, alpha, p, omega, s, x)
    } else {
        axpby(team, alpha, p, &ones, x)?;
        axpby(team, omega, s, &ones, x)
    }
}

fn standard(
    team: &Team,
    a: &DistMatrix,
    b: &BlockVector,
    x: &mut BlockVector,
    precond: Option<&dyn Preconditioner>,
    opts: &KrylovOptions,
    reordered: bool,
) -> Result<SolveStats> {
    let mut mon = Monitor::new(team, a, b, x, opts.tol)?;
    let (n, m) = (b.nrows(), b.nrhs());
    let merged = opts.merged;
    let ones = RhsScalars::ones(m);
    let vec = || BlockVector::uninit(n, m);

    let mut r = vec();
    residual(team, a, x, b, &mut r)?;
    let mut rr = dot(team, &r, &r)?;
    if let Check::Converged = mon.check(&rr, x)? {
        return mon.finish(x, 0);
    }
    let mut rhat = vec();
    copy(team, &r, &mut rhat)?;
    let mut rho = dot(team, &rhat, &r)?;
    let mut rho_old = ones.clone();
    let mut alpha = ones.clone();
    let mut omega = ones.clone();
    let mut p = BlockVector::zeros(n, m);
    let mut v = BlockVector::zeros(n, m);
    let mut s = vec();
    let mut t = vec();
    let mut phat = precond.map(|_| vec());
    let mut shat = precond.map(|_| vec());

    for k in 1..=opts.max_iters {
        check_rho(&rho, &rr)?;
        let beta = guarded_div(NAME, "rho vanished", &rho, &rho_old)?.zip_map(
            &guarded_div(NAME, "omega vanished", &alpha, &omega)?,
            |p, q| p * q,
        );
        update_direction(team, merged, &r, &beta, &omega, &v, &mut p)?;
        if let Some(ph) = phat.as_mut() {
            precondition(team, precond, a, &p, ph)?;
        }
        spmv(team, a, phat.as_ref().unwrap_or(&p), &mut v)?;
        let rv = dot(team, &rhat, &v)?;
        alpha = guarded_div(NAME, "(r^, v) vanished", &rho, &rv)?;
        waxpby(team, &ones, &r, &neg(&alpha), &v, &mut s)?;
        if let Some(sh) = shat.as_mut() {
            precondition(team, precond, a, &s, sh)?;
        }
        spmv(team, a, shat.as_ref().unwrap_or(&s), &mut t)?;

        let rho_next;
        if reordered {
            let d = multi_dot(team, &[(&t, &s), (&t, &t), (&rhat, &s), (&rhat, &t), (&s, &s)])?;
            let (ts, tt, rs, rt, ss) = (&d[0], &d[1], &d[2], &d[3], &d[4]);
            omega = guarded_div(NAME, "(t, t) vanished", ts, tt)?;
            rho_next = RhsScalars((0..m).map(|j| rs[j] - omega[j] * rt[j]).collect());
            rr = RhsScalars(
                (0..m)
                    .map(|j| (ss[j] - 2.0 * omega[j] * ts[j] + omega[j] * omega[j] * tt[j]).max(0.0))
                    .collect(),
            );
            update_solution(team, merged, &alpha, phat.as_ref().unwrap_or(&p), &omega, shat.as_ref().unwrap_or(&s), x)?;
            waxpby(team, &ones, &s, &neg(&omega), &t, &mut r)?;
        } else {
            let (ts, tt) = if merged {
                dot_pair(team, &t, &s)?
            } else {
                (dot(team, &t, &s)?, dot(team, &t, &t)?)
            };
            omega = guarded_div(NAME, "(t, t) vanished", &ts, &tt)?;
            update_solution(team, merged, &alpha, phat.as_ref().unwrap_or(&p), &omega, shat.as_ref().unwrap_or(&s), x)?;
            if merged {
                let (rrh, rrn) = update_two_dots(team, &ones, &s, &neg(&omega), &t, &rhat, &mut r)?;
                rho_next = rrh;
                rr = rrn;
            } else {
                waxpby(team, &ones, &s, &neg(&omega), &t, &mut r)?;
                rho_next = dot(team, &rhat, &r)?;
                rr = dot(team, &r, &r)?;
            }
        }
        if let Check::Converged = mon.check(&rr, x)? {
            return mon.finish(x, k);
        }
        rho_old = std::mem::replace(&mut rho, rho_next);
    }
    mon.finish(x, opts.max_iters)
}

fn pipelined(
    team: &Team,
    a: &DistMatrix,
    b: &BlockVector,
    x: &mut BlockVector,
    precond: Option<&dyn Preconditioner>,
    opts: &KrylovOptions,
) -> Result<SolveStats> {
    let mut mon = Monitor::new(team, a, b, x, opts.tol)?;
    let (n, m) = (b.nrows(), b.nrhs());
    let merged = opts.merged;
    let ones = RhsScalars::ones(m);
    let vec = || BlockVector::uninit(n, m);
    let zero = || BlockVector::zeros(n, m);

    // Tilde vectors carry M^-1 applied to their plain counterparts.
    let mut r = vec();
    residual(team, a, x, b, &mut r)?;
    let mut rr = dot(team, &r, &r)?;
    if let Check::Converged = mon.check(&rr, x)? {
        return mon.finish(x, 0);
    }
    let mut rhat = vec();
    copy(team, &r, &mut rhat)?;
    let mut rt = vec();
    precondition(team, precond, a, &r, &mut rt)?;
    let mut w = vec();
    spmv(team, a, &rt, &mut w)?;
    let mut wt = vec();
    precondition(team, precond, a, &w, &mut wt)?;
    let mut t = vec();
    spmv(team, a, &wt, &mut t)?;
    let d = multi_dot(team, &[(&rhat, &r), (&rhat, &w)])?;
    let mut rho = d[0].clone();
    let mut alpha = guarded_div(NAME, "(r^, w) vanished", &d[0], &d[1])?;
    let mut beta = RhsScalars::zeros(m);
    let mut omega = RhsScalars::zeros(m);

    let (mut p, mut pt, mut s, mut st, mut z, mut zt, mut v) = (zero(), zero(), zero(), zero(), zero(), zero(), zero());
    let (mut q, mut qt, mut y) = (vec(), vec(), vec());

    for k in 1..=opts.max_iters {
        check_rho(&rho, &rr)?;
        update_direction(team, merged, &r, &beta, &omega, &s, &mut p)?;
        update_direction(team, merged, &rt, &beta, &omega, &st, &mut pt)?;
        update_direction(team, merged, &w, &beta, &omega, &z, &mut s)?;
        update_direction(team, merged, &wt, &beta, &omega, &zt, &mut st)?;
        update_direction(team, merged, &t, &beta, &omega, &v, &mut z)?;
        let na = neg(&alpha);
        waxpby(team, &ones, &r, &na, &s, &mut q)?;
        waxpby(team, &ones, &rt, &na, &st, &mut qt)?;
        let (yq, yy) = if merged {
            update_two_dots(team, &ones, &w, &na, &z, &q, &mut y)?
        } else {
            waxpby(team, &ones, &w, &na, &z, &mut y)?;
            let d = multi_dot(team, &[(&y, &q), (&y, &y)])?;
            (d[0].clone(), d[1].clone())
        };
        precondition(team, precond, a, &z, &mut zt)?;
        spmv(team, a, &zt, &mut v)?;
        omega = guarded_div(NAME, "(y, y) vanished", &yq, &yy)?;
        let no = neg(&omega);
        update_solution(team, merged, &alpha, &pt, &omega, &qt, x)?;
        waxpby(team, &ones, &q, &no, &y, &mut r)?;
        // r~ = q~ - omega (w~ - alpha z~), built in the w~ buffer
        if merged {
            direction_update(team, &qt, &no, &na, &zt, &mut wt)?;
            direction_update(team, &y, &no, &na, &v, &mut t)?;
        } else {
            axpby(team, &na, &zt, &ones, &mut wt)?;
            axpby(team, &ones, &qt, &no, &mut wt)?;
            axpby(team, &na, &v, &ones, &mut t)?;
            axpby(team, &ones, &y, &no, &mut t)?;
        }
        std::mem::swap(&mut wt, &mut rt);
        std::mem::swap(&mut t, &mut w);

        let d = multi_dot(team, &[(&rhat, &r), (&rhat, &w), (&rhat, &s), (&rhat, &z), (&r, &r)])?;
        rr = d[4].clone();
        match mon.check(&rr, x)? {
            Check::Converged => return mon.finish(x, k),
            Check::Drift { true_rel, recursive } => {
                for j in 0..m {
                    let ratio = true_rel[j] / recursive[j];
                    if true_rel[j] > opts.tol && !(ratio <= DRIFT_LIMIT) {
                        return Err(Error::Instability { column: j, ratio });
                    }
                }
            }
            Check::Continue => {}
        }
        precondition(team, precond, a, &w, &mut wt)?;
        spmv(team, a, &wt, &mut t)?;
        beta = guarded_div(NAME, "omega vanished", &alpha, &omega)?
            .zip_map(&guarded_div(NAME, "rho vanished", &d[0], &rho)?, |p, q| p * q);
        let den = RhsScalars((0..m).map(|j| d[1][j] + beta[j] * d[2][j] - beta[j] * omega[j] * d[3][j]).collect());
        alpha = guarded_div(NAME, "alpha denominator vanished", &d[0], &den)?;
        rho = d[0].clone();
    }
    mon.finish(x, opts.max_iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::gen_poisson3d;
    use crate::matrix::CsrBlock;
    use crate::parallel::Topology;
    use crate::solvers::testutil::*;

    fn opts(tol: f64, max_iters: usize, merged: bool) -> KrylovOptions {
        KrylovOptions { tol, max_iters, merged }
    }

    fn all_runs() -> Vec<(BiCGStabVariant, bool)> {
        BiCGStabVariant::ALL.into_iter().flat_map(|v| [(v, false), (v, true)]).collect()
    }

    /// Poisson-like 2D operator with a skew convection term.
    fn convection_diffusion(k: usize, c: f64) -> CsrBlock {
        let n = k * k;
        let mut t = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let row = i * k + j;
                t.push((row, row, 4.0));
                if j > 0 {
                    t.push((row, row - 1, -1.0 - c));
                }
                if j + 1 < k {
                    t.push((row, row + 1, -1.0 + c));
                }
                if i > 0 {
                    t.push((row, row - k, -1.0));
                }
                if i + 1 < k {
                    t.push((row, row + k, -1.0));
                }
            }
        }
        CsrBlock::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn identity_takes_one_iteration() {
        let team = Team::serial();
        let a = DistMatrix::new(&CsrBlock::identity(6), team.topology()).unwrap();
        let b = random_rhs(6, 2, 1);
        for (v, merged) in all_runs() {
            let mut x = BlockVector::zeros(6, 2);
            let s = bicgstab_solve(&team, &a, &b, &mut x, None, &opts(1e-12, 10, merged), v).unwrap();
            assert_eq!(s.iterations, 1, "{v}");
            assert_eq!(x, b, "{v}");
        }
    }

    #[test]
    fn nonsymmetric_all_variants() {
        let g = convection_diffusion(7, 0.3);
        let n = g.nrows();
        assert!(n <= 50);
        let b = random_rhs(n, 2, 5);
        let want = dense_solve(&g, &b);
        let team = Team::serial();
        let a = DistMatrix::new(&g, team.topology()).unwrap();
        let mut iters = Vec::new();
        for (v, merged) in all_runs() {
            let mut x = BlockVector::zeros(n, 2);
            let s = bicgstab_solve(&team, &a, &b, &mut x, None, &opts(1e-8, 200, merged), v).unwrap();
            assert!(s.all_converged(), "{v} {:?}", s.final_rel_residual);
            assert!(s.max_rel_residual() <= 1e-8);
            assert!(max_rel_diff(&x, &want) < 1e-6);
            iters.push(s.iterations);
        }
        let (lo, hi) = (iters.iter().min().unwrap(), iters.iter().max().unwrap());
        assert!(hi - lo <= 2, "{iters:?}");
    }

    #[test]
    fn merged_classical_is_bitwise_identical() {
        let g = random_nonsym(120, 0.05, 8);
        let team = Team::new(Topology::new(2, 2).unwrap()).unwrap();
        let a = DistMatrix::new(&g, team.topology()).unwrap();
        let b = random_rhs(120, 3, 2);
        for variant in BiCGStabVariant::ALL {
            let mut x1 = BlockVector::zeros(120, 3);
            let mut x2 = BlockVector::zeros(120, 3);
            let s1 = bicgstab_solve(&team, &a, &b, &mut x1, None, &opts(1e-10, 200, false), variant).unwrap();
            let s2 = bicgstab_solve(&team, &a, &b, &mut x2, None, &opts(1e-10, 200, true), variant).unwrap();
            assert_eq!(s1.iterations, s2.iterations, "{variant}");
            assert_eq!(s1.history, s2.history, "{variant}");
            assert_eq!(x1, x2, "{variant}");
        }
    }

    #[test]
    fn variant_histories_agree() {
        let g = random_nonsym(150, 0.04, 21);
        let team = Team::serial();
        let a = DistMatrix::new(&g, team.topology()).unwrap();
        let b = random_rhs(150, 2, 22);
        let runs: Vec<SolveStats> = BiCGStabVariant::ALL
            .into_iter()
            .map(|v| {
                let mut x = BlockVector::zeros(150, 2);
                bicgstab_solve(&team, &a, &b, &mut x, None, &opts(1e-10, 200, false), v).unwrap()
            })
            .collect();
        for other in &runs[1..] {
            for k in 0..10.min(runs[0].history.len()).min(other.history.len()) {
                for j in 0..2 {
                    let (h0, h1) = (runs[0].history[k][j], other.history[k][j]);
                    assert!((h0 - h1).abs() <= 1e-6 * h0, "iteration {k}: {h0} vs {h1}");
                }
            }
        }
    }

    #[test]
    fn preconditioned_poisson() {
        struct JacobiPc;
        impl Preconditioner for JacobiPc {
            fn apply(&self, team: &Team, a: &DistMatrix, r: &BlockVector, z: &mut BlockVector) -> Result<()> {
                z.set_zero();
                crate::blas2::jacobi_sweep(team, a, r, z, 1.0)
            }
        }
        let g = gen_poisson3d(8, 8, 8).unwrap();
        let team = Team::new(Topology::new(1, 2).unwrap()).unwrap();
        let a = DistMatrix::new(&g, team.topology()).unwrap();
        let b = crate::io::manufactured_rhs(&g, 2);
        for (v, merged) in all_runs() {
            let mut x = BlockVector::zeros(512, 2);
            let s = bicgstab_solve(&team, &a, &b, &mut x, Some(&JacobiPc), &opts(1e-10, 200, merged), v).unwrap();
            assert!(s.all_converged(), "{v}");
            assert!(x.as_slice().iter().all(|e| (e - 1.0).abs() < 1e-8), "{v}");
        }
    }

    #[test]
    fn frozen_zero_column() {
        let g = random_nonsym(40, 0.1, 3);
        let team = Team::serial();
        let a = DistMatrix::new(&g, team.topology()).unwrap();
        let mut b = random_rhs(40, 2, 4);
        b.set_column(1, &[0.0; 40]).unwrap();
        for (v, merged) in all_runs() {
            let mut x = BlockVector::zeros(40, 2);
            let s = bicgstab_solve(&team, &a, &b, &mut x, None, &opts(1e-10, 100, merged), v).unwrap();
            assert!(s.all_converged());
            assert!(x.column(1).iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn breakdown_reports_column() {
        // rotation: (r^, A r) = 0 on the first step
        let g = CsrBlock::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        let team = Team::serial();
        let a = DistMatrix::new(&g, team.topology()).unwrap();
        let b = BlockVector::from_columns(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let mut x = BlockVector::zeros(2, 2);
        let e = bicgstab_solve(&team, &a, &b, &mut x, None, &opts(1e-10, 10, false), BiCGStabVariant::Classical).unwrap_err();
        assert!(matches!(e, Error::Breakdown { column: 1, .. }), "{e:?}");
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in BiCGStabVariant::ALL {
            assert_eq!(v.name().parse::<BiCGStabVariant>().unwrap(), v);
        }
        assert!("fancy".parse::<BiCGStabVariant>().is_err());
    }
}
