use crate::error::{Error, Result};
use crate::matrix::{BlockVector, CsrBlock, DistMatrix};
use crate::parallel::Team;
use crate::solvers::{Monitor, Preconditioner, SolveStats};

/// Dense LU factorization with partial pivoting, solving all right-hand
/// sides of an interleaved block at once.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &CsrBlock) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::shape(format_args!("LU needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let mut lu = a.to_dense();
        let scale = lu.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let tiny = n as f64 * f64::EPSILON * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv <= tiny || pv == 0.0 {
                return Err(Error::SingularMatrix { column: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let piv = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / piv;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= l * lu[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` for every column of `b`.
    pub fn solve_into(&self, b: &BlockVector, x: &mut BlockVector) -> Result<()> {
        let (n, m) = (self.n, b.nrhs());
        if b.nrows() != n || !b.same_shape(x) {
            return Err(Error::shape(format_args!("LU of order {n}, b {}x{m}, x {}x{}", b.nrows(), x.nrows(), x.nrhs())));
        }
        let bs = b.as_slice();
        let mut y = vec![0.0; n * m];
        for (i, &p) in self.perm.iter().enumerate() {
            y[i * m..(i + 1) * m].copy_from_slice(&bs[p * m..(p + 1) * m]);
        }
        for i in 0..n {
            let (done, rest) = y.split_at_mut(i * m);
            let yi = &mut rest[..m];
            for (k, &l) in self.lu[i * n..i * n + i].iter().enumerate() {
                if l != 0.0 {
                    for (t, s) in yi.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                        *t -= l * s;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = y.split_at_mut((i + 1) * m);
            let yi = &mut head[i * m..];
            for (off, &u) in self.lu[i * n + i + 1..(i + 1) * n].iter().enumerate() {
                if u != 0.0 {
                    for (t, s) in yi.iter_mut().zip(&tail[off * m..(off + 1) * m]) {
                        *t -= u * s;
                    }
                }
            }
            let d = self.lu[i * n + i];
            for t in yi.iter_mut() {
                *t /= d;
            }
        }
        x.as_mut_slice().copy_from_slice(&y);
        Ok(())
    }
}

impl Preconditioner for DenseLu {
    fn apply(&self, _team: &Team, _a: &DistMatrix, r: &BlockVector, z: &mut BlockVector) -> Result<()> {
        self.solve_into(r, z)
    }
}

/// Factors `a` and overwrites `x` with the exact solution.
pub fn direct_solve(team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector) -> Result<SolveStats> {
    lu_solve(team, &DenseLu::factor(&a.to_global())?, a, b, x)
}

pub(crate) fn lu_solve(team: &Team, lu: &DenseLu, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector) -> Result<SolveStats> {
    let mon = Monitor::new(team, a, b, x, 0.0)?;
    lu.solve_into(b, x)?;
    let mut stats = mon.finish(x, 1)?;
    stats.converged.iter_mut().for_each(|c| *c = true);
    stats.history.push(stats.final_rel_residual.clone());
    Ok(stats)
}
