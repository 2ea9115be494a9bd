//! Sparse matrix times block-vector products and relaxation sweeps over a
//! [`DistMatrix`].

use std::fmt;
use std::str::FromStr;

use crate::blas::{eff, rows_of, with_m};
use crate::error::{Error, Result};
use crate::matrix::{with_block, BlockVector, ColIndex, DistMatrix, StoredValue};
use crate::parallel::{Scope, SharedRows, Team};
use crate::stats::{pass, skip};

/// Accumulates one CSR block times `x` into `y` row by row.
///
/// `overwrite` starts each row from zero; `finish = Some(b)` turns the
/// finished row into `b - row`.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn csr_rows<const M: usize, I: ColIndex, V: StoredValue>(
    m: usize,
    rp: &[usize],
    cols: &[I],
    vals: &[V],
    x: &[f64],
    y: &mut [f64],
    overwrite: bool,
    finish: Option<&[f64]>,
) {
    let m = eff::<M>(m);
    for (i, yr) in y.chunks_exact_mut(m).enumerate() {
        let yr = &mut yr[..m];
        if overwrite {
            yr.fill(0.0);
        }
        for k in rp[i]..rp[i + 1] {
            let a = vals[k].widen();
            let c = cols[k].to_usize() * m;
            let xr = &x[c..c + m];
            for j in 0..m {
                yr[j] += a * xr[j];
            }
        }
        if let Some(b) = finish {
            let br = &b[i * m..i * m + m];
            for j in 0..m {
                yr[j] = br[j] - yr[j];
            }
        }
    }
}

/// `y_own := A_leaf x` (or `b_own - A_leaf x`) for one leaf, given the
/// gathered halo.
fn leaf_apply(a: &DistMatrix, leaf: usize, m: usize, x_own: &[f64], halo: &[f64], y_own: &mut [f64], b_own: Option<&[f64]>) {
    let blk = &a.blocks()[leaf];
    let plan = a.plan().leaf(leaf);
    let fin = if blk.offdiag.is_empty() { b_own } else { None };
    with_block!(&blk.diag, |rp, cols, vals| with_m!(m, M => csr_rows::<M, _, _>(
        m, rp, cols, vals, x_own, y_own, true, fin
    )));
    off_apply(a, leaf, m, halo, y_own, false, b_own);
    debug_assert_eq!(plan.imports.len(), blk.offdiag.len());
}

/// Adds (or, with `overwrite`, stores) the off-diagonal block products.
fn off_apply(a: &DistMatrix, leaf: usize, m: usize, halo: &[f64], y_own: &mut [f64], overwrite: bool, b_own: Option<&[f64]>) {
    let blk = &a.blocks()[leaf];
    let plan = a.plan().leaf(leaf);
    let nblk = blk.offdiag.len();
    for (k, o) in blk.offdiag.iter().enumerate() {
        let imp = &plan.imports[k];
        let h = &halo[imp.offset * m..(imp.offset + imp.rows.len()) * m];
        let fin = if k + 1 == nblk { b_own } else { None };
        let ow = overwrite && k == 0;
        with_block!(&o.block, |rp, cols, vals| with_m!(m, M => csr_rows::<M, _, _>(
            m, rp, cols, vals, h, y_own, ow, fin
        )));
    }
}

fn check_apply(a: &DistMatrix, team: &Team, x: &BlockVector, y: &BlockVector) -> Result<()> {
    if a.topology() != team.topology() {
        return Err(Error::InvalidArgument(format!(
            "matrix segmented for {}, team is {}",
            a.topology(),
            team.topology()
        )));
    }
    if x.nrows() != a.ncols() || y.nrows() != a.nrows() || x.nrhs() != y.nrhs() {
        return Err(Error::shape(format_args!(
            "{}x{} operator with x {}x{} and y {}x{}",
            a.nrows(),
            a.ncols(),
            x.nrows(),
            x.nrhs(),
            y.nrows(),
            y.nrhs()
        )));
    }
    x.require_initialized()
}

/// `y := A x` for all right-hand sides at once.
pub fn spmv(team: &Team, a: &DistMatrix, x: &BlockVector, y: &mut BlockVector) -> Result<()> {
    check_apply(a, team, x, y)?;
    let m = x.nrhs();
    if x.is_zero() {
        y.set_zero();
        team.counters().record("spmv", skip(1, 1));
        return Ok(());
    }
    let xs = x.as_slice();
    let dst = SharedRows::new(y.data_mut_raw(), m);
    team.spmd(|w| {
        let leaf = w.leaf();
        let mut halo = Vec::new();
        a.plan().gather(leaf, m, &mut halo, |g| &xs[g * m..(g + 1) * m]);
        let x_own = rows_of(xs, &a.col_partition().leaf_range(leaf), m);
        // SAFETY: each leaf writes only its own row range of y.
        let y_own = unsafe { dst.rows_mut(a.row_partition().leaf_range(leaf)) };
        leaf_apply(a, leaf, m, x_own, &halo, y_own, None);
    });
    y.mark_written();
    team.counters().record("spmv", pass(2, 1, 2 * (a.nnz() * m) as u64));
    Ok(())
}

/// `r := b - A x` in one pass over the matrix.
pub fn residual(team: &Team, a: &DistMatrix, x: &BlockVector, b: &BlockVector, r: &mut BlockVector) -> Result<()> {
    check_apply(a, team, x, r)?;
    b.check_same_shape(r)?;
    b.require_initialized()?;
    let m = x.nrhs();
    if x.is_zero() {
        crate::blas::copy(team, b, r)?;
        team.counters().record("residual", skip(1, 1));
        return Ok(());
    }
    let (xs, bs) = (x.as_slice(), b.as_slice());
    let dst = SharedRows::new(r.data_mut_raw(), m);
    team.spmd(|w| {
        let leaf = w.leaf();
        let mut halo = Vec::new();
        a.plan().gather(leaf, m, &mut halo, |g| &xs[g * m..(g + 1) * m]);
        let rows = a.row_partition().leaf_range(leaf);
        let x_own = rows_of(xs, &a.col_partition().leaf_range(leaf), m);
        let r_own = unsafe { dst.rows_mut(rows.clone()) };
        leaf_apply(a, leaf, m, x_own, &halo, r_own, Some(rows_of(bs, &rows, m)));
    });
    r.mark_written();
    team.counters().record("residual", pass(3, 1, 2 * (a.nnz() * m + a.nrows() * m) as u64));
    Ok(())
}

/// Diagonal of a square operator as an `n x 1` block vector.
pub fn extract_diag(a: &DistMatrix) -> Result<BlockVector> {
    let d = a.diagonal()?;
    BlockVector::from_interleaved(d.len(), 1, d.to_vec())
}

/// Ordering of a Gauss-Seidel sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepDirection {
    Forward,
    Backward,
    Symmetric,
}

impl fmt::Display for SweepDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepDirection::Forward => "forward",
            SweepDirection::Backward => "backward",
            SweepDirection::Symmetric => "symmetric",
        })
    }
}

impl FromStr for SweepDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(SweepDirection::Forward),
            "backward" => Ok(SweepDirection::Backward),
            "symmetric" => Ok(SweepDirection::Symmetric),
            _ => Err(Error::InvalidArgument(format!("unknown sweep direction '{s}'"))),
        }
    }
}

fn check_sweep(team: &Team, a: &DistMatrix, b: &BlockVector, x: &BlockVector) -> Result<()> {
    check_apply(a, team, b, x)?;
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument("relaxation needs a square operator".into()));
    }
    if x.nrhs() != b.nrhs() {
        return Err(Error::shape(format_args!("x has {} columns, b {}", x.nrhs(), b.nrhs())));
    }
    Ok(())
}

/// Hybrid Gauss-Seidel: true Gauss-Seidel order inside each leaf's diagonal
/// block, couplings to other leaves taken from the iterate before the sweep.
/// `Symmetric` is a forward sweep followed by a backward sweep.
pub fn sgs_sweep(team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector, direction: SweepDirection) -> Result<()> {
    match direction {
        SweepDirection::Symmetric => {
            gs_one(team, a, b, x, true)?;
            gs_one(team, a, b, x, false)
        }
        SweepDirection::Forward => gs_one(team, a, b, x, true),
        SweepDirection::Backward => gs_one(team, a, b, x, false),
    }
}

fn gs_one(team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector, forward: bool) -> Result<()> {
    check_sweep(team, a, b, x)?;
    let diag = a.diagonal()?;
    let m = x.nrhs();
    let x_zero = x.is_zero();
    let bs = b.as_slice();
    let sh = SharedRows::new(x.data_mut_raw(), m);
    team.spmd(|w| {
        let leaf = w.leaf();
        let rows = a.row_partition().leaf_range(leaf);
        let blk = &a.blocks()[leaf];
        let mut off = Vec::new();
        if !x_zero && !blk.offdiag.is_empty() {
            let mut halo = Vec::new();
            // SAFETY: peers do not write before the barrier below.
            a.plan().gather(leaf, m, &mut halo, |g| unsafe { sh.rows(g..g + 1) });
            off = vec![0.0; rows.len() * m];
            off_apply(a, leaf, m, &halo, &mut off, true, None);
        }
        w.barrier(Scope::Team);
        let x_own = unsafe { sh.rows_mut(rows.clone()) };
        let d = &diag[rows.clone()];
        let b_own = rows_of(bs, &rows, m);
        with_block!(&blk.diag, |rp, cols, vals| with_m!(m, M => gs_rows::<M, _, _>(
            m, rp, cols, vals, d, b_own, &off, x_own, forward
        )));
    });
    x.mark_written();
    let c = if x_zero {
        skip(2, 1)
    } else {
        pass(2, 1, 2 * (a.nnz() * m) as u64)
    };
    team.counters().record("sgs", c);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn gs_rows<const M: usize, I: ColIndex, V: StoredValue>(
    m: usize,
    rp: &[usize],
    cols: &[I],
    vals: &[V],
    d: &[f64],
    b: &[f64],
    off: &[f64],
    x: &mut [f64],
    forward: bool,
) {
    let m = eff::<M>(m);
    let n = d.len();
    let mut t = vec![0.0; m];
    let t = &mut t[..m];
    for step in 0..n {
        let i = if forward { step } else { n - 1 - step };
        t.copy_from_slice(&b[i * m..i * m + m]);
        if !off.is_empty() {
            for j in 0..m {
                t[j] -= off[i * m + j];
            }
        }
        for k in rp[i]..rp[i + 1] {
            let c = cols[k].to_usize();
            if c == i {
                continue;
            }
            let a = vals[k].widen();
            let xr = &x[c * m..c * m + m];
            for j in 0..m {
                t[j] -= a * xr[j];
            }
        }
        let di = d[i];
        let xi = &mut x[i * m..i * m + m];
        for j in 0..m {
            xi[j] = t[j] / di;
        }
    }
}

/// Weighted Jacobi: `x := x + weight * D^-1 (b - A x)`.
pub fn jacobi_sweep(team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector, weight: f64) -> Result<()> {
    check_sweep(team, a, b, x)?;
    let diag = a.diagonal()?;
    let m = x.nrhs();
    let x_zero = x.is_zero();
    if weight == 0.0 {
        team.counters().record("jacobi", skip(0, 0));
        return Ok(());
    }
    let bs = b.as_slice();
    let sh = SharedRows::new(x.data_mut_raw(), m);
    team.spmd(|w| {
        let leaf = w.leaf();
        let rows = a.row_partition().leaf_range(leaf);
        let mut r = Vec::new();
        if !x_zero {
            let mut halo = Vec::new();
            a.plan().gather(leaf, m, &mut halo, |g| unsafe { sh.rows(g..g + 1) });
            // SAFETY: own rows are only written after the barrier.
            let old = unsafe { sh.rows(rows.clone()) }.to_vec();
            r = vec![0.0; rows.len() * m];
            leaf_apply(a, leaf, m, &old, &halo, &mut r, Some(rows_of(bs, &rows, m)));
        }
        w.barrier(Scope::Team);
        let x_own = unsafe { sh.rows_mut(rows.clone()) };
        let b_own = rows_of(bs, &rows, m);
        for (li, i) in rows.clone().enumerate() {
            let di = diag[i];
            let xr = &mut x_own[li * m..li * m + m];
            if x_zero {
                for j in 0..m {
                    xr[j] = weight * (b_own[li * m + j] / di);
                }
            } else {
                for j in 0..m {
                    xr[j] += weight * (r[li * m + j] / di);
                }
            }
        }
    });
    x.mark_written();
    let c = if x_zero {
        skip(2, 1)
    } else {
        pass(3, 1, 2 * (a.nnz() * m) as u64 + 4 * (a.nrows() * m) as u64)
    };
    team.counters().record("jacobi", c);
    Ok(())
}

/// `y := c1 * y + c2 * D^-1 r` with `D` the operator diagonal, or the
/// identity when `diag` is `None`. `c1 = 0` ignores the old `y`.
pub fn scaled_update(team: &Team, c1: f64, y: &mut BlockVector, c2: f64, diag: Option<&[f64]>, r: &BlockVector) -> Result<()> {
    r.check_same_shape(y)?;
    r.require_initialized()?;
    if c1 != 0.0 {
        y.require_initialized()?;
    }
    if let Some(d) = diag {
        if d.len() != r.nrows() {
            return Err(Error::shape(format_args!("{} diagonal entries for {} rows", d.len(), r.nrows())));
        }
    }
    let m = r.nrhs();
    let rs = r.as_slice();
    let dst = SharedRows::new(y.data_mut_raw(), m);
    crate::blas::for_leaves(team, r.nrows(), |_, rows| {
        let out = unsafe { dst.rows_mut(rows.clone()) };
        let rr = rows_of(rs, &rows, m);
        for (li, i) in rows.clone().enumerate() {
            let inv = diag.map_or(1.0, |d| 1.0 / d[i]);
            let (yr, xr) = (&mut out[li * m..li * m + m], &rr[li * m..li * m + m]);
            if c1 == 0.0 {
                for j in 0..m {
                    yr[j] = c2 * (xr[j] * inv);
                }
            } else {
                for j in 0..m {
                    yr[j] = c1 * yr[j] + c2 * (xr[j] * inv);
                }
            }
        }
    });
    y.mark_written();
    team.counters().record("scaled_update", pass(2, 1, 4 * (r.nrows() * m) as u64));
    Ok(())
}
