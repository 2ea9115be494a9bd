//! Level-1 kernels over block vectors, including the fused kernels of the
//! merged Krylov formulations.
//!
//! Every kernel is collective over a [`Team`]: each worker handles the rows
//! of its leaf in the balanced partition, and dot products are combined in
//! the fixed staged order of [`staged_sum`].

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::{BlockVector, Partition, RhsScalars};
use crate::parallel::{staged_sum, SharedRows, Team};
use crate::stats::{pass, skip};

/// Expands `$body` once per supported RHS count with `$M` bound to it as a
/// constant; other counts use `$M = 0` (runtime length).
macro_rules! with_m {
    ($m:expr, $M:ident => $body:expr) => {
        match $m {
            1 => {
                const $M: usize = 1;
                $body
            }
            2 => {
                const $M: usize = 2;
                $body
            }
            4 => {
                const $M: usize = 4;
                $body
            }
            8 => {
                const $M: usize = 8;
                $body
            }
            16 => {
                const $M: usize = 16;
                $body
            }
            32 => {
                const $M: usize = 32;
                $body
            }
            64 => {
                const $M: usize = 64;
                $body
            }
            _ => {
                const $M: usize = 0;
                $body
            }
        }
    };
}
pub(crate) use with_m;

/// RHS counts with a specialized kernel instantiation.
pub const SPECIALIZED_NRHS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

#[inline(always)]
pub(crate) const fn eff<const M: usize>(m: usize) -> usize {
    if M == 0 {
        m
    } else {
        M
    }
}

#[inline(always)]
pub(crate) fn rows_of<'a>(v: &'a [f64], r: &Range<usize>, m: usize) -> &'a [f64] {
    &v[r.start * m..r.end * m]
}

/// Runs `f(leaf, rows)` on every worker over the balanced split of `n`.
pub(crate) fn for_leaves<R: Send>(team: &Team, n: usize, f: impl Fn(usize, Range<usize>) -> R + Sync) -> Vec<R> {
    let part = Partition::balanced(n, team.topology());
    team.spmd(|w| f(w.leaf(), part.leaf_range(w.leaf())))
}

fn check_len(s: &RhsScalars, m: usize) -> Result<()> {
    if s.len() != m {
        return Err(Error::shape(format_args!("{} coefficients for {m} right-hand sides", s.len())));
    }
    Ok(())
}

fn work(v: &BlockVector) -> u64 {
    (v.nrows() * v.nrhs()) as u64
}

fn axpby_rows<const M: usize>(m: usize, a: &[f64], x: &[f64], b: &[f64], y: &mut [f64]) {
    let m = eff::<M>(m);
    let (a, b) = (&a[..m], &b[..m]);
    for (xr, yr) in x.chunks_exact(m).zip(y.chunks_exact_mut(m)) {
        for j in 0..m {
            yr[j] = a[j] * xr[j] + b[j] * yr[j];
        }
    }
}

fn scale_rows<const M: usize>(m: usize, a: &[f64], x: &[f64], y: &mut [f64]) {
    let m = eff::<M>(m);
    let a = &a[..m];
    for (xr, yr) in x.chunks_exact(m).zip(y.chunks_exact_mut(m)) {
        for j in 0..m {
            yr[j] = a[j] * xr[j];
        }
    }
}

fn scale_in_place<const M: usize>(m: usize, b: &[f64], y: &mut [f64]) {
    let m = eff::<M>(m);
    let b = &b[..m];
    for yr in y.chunks_exact_mut(m) {
        for j in 0..m {
            yr[j] *= b[j];
        }
    }
}

fn dot_rows<const M: usize>(m: usize, x: &[f64], y: &[f64], acc: &mut [f64]) {
    let m = eff::<M>(m);
    let acc = &mut acc[..m];
    for (xr, yr) in x.chunks_exact(m).zip(y.chunks_exact(m)) {
        for j in 0..m {
            acc[j] += xr[j] * yr[j];
        }
    }
}

/// `y := x` (values and flags).
pub fn copy(team: &Team, x: &BlockVector, y: &mut BlockVector) -> Result<()> {
    x.check_same_shape(y)?;
    x.require_initialized()?;
    if x.is_zero() {
        y.set_zero();
        team.counters().record("copy", skip(1, 1));
        return Ok(());
    }
    let m = x.nrhs();
    let src = x.as_slice();
    let dst = SharedRows::new(y.data_mut_raw(), m);
    for_leaves(team, x.nrows(), |_, r| {
        // SAFETY: leaf row ranges are disjoint.
        let out = unsafe { dst.rows_mut(r.clone()) };
        out.copy_from_slice(rows_of(src, &r, m));
    });
    y.mark_written();
    team.counters().record("copy", pass(1, 1, 0));
    Ok(())
}

/// `y := a*x + b*y` column-wise.
///
/// A zero-flagged `x` (or `a = 0`) is not read; `b = 0` means the old `y`
/// is ignored rather than multiplied.
pub fn axpby(team: &Team, a: &RhsScalars, x: &BlockVector, b: &RhsScalars, y: &mut BlockVector) -> Result<()> {
    x.check_same_shape(y)?;
    let m = x.nrhs();
    check_len(a, m)?;
    check_len(b, m)?;
    let x_absent = a.all(0.0) || x.is_zero();
    if !x_absent {
        x.require_initialized()?;
    }
    let y_ignored = b.all(0.0) || y.is_zero();
    if !y_ignored {
        y.require_initialized()?;
    }
    let counters = team.counters();
    match (x_absent, y_ignored) {
        (true, true) => {
            y.set_zero();
            counters.record("axpby", skip(0, 1));
        }
        (true, false) => {
            if b.all(1.0) {
                counters.record("axpby", skip(0, 0));
            } else {
                let dst = SharedRows::new(y.data_mut_raw(), m);
                for_leaves(team, x.nrows(), |_, r| {
                    let out = unsafe { dst.rows_mut(r) };
                    with_m!(m, M => scale_in_place::<M>(m, b, out));
                });
                y.mark_written();
                counters.record("axpby", pass(1, 1, work(x)));
            }
        }
        (false, true) => {
            let src = x.as_slice();
            let dst = SharedRows::new(y.data_mut_raw(), m);
            for_leaves(team, x.nrows(), |_, r| {
                let out = unsafe { dst.rows_mut(r.clone()) };
                with_m!(m, M => scale_rows::<M>(m, a, rows_of(src, &r, m), out));
            });
            y.mark_written();
            counters.record("axpby", pass(1, 1, work(x)));
        }
        (false, false) => {
            let src = x.as_slice();
            let dst = SharedRows::new(y.data_mut_raw(), m);
            for_leaves(team, x.nrows(), |_, r| {
                let out = unsafe { dst.rows_mut(r.clone()) };
                with_m!(m, M => axpby_rows::<M>(m, a, rows_of(src, &r, m), b, out));
            });
            y.mark_written();
            counters.record("axpby", pass(2, 1, 3 * work(x)));
        }
    }
    Ok(())
}

/// `w := a*x + b*y` into a third vector.
pub fn waxpby(
    team: &Team,
    a: &RhsScalars,
    x: &BlockVector,
    b: &RhsScalars,
    y: &BlockVector,
    w: &mut BlockVector,
) -> Result<()> {
    x.check_same_shape(y)?;
    x.check_same_shape(w)?;
    let m = x.nrhs();
    check_len(a, m)?;
    check_len(b, m)?;
    x.require_initialized()?;
    y.require_initialized()?;
    if x.is_zero() && y.is_zero() {
        w.set_zero();
        team.counters().record("waxpby", skip(0, 1));
        return Ok(());
    }
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let dst = SharedRows::new(w.data_mut_raw(), m);
    for_leaves(team, x.nrows(), |_, r| {
        let out = unsafe { dst.rows_mut(r.clone()) };
        with_m!(m, M => waxpby_rows::<M>(m, a, rows_of(xs, &r, m), b, rows_of(ys, &r, m), out));
    });
    w.mark_written();
    team.counters().record("waxpby", pass(2, 1, 3 * work(x)));
    Ok(())
}

fn waxpby_rows<const M: usize>(m: usize, a: &[f64], x: &[f64], b: &[f64], y: &[f64], w: &mut [f64]) {
    let m = eff::<M>(m);
    let (a, b) = (&a[..m], &b[..m]);
    for ((xr, yr), wr) in x.chunks_exact(m).zip(y.chunks_exact(m)).zip(w.chunks_exact_mut(m)) {
        for j in 0..m {
            wr[j] = a[j] * xr[j] + b[j] * yr[j];
        }
    }
}

/// Column-wise inner products `(x_j, y_j)`.
pub fn dot(team: &Team, x: &BlockVector, y: &BlockVector) -> Result<RhsScalars> {
    Ok(multi_dot(team, &[(x, y)])?.pop().unwrap())
}

/// Column-wise Euclidean norms.
pub fn norm2(team: &Team, x: &BlockVector) -> Result<RhsScalars> {
    Ok(dot(team, x, x)?.map(f64::sqrt))
}

/// Several inner products computed in one pass and one reduction. Each
/// result is bitwise equal to the corresponding [`dot`].
pub fn multi_dot(team: &Team, pairs: &[(&BlockVector, &BlockVector)]) -> Result<Vec<RhsScalars>> {
    let first = match pairs.first() {
        Some(p) => p.0,
        None => return Ok(Vec::new()),
    };
    let m = first.nrhs();
    let mut live = Vec::new();
    let mut reads = 0u64;
    for (k, (x, y)) in pairs.iter().enumerate() {
        first.check_same_shape(x)?;
        first.check_same_shape(y)?;
        x.require_initialized()?;
        y.require_initialized()?;
        if !(x.is_zero() || y.is_zero()) {
            live.push(k);
            reads += if std::ptr::eq(*x, *y) { 1 } else { 2 };
        }
    }
    let kinds = pairs.len();
    if live.is_empty() {
        team.counters().record("dot", skip(0, 0));
        return Ok(vec![RhsScalars::zeros(m); kinds]);
    }
    let partials = for_leaves(team, first.nrows(), |_, r| {
        let mut acc = vec![0.0; live.len() * m];
        for (slot, &k) in live.iter().enumerate() {
            let (x, y) = pairs[k];
            let acc = &mut acc[slot * m..(slot + 1) * m];
            with_m!(m, M => dot_rows::<M>(m, rows_of(x.as_slice(), &r, m), rows_of(y.as_slice(), &r, m), acc));
        }
        acc
    });
    let total = staged_sum(&team.topology(), &partials);
    let mut out = vec![RhsScalars::zeros(m); kinds];
    for (slot, &k) in live.iter().enumerate() {
        out[k] = RhsScalars(total[slot * m..(slot + 1) * m].to_vec());
    }
    team.counters().record("dot", pass(reads, 0, 2 * live.len() as u64 * work(first)));
    Ok(out)
}

/// The closed set of fused kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusedKernel {
    /// `y := a*x + b*y`, returns `(y, y)`.
    UpdateSelfDot,
    /// `w := a*x + b*y`, returns `(w, u)` and `(w, w)`.
    UpdateTwoDots,
    /// Returns `(x, y)` and `(x, x)`.
    DotPair,
    /// `z := x + b*(z + c*y)`: two updates of `z` in one pass.
    DirectionUpdate,
    /// `z := (z + a*x) + b*y`: two updates of `z` in one pass.
    DoubleAxpy,
}

impl FusedKernel {
    pub const ALL: [FusedKernel; 5] = [
        FusedKernel::UpdateSelfDot,
        FusedKernel::UpdateTwoDots,
        FusedKernel::DotPair,
        FusedKernel::DirectionUpdate,
        FusedKernel::DoubleAxpy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusedKernel::UpdateSelfDot => "update_self_dot",
            FusedKernel::UpdateTwoDots => "update_two_dots",
            FusedKernel::DotPair => "dot_pair",
            FusedKernel::DirectionUpdate => "direction_update",
            FusedKernel::DoubleAxpy => "double_axpy",
        }
    }

    /// (input vectors, scalars, writes an output)
    fn arity(self) -> (usize, usize, bool) {
        match self {
            FusedKernel::UpdateSelfDot => (1, 2, true),
            FusedKernel::UpdateTwoDots => (3, 2, true),
            FusedKernel::DotPair => (2, 0, false),
            FusedKernel::DirectionUpdate => (2, 2, true),
            FusedKernel::DoubleAxpy => (2, 2, true),
        }
    }
}

impl fmt::Display for FusedKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusedKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusedKernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fused kernel '{s}'")))
    }
}

/// Operands of [`merged_update_dot`]; the meaning of each slot follows the
/// kernel's formula in [`FusedKernel`].
pub struct FusedOperands<'a> {
    pub inputs: Vec<&'a BlockVector>,
    pub scalars: Vec<&'a RhsScalars>,
    pub output: Option<&'a mut BlockVector>,
}

/// Dispatches one fused kernel by descriptor.
///
/// Operand order: `UpdateSelfDot [x] [a, b] -> y`; `UpdateTwoDots [x, y, u]
/// [a, b] -> w`; `DotPair [x, y]`; `DirectionUpdate [x, y] [b, c] -> z`;
/// `DoubleAxpy [x, y] [a, b] -> z`.
pub fn merged_update_dot(team: &Team, kernel: FusedKernel, ops: FusedOperands<'_>) -> Result<Vec<RhsScalars>> {
    let (ni, ns, out) = kernel.arity();
    if ops.inputs.len() != ni || ops.scalars.len() != ns || ops.output.is_some() != out {
        return Err(Error::InvalidArgument(format!(
            "{kernel} takes {ni} inputs, {ns} scalars{}",
            if out { " and an output" } else { "" }
        )));
    }
    let (i, s) = (&ops.inputs, &ops.scalars);
    match kernel {
        FusedKernel::UpdateSelfDot => Ok(vec![update_self_dot(team, s[0], i[0], s[1], ops.output.unwrap())?]),
        FusedKernel::UpdateTwoDots => {
            let (wu, ww) = update_two_dots(team, s[0], i[0], s[1], i[1], i[2], ops.output.unwrap())?;
            Ok(vec![wu, ww])
        }
        FusedKernel::DotPair => {
            let (xy, xx) = dot_pair(team, i[0], i[1])?;
            Ok(vec![xy, xx])
        }
        FusedKernel::DirectionUpdate => {
            direction_update(team, i[0], s[0], s[1], i[1], ops.output.unwrap())?;
            Ok(Vec::new())
        }
        FusedKernel::DoubleAxpy => {
            double_axpy(team, s[0], i[0], s[1], i[1], ops.output.unwrap())?;
            Ok(Vec::new())
        }
    }
}

fn check_initialized(vs: &[&BlockVector]) -> Result<()> {
    for v in vs {
        v.require_initialized()?;
    }
    Ok(())
}

/// `y := a*x + b*y`, then `(y, y)`, in one pass.
pub fn update_self_dot(
    team: &Team,
    a: &RhsScalars,
    x: &BlockVector,
    b: &RhsScalars,
    y: &mut BlockVector,
) -> Result<RhsScalars> {
    x.check_same_shape(y)?;
    let m = x.nrhs();
    check_len(a, m)?;
    check_len(b, m)?;
    check_initialized(&[x, y])?;
    let xs = x.as_slice();
    let dst = SharedRows::new(y.data_mut_raw(), m);
    let partials = for_leaves(team, x.nrows(), |_, r| {
        let out = unsafe { dst.rows_mut(r.clone()) };
        let mut acc = vec![0.0; m];
        with_m!(m, M => update_self_dot_rows::<M>(m, a, rows_of(xs, &r, m), b, out, &mut acc));
        acc
    });
    y.mark_written();
    team.counters().record("update_self_dot", pass(2, 1, 5 * work(x)));
    Ok(RhsScalars(staged_sum(&team.topology(), &partials)))
}

fn update_self_dot_rows<const M: usize>(m: usize, a: &[f64], x: &[f64], b: &[f64], y: &mut [f64], acc: &mut [f64]) {
    let m = eff::<M>(m);
    let (a, b, acc) = (&a[..m], &b[..m], &mut acc[..m]);
    for (xr, yr) in x.chunks_exact(m).zip(y.chunks_exact_mut(m)) {
        for j in 0..m {
            let v = a[j] * xr[j] + b[j] * yr[j];
            yr[j] = v;
            acc[j] += v * v;
        }
    }
}

/// `w := a*x + b*y`, then `(w, u)` and `(w, w)`, in one pass.
pub fn update_two_dots(
    team: &Team,
    a: &RhsScalars,
    x: &BlockVector,
    b: &RhsScalars,
    y: &BlockVector,
    u: &BlockVector,
    w: &mut BlockVector,
) -> Result<(RhsScalars, RhsScalars)> {
    for v in [y, u] {
        x.check_same_shape(v)?;
    }
    x.check_same_shape(w)?;
    let m = x.nrhs();
    check_len(a, m)?;
    check_len(b, m)?;
    check_initialized(&[x, y, u])?;
    let (xs, ys, us) = (x.as_slice(), y.as_slice(), u.as_slice());
    let dst = SharedRows::new(w.data_mut_raw(), m);
    let partials = for_leaves(team, x.nrows(), |_, r| {
        let out = unsafe { dst.rows_mut(r.clone()) };
        let mut acc = vec![0.0; 2 * m];
        with_m!(m, M => update_two_dots_rows::<M>(
            m,
            a,
            rows_of(xs, &r, m),
            b,
            rows_of(ys, &r, m),
            rows_of(us, &r, m),
            out,
            &mut acc
        ));
        acc
    });
    w.mark_written();
    team.counters().record("update_two_dots", pass(3, 1, 7 * work(x)));
    let total = staged_sum(&team.topology(), &partials);
    Ok((RhsScalars(total[..m].to_vec()), RhsScalars(total[m..].to_vec())))
}

#[allow(clippy::too_many_arguments)]
fn update_two_dots_rows<const M: usize>(
    m: usize,
    a: &[f64],
    x: &[f64],
    b: &[f64],
    y: &[f64],
    u: &[f64],
    w: &mut [f64],
    acc: &mut [f64],
) {
    let m = eff::<M>(m);
    let (a, b) = (&a[..m], &b[..m]);
    let (wu, ww) = acc.split_at_mut(m);
    let (wu, ww) = (&mut wu[..m], &mut ww[..m]);
    for (((xr, yr), ur), wr) in x
        .chunks_exact(m)
        .zip(y.chunks_exact(m))
        .zip(u.chunks_exact(m))
        .zip(w.chunks_exact_mut(m))
    {
        for j in 0..m {
            let v = a[j] * xr[j] + b[j] * yr[j];
            wr[j] = v;
            wu[j] += v * ur[j];
            ww[j] += v * v;
        }
    }
}

/// `(x, y)` and `(x, x)` in one pass.
pub fn dot_pair(team: &Team, x: &BlockVector, y: &BlockVector) -> Result<(RhsScalars, RhsScalars)> {
    x.check_same_shape(y)?;
    check_initialized(&[x, y])?;
    let m = x.nrhs();
    if x.is_zero() {
        team.counters().record("dot_pair", skip(0, 0));
        return Ok((RhsScalars::zeros(m), RhsScalars::zeros(m)));
    }
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let partials = for_leaves(team, x.nrows(), |_, r| {
        let mut acc = vec![0.0; 2 * m];
        with_m!(m, M => dot_pair_rows::<M>(m, rows_of(xs, &r, m), rows_of(ys, &r, m), &mut acc));
        acc
    });
    team.counters().record("dot_pair", pass(2, 0, 4 * work(x)));
    let total = staged_sum(&team.topology(), &partials);
    Ok((RhsScalars(total[..m].to_vec()), RhsScalars(total[m..].to_vec())))
}

fn dot_pair_rows<const M: usize>(m: usize, x: &[f64], y: &[f64], acc: &mut [f64]) {
    let m = eff::<M>(m);
    let (xy, xx) = acc.split_at_mut(m);
    let (xy, xx) = (&mut xy[..m], &mut xx[..m]);
    for (xr, yr) in x.chunks_exact(m).zip(y.chunks_exact(m)) {
        for j in 0..m {
            xy[j] += xr[j] * yr[j];
            xx[j] += xr[j] * xr[j];
        }
    }
}

/// `z := x + b*(z + c*y)` in one pass.
pub fn direction_update(
    team: &Team,
    x: &BlockVector,
    b: &RhsScalars,
    c: &RhsScalars,
    y: &BlockVector,
    z: &mut BlockVector,
) -> Result<()> {
    x.check_same_shape(y)?;
    x.check_same_shape(z)?;
    let m = x.nrhs();
    check_len(b, m)?;
    check_len(c, m)?;
    check_initialized(&[x, y, z])?;
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let dst = SharedRows::new(z.data_mut_raw(), m);
    for_leaves(team, x.nrows(), |_, r| {
        let out = unsafe { dst.rows_mut(r.clone()) };
        with_m!(m, M => direction_rows::<M>(m, rows_of(xs, &r, m), b, c, rows_of(ys, &r, m), out));
    });
    z.mark_written();
    team.counters().record("direction_update", pass(3, 1, 4 * work(x)));
    Ok(())
}

fn direction_rows<const M: usize>(m: usize, x: &[f64], b: &[f64], c: &[f64], y: &[f64], z: &mut [f64]) {
    let m = eff::<M>(m);
    let (b, c) = (&b[..m], &c[..m]);
    for ((xr, yr), zr) in x.chunks_exact(m).zip(y.chunks_exact(m)).zip(z.chunks_exact_mut(m)) {
        for j in 0..m {
            zr[j] = xr[j] + b[j] * (zr[j] + c[j] * yr[j]);
        }
    }
}

/// `z := (z + a*x) + b*y` in one pass.
pub fn double_axpy(
    team: &Team,
    a: &RhsScalars,
    x: &BlockVector,
    b: &RhsScalars,
    y: &BlockVector,
    z: &mut BlockVector,
) -> Result<()> {
    x.check_same_shape(y)?;
    x.check_same_shape(z)?;
    let m = x.nrhs();
    check_len(a, m)?;
    check_len(b, m)?;
    check_initialized(&[x, y, z])?;
    let (xs, ys) = (x.as_slice(), y.as_slice());
    let dst = SharedRows::new(z.data_mut_raw(), m);
    for_leaves(team, x.nrows(), |_, r| {
        let out = unsafe { dst.rows_mut(r.clone()) };
        with_m!(m, M => double_axpy_rows::<M>(m, a, rows_of(xs, &r, m), b, rows_of(ys, &r, m), out));
    });
    z.mark_written();
    team.counters().record("double_axpy", pass(3, 1, 4 * work(x)));
    Ok(())
}

fn double_axpy_rows<const M: usize>(m: usize, a: &[f64], x: &[f64], b: &[f64], y: &[f64], z: &mut [f64]) {
    let m = eff::<M>(m);
    let (a, b) = (&a[..m], &b[..m]);
    for ((xr, yr), zr) in x.chunks_exact(m).zip(y.chunks_exact(m)).zip(z.chunks_exact_mut(m)) {
        for j in 0..m {
            zr[j] = (zr[j] + a[j] * xr[j]) + b[j] * yr[j];
        }
    }
}
