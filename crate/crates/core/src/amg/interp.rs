use crate::amg::{Splitting, StrengthGraph};
use crate::error::{Error, Result};
use crate::matrix::CsrBlock;

/// Direct interpolation for F points with a strong C neighbour, then
/// multipass interpolation through already interpolated F points.
///
/// Weights: `w_ij = -(a_ij / a_ii) * (sum_{k != i} a_ik) / (sum_{j in J} a_ij)`
/// over the interpolatory set `J`; for later passes the row of `P` is
/// `sum_j w_ij P_j`. Points that no pass reaches give
/// [`Error::SetupDegeneracy`].
pub fn interpolate(a: &CsrBlock, s: &StrengthGraph, split: &Splitting) -> Result<CsrBlock> {
    build(a, s, split).map_err(|missing| Error::SetupDegeneracy {
        count: missing.len(),
        first: missing[0],
    })
}

pub(crate) fn build(a: &CsrBlock, s: &StrengthGraph, split: &Splitting) -> std::result::Result<CsrBlock, Vec<usize>> {
    let n = a.nrows();
    let cidx = split.coarse_index();
    let nc = split.num_coarse();
    // sparse rows of P, filled pass by pass
    let mut rows: Vec<Option<Vec<(usize, f64)>>> = (0..n).map(|i| cidx[i].map(|c| vec![(c, 1.0)])).collect();

    let mut pending: Vec<usize> = (0..n).filter(|&i| cidx[i].is_none()).collect();
    let mut acc = vec![0.0f64; nc];
    let mut seen = vec![false; nc];
    let mut touched: Vec<usize> = Vec::new();
    while !pending.is_empty() {
        let mut done = Vec::new();
        let mut rest = Vec::new();
        for &i in &pending {
            let interp: Vec<usize> = s.row(i).iter().copied().filter(|&j| rows[j].is_some()).collect();
            if interp.is_empty() {
                rest.push(i);
                continue;
            }
            let mut diag = 0.0;
            let mut off_sum = 0.0;
            let mut set_sum = 0.0;
            for (k, v) in a.row(i) {
                if k == i {
                    diag = v;
                } else {
                    off_sum += v;
                    if interp.binary_search(&k).is_ok() {
                        set_sum += v;
                    }
                }
            }
            if diag == 0.0 || set_sum == 0.0 {
                rest.push(i);
                continue;
            }
            let scale = -off_sum / (diag * set_sum);
            for (j, v) in a.row(i) {
                if j == i || interp.binary_search(&j).is_err() {
                    continue;
                }
                let w = v * scale;
                for &(c, pv) in rows[j].as_ref().unwrap() {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += w * pv;
                }
            }
            touched.sort_unstable();
            let row: Vec<(usize, f64)> = touched.iter().map(|&c| (c, acc[c])).collect();
            for &c in &touched {
                acc[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
            done.push((i, row));
        }
        if done.is_empty() {
            return Err(rest);
        }
        for (i, row) in done {
            rows[i] = Some(row);
        }
        pending = rest;
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for r in rows {
        for (c, v) in r.unwrap() {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(CsrBlock::new(n, nc, row_ptr, cols, vals).expect("interpolation rows are sorted").decompress())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amg::{coarsen, strength_graph, CoarsenPass, PointKind};
    use crate::io::gen_poisson3d;

    fn chain(n: usize, neumann: bool) -> CsrBlock {
        let mut t = Vec::new();
        for i in 0..n {
            let end = i == 0 || i + 1 == n;
            t.push((i, i, if neumann && end { 1.0 } else { 2.0 }));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrBlock::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn chain_weights_are_halves() {
        let a = chain(9, false);
        let s = strength_graph(&a, 0.25);
        let split = coarsen(&s, CoarsenPass::Standard);
        let p = interpolate(&a, &s, &split).unwrap();
        assert_eq!((p.nrows(), p.ncols()), (9, 4));
        // interior F point 2 sits between coarse points 0 and 1
        assert_eq!(p.row(2).collect::<Vec<_>>(), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(p.row(3).collect::<Vec<_>>(), vec![(1, 1.0)]);
        // boundary F point 0 only sees coarse point 0, weight 1/2 (Dirichlet)
        assert_eq!(p.row(0).collect::<Vec<_>>(), vec![(0, 0.5)]);
    }

    #[test]
    fn zero_row_sum_gives_unit_row_sums() {
        let a = chain(11, true);
        let s = strength_graph(&a, 0.25);
        for pass in [CoarsenPass::Standard, CoarsenPass::Aggressive { num_paths: 1 }] {
            let split = coarsen(&s, pass);
            let p = interpolate(&a, &s, &split).unwrap();
            for i in 0..11 {
                let sum: f64 = p.row(i).map(|(_, v)| v).sum();
                assert!((sum - 1.0).abs() < 1e-14, "row {i}: {sum}");
            }
        }
    }

    #[test]
    fn poisson_direct_rows_bounded() {
        let a = gen_poisson3d(6, 6, 6).unwrap();
        let s = strength_graph(&a, 0.25);
        let split = coarsen(&s, CoarsenPass::Standard);
        let p = interpolate(&a, &s, &split).unwrap();
        for i in 0..a.nrows() {
            let sum: f64 = p.row(i).map(|(_, v)| v).sum();
            assert!(sum > 0.0 && sum <= 1.0 + 1e-14);
            assert!(p.row(i).all(|(_, v)| v > 0.0));
        }
    }

    #[test]
    fn multipass_reaches_distance_two_points() {
        let a = gen_poisson3d(8, 8, 8).unwrap();
        let s = strength_graph(&a, 0.25);
        let split = coarsen(&s, CoarsenPass::Aggressive { num_paths: 2 });
        let p = interpolate(&a, &s, &split).unwrap();
        let far = (0..a.nrows()).find(|&i| !split.is_c(i) && !s.row(i).iter().any(|&k| split.is_c(k)));
        let far = far.expect("aggressive splitting leaves some F points without C neighbours");
        assert!(p.row_len(far) > 0);
    }

    #[test]
    fn isolated_f_point_is_reported() {
        let a = CsrBlock::identity(3);
        let s = strength_graph(&a, 0.25);
        let split = Splitting::new(vec![PointKind::C, PointKind::F, PointKind::F]);
        match interpolate(&a, &s, &split) {
            Err(Error::SetupDegeneracy { count, first }) => assert_eq!((count, first), (2, 1)),
            other => panic!("{other:?}"),
        }
    }
}
