#![allow(dead_code)]

use mrhs::io::gen_poisson3d;
use mrhs::matrix::{BlockVector, CsrBlock};
use mrhs::params::ParamTree;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_block(n: usize, m: usize, seed: u64) -> BlockVector {
    let mut r = rng(seed);
    BlockVector::from_interleaved(n, m, (0..n * m).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Symmetric sparse off-diagonals with a diagonal `|row sum| * [1.5, 3)`.
pub fn random_spd(n: usize, density: f64, seed: u64) -> CsrBlock {
    let mut r = rng(seed);
    let mut t = Vec::new();
    let mut sum = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..i {
            if r.gen_bool(density) {
                let v: f64 = r.gen_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
                sum[i] += v.abs();
                sum[j] += v.abs();
            }
        }
    }
    for (i, s) in sum.into_iter().enumerate() {
        t.push((i, i, s * r.gen_range(1.5..3.0) + 0.5));
    }
    CsrBlock::from_triplets(n, n, &t).unwrap()
}

pub fn random_nonsym(n: usize, density: f64, seed: u64) -> CsrBlock {
    let mut r = rng(seed);
    let mut t = Vec::new();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i && r.gen_bool(density) {
                let v: f64 = r.gen_range(-1.0..1.0);
                t.push((i, j, v));
                s += v.abs();
            }
        }
        t.push((i, i, s * r.gen_range(1.5..3.0) + 0.5));
    }
    CsrBlock::from_triplets(n, n, &t).unwrap()
}

/// 2D upwind convection-diffusion on a k x k grid (nonsymmetric M-matrix).
pub fn convection_diffusion(k: usize, wind: f64) -> CsrBlock {
    let n = k * k;
    let mut t = Vec::new();
    for y in 0..k {
        for x in 0..k {
            let i = y * k + x;
            t.push((i, i, 4.0 + wind));
            if x > 0 {
                t.push((i, i - 1, -1.0 - wind));
            }
            if x + 1 < k {
                t.push((i, i + 1, -1.0));
            }
            if y > 0 {
                t.push((i, i - k, -1.0));
            }
            if y + 1 < k {
                t.push((i, i + k, -1.0));
            }
        }
    }
    CsrBlock::from_triplets(n, n, &t).unwrap()
}

pub fn poisson(n: usize) -> CsrBlock {
    gen_poisson3d(n, n, n).unwrap()
}

pub fn dense(a: &CsrBlock) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.nrows(), a.ncols(), &a.to_dense())
}

pub fn dense_solve(a: &CsrBlock, b: &BlockVector) -> BlockVector {
    let lu = dense(a).lu();
    let cols: Vec<Vec<f64>> = (0..b.nrhs())
        .map(|j| lu.solve(&DVector::from_vec(b.column(j))).unwrap().as_slice().to_vec())
        .collect();
    BlockVector::from_columns(&cols).unwrap()
}

/// Largest per-column `||x_j - y_j|| / ||y_j||`.
pub fn col_rel_diff(x: &BlockVector, y: &BlockVector) -> f64 {
    (0..x.nrhs())
        .map(|j| {
            let (p, q) = (x.column(j), y.column(j));
            let num = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let den = q.iter().map(|b| b * b).sum::<f64>().sqrt();
            if den > 0.0 {
                num / den
            } else {
                num
            }
        })
        .fold(0.0, f64::max)
}

pub fn tree(pairs: &[(&str, &str, &str)]) -> ParamTree {
    let mut t = ParamTree::new();
    for &(role, k, v) in pairs {
        t.add(role, (k, v)).unwrap();
    }
    t.set_defaults().unwrap();
    t
}

/// The multigrid-preconditioned BiCGStab setup of the usage example, with
/// extra solver entries appended.
pub fn amg_bicgstab(extra: &[(&str, &str)]) -> ParamTree {
    let mut t = ParamTree::new();
    t.add("solver", ("method", "PBiCGStab")).unwrap();
    t.add_map("solver", &[("max_iters", "20")]).unwrap();
    t.add_map(
        "preconditioner",
        &[
            ("method", "MultiGrid"),
            ("max_iters", "1"),
            ("mg_agg_num_levels", "2"),
            ("mg_coarse_matrix_size", "500"),
            ("mg_num_paths", "2"),
        ],
    )
    .unwrap();
    t.add_map("pre_smoother", &[("method", "Chebyshev"), ("polynomial_order", "2")]).unwrap();
    t.add_map("post_smoother", &[("method", "Chebyshev"), ("polynomial_order", "2")]).unwrap();
    for &(k, v) in extra {
        let (role, key) = k.split_once('.').unwrap();
        t.add(role, (key, v)).unwrap();
    }
    t.set_defaults().unwrap();
    t
}
