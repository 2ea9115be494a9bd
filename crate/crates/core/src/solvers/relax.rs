use crate::blas::{axpby, dot};
use crate::blas2::{jacobi_sweep, residual, scaled_update, sgs_sweep, spmv, SweepDirection};
use crate::error::{Error, Result};
use crate::matrix::{BlockVector, DistMatrix, RhsScalars};
use crate::parallel::Team;
use crate::solvers::{bicgstab_solve, BiCGStabVariant, KrylovOptions, Monitor, Preconditioner, SolveStats};

/// Power-iteration steps used by [`estimate_eig_bounds`].
pub const POWER_STEPS: usize = 10;
/// Safety factor applied to the largest-eigenvalue estimate.
pub const LAMBDA_MAX_FACTOR: f64 = 1.1;
/// Ratio between the upper and lower Chebyshev interval ends.
pub const LAMBDA_RATIO: f64 = 30.0;

/// Operator the Chebyshev polynomial is built for: `D^-1 A` or `A` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChebyshevScaling {
    #[default]
    Jacobi,
    None,
}

fn scaling_diag(a: &DistMatrix, scaling: ChebyshevScaling) -> Result<Option<&[f64]>> {
    match scaling {
        ChebyshevScaling::Jacobi => Ok(Some(a.diagonal()?)),
        ChebyshevScaling::None => Ok(None),
    }
}

/// Deterministic start vector with entries spread over [-1, 1).
fn start_vector(n: usize) -> BlockVector {
    let data = (0..n as u64)
        .map(|i| {
            let mut z = i.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 31)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 29;
            (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect();
    BlockVector::from_interleaved(n, 1, data).expect("length matches")
}

/// `(lambda_max / 30, 1.1 * lambda_max)` with `lambda_max` from ten power
/// iterations on the (optionally diagonally scaled) operator.
pub fn estimate_eig_bounds(team: &Team, a: &DistMatrix, scaling: ChebyshevScaling) -> Result<(f64, f64)> {
    let n = a.nrows();
    let diag = scaling_diag(a, scaling)?;
    let mut v = start_vector(n);
    let mut w = BlockVector::uninit(n, 1);
    let mut lambda = 0.0;
    for _ in 0..POWER_STEPS {
        spmv(team, a, &v, &mut w)?;
        if diag.is_some() {
            let av = w.clone();
            scaled_update(team, 0.0, &mut w, 1.0, diag, &av)?;
        }
        let vv = dot(team, &v, &v)?[0];
        let ww = dot(team, &w, &w)?[0];
        if vv == 0.0 || ww == 0.0 {
            break;
        }
        lambda = ww.sqrt() / vv.sqrt();
        let inv = RhsScalars(vec![1.0 / ww.sqrt()]);
        axpby(team, &inv, &w, &RhsScalars(vec![0.0]), &mut v)?;
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument("power iteration found no positive eigenvalue".into()));
    }
    let hi = LAMBDA_MAX_FACTOR * lambda;
    Ok((hi / LAMBDA_RATIO, hi))
}

/// Applies a Chebyshev polynomial of degree `order` for the interval
/// `bounds` to `A x = b`, updating `x`. No inner products are taken.
pub fn chebyshev_apply(
    team: &Team,
    a: &DistMatrix,
    b: &BlockVector,
    x: &mut BlockVector,
    order: usize,
    bounds: (f64, f64),
    scaling: ChebyshevScaling,
) -> Result<()> {
    let (lo, hi) = bounds;
    if order == 0 {
        return Err(Error::InvalidArgument("Chebyshev order must be at least 1".into()));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid Chebyshev interval [{lo}, {hi}]")));
    }
    let diag = scaling_diag(a, scaling)?;
    let (n, m) = (b.nrows(), b.nrhs());
    let theta = 0.5 * (hi + lo);
    let delta = 0.5 * (hi - lo);
    let sigma = theta / delta;
    let mut rho = 1.0 / sigma;
    let ones = RhsScalars::ones(m);

    let mut r = BlockVector::uninit(n, m);
    let mut d = BlockVector::uninit(n, m);
    residual(team, a, x, b, &mut r)?;
    scaled_update(team, 0.0, &mut d, 1.0 / theta, diag, &r)?;
    axpby(team, &ones, &d, &ones, x)?;
    for _ in 1..order {
        residual(team, a, x, b, &mut r)?;
        let rho_new = 1.0 / (2.0 * sigma - rho);
        scaled_update(team, rho_new * rho, &mut d, 2.0 * rho_new / delta, diag, &r)?;
        axpby(team, &ones, &d, &ones, x)?;
        rho = rho_new;
    }
    Ok(())
}

/// A relaxation method with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelaxKind {
    Jacobi { weight: f64 },
    GaussSeidel { direction: SweepDirection },
    Chebyshev { order: usize, scaling: ChebyshevScaling },
    /// Fixed number of unpreconditioned iterations, no convergence test.
    BiCGStab { variant: BiCGStabVariant, merged: bool },
}

/// A relaxation method bound to one operator: `sweeps` applications per
/// call, with Chebyshev bounds estimated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxStep {
    kind: RelaxKind,
    sweeps: usize,
    bounds: Option<(f64, f64)>,
}

impl RelaxStep {
    pub fn new(team: &Team, kind: RelaxKind, sweeps: usize, a: &DistMatrix) -> Result<Self> {
        if sweeps == 0 {
            return Err(Error::InvalidArgument("relaxation needs at least one sweep".into()));
        }
        let bounds = match kind {
            RelaxKind::Jacobi { weight } => {
                if !(weight > 0.0 && weight.is_finite()) {
                    return Err(Error::InvalidArgument(format!("Jacobi weight {weight} must be positive")));
                }
                a.diagonal()?;
                None
            }
            RelaxKind::GaussSeidel { .. } => {
                a.diagonal()?;
                None
            }
            RelaxKind::Chebyshev { scaling, .. } => Some(estimate_eig_bounds(team, a, scaling)?),
            RelaxKind::BiCGStab { .. } => None,
        };
        Ok(RelaxStep { kind, sweeps, bounds })
    }

    /// Chebyshev step with explicitly given bounds.
    pub fn chebyshev_with_bounds(order: usize, scaling: ChebyshevScaling, sweeps: usize, bounds: (f64, f64)) -> Self {
        RelaxStep {
            kind: RelaxKind::Chebyshev { order, scaling },
            sweeps,
            bounds: Some(bounds),
        }
    }

    pub fn kind(&self) -> RelaxKind {
        self.kind
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    /// Improves `x` for `A x = b`; a zero-flagged `x` lets the first sweep
    /// skip the product with `A`.
    pub fn smooth(&self, team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector) -> Result<()> {
        self.smooth_n(team, a, b, x, self.sweeps)
    }

    fn smooth_n(&self, team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector, sweeps: usize) -> Result<()> {
        match self.kind {
            RelaxKind::Jacobi { weight } => {
                for _ in 0..sweeps {
                    jacobi_sweep(team, a, b, x, weight)?;
                }
            }
            RelaxKind::GaussSeidel { direction } => {
                for _ in 0..sweeps {
                    sgs_sweep(team, a, b, x, direction)?;
                }
            }
            RelaxKind::Chebyshev { order, scaling } => {
                let bounds = self.bounds.expect("bounds set at construction");
                for _ in 0..sweeps {
                    chebyshev_apply(team, a, b, x, order, bounds, scaling)?;
                }
            }
            RelaxKind::BiCGStab { variant, merged } => {
                let opts = KrylovOptions {
                    tol: 0.0,
                    max_iters: sweeps,
                    merged,
                };
                bicgstab_solve(team, a, b, x, None, &opts, variant)?;
            }
        }
        Ok(())
    }

    /// Stand-alone iteration: one sweep per iteration until the relative
    /// residual meets `tol`.
    pub fn solve(&self, team: &Team, a: &DistMatrix, b: &BlockVector, x: &mut BlockVector, tol: f64, max_iters: usize) -> Result<SolveStats> {
        let mut mon = Monitor::new(team, a, b, x, tol)?;
        let mut r = BlockVector::uninit(b.nrows(), b.nrhs());
        residual(team, a, x, b, &mut r)?;
        if mon.check_true(&dot(team, &r, &r)?) {
            return mon.finish(x, 0);
        }
        for k in 1..=max_iters {
            self.smooth_n(team, a, b, x, 1)?;
            residual(team, a, x, b, &mut r)?;
            if mon.check_true(&dot(team, &r, &r)?) {
                return mon.finish(x, k);
            }
        }
        mon.finish(x, max_iters)
    }
}

impl Preconditioner for RelaxStep {
    fn apply(&self, team: &Team, a: &DistMatrix, r: &BlockVector, z: &mut BlockVector) -> Result<()> {
        z.set_zero();
        self.smooth(team, a, r, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::gen_poisson3d;
    use crate::matrix::CsrBlock;
    use crate::parallel::Topology;
    use crate::solvers::testutil::random_rhs;
    use nalgebra::{DMatrix, DVector, SymmetricEigen};

    fn dist(g: &CsrBlock, team: &Team) -> DistMatrix {
        DistMatrix::new(g, team.topology()).unwrap()
    }

    fn diag_matrix(d: &[f64]) -> CsrBlock {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        CsrBlock::from_triplets(d.len(), d.len(), &t).unwrap()
    }

    fn chain(n: usize) -> CsrBlock {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
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
    fn degenerate_interval_rejected() {
        let team = Team::serial();
        let a = dist(&CsrBlock::identity(4), &team);
        let b = BlockVector::filled(4, 1, 1.0);
        let mut x = BlockVector::zeros(4, 1);
        for bounds in [(1.0, 1.0), (0.0, 2.0), (2.0, 1.0)] {
            let e = chebyshev_apply(&team, &a, &b, &mut x, 2, bounds, ChebyshevScaling::None);
            assert!(matches!(e, Err(Error::InvalidArgument(_))));
        }
        assert!(chebyshev_apply(&team, &a, &b, &mut x, 0, (0.5, 1.5), ChebyshevScaling::None).is_err());
    }

    #[test]
    fn scalar_recurrence_order_one() {
        let team = Team::serial();
        let a = dist(&diag_matrix(&[2.0; 5]), &team);
        let b = BlockVector::filled(5, 1, 1.0);
        let mut x = BlockVector::zeros(5, 1);
        chebyshev_apply(&team, &a, &b, &mut x, 1, (1.9, 2.1), ChebyshevScaling::None).unwrap();
        assert!(x.as_slice().iter().all(|v| (v - 0.5).abs() < 1e-2));
    }

    #[test]
    fn eigen_estimates() {
        let team = Team::serial();
        let (_, hi) = estimate_eig_bounds(&team, &dist(&CsrBlock::identity(7), &team), ChebyshevScaling::None).unwrap();
        assert!((1.0..=1.1).contains(&hi), "{hi}");
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        let (lo, hi) = estimate_eig_bounds(&team, &dist(&diag_matrix(&d), &team), ChebyshevScaling::None).unwrap();
        assert!((9.5..=11.0).contains(&hi), "{hi}");
        assert_eq!(lo, hi / 30.0);

        let g = chain(10);
        let (_, hi) = estimate_eig_bounds(&team, &dist(&g, &team), ChebyshevScaling::Jacobi).unwrap();
        // D^-1 A = A / 2 is symmetric here
        let dense = DMatrix::from_row_slice(10, 10, &g.to_dense()) * 0.5;
        let exact = SymmetricEigen::new(dense).eigenvalues.max();
        assert!((hi - exact).abs() <= 0.15 * exact, "{hi} vs {exact}");
    }

    #[test]
    fn order_two_damps_upper_spectrum() {
        let g = gen_poisson3d(8, 8, 8).unwrap();
        let n = g.nrows();
        let team = Team::serial();
        let a = dist(&g, &team);
        // constant diagonal: D^-1 A = A / 6 shares the eigenvectors of A
        let dense = DMatrix::from_row_slice(n, n, &g.to_dense()) / 6.0;
        let eig = SymmetricEigen::new(dense);
        let lmax = eig.eigenvalues.max();
        let (_, hi) = estimate_eig_bounds(&team, &a, ChebyshevScaling::Jacobi).unwrap();
        assert!(hi >= lmax * 0.95);
        let top: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] >= lmax / 2.0).collect();
        let e0 = random_rhs(n, 1, 17);
        let project = |e: &[f64]| -> f64 {
            let v = DVector::from_column_slice(e);
            top.iter().map(|&k| eig.eigenvectors.column(k).dot(&v).powi(2)).sum::<f64>().sqrt()
        };
        // error e0 against the zero right-hand side: the smoother maps e0 to p(D^-1 A) e0
        let mut x = e0.clone();
        let b = BlockVector::zeros(n, 1);
        chebyshev_apply(&team, &a, &b, &mut x, 2, (hi / 2.0, hi), ChebyshevScaling::Jacobi).unwrap();
        let before = project(&e0.column(0));
        let after = project(&x.column(0));
        assert!(after * 5.0 <= before, "{before} -> {after}");
    }

    #[test]
    fn chebyshev_is_linear_and_topology_neutral() {
        let g = gen_poisson3d(6, 6, 6).unwrap();
        let b = random_rhs(216, 2, 3);
        let mut outs = Vec::new();
        for topo in [Topology::SERIAL, Topology::new(2, 2).unwrap()] {
            let team = Team::new(topo).unwrap();
            let a = dist(&g, &team);
            let step = RelaxStep::new(&team, RelaxKind::Chebyshev { order: 3, scaling: ChebyshevScaling::Jacobi }, 2, &a).unwrap();
            let mut z = BlockVector::uninit(216, 2);
            step.apply(&team, &a, &b, &mut z).unwrap();
            outs.push(z);
        }
        let diff = outs[0].as_slice().iter().zip(outs[1].as_slice()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn zero_guess_skips_first_product() {
        let g = gen_poisson3d(5, 5, 5).unwrap();
        let team = Team::serial();
        let a = dist(&g, &team);
        let step = RelaxStep::new(&team, RelaxKind::GaussSeidel { direction: SweepDirection::Symmetric }, 1, &a).unwrap();
        let b = random_rhs(125, 1, 1);
        let mut z = BlockVector::uninit(125, 1);
        team.counters().reset();
        step.apply(&team, &a, &b, &mut z).unwrap();
        assert_eq!(team.counters().get("sgs").skipped, 1);
    }

    #[test]
    fn stand_alone_relaxation_converges() {
        let g = gen_poisson3d(5, 5, 5).unwrap();
        let team = Team::serial();
        let a = dist(&g, &team);
        let b = crate::io::manufactured_rhs(&g, 1);
        for kind in [
            RelaxKind::Jacobi { weight: 1.0 },
            RelaxKind::GaussSeidel { direction: SweepDirection::Forward },
            RelaxKind::GaussSeidel { direction: SweepDirection::Symmetric },
        ] {
            let step = RelaxStep::new(&team, kind, 1, &a).unwrap();
            let mut x = BlockVector::zeros(125, 1);
            let s = step.solve(&team, &a, &b, &mut x, 1e-8, 500).unwrap();
            assert!(s.all_converged(), "{kind:?}");
            let h = &s.history;
            assert!(h.windows(2).all(|w| w[1][0] <= w[0][0]), "{kind:?} not monotone");
        }
    }

    #[test]
    fn bicgstab_smoother_runs_fixed_iterations() {
        let g = gen_poisson3d(5, 5, 5).unwrap();
        let team = Team::serial();
        let a = dist(&g, &team);
        let step = RelaxStep::new(
            &team,
            RelaxKind::BiCGStab {
                variant: BiCGStabVariant::Classical,
                merged: false,
            },
            2,
            &a,
        )
        .unwrap();
        let b = random_rhs(125, 2, 2);
        let mut z1 = BlockVector::uninit(125, 2);
        let mut z2 = BlockVector::uninit(125, 2);
        team.counters().reset();
        step.apply(&team, &a, &b, &mut z1).unwrap();
        let spmvs = team.counters().get("spmv").calls;
        step.apply(&team, &a, &b, &mut z2).unwrap();
        assert_eq!(z1, z2);
        // two products per iteration plus the final true residual
        assert_eq!(spmvs, 4);
    }
}
