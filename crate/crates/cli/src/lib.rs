//! Batch driver: loads or generates a system, runs the configured solver
//! over one or more worker topologies and RHS counts, and reports
//! convergence, timings and multi-RHS gains.
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use mrhs::io::{parse_run_config, BenchMode, LoadedSystem, RunConfig};
use mrhs::matrix::DistMatrix;
use mrhs::parallel::{Team, Topology};
use mrhs::params::{schema_dump, ParamTree, SolverRole};
use mrhs::solvers::{SolveStats, Solver};
use mrhs::stats::Counters;
use mrhs::Error;

pub const CSV_HEADER: &str = "method,m,nnumas,ncores,iters,max_rel_residual,t_solve_s,t_setup_s,P_m";

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, Parser)]
#[command(name = "mrhs", version, about = "Solve and benchmark sparse systems with multiple right-hand sides")]
pub struct Args {
    /// YAML run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker topology such as `nnumas=2:ncores=4`; repeat to compare several
    #[arg(long)]
    pub topology: Vec<String>,
    /// Comma-separated RHS counts for a gain benchmark; must include 1
    #[arg(long, value_delimiter = ',')]
    pub bench_gain: Option<Vec<usize>>,
    /// Repetitions per measurement (median is reported)
    #[arg(long)]
    pub reps: Option<usize>,
    /// Write the per-run table as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Fill the t_setup_s column
    #[arg(long)]
    pub time_setup: bool,
    /// List methods, legal roles and parameters, then exit
    #[arg(long)]
    pub help_methods: bool,
}

/// One measured configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub method: String,
    pub m: usize,
    pub topology: Topology,
    pub iterations: usize,
    pub max_rel_residual: f64,
    pub converged: bool,
    /// Median solve time over the repetitions, seconds.
    pub t_solve: f64,
    pub t_setup: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<RunRow>,
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// `P_m = m T_1 / T_m`.
pub fn gain(m: usize, t1: f64, tm: f64) -> f64 {
    m as f64 * t1 / tm
}

/// `S_p = T_ref / T_p`.
pub fn speedup(t_ref: f64, tp: f64) -> f64 {
    t_ref / tp
}

/// `E_p = T_1 / (p T_p)`.
pub fn efficiency(t1: f64, p: usize, tp: f64) -> f64 {
    t1 / (p as f64 * tp)
}

impl BenchReport {
    fn find(&self, topology: Topology, m: usize) -> Option<&RunRow> {
        self.rows.iter().find(|r| r.topology == topology && r.m == m)
    }

    /// `P_m` for a row, when the `m = 1` run on the same topology exists.
    pub fn gain_of(&self, row: &RunRow) -> Option<f64> {
        self.find(row.topology, 1).map(|base| gain(row.m, base.t_solve, row.t_solve))
    }

    /// `(S_p, E_p)` against the single-worker run with the same `m`.
    pub fn scaling_of(&self, row: &RunRow) -> Option<(f64, f64)> {
        let base = self.find(Topology::SERIAL, row.m)?;
        let p = row.topology.leaves();
        Some((speedup(base.t_solve, row.t_solve), efficiency(base.t_solve, p, row.t_solve)))
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn to_csv(&self, time_setup: bool) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let setup = if time_setup { format!("{:.6e}", r.t_setup) } else { String::new() };
            let pm = self.gain_of(r).map(|g| format!("{g:.4}")).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{},{:.6e},{:.6e},{},{}",
                r.method, r.m, r.topology.nnumas, r.topology.ncores, r.iterations, r.max_rel_residual, r.t_solve, setup, pm
            )
            .unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<20} {:>4} {:>9} {:>6} {:>12} {:>12} {:>8} {:>8} {:>8}",
            "method", "m", "topology", "iters", "max_rel_res", "t_solve_s", "P_m", "S_p", "E_p"
        )
        .unwrap();
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|g| format!("{g:.3}")).unwrap_or_else(|| "-".into());
            let sc = self.scaling_of(r);
            writeln!(
                s,
                "{:<20} {:>4} {:>9} {:>6} {:>12.3e} {:>12.4e} {:>8} {:>8} {:>8}{}",
                r.method,
                r.m,
                format!("{}x{}", r.topology.nnumas, r.topology.ncores),
                r.iterations,
                r.max_rel_residual,
                r.t_solve,
                opt(self.gain_of(r)),
                opt(sc.map(|x| x.0)),
                opt(sc.map(|x| x.1)),
                if r.converged { "" } else { "  NOT CONVERGED" }
            )
            .unwrap();
        }
        s
    }
}

/// Method label used in reports, e.g. `BiCGStab+MultiGrid`.
pub fn method_label(params: &ParamTree) -> String {
    let mut s = params.method(SolverRole::Solver).map(|m| m.name().to_string()).unwrap_or_default();
    if let Some(p) = params.method(SolverRole::Preconditioner) {
        s.push('+');
        s.push_str(p.name());
    }
    s
}

/// Residual history, hierarchy table (multigrid runs only) and per-kernel
/// counters of one solve.
pub fn report_stats(stats: &SolveStats, solver: &Solver, counters: &Counters) -> String {
    let mut s = String::new();
    if let Some(h) = solver.hierarchy() {
        writeln!(s, "multigrid hierarchy:\n{}", h.stats()).unwrap();
    }
    writeln!(s, "residual history (max over columns):").unwrap();
    for (k, r) in stats.history.iter().enumerate() {
        writeln!(s, "  {k:>4} {:.6e}", r.max()).unwrap();
    }
    writeln!(s, "kernel counters:").unwrap();
    writeln!(s, "  {:<16} {:>8} {:>8} {:>10} {:>10} {:>14}", "kernel", "calls", "skipped", "reads", "writes", "flops").unwrap();
    let snap = counters.snapshot();
    for (k, c) in snap.iter() {
        writeln!(
            s,
            "  {:<16} {:>8} {:>8} {:>10} {:>10} {:>14}",
            k, c.calls, c.skipped, c.read_passes, c.write_passes, c.flops
        )
        .unwrap();
    }
    let t = counters.total();
    writeln!(
        s,
        "  {:<16} {:>8} {:>8} {:>10} {:>10} {:>14}",
        "total", t.calls, t.skipped, t.read_passes, t.write_passes, t.flops
    )
    .unwrap();
    s
}

/// Runs the configured solve for every `m` in `m_list` on one team,
/// `repetitions` times each; reports median solve times.
pub fn bench_gain(
    team: &Team,
    params: &ParamTree,
    system: &LoadedSystem,
    m_list: &[usize],
    repetitions: usize,
) -> mrhs::Result<BenchReport> {
    if !m_list.contains(&1) {
        return Err(Error::InvalidArgument("the RHS count list must include 1".into()));
    }
    let mut report = BenchReport::default();
    measure(team, params, system, m_list, repetitions, &mut report, &mut |_, _, _| {})?;
    Ok(report)
}

type Observer<'a> = dyn FnMut(&SolveStats, &Solver, &Team) + 'a;

fn measure(
    team: &Team,
    params: &ParamTree,
    system: &LoadedSystem,
    m_list: &[usize],
    repetitions: usize,
    report: &mut BenchReport,
    observe: &mut Observer<'_>,
) -> mrhs::Result<()> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    if let Some(m) = m_list.iter().find(|&&m| m == 0) {
        return Err(Error::InvalidArgument(format!("unsupported RHS count {m}")));
    }
    let a = DistMatrix::new(&system.matrix, team.topology())?;
    let solver = Solver::build(team, params, &a)?;
    let label = method_label(params);
    for &m in m_list {
        let b = system.rhs(m);
        let mut times = Vec::with_capacity(repetitions);
        let mut last = None;
        for rep in 0..repetitions {
            let mut x = system.guess(m);
            team.counters().reset();
            let start = Instant::now();
            let stats = solver.solve(team, &a, &b, &mut x)?;
            times.push(start.elapsed().as_secs_f64());
            if rep == 0 {
                observe(&stats, &solver, team);
            }
            last = Some(stats);
        }
        let stats = last.expect("at least one repetition");
        report.rows.push(RunRow {
            method: label.clone(),
            m,
            topology: team.topology(),
            iterations: stats.iterations,
            max_rel_residual: stats.max_rel_residual(),
            converged: stats.all_converged(),
            t_solve: median(&times),
            t_setup: solver.setup_seconds(),
        });
    }
    Ok(())
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Breakdown { .. } | Error::Instability { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_CONFIG,
    }
}

/// Executes the command line; diagnostics go to `err`, reports to `out`.
pub fn run(args: &Args, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_inner(args, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn run_inner(args: &Args, out: &mut dyn Write) -> mrhs::Result<i32> {
    if args.help_methods {
        write!(out, "{}", schema_dump())?;
        return Ok(EXIT_OK);
    }
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg: RunConfig = parse_run_config(path)?;
    cfg.params.check()?;
    let topologies: Vec<Topology> = if !args.topology.is_empty() {
        args.topology.iter().map(|t| t.parse()).collect::<mrhs::Result<_>>()?
    } else if !cfg.topologies.is_empty() {
        cfg.topologies.clone()
    } else {
        vec![Topology::SERIAL]
    };
    let m_list = match (&args.bench_gain, cfg.bench.mode) {
        (Some(list), _) => list.clone(),
        (None, BenchMode::Gain) => cfg.bench.m_list.clone(),
        (None, BenchMode::Solve) => vec![cfg.bench.nrhs],
    };
    let gain_mode = args.bench_gain.is_some() || cfg.bench.mode == BenchMode::Gain;
    if gain_mode && !m_list.contains(&1) {
        return Err(Error::InvalidArgument("the RHS count list must include 1".into()));
    }
    let reps = args.reps.unwrap_or(cfg.bench.repetitions);
    let system = cfg.system.load()?;
    writeln!(
        out,
        "system: {} rows, {} nonzeros; solver {}",
        system.matrix.nrows(),
        system.matrix.nnz(),
        method_label(&cfg.params)
    )?;

    let mut report = BenchReport::default();
    for topo in topologies {
        // one team per topology, released before the next is created
        let team = Team::new(topo)?;
        let mut details = String::new();
        measure(&team, &cfg.params, &system, &m_list, reps, &mut report, &mut |stats, solver, team| {
            if details.is_empty() {
                details = report_stats(stats, solver, team.counters());
            }
        })?;
        writeln!(out, "\n[{}x{}] first solve, m = {}", topo.nnumas, topo.ncores, m_list[0])?;
        write!(out, "{details}")?;
    }
    writeln!(out)?;
    write!(out, "{}", report.summary())?;
    if let Some(csv) = &args.csv {
        std::fs::write(csv, report.to_csv(args.time_setup))?;
    }
    Ok(if report.all_converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
