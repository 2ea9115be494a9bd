use std::fs;
use std::path::{Path, PathBuf};

use serde_yaml::Value;

use crate::error::{Error, Result};
use crate::io::{gen_poisson3d, manufactured_rhs, read_system};
use crate::matrix::{BlockVector, CsrBlock};
use crate::parallel::Topology;
use crate::params::{ParamTree, SolverRole};

/// Where the linear system comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemSpec {
    Poisson { dims: [usize; 3] },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BenchMode {
    /// One configured solve with `nrhs` columns.
    #[default]
    Solve,
    /// The same solve repeated for every RHS count in `m_list`.
    Gain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSpec {
    pub nrhs: usize,
    pub repetitions: usize,
    pub mode: BenchMode,
    pub m_list: Vec<usize>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            nrhs: 1,
            repetitions: 3,
            mode: BenchMode::Solve,
            m_list: vec![1, 2, 4, 8, 16],
        }
    }
}

/// A parsed run configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ParamTree,
    pub system: SystemSpec,
    pub bench: BenchSpec,
    /// Empty when the file names no topology.
    pub topologies: Vec<Topology>,
}

/// A loaded system: matrix, right-hand sides and optional initial guess.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub matrix: CsrBlock,
    rhs: Option<BlockVector>,
    guess: Option<BlockVector>,
}

impl SystemSpec {
    pub fn load(&self) -> Result<LoadedSystem> {
        match self {
            SystemSpec::Poisson { dims: [nx, ny, nz] } => Ok(LoadedSystem {
                matrix: gen_poisson3d(*nx, *ny, *nz)?,
                rhs: None,
                guess: None,
            }),
            SystemSpec::File(p) => {
                let f = read_system(p)?;
                Ok(LoadedSystem {
                    matrix: f.matrix,
                    rhs: f.rhs,
                    guess: f.guess,
                })
            }
        }
    }
}

fn cycle_columns(v: &BlockVector, m: usize) -> BlockVector {
    let cols: Vec<Vec<f64>> = (0..m).map(|j| v.column(j % v.nrhs())).collect();
    BlockVector::from_columns(&cols).expect("equal column lengths")
}

impl LoadedSystem {
    /// `m` right-hand sides: the stored ones repeated cyclically, or the
    /// manufactured `A * ones` when the source has none.
    pub fn rhs(&self, m: usize) -> BlockVector {
        match &self.rhs {
            Some(b) if b.nrhs() > 0 => cycle_columns(b, m),
            _ => manufactured_rhs(&self.matrix, m),
        }
    }

    /// Initial guess with `m` columns; zero-flagged when the source has none.
    pub fn guess(&self, m: usize) -> BlockVector {
        match &self.guess {
            Some(x) if x.nrhs() > 0 => cycle_columns(x, m),
            _ => BlockVector::zeros(self.matrix.nrows(), m),
        }
    }
}

/// Reads a YAML run configuration; relative system file paths are resolved
/// against the configuration file's directory.
pub fn parse_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_run_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

fn err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

fn mapping<'v>(v: &'v Value, path: &str) -> Result<&'v serde_yaml::Mapping> {
    v.as_mapping().ok_or_else(|| err(path, "expected a mapping"))
}

fn key_str<'v>(k: &'v Value, path: &str) -> Result<&'v str> {
    k.as_str().ok_or_else(|| err(path, format!("keys must be strings, found {k:?}")))
}

fn scalar(v: &Value, path: &str) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(if *b { "1" } else { "0" }.into()),
        _ => Err(err(path, "expected a scalar value")),
    }
}

fn count(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| err(path, "expected a non-negative integer"))
}

fn count_list(v: &Value, path: &str) -> Result<Vec<usize>> {
    let seq = v.as_sequence().ok_or_else(|| err(path, "expected a list"))?;
    seq.iter().enumerate().map(|(i, e)| count(e, &format!("{path}[{i}]"))).collect()
}

/// Parses configuration text; see [`parse_run_config`].
pub fn parse_run_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| Error::Config(format!("YAML: {e}")))?;
    let top = mapping(&doc, "<top level>")?;
    let mut params = ParamTree::new();
    let mut system = None;
    let mut bench = BenchSpec::default();
    let mut topologies = Vec::new();
    for (k, v) in top {
        let key = key_str(k, "<top level>")?;
        if let Ok(role) = key.parse::<SolverRole>() {
            parse_role(&mut params, role, v, key)?;
            continue;
        }
        match key {
            "system" => system = Some(parse_system(v, base_dir)?),
            "benchmark" => bench = parse_bench(v)?,
            "topology" => {
                let items: Vec<&Value> = match v {
                    Value::Sequence(s) => s.iter().collect(),
                    other => vec![other],
                };
                for (i, t) in items.into_iter().enumerate() {
                    let p = format!("topology[{i}]");
                    let s = t.as_str().ok_or_else(|| err(&p, "expected a string like 'nnumas=1:ncores=2'"))?;
                    topologies.push(s.parse().map_err(|e| err(&p, e))?);
                }
            }
            other => {
                return Err(err(
                    other,
                    "unknown top-level key (expected solver, preconditioner, pre_smoother, post_smoother, system, benchmark or topology)",
                ))
            }
        }
    }
    let system = system.ok_or_else(|| err("system", "missing"))?;
    if params.method(SolverRole::Solver).is_none() {
        return Err(err("solver.method", "missing"));
    }
    params.set_defaults().map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("parameters: {m}")),
        e => e,
    })?;
    Ok(RunConfig {
        params,
        system,
        bench,
        topologies,
    })
}

fn parse_role(params: &mut ParamTree, role: SolverRole, v: &Value, path: &str) -> Result<()> {
    let m = mapping(v, path)?;
    let mut pairs = Vec::with_capacity(m.len());
    for (k, val) in m {
        let key = key_str(k, path)?;
        let p = format!("{path}.{key}");
        pairs.push((key, scalar(val, &p)?, p));
    }
    // the method decides which other keys are legal
    pairs.sort_by_key(|(k, _, _)| *k != "method");
    for (key, value, p) in pairs {
        params.add(role.name(), (key, &value)).map_err(|e| match e {
            Error::Config(msg) => err(&p, msg),
            e => e,
        })?;
    }
    Ok(())
}

fn parse_system(v: &Value, base_dir: &Path) -> Result<SystemSpec> {
    let m = mapping(v, "system")?;
    let mut spec = None;
    for (k, val) in m {
        let key = key_str(k, "system")?;
        let p = format!("system.{key}");
        let this = match key {
            "poisson" => {
                let dims = count_list(val, &p)?;
                match dims[..] {
                    [nx, ny, nz] if nx > 0 && ny > 0 && nz > 0 => SystemSpec::Poisson { dims: [nx, ny, nz] },
                    _ => return Err(err(&p, "expected three positive grid dimensions")),
                }
            }
            "file" => {
                let s = val.as_str().ok_or_else(|| err(&p, "expected a path"))?;
                SystemSpec::File(base_dir.join(s))
            }
            other => return Err(err(&format!("system.{other}"), "unknown key (expected poisson or file)")),
        };
        if spec.replace(this).is_some() {
            return Err(err("system", "give exactly one of poisson or file"));
        }
    }
    spec.ok_or_else(|| err("system", "give exactly one of poisson or file"))
}

fn parse_bench(v: &Value) -> Result<BenchSpec> {
    let mut b = BenchSpec::default();
    for (k, val) in mapping(v, "benchmark")? {
        let key = key_str(k, "benchmark")?;
        let p = format!("benchmark.{key}");
        match key {
            "nrhs" | "m" => b.nrhs = count(val, &p)?,
            "repetitions" => b.repetitions = count(val, &p)?,
            "mode" => {
                b.mode = match val.as_str() {
                    Some("solve") => BenchMode::Solve,
                    Some("gain") => BenchMode::Gain,
                    _ => return Err(err(&p, "expected 'solve' or 'gain'")),
                }
            }
            "m_list" => b.m_list = count_list(val, &p)?,
            other => {
                return Err(err(
                    &format!("benchmark.{other}"),
                    "unknown key (expected nrhs, repetitions, mode or m_list)",
                ))
            }
        }
    }
    if b.nrhs == 0 {
        return Err(err("benchmark.nrhs", "must be at least 1"));
    }
    if b.repetitions == 0 {
        return Err(err("benchmark.repetitions", "must be at least 1"));
    }
    if b.m_list.is_empty() || b.m_list.contains(&0) {
        return Err(err("benchmark.m_list", "entries must be at least 1"));
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_run_config_str(text, Path::new("/data"))
    }

    const AMG_BICGSTAB: &str = "
solver:
  method: PBiCGStab
  max_iters: 20
preconditioner:
  method: MultiGrid
  max_iters: 1
  mg_agg_num_levels: 2
  mg_coarse_matrix_size: 500
  mg_num_paths: 2
pre_smoother:
  method: Chebyshev
  polynomial_order: 2
post_smoother:
  method: Chebyshev
  polynomial_order: 2
system:
  poisson: [32, 32, 32]
";

    #[test]
    fn minimal_config() {
        let c = parse("solver: {method: CG}\nsystem: {poisson: [8, 8, 8]}\n").unwrap();
        assert!(c.params.is_finalized());
        assert_eq!(c.params.get_usize(SolverRole::Solver, "max_iters").unwrap(), 100);
        assert_eq!(c.system, SystemSpec::Poisson { dims: [8, 8, 8] });
        assert_eq!(c.system.load().unwrap().matrix.nrows(), 512);
        assert_eq!(c.bench, BenchSpec::default());
        assert!(c.topologies.is_empty());
    }

    #[test]
    fn matches_programmatic_tree() {
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
        for role in ["pre_smoother", "post_smoother"] {
            t.add_map(role, &[("method", "Chebyshev"), ("polynomial_order", "2")]).unwrap();
        }
        t.set_defaults().unwrap();
        assert_eq!(parse(AMG_BICGSTAB).unwrap().params, t);
    }

    #[test]
    fn method_may_follow_its_parameters() {
        let c = parse("solver: {max_iters: 7, weight: 0.5, method: Jacobi}\nsystem: {poisson: [2, 2, 2]}\n").unwrap();
        assert_eq!(c.params.get_f64(SolverRole::Solver, "weight").unwrap(), 0.5);
    }

    #[test]
    fn diagnostics_name_the_key() {
        let cases = [
            ("solver: {method: CG}\nsystem: {poisson: [2,2,2]}\nsolvr: 1\n", "solvr"),
            ("solver: {method: CG, weight: 2}\nsystem: {poisson: [2,2,2]}\n", "solver.weight"),
            ("solver: {method: Nope}\nsystem: {poisson: [2,2,2]}\n", "solver.method"),
            ("solver: {method: CG}\nsystem: {poisson: [2,2]}\n", "system.poisson"),
            ("solver: {method: CG}\nsystem: {grid: [2,2,2]}\n", "system.grid"),
            ("solver: {method: CG}\n", "system"),
            ("system: {poisson: [2,2,2]}\n", "solver.method"),
            ("solver: {method: CG}\nsystem: {poisson: [2,2,2]}\nbenchmark: {reps: 3}\n", "benchmark.reps"),
            ("solver: {method: CG}\nsystem: {poisson: [2,2,2]}\nbenchmark: {nrhs: -1}\n", "benchmark.nrhs"),
            ("solver: {method: CG}\nsystem: {poisson: [2,2,2]}\ntopology: nnumas=0\n", "topology[0]"),
            ("solver: {method: CG, max_iters: [1]}\nsystem: {poisson: [2,2,2]}\n", "solver.max_iters"),
        ];
        for (text, path) in cases {
            match parse(text) {
                Err(Error::Config(m)) => assert!(m.starts_with(path), "{text:?}: {m}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_values_reported_at_finalize() {
        let e = parse("solver: {method: CG, max_iters: zero}\nsystem: {poisson: [2,2,2]}\n").unwrap_err();
        assert!(e.to_string().contains("max_iters"), "{e}");
    }

    #[test]
    fn malformed_yaml_is_an_error() {
        for text in ["", "- 1\n- 2\n", "solver: {method: CG\n", "solver: [1, 2]\nsystem: {poisson: [1,1,1]}\n"] {
            assert!(matches!(parse(text), Err(Error::Config(_))), "{text:?}");
        }
    }

    #[test]
    fn benchmark_topology_and_file() {
        let c = parse(
            "solver: {method: CG}
system: {file: sys.bin}
benchmark: {nrhs: 4, repetitions: 5, mode: gain, m_list: [1, 16]}
topology: [nnumas=1:ncores=2, nnumas=2:ncores=2]
",
        )
        .unwrap();
        assert_eq!(c.system, SystemSpec::File(PathBuf::from("/data/sys.bin")));
        assert_eq!(
            c.bench,
            BenchSpec {
                nrhs: 4,
                repetitions: 5,
                mode: BenchMode::Gain,
                m_list: vec![1, 16]
            }
        );
        assert_eq!(c.topologies, vec![Topology::new(1, 2).unwrap(), Topology::new(2, 2).unwrap()]);
    }

    #[test]
    fn file_systems_cycle_stored_columns() {
        let dir = tempfile::tempdir().unwrap();
        let a = gen_poisson3d(2, 2, 1).unwrap();
        let b = BlockVector::from_columns(&[vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]).unwrap();
        crate::io::write_system(dir.path().join("s.bin"), &a, Some(&b), None).unwrap();
        fs::write(dir.path().join("run.yaml"), "solver: {method: CG}\nsystem: {file: s.bin}\n").unwrap();
        let c = parse_run_config(dir.path().join("run.yaml")).unwrap();
        let sys = c.system.load().unwrap();
        let b3 = sys.rhs(3);
        assert_eq!(b3.column(2), b.column(0));
        assert!(sys.guess(3).is_zero());
    }
}
