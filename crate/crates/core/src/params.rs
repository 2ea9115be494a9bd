//! Solver configuration as a tree of string-valued parameter lists, one per
//! role, with a closed per-method schema and a defaults table.
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverRole {
    Solver,
    Preconditioner,
    PreSmoother,
    PostSmoother,
}

impl SolverRole {
    pub const ALL: [SolverRole; 4] = [
        SolverRole::Solver,
        SolverRole::Preconditioner,
        SolverRole::PreSmoother,
        SolverRole::PostSmoother,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverRole::Solver => "solver",
            SolverRole::Preconditioner => "preconditioner",
            SolverRole::PreSmoother => "pre_smoother",
            SolverRole::PostSmoother => "post_smoother",
        }
    }

    pub fn is_smoother(self) -> bool {
        matches!(self, SolverRole::PreSmoother | SolverRole::PostSmoother)
    }
}

impl fmt::Display for SolverRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverRole::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown role '{s}' (expected solver, preconditioner, pre_smoother or post_smoother)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    CG,
    BiCGStab,
    MultiGrid,
    Jacobi,
    GaussSeidel,
    Chebyshev,
    Direct,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::CG,
        Method::BiCGStab,
        Method::MultiGrid,
        Method::Jacobi,
        Method::GaussSeidel,
        Method::Chebyshev,
        Method::Direct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CG => "CG",
            Method::BiCGStab => "BiCGStab",
            Method::MultiGrid => "MultiGrid",
            Method::Jacobi => "Jacobi",
            Method::GaussSeidel => "GaussSeidel",
            Method::Chebyshev => "Chebyshev",
            Method::Direct => "Direct",
        }
    }

    fn aliases(self) -> &'static [&'static str] {
        match self {
            Method::CG => &["CG", "PCG"],
            Method::BiCGStab => &["BiCGStab", "PBiCGStab"],
            Method::MultiGrid => &["MultiGrid"],
            Method::Jacobi => &["Jacobi"],
            Method::GaussSeidel => &["GaussSeidel", "Gauss-Seidel", "GS"],
            Method::Chebyshev => &["Chebyshev"],
            Method::Direct => &["Direct"],
        }
    }

    /// Method/role legality table.
    pub fn allowed_in(self, role: SolverRole) -> bool {
        use SolverRole::*;
        match self {
            Method::CG | Method::Direct => role == Solver,
            Method::BiCGStab | Method::Jacobi | Method::GaussSeidel => true,
            Method::MultiGrid => matches!(role, Solver | Preconditioner),
            Method::Chebyshev => role != Solver,
        }
    }

    /// Whether a preconditioner role is meaningful under this solver.
    pub fn takes_preconditioner(self) -> bool {
        matches!(self, Method::CG | Method::BiCGStab)
    }

    pub fn schema(self) -> Vec<&'static ParamSpec> {
        PARAMS.iter().filter(|p| p.methods.contains(&self)).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.aliases().contains(&s))
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamKind {
    Count { min: usize },
    Real { positive: bool },
    Choice(&'static [&'static str]),
}

/// One entry of the per-method schema.
#[derive(Debug)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: ParamKind,
    /// Default for the solver role and for the other roles.
    pub default: (&'static str, &'static str),
    pub methods: &'static [Method],
    pub help: &'static str,
}

impl ParamSpec {
    pub fn default_for(&self, role: SolverRole) -> &'static str {
        if role == SolverRole::Solver {
            self.default.0
        } else {
            self.default.1
        }
    }

    fn check(&self, value: &str) -> std::result::Result<(), String> {
        match self.kind {
            ParamKind::Count { min } => match value.trim().parse::<usize>() {
                Ok(v) if v >= min => Ok(()),
                Ok(v) => Err(format!("{v} is below the minimum {min}")),
                Err(_) => Err(format!("'{value}' is not a non-negative integer")),
            },
            ParamKind::Real { positive } => match value.trim().parse::<f64>() {
                Ok(v) if !v.is_finite() => Err(format!("'{value}' is not finite")),
                Ok(v) if positive && v <= 0.0 => Err(format!("{v} must be positive")),
                Ok(_) => Ok(()),
                Err(_) => Err(format!("'{value}' is not a number")),
            },
            ParamKind::Choice(options) => {
                if options.contains(&value.trim()) {
                    Ok(())
                } else {
                    Err(format!("'{value}' is not one of {}", options.join(", ")))
                }
            }
        }
    }
}

use Method::*;

const ITERATIVE: &[Method] = &[CG, BiCGStab, MultiGrid, Jacobi, GaussSeidel, Chebyshev];

pub static PARAMS: &[ParamSpec] = &[
    ParamSpec {
        key: "max_iters",
        kind: ParamKind::Count { min: 1 },
        default: ("100", "1"),
        methods: ITERATIVE,
        help: "iteration limit (cycles, sweeps or applications outside the solver role)",
    },
    ParamSpec {
        key: "rel_tolerance",
        kind: ParamKind::Real { positive: false },
        default: ("1e-8", "1e-8"),
        methods: &[CG, BiCGStab, MultiGrid, Jacobi, GaussSeidel],
        help: "stop when max_j ||b_j - A x_j|| / ||b_j|| falls below this (solver role only)",
    },
    ParamSpec {
        key: "merged",
        kind: ParamKind::Choice(&["0", "1"]),
        default: ("0", "0"),
        methods: &[CG, BiCGStab],
        help: "1 routes vector updates through fused update/reduction kernels",
    },
    ParamSpec {
        key: "variant",
        kind: ParamKind::Choice(&["classical", "reordered", "pipelined"]),
        default: ("classical", "classical"),
        methods: &[BiCGStab],
        help: "BiCGStab recurrence",
    },
    ParamSpec {
        key: "weight",
        kind: ParamKind::Real { positive: true },
        default: ("1.0", "1.0"),
        methods: &[Jacobi],
        help: "Jacobi damping factor",
    },
    ParamSpec {
        key: "direction",
        kind: ParamKind::Choice(&["forward", "backward", "symmetric"]),
        default: ("symmetric", "symmetric"),
        methods: &[GaussSeidel],
        help: "sweep ordering of the hybrid Gauss-Seidel",
    },
    ParamSpec {
        key: "polynomial_order",
        kind: ParamKind::Count { min: 1 },
        default: ("2", "2"),
        methods: &[Chebyshev],
        help: "Chebyshev polynomial degree per application",
    },
    ParamSpec {
        key: "mg_strength_threshold",
        kind: ParamKind::Real { positive: true },
        default: ("0.25", "0.25"),
        methods: &[MultiGrid],
        help: "strength-of-connection threshold theta",
    },
    ParamSpec {
        key: "mg_coarse_matrix_size",
        kind: ParamKind::Count { min: 1 },
        default: ("500", "500"),
        methods: &[MultiGrid],
        help: "stop coarsening at or below this many rows",
    },
    ParamSpec {
        key: "mg_agg_num_levels",
        kind: ParamKind::Count { min: 0 },
        default: ("0", "0"),
        methods: &[MultiGrid],
        help: "number of leading levels coarsened aggressively",
    },
    ParamSpec {
        key: "mg_num_paths",
        kind: ParamKind::Count { min: 1 },
        default: ("1", "1"),
        methods: &[MultiGrid],
        help: "strong paths required by aggressive coarsening",
    },
    ParamSpec {
        key: "mg_max_levels",
        kind: ParamKind::Count { min: 2 },
        default: ("25", "25"),
        methods: &[MultiGrid],
        help: "maximum hierarchy depth",
    },
    ParamSpec {
        key: "mg_mixed_precision",
        kind: ParamKind::Choice(&["0", "1"]),
        default: ("0", "0"),
        methods: &[MultiGrid],
        help: "1 stores coarse levels in single precision",
    },
    ParamSpec {
        key: "mg_reduced_from_level",
        kind: ParamKind::Count { min: 1 },
        default: ("1", "1"),
        methods: &[MultiGrid],
        help: "first level stored in reduced precision",
    },
];

fn spec(key: &str) -> Option<&'static ParamSpec> {
    PARAMS.iter().find(|p| p.key == key)
}

/// Parameters of one role: the method plus string-valued entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamList {
    method: Option<Method>,
    entries: BTreeMap<String, String>,
}

impl ParamList {
    pub fn method(&self) -> Option<Method> {
        self.method
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn typed<T: FromStr>(&self, role: SolverRole, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("{role}: parameter '{key}' is not set")))?;
        raw.trim()
            .parse()
            .map_err(|_| Error::Config(format!("{role}: cannot read '{key}' = '{raw}'")))
    }
}

/// Role-to-parameter-list map. Mutable until [`ParamTree::set_defaults`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamTree {
    roles: BTreeMap<SolverRole, ParamList>,
    finalized: bool,
}

/// A method/role or schema problem reported by [`ParamTree::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub role: SolverRole,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.role, self.message)
    }
}

impl ParamTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one `key = value` entry for `role`. The key `method` selects
    /// the method; other keys must belong to the method's schema (or, while
    /// no method is set yet, to some method's schema).
    pub fn add(&mut self, role: &str, (key, value): (&str, &str)) -> Result<()> {
        if self.finalized {
            return Err(Error::Config(format!("cannot add '{key}' to {role}: parameters are finalized")));
        }
        let role: SolverRole = role.parse()?;
        let list = self.roles.entry(role).or_default();
        if key == "method" {
            list.method = Some(value.trim().parse()?);
            return Ok(());
        }
        let known = match list.method {
            Some(m) => m.schema().iter().any(|p| p.key == key),
            None => spec(key).is_some(),
        };
        if !known {
            let owner = list.method.map(|m| format!(" for method {m}")).unwrap_or_default();
            return Err(Error::Config(format!("{role}: unknown parameter '{key}'{owner}")));
        }
        list.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn add_map(&mut self, role: &str, pairs: &[(&str, &str)]) -> Result<()> {
        // the method goes first so the remaining keys are checked against it
        for &(k, v) in pairs.iter().filter(|p| p.0 == "method") {
            self.add(role, (k, v))?;
        }
        for &(k, v) in pairs.iter().filter(|p| p.0 != "method") {
            self.add(role, (k, v))?;
        }
        Ok(())
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn role(&self, role: SolverRole) -> Option<&ParamList> {
        self.roles.get(&role)
    }

    pub fn method(&self, role: SolverRole) -> Option<Method> {
        self.roles.get(&role).and_then(|l| l.method)
    }

    pub fn roles(&self) -> impl Iterator<Item = (SolverRole, &ParamList)> {
        self.roles.iter().map(|(r, l)| (*r, l))
    }

    /// Fills every unset parameter with its default, adds Gauss-Seidel
    /// smoothers to a multigrid configuration that names none, checks the
    /// values and freezes the tree.
    pub fn set_defaults(&mut self) -> Result<()> {
        if self.finalized {
            return Ok(());
        }
        if self.method(SolverRole::Solver).is_none() {
            return Err(Error::Config("solver: no method given".into()));
        }
        for (role, list) in &self.roles {
            if list.method.is_none() {
                return Err(Error::Config(format!("{role}: no method given")));
            }
        }
        let uses_mg = self.roles.values().any(|l| l.method == Some(Method::MultiGrid));
        if uses_mg {
            for role in [SolverRole::PreSmoother, SolverRole::PostSmoother] {
                self.roles.entry(role).or_insert_with(|| ParamList {
                    method: Some(Method::GaussSeidel),
                    entries: BTreeMap::new(),
                });
            }
        }
        for (&role, list) in self.roles.iter_mut() {
            let method = list.method.unwrap();
            for p in method.schema() {
                list.entries
                    .entry(p.key.to_string())
                    .or_insert_with(|| p.default_for(role).to_string());
            }
            for (k, v) in &list.entries {
                match method.schema().iter().find(|p| p.key == k) {
                    None => return Err(Error::Config(format!("{role}: parameter '{k}' does not apply to {method}"))),
                    Some(p) => p.check(v).map_err(|e| Error::Config(format!("{role}.{k}: {e}")))?,
                }
            }
        }
        self.finalized = true;
        Ok(())
    }

    /// Checks method/role legality and parameter conformance; an empty list
    /// means the tree is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |role, message: String| out.push(Violation { role, message });
        if !self.finalized {
            push(SolverRole::Solver, "parameters are not finalized".into());
        }
        let solver = self.method(SolverRole::Solver);
        let uses_mg = self.roles.values().any(|l| l.method == Some(Method::MultiGrid));
        for (&role, list) in &self.roles {
            let Some(method) = list.method else {
                push(role, "no method given".into());
                continue;
            };
            if !method.allowed_in(role) {
                push(role, format!("{method} cannot be used as {}", role_phrase(role)));
            }
            if role.is_smoother() && !uses_mg {
                push(role, "smoothers require a MultiGrid solver or preconditioner".into());
            }
            if role == SolverRole::Preconditioner {
                if let Some(s) = solver {
                    if !s.takes_preconditioner() {
                        push(role, format!("solver {s} does not take a preconditioner"));
                    }
                }
            }
            for (k, v) in &list.entries {
                match method.schema().iter().find(|p| p.key == k) {
                    None => push(role, format!("parameter '{k}' does not apply to {method}")),
                    Some(p) => {
                        if let Err(e) = p.check(v) {
                            push(role, format!("{k}: {e}"));
                        }
                    }
                }
            }
        }
        if solver.is_none() {
            push(SolverRole::Solver, "no method given".into());
        }
        out
    }

    /// Fails with a configuration error listing every violation.
    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")))
        }
    }

    pub fn get_usize(&self, role: SolverRole, key: &str) -> Result<usize> {
        self.list(role)?.typed(role, key)
    }

    pub fn get_f64(&self, role: SolverRole, key: &str) -> Result<f64> {
        self.list(role)?.typed(role, key)
    }

    pub fn get_str(&self, role: SolverRole, key: &str) -> Result<&str> {
        self.list(role)?
            .get(key)
            .ok_or_else(|| Error::Config(format!("{role}: parameter '{key}' is not set")))
    }

    pub fn get_flag(&self, role: SolverRole, key: &str) -> Result<bool> {
        Ok(self.get_usize(role, key)? != 0)
    }

    fn list(&self, role: SolverRole) -> Result<&ParamList> {
        self.roles
            .get(&role)
            .ok_or_else(|| Error::Config(format!("role {role} is not configured")))
    }
}

fn role_phrase(role: SolverRole) -> &'static str {
    match role {
        SolverRole::Solver => "a solver",
        SolverRole::Preconditioner => "a preconditioner",
        SolverRole::PreSmoother => "a pre-smoother",
        SolverRole::PostSmoother => "a post-smoother",
    }
}

/// Human-readable listing of methods, legal roles and parameters.
pub fn schema_dump() -> String {
    let mut s = String::new();
    for m in Method::ALL {
        let roles: Vec<&str> = SolverRole::ALL.into_iter().filter(|&r| m.allowed_in(r)).map(|r| r.name()).collect();
        s.push_str(&format!("{m} (aliases: {})\n  roles: {}\n", m.aliases().join(", "), roles.join(", ")));
        for p in m.schema() {
            let kind = match p.kind {
                ParamKind::Count { min } => format!("integer >= {min}"),
                ParamKind::Real { positive: true } => "real > 0".to_string(),
                ParamKind::Real { positive: false } => "real".to_string(),
                ParamKind::Choice(o) => o.join("|"),
            };
            let default = if p.default.0 == p.default.1 {
                p.default.0.to_string()
            } else {
                format!("{} (solver), {} (other roles)", p.default.0, p.default.1)
            };
            s.push_str(&format!("  {:<24} {:<34} default {}\n      {}\n", p.key, kind, default, p.help));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amg_bicgstab() -> ParamTree {
        let mut p = ParamTree::new();
        p.add("solver", ("method", "PBiCGStab")).unwrap();
        p.add_map("solver", &[("max_iters", "20")]).unwrap();
        p.add_map(
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
        p.add_map("pre_smoother", &[("method", "Chebyshev"), ("polynomial_order", "2")]).unwrap();
        p.add_map("post_smoother", &[("method", "Chebyshev"), ("polynomial_order", "2")]).unwrap();
        p.set_defaults().unwrap();
        p
    }

    #[test]
    fn legality_table() {
        use SolverRole::*;
        let expected: [(Method, [bool; 3]); 7] = [
            (CG, [true, false, false]),
            (BiCGStab, [true, true, true]),
            (MultiGrid, [true, true, false]),
            (Jacobi, [true, true, true]),
            (GaussSeidel, [true, true, true]),
            (Chebyshev, [false, true, true]),
            (Direct, [true, false, false]),
        ];
        let mut cases = 0;
        for (m, [s, p, sm]) in expected {
            assert_eq!(m.allowed_in(Solver), s, "{m} solver");
            assert_eq!(m.allowed_in(Preconditioner), p, "{m} preconditioner");
            assert_eq!(m.allowed_in(PreSmoother), sm, "{m} pre-smoother");
            assert_eq!(m.allowed_in(PostSmoother), sm, "{m} post-smoother");
            cases += 4;
        }
        assert_eq!(cases, 28);
    }

    #[test]
    fn usage_example_defaults() {
        let mut p = ParamTree::new();
        p.add("solver", ("method", "PBiCGStab")).unwrap();
        p.add("preconditioner", ("method", "Jacobi")).unwrap();
        p.set_defaults().unwrap();
        assert_eq!(p.get_usize(SolverRole::Solver, "max_iters").unwrap(), 100);
        assert_eq!(p.get_f64(SolverRole::Solver, "rel_tolerance").unwrap(), 1e-8);
        assert_eq!(p.get_str(SolverRole::Solver, "variant").unwrap(), "classical");
        assert_eq!(p.get_usize(SolverRole::Preconditioner, "max_iters").unwrap(), 1);
        assert_eq!(p.get_f64(SolverRole::Preconditioner, "weight").unwrap(), 1.0);
        assert!(p.validate().is_empty());
        assert!(p.role(SolverRole::PreSmoother).is_none());
    }

    #[test]
    fn multigrid_config_example() {
        let p = amg_bicgstab();
        assert!(p.validate().is_empty(), "{:?}", p.validate());
        let pc = SolverRole::Preconditioner;
        assert_eq!(p.get_usize(pc, "mg_coarse_matrix_size").unwrap(), 500);
        assert_eq!(p.get_f64(pc, "mg_strength_threshold").unwrap(), 0.25);
        assert_eq!(p.get_usize(pc, "mg_agg_num_levels").unwrap(), 2);
        assert_eq!(p.get_usize(pc, "mg_num_paths").unwrap(), 2);
        assert_eq!(p.get_usize(SolverRole::Solver, "max_iters").unwrap(), 20);
        assert_eq!(p.get_usize(SolverRole::PreSmoother, "polynomial_order").unwrap(), 2);
        assert_eq!(p.method(SolverRole::PostSmoother), Some(Method::Chebyshev));
    }

    #[test]
    fn last_write_wins() {
        let mut p = ParamTree::new();
        p.add("solver", ("method", "CG")).unwrap();
        p.add("solver", ("max_iters", "5")).unwrap();
        p.add("solver", ("max_iters", "7")).unwrap();
        p.set_defaults().unwrap();
        assert_eq!(p.get_usize(SolverRole::Solver, "max_iters").unwrap(), 7);
    }

    #[test]
    fn closed_role_and_key_sets() {
        let mut p = ParamTree::new();
        assert!(matches!(p.add("smoother", ("method", "Jacobi")), Err(Error::Config(_))));
        p.add("solver", ("method", "CG")).unwrap();
        let err = p.add("solver", ("weight", "0.5")).unwrap_err().to_string();
        assert!(err.contains("weight"), "{err}");
        let err = p.add("solver", ("bogus_key", "1")).unwrap_err().to_string();
        assert!(err.contains("bogus_key"));
        assert!(p.add("solver", ("method", "NotAMethod")).is_err());
    }

    #[test]
    fn empty_tree_is_rejected() {
        assert!(matches!(ParamTree::new().set_defaults(), Err(Error::Config(_))));
        let mut p = ParamTree::new();
        p.add("preconditioner", ("method", "Jacobi")).unwrap();
        assert!(p.set_defaults().is_err());
    }

    #[test]
    fn write_after_finalize() {
        let mut p = amg_bicgstab();
        assert!(p.add("solver", ("max_iters", "3")).is_err());
    }

    #[test]
    fn illegal_roles_are_violations() {
        let mut p = ParamTree::new();
        p.add("solver", ("method", "Chebyshev")).unwrap();
        p.set_defaults().unwrap();
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("Chebyshev cannot be used as a solver"));

        let mut p = ParamTree::new();
        p.add("solver", ("method", "CG")).unwrap();
        p.add("preconditioner", ("method", "Direct")).unwrap();
        p.set_defaults().unwrap();
        assert!(p.validate().iter().any(|v| v.role == SolverRole::Preconditioner));
    }

    #[test]
    fn bad_values_fail_at_finalize() {
        let mut p = ParamTree::new();
        p.add_map("solver", &[("method", "BiCGStab"), ("variant", "sideways")]).unwrap();
        let err = p.set_defaults().unwrap_err().to_string();
        assert!(err.contains("variant"));
        let mut p = ParamTree::new();
        p.add_map("solver", &[("max_iters", "-3"), ("method", "CG")]).unwrap();
        assert!(p.set_defaults().is_err());
    }

    #[test]
    fn multigrid_gets_default_smoothers() {
        let mut p = ParamTree::new();
        p.add("solver", ("method", "MultiGrid")).unwrap();
        p.set_defaults().unwrap();
        assert_eq!(p.method(SolverRole::PreSmoother), Some(Method::GaussSeidel));
        assert_eq!(p.get_str(SolverRole::PostSmoother, "direction").unwrap(), "symmetric");
        assert!(p.validate().is_empty());
    }

    #[test]
    fn set_defaults_is_idempotent() {
        let mut p = amg_bicgstab();
        let before = p.clone();
        p.set_defaults().unwrap();
        let _ = p.validate();
        assert_eq!(p, before);
    }

    #[test]
    fn aliases_resolve() {
        for (s, m) in [("PCG", CG), ("Gauss-Seidel", GaussSeidel), ("GS", GaussSeidel), ("PBiCGStab", BiCGStab)] {
            assert_eq!(s.parse::<Method>().unwrap(), m);
        }
    }

    #[test]
    fn dump_lists_every_method() {
        let d = schema_dump();
        for m in Method::ALL {
            assert!(d.contains(m.name()));
        }
        assert!(d.contains("mg_num_paths"));
    }
}
