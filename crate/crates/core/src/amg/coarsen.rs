use std::cmp::Reverse;
use std::collections::BTreeSet;

use crate::amg::StrengthGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointKind {
    C,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarsenPass {
    Standard,
    /// Distance-two coarsening: `j` counts as strong for `i` when at least
    /// `num_paths` strong paths of length one or two connect them.
    Aggressive { num_paths: usize },
}

/// C/F splitting of the points of one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splitting {
    kinds: Vec<PointKind>,
}

impl Splitting {
    pub fn new(kinds: Vec<PointKind>) -> Self {
        Splitting { kinds }
    }

    pub fn kinds(&self) -> &[PointKind] {
        &self.kinds
    }

    pub fn is_c(&self, i: usize) -> bool {
        self.kinds[i] == PointKind::C
    }

    pub fn num_coarse(&self) -> usize {
        self.kinds.iter().filter(|&&k| k == PointKind::C).count()
    }

    /// Coarse index of every C point (C points numbered in fine order).
    pub fn coarse_index(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.kinds
            .iter()
            .map(|&k| {
                (k == PointKind::C).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    }

    pub fn make_coarse(&mut self, i: usize) {
        self.kinds[i] = PointKind::C;
    }
}

pub fn coarsen(s: &StrengthGraph, pass: CoarsenPass) -> Splitting {
    match pass {
        CoarsenPass::Standard => standard(s),
        CoarsenPass::Aggressive { num_paths } => aggressive(s, num_paths.max(1)),
    }
}

/// Ruge-Stueben first pass (greedy by measure `|S^T_i|`, lowest index on
/// ties) followed by the second pass that gives every strong F-F pair a
/// common C point.
fn standard(s: &StrengthGraph) -> Splitting {
    let mut state = first_pass(s);
    second_pass(s, &mut state);
    Splitting::new(state)
}

fn first_pass(s: &StrengthGraph) -> Vec<PointKind> {
    let n = s.n();
    let st = s.transpose();
    let mut lambda: Vec<usize> = (0..n).map(|i| st.row(i).len()).collect();
    let mut state: Vec<Option<PointKind>> = vec![None; n];
    let mut queue: BTreeSet<(Reverse<usize>, usize)> = (0..n).map(|i| (Reverse(lambda[i]), i)).collect();

    let bump = |queue: &mut BTreeSet<(Reverse<usize>, usize)>, lambda: &mut Vec<usize>, k: usize, up: bool| {
        queue.remove(&(Reverse(lambda[k]), k));
        if up {
            lambda[k] += 1;
        } else {
            lambda[k] = lambda[k].saturating_sub(1);
        }
        queue.insert((Reverse(lambda[k]), k));
    };

    while let Some(&(Reverse(l), i)) = queue.first() {
        if l == 0 {
            break;
        }
        queue.remove(&(Reverse(l), i));
        state[i] = Some(PointKind::C);
        for &j in st.row(i) {
            if state[j].is_some() {
                continue;
            }
            state[j] = Some(PointKind::F);
            queue.remove(&(Reverse(lambda[j]), j));
            for &k in s.row(j) {
                if state[k].is_none() {
                    bump(&mut queue, &mut lambda, k, true);
                }
            }
        }
        for &k in s.row(i) {
            if state[k].is_none() {
                bump(&mut queue, &mut lambda, k, false);
            }
        }
    }
    // leftovers: F if they already see a strong C point, otherwise C
    for i in 0..n {
        if state[i].is_none() {
            let has_c = s.row(i).iter().any(|&k| state[k] == Some(PointKind::C));
            state[i] = Some(if has_c { PointKind::F } else { PointKind::C });
        }
    }
    state.into_iter().map(Option::unwrap).collect()
}

fn second_pass(s: &StrengthGraph, state: &mut [PointKind]) {
    for i in 0..s.n() {
        if state[i] != PointKind::F {
            continue;
        }
        for &j in s.row(i) {
            if state[j] != PointKind::F {
                continue;
            }
            let shares = s.row(j).iter().any(|&k| state[k] == PointKind::C && s.is_strong(i, k));
            if !shares {
                state[j] = PointKind::C;
            }
        }
    }
}

fn aggressive(s: &StrengthGraph, num_paths: usize) -> Splitting {
    let first = standard(s);
    let cidx = first.coarse_index();
    let cpoints: Vec<usize> = (0..s.n()).filter(|&i| first.is_c(i)).collect();
    let mut count = vec![0usize; cpoints.len()];
    let mut touched = Vec::new();
    let mut rows = Vec::with_capacity(cpoints.len());
    for &i in &cpoints {
        let me = cidx[i].unwrap();
        let hit = |l: usize, count: &mut Vec<usize>, touched: &mut Vec<usize>| {
            if let Some(c) = cidx[l] {
                if c != me {
                    if count[c] == 0 {
                        touched.push(c);
                    }
                    count[c] += 1;
                }
            }
        };
        for &k in s.row(i) {
            hit(k, &mut count, &mut touched);
            for &l in s.row(k) {
                hit(l, &mut count, &mut touched);
            }
        }
        let mut row: Vec<usize> = touched.iter().copied().filter(|&c| count[c] >= num_paths).collect();
        row.sort_unstable();
        for &c in &touched {
            count[c] = 0;
        }
        touched.clear();
        rows.push(row);
    }
    let s2 = StrengthGraph::from_rows(rows);
    let second = standard(&s2);
    let mut kinds = vec![PointKind::F; s.n()];
    for (c, &i) in cpoints.iter().enumerate() {
        if second.is_c(c) {
            kinds[i] = PointKind::C;
        }
    }
    Splitting::new(kinds)
}
