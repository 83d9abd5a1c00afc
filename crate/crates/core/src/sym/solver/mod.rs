//! The solver contract and its two backends: a bit-blasting CDCL solver for
//! production and a brute-force enumerator used as a test oracle.

mod blast;
pub mod sat;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};

use super::expr::{mask, Expr};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// A total assignment for the variables of a query.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Model {
    values: BTreeMap<Arc<str>, u128>,
}

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    pub fn get(&self, name: &str) -> Option<u128> {
        self.values.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<Arc<str>>, value: u128) {
        self.values.insert(name.into(), value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u128)> {
        self.values.iter().map(|(k, v)| (k.as_ref(), *v))
    }

    pub fn merge(&mut self, other: &Model) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), *v);
        }
    }

    /// Evaluates `e`; unassigned variables read as zero.
    pub fn eval(&self, e: &Expr) -> u128 {
        e.eval_with(&mut |n, _| self.get(n).unwrap_or(0))
    }

    pub fn satisfies(&self, e: &Expr) -> bool {
        self.eval(e) == 1
    }

    pub fn satisfies_all<'a>(&self, cs: impl IntoIterator<Item = &'a Expr>) -> bool {
        cs.into_iter().all(|c| self.satisfies(c))
    }

    /// Keeps only the named variables.
    pub fn restrict(&self, names: &BTreeSet<Arc<str>>) -> Model {
        Model {
            values: self
                .values
                .iter()
                .filter(|(k, _)| names.contains(*k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.values.iter().map(|(k, v)| (k, format!("{v:#x}"))))
            .finish()
    }
}

impl Serialize for Model {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.values.len()))?;
        for (k, v) in &self.values {
            m.serialize_entry(k.as_ref(), &format!("{v:#x}"))?;
        }
        m.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
    /// The budget ran out; carries a short reason.
    Unknown(String),
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveResult::Unsat)
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            SolveResult::Sat(m) => Some(m),
            _ => None,
        }
    }
}

pub trait Solver: Send + Sync {
    /// Decides the conjunction of boolean `constraints`. A `hint` model is
    /// tried first; SAT answers are validated against every constraint.
    fn check(&self, constraints: &[Expr], hint: Option<&Model>) -> SolveResult;
}

/// Groups constraints whose variable sets overlap (union-find on names).
fn slices(cs: &[Expr]) -> Vec<(Vec<Expr>, BTreeSet<(Arc<str>, u32)>)> {
    let vars: Vec<BTreeSet<(Arc<str>, u32)>> = cs.iter().map(|c| c.vars()).collect();
    let mut parent: Vec<usize> = (0..cs.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut owner: BTreeMap<Arc<str>, usize> = BTreeMap::new();
    for (i, vs) in vars.iter().enumerate() {
        for (n, _) in vs {
            match owner.get(n) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(n.clone(), i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<Expr>, BTreeSet<(Arc<str>, u32)>)> = BTreeMap::new();
    for (i, c) in cs.iter().enumerate() {
        let r = find(&mut parent, i);
        let g = groups.entry(r).or_default();
        g.0.push(c.clone());
        g.1.extend(vars[i].iter().cloned());
    }
    groups.into_values().collect()
}

/// Common pre-processing: constant constraints, hint reuse and slicing.
/// `solve_slice` handles each independent group not covered by the hint.
fn check_with(
    constraints: &[Expr],
    hint: Option<&Model>,
    mut solve_slice: impl FnMut(&[Expr], &BTreeSet<(Arc<str>, u32)>) -> SolveResult,
) -> SolveResult {
    let mut live = Vec::with_capacity(constraints.len());
    for c in constraints {
        assert!(c.is_bool(), "constraint must be boolean: {c}");
        match c.as_const() {
            Some(1) => {}
            Some(_) => return SolveResult::Unsat,
            None => live.push(c.clone()),
        }
    }
    if let Some(h) = hint {
        if h.satisfies_all(&live) {
            let names: BTreeSet<Arc<str>> = live.iter().flat_map(|c| c.vars()).map(|(n, _)| n).collect();
            return SolveResult::Sat(total(h.restrict(&names), &live));
        }
    }
    let mut model = Model::new();
    for (group, vars) in slices(&live) {
        if let Some(h) = hint {
            if h.satisfies_all(&group) {
                let names = vars.iter().map(|(n, _)| n.clone()).collect();
                model.merge(&h.restrict(&names));
                continue;
            }
        }
        match solve_slice(&group, &vars) {
            SolveResult::Sat(m) => model.merge(&m),
            other => return other,
        }
    }
    let model = total(model, &live);
    assert!(
        model.satisfies_all(&live),
        "solver produced a model that violates its constraints"
    );
    SolveResult::Sat(model)
}

/// Fills in zero for any variable the model leaves unassigned.
fn total(mut m: Model, cs: &[Expr]) -> Model {
    for c in cs {
        for (n, _) in c.vars() {
            if m.get(&n).is_none() {
                m.set(n, 0);
            }
        }
    }
    m
}

/// Bit-blasts each independent slice and runs the CDCL solver on it.
#[derive(Debug, Clone)]
pub struct BitBlastSolver {
    pub timeout: Duration,
}

impl Default for BitBlastSolver {
    fn default() -> Self {
        BitBlastSolver {
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl BitBlastSolver {
    pub fn with_timeout(timeout: Duration) -> Self {
        BitBlastSolver { timeout }
    }
}

impl Solver for BitBlastSolver {
    fn check(&self, constraints: &[Expr], hint: Option<&Model>) -> SolveResult {
        let deadline = Instant::now() + self.timeout;
        check_with(constraints, hint, |group, _| {
            let mut b = blast::Blaster::new();
            for c in group {
                b.assert_true(c);
            }
            match b.sat.solve(Some(deadline)) {
                sat::SatResult::Unsat => SolveResult::Unsat,
                sat::SatResult::Unknown => {
                    SolveResult::Unknown(format!("solver budget of {:?} exhausted", self.timeout))
                }
                sat::SatResult::Sat => {
                    let mut m = Model::new();
                    for (name, bits) in &b.vars {
                        m.set(name.clone(), b.read_var(bits));
                    }
                    SolveResult::Sat(m)
                }
            }
        })
    }
}

/// Exhaustive enumeration over all assignments, in ascending order of the
/// variables' values. Only usable when the total number of free bits is small.
#[derive(Debug, Clone)]
pub struct EnumSolver {
    pub max_bits: u32,
}

impl Default for EnumSolver {
    fn default() -> Self {
        EnumSolver { max_bits: 24 }
    }
}

impl Solver for EnumSolver {
    fn check(&self, constraints: &[Expr], hint: Option<&Model>) -> SolveResult {
        check_with(constraints, hint, |group, vars| {
            let vars: Vec<(Arc<str>, u32)> = vars.iter().cloned().collect();
            let bits: u32 = vars.iter().map(|(_, w)| w).sum();
            if bits > self.max_bits {
                return SolveResult::Unknown(format!("{bits} free bits exceed enumeration limit"));
            }
            for code in 0u64..(1u64 << bits) {
                let mut m = Model::new();
                let mut shift = 0;
                for (n, w) in &vars {
                    m.set(n.clone(), (u128::from(code) >> shift) & mask(*w));
                    shift += w;
                }
                if m.satisfies_all(group) {
                    return SolveResult::Sat(m);
                }
            }
            SolveResult::Unsat
        })
    }
}

#[cfg(test)]
mod tests;
