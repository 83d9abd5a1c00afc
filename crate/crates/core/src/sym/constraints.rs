use std::sync::Arc;

use super::expr::Expr;
use super::solver::{Model, SolveResult, Solver};

/// The path condition θ: an append-only conjunction of boolean constraints,
/// plus the last model known to satisfy it.
#[derive(Clone, Default)]
pub struct PathConstraints {
    items: Arc<Vec<Expr>>,
    witness: Option<Model>,
}

impl PathConstraints {
    pub fn new() -> Self {
        PathConstraints::default()
    }

    pub fn as_slice(&self) -> &[Expr] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Expr> {
        self.items.iter()
    }

    pub fn witness(&self) -> Option<&Model> {
        self.witness.as_ref()
    }

    /// Appends without a feasibility check. Trivially-true constraints are
    /// skipped. Callers must know the result is satisfiable.
    pub fn push_unchecked(&mut self, c: Expr) {
        assert!(c.is_bool(), "path constraint must be boolean");
        if c.as_const() == Some(1) {
            return;
        }
        if let Some(w) = &self.witness {
            if !w.satisfies(&c) {
                self.witness = None;
            }
        }
        Arc::make_mut(&mut self.items).push(c);
    }

    /// Appends `c` with a known model of the extended set.
    pub fn push_with_model(&mut self, c: Expr, model: Model) {
        self.push_unchecked(c);
        self.witness = Some(model);
    }

    /// Checks θ ∧ `c`. On SAT the constraint is appended and the model kept.
    pub fn assume(&mut self, c: Expr, solver: &dyn Solver) -> SolveResult {
        let r = self.check_with(&c, solver);
        if let SolveResult::Sat(m) = &r {
            self.push_with_model(c, m.clone());
        }
        r
    }

    /// Checks θ ∧ `c` without modifying θ.
    pub fn check_with(&self, c: &Expr, solver: &dyn Solver) -> SolveResult {
        let mut all: Vec<Expr> = Vec::with_capacity(self.items.len() + 1);
        all.extend(self.items.iter().cloned());
        all.push(c.clone());
        solver.check(&all, self.witness.as_ref())
    }

    /// `solver_check(θ)`.
    pub fn check(&mut self, solver: &dyn Solver) -> SolveResult {
        let r = solver.check(&self.items, self.witness.as_ref());
        if let SolveResult::Sat(m) = &r {
            self.witness = Some(m.clone());
        }
        r
    }
}

impl std::fmt::Debug for PathConstraints {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.items.iter()).finish()
    }
}

/// `solver_check` over a constraint set.
pub fn solver_check(cs: &PathConstraints, solver: &dyn Solver) -> SolveResult {
    solver.check(cs.as_slice(), cs.witness())
}
