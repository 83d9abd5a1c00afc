//! The symbolic interpreter: executes WASM over [`ExecState`]s, forks on
//! symbolic control flow and routes imports to the host environment.

mod float;
mod interp;
mod state;

use std::time::{Duration, Instant};

use crate::chain::OnChainDB;
use crate::host::ActionContext;
use crate::sym::{BitBlastSolver, Expr, SolveResult, Solver, SymMemory, SymValue};
use crate::wasm::{ConstExpr, ImportKind, ValType, WasmModule};

pub use float::eval_float;
pub use state::{Event, ExecState, HostCallRecord, OverflowSite, Pc, Status};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Budget {
    pub max_instructions: u64,
    /// Iterations allowed per loop header and activation.
    pub loop_bound: u32,
    pub max_states: usize,
    pub solver_timeout: Duration,
    /// Wall-clock limit for one `run_action`.
    pub action_time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_instructions: 1_000_000,
            loop_bound: 16,
            max_states: 4096,
            solver_timeout: crate::sym::solver::DEFAULT_TIMEOUT,
            action_time: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverflowMode {
    Off,
    /// Double-width wrap feasibility, both signedness views.
    #[default]
    Wide,
    /// Result equals one of the representable bounds.
    Literal,
}

#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    pub budget: Budget,
    pub overflow: OverflowMode,
    /// Replace DB emulation with seeded random return values.
    pub coarse_db: Option<u64>,
}

/// Terminal states of one action plus run-level notes.
#[derive(Debug, Default)]
pub struct ActionRun {
    pub terminals: Vec<ExecState>,
    pub diagnostics: Vec<String>,
    pub forks: u64,
}

pub struct Engine<'m> {
    pub module: &'m WasmModule,
    pub config: EngineConfig,
    pub solver: BitBlastSolver,
    entry: u32,
    /// Function table 0 after element initialization.
    pub(crate) table: Vec<Option<u32>>,
}

impl<'m> Engine<'m> {
    pub fn new(module: &'m WasmModule, config: EngineConfig) -> Result<Self, crate::wasm::LoadError> {
        let entry = module.find_entry()?;
        let solver = BitBlastSolver::with_timeout(config.budget.solver_timeout);
        let mut table: Vec<Option<u32>> = Vec::new();
        for seg in module.elements.iter().filter(|e| e.table == 0) {
            let off = const_value(&seg.offset, &[]).as_u64().unwrap_or(0) as usize;
            if table.len() < off + seg.functions.len() {
                table.resize(off + seg.functions.len(), None);
            }
            for (i, f) in seg.functions.iter().enumerate() {
                table[off + i] = Some(*f);
            }
        }
        Ok(Engine {
            module,
            config,
            solver,
            entry,
            table,
        })
    }

    /// Instantiates the module: memory, data segments and globals.
    fn seed(&self, db: &OnChainDB) -> ExecState {
        let m = self.module;
        let limits = m.memory_limits();
        let mut mem = SymMemory::new(limits.map_or(0, |l| l.min), limits.and_then(|l| l.max));
        let mut globals: Vec<SymValue> = m
            .imports
            .iter()
            .filter_map(|i| match i.kind {
                ImportKind::Global(g) => Some(zero(g.ty)),
                _ => None,
            })
            .collect();
        for g in &m.globals {
            let v = const_value(&g.init, &globals);
            globals.push(v);
        }
        for seg in &m.data {
            let off = const_value(&seg.offset, &globals).as_u64().unwrap_or(0);
            // out-of-range segments would fail instantiation; keep what fits
            let _ = mem.write_concrete(off, &seg.bytes);
        }
        ExecState {
            id: 0,
            db: db.clone(),
            mem,
            constraints: Default::default(),
            ret: None,
            stack: Vec::new(),
            frames: Vec::new(),
            globals,
            trace: Vec::new(),
            events: Vec::new(),
            overflow_sites: Vec::new(),
            status: Status::Running,
            diagnostics: Vec::new(),
            concretized: false,
            depth: 0,
            host_seq: 0,
            env_values: Vec::new(),
        }
    }

    /// Explores `apply(receiver, code, action)` to quiescence.
    pub fn run_action(&self, ctx: &ActionContext, db: &OnChainDB) -> ActionRun {
        self.run_action_seeded(ctx, db, &[])
    }

    /// Like [`Engine::run_action`] with extra initial constraints on the
    /// action-data variables.
    pub fn run_action_seeded(&self, ctx: &ActionContext, db: &OnChainDB, seed: &[Expr]) -> ActionRun {
        let mut s = self.seed(db);
        for c in seed {
            s.constraints.push_unchecked(c.clone());
        }
        s.constraints.check(&self.solver);
        let args = [ctx.receiver, ctx.code, ctx.action].map(SymValue::i64);
        let mut run = Run {
            eng: self,
            ctx,
            diagnostics: Vec::new(),
            next_id: 1,
            forks: 0,
            deadline: self.config.budget.action_time.map(|d| Instant::now() + d),
        };
        run.enter(&mut s, self.entry, args.to_vec());
        let mut work = vec![s];
        let mut terminals = Vec::new();
        while let Some(mut s) = work.pop() {
            if run.deadline.is_some_and(|d| Instant::now() >= d) {
                s.truncate("action time budget exhausted");
                terminals.push(s);
                continue;
            }
            let succ = run.exec(s);
            if succ.len() > 1 {
                run.forks += 1;
            }
            let mut fresh = Vec::new();
            for mut t in succ {
                if t.status.is_terminal() {
                    terminals.push(t);
                } else {
                    t.id = run.next_id;
                    run.next_id += 1;
                    fresh.push(t);
                }
            }
            // push in reverse so the first successor is explored first
            for mut t in fresh.into_iter().rev() {
                if work.len() >= self.config.budget.max_states {
                    t.truncate("in-flight state cap reached");
                    run.diagnostics.push(format!("state {} truncated: in-flight cap", t.id));
                    terminals.push(t);
                } else {
                    work.push(t);
                }
            }
        }
        terminals.sort_by_key(|s| s.id);
        ActionRun {
            terminals,
            diagnostics: run.diagnostics,
            forks: run.forks,
        }
    }
}

fn zero(ty: ValType) -> SymValue {
    SymValue::con(0, ty.bits())
}

fn const_value(e: &ConstExpr, globals: &[SymValue]) -> SymValue {
    match e {
        ConstExpr::I32(v) => SymValue::i32(*v as u32),
        ConstExpr::I64(v) => SymValue::i64(*v as u64),
        ConstExpr::F32(b) => SymValue::i32(*b),
        ConstExpr::F64(b) => SymValue::i64(*b),
        ConstExpr::GlobalGet(i) => globals.get(*i as usize).cloned().unwrap_or(SymValue::i32(0)),
    }
}

/// Mutable bookkeeping for one `run_action`.
pub(crate) struct Run<'r, 'm> {
    pub eng: &'r Engine<'m>,
    pub ctx: &'r ActionContext,
    pub diagnostics: Vec<String>,
    next_id: u64,
    forks: u64,
    deadline: Option<Instant>,
}

impl Run<'_, '_> {
    pub fn solver(&self) -> &dyn Solver {
        &self.eng.solver
    }

    /// A copy of `s` with `c` appended, or `None` if θ ∧ c is not known SAT.
    pub fn assume(&mut self, s: &ExecState, c: Expr) -> Option<ExecState> {
        match c.as_const() {
            Some(1) => return Some(s.clone()),
            Some(_) => return None,
            None => {}
        }
        if s.constraints.witness().is_some_and(|w| w.satisfies(&c)) {
            let mut t = s.clone();
            t.constraints.push_unchecked(c);
            return Some(t);
        }
        match s.constraints.check_with(&c, self.solver()) {
            SolveResult::Sat(m) => {
                let mut t = s.clone();
                t.constraints.push_with_model(c, m);
                Some(t)
            }
            SolveResult::Unsat => None,
            SolveResult::Unknown(r) => {
                self.diagnostics.push(format!("fork dropped at {:?}: solver unknown ({r})", s.pc()));
                None
            }
        }
    }

    /// Splits `s` over mutually exclusive conditions; infeasible sides drop.
    pub fn fork(&mut self, s: ExecState, conds: Vec<Expr>) -> Vec<(usize, ExecState)> {
        let n = conds.len();
        let mut out = Vec::new();
        for (i, c) in conds.into_iter().enumerate() {
            if let Some(mut t) = self.assume(&s, c) {
                if n > 1 {
                    t.depth += 1;
                }
                out.push((i, t));
            }
        }
        out
    }

    /// Pins a symbolic value to the path's model, appending the equality.
    pub fn pin(&mut self, s: &mut ExecState, v: &SymValue, what: &str) -> Option<u128> {
        if let Some(x) = v.as_con() {
            return Some(x);
        }
        let model = match s.constraints.witness() {
            Some(m) => m.clone(),
            None => match s.constraints.check(self.solver()) {
                SolveResult::Sat(m) => m,
                _ => {
                    s.abort(format!("could not concretize {what}"));
                    return None;
                }
            },
        };
        let e = v.expr();
        let x = model.eval(&e);
        s.constraints.push_with_model(Expr::eq(e.clone(), Expr::constant(x, e.width())), model);
        s.concretized = true;
        s.diagnostics.push(format!("concretized {what} to {x:#x}"));
        Some(x)
    }

    /// Resolves an i32 address operand; aborts `s` when unresolvable.
    pub fn address(&mut self, s: &mut ExecState, v: &SymValue) -> Option<u64> {
        match crate::sym::memory::resolve_address(v, &mut s.constraints, self.solver()) {
            Ok((a, diag)) => {
                if let Some(d) = diag {
                    s.concretized = true;
                    s.diagnostics.push(format!("concretized address {} to {:#x}", d.expr, d.value));
                }
                Some(a & 0xFFFF_FFFF)
            }
            Err(e) => {
                s.abort(e.to_string());
                None
            }
        }
    }
}
