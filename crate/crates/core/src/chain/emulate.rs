//! Emulation of the `db_*_i64` API over execution-state components.
//!
//! Each call yields one or more [`Outcome`]s. Concrete arguments produce a
//! single outcome; symbolic ones fork into per-row outcomes, each carrying the
//! constraint that selects it. The engine applies outcomes to state clones.

use super::db::{DbError, DbMutation, Handle, IterPos, MutationOp, OnChainDB, TableId, NO_ITER};
use crate::sym::expr::CmpOp;
use crate::sym::memory::MemError;
use crate::sym::{Expr, Model, PathConstraints, SolveResult, Solver, SymMemory, SymValue, TaintLabel, TaintOrigin, Taints};

/// Read-only view of the state parts the emulator needs.
pub struct EmuCtx<'a> {
    pub db: &'a OnChainDB,
    pub mem: &'a SymMemory,
    pub pc: &'a PathConstraints,
    pub solver: &'a dyn Solver,
    /// The executing contract; owner of every table it writes.
    pub receiver: u64,
    /// Per-path ordinal of this host call, used in taint labels.
    pub ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Abort {
    Db(DbError),
    Mem(MemError),
    /// A symbolic argument could not be concretized.
    Unresolved(String),
}

impl std::fmt::Display for Abort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Abort::Db(e) => write!(f, "{e}"),
            Abort::Mem(e) => write!(f, "{e}"),
            Abort::Unresolved(r) => write!(f, "{r}"),
        }
    }
}

/// One successor of an emulated call.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    /// Added to θ; `None` when the outcome needs no assumption.
    pub constraint: Option<Expr>,
    /// A model of θ ∧ constraint, when one was computed.
    pub model: Option<Model>,
    pub ret: Option<SymValue>,
    pub mem_writes: Vec<(u64, Vec<SymValue>)>,
    pub mutation: Option<DbMutation>,
    /// Set when this successor terminates with a rollback.
    pub abort: Option<Abort>,
    pub diagnostics: Vec<String>,
}

impl Outcome {
    fn ret(v: Handle) -> Outcome {
        Outcome {
            ret: Some(SymValue::i32(v as u32)),
            ..Outcome::default()
        }
    }

    fn abort(a: Abort) -> Outcome {
        Outcome {
            abort: Some(a),
            ..Outcome::default()
        }
    }

    fn when(mut self, c: Option<Expr>) -> Outcome {
        self.constraint = match (self.constraint.take(), c) {
            (None, c) | (c, None) => c,
            (Some(a), Some(b)) => Some(Expr::and(a, b)),
        };
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct EmuResult {
    pub outcomes: Vec<Outcome>,
    /// Notes about dropped forks (solver UNKNOWN).
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Find,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Next,
    Previous,
}

fn k64(v: u64) -> Expr {
    Expr::constant(u128::from(v), 64)
}

fn h32(h: Handle) -> Expr {
    Expr::constant(u128::from(h as u32), 32)
}

fn conj(a: Option<Expr>, b: Expr) -> Option<Expr> {
    Some(match a {
        None => b,
        Some(a) => Expr::and(a, b),
    })
}

impl EmuCtx<'_> {
    fn chain_taint(&self, site: &str) -> Taints {
        Taints::single(TaintLabel::new(TaintOrigin::ChainData, site, self.ordinal))
    }

    /// Keeps feasible outcomes, attaching models; UNKNOWN drops with a note.
    fn filter(&self, candidates: Vec<Outcome>) -> EmuResult {
        let mut res = EmuResult::default();
        for mut o in candidates {
            match &o.constraint {
                None => res.outcomes.push(o),
                Some(c) => match self.pc.check_with(c, self.solver) {
                    SolveResult::Sat(m) => {
                        o.model = Some(m);
                        res.outcomes.push(o);
                    }
                    SolveResult::Unsat => {}
                    SolveResult::Unknown(r) => res.diagnostics.push(format!("fork dropped: {r}")),
                },
            }
        }
        res
    }

    fn base_model(&self) -> Result<Model, Abort> {
        if let Some(m) = self.pc.witness() {
            return Ok(m.clone());
        }
        match self.solver.check(self.pc.as_slice(), None) {
            SolveResult::Sat(m) => Ok(m),
            SolveResult::Unsat => Err(Abort::Unresolved("path is infeasible".into())),
            SolveResult::Unknown(r) => Err(Abort::Unresolved(r)),
        }
    }

    /// Candidate tables for possibly symbolic (code, scope, table), each with
    /// its selecting constraint; `None` stands for "no such table".
    fn tables_for(&self, code: &SymValue, scope: &SymValue, table: &SymValue) -> Vec<(Option<Expr>, Option<TableId>)> {
        if let (Some(c), Some(s), Some(t)) = (code.as_u64(), scope.as_u64(), table.as_u64()) {
            let id = TableId::new(c, s, t);
            return vec![(None, self.db.table(&id).map(|_| id))];
        }
        let parts = [code, scope, table];
        let mut out = Vec::new();
        let mut misses = Vec::new();
        for t in self.db.tables() {
            let vals = [t.id.owner, t.id.scope, t.id.name];
            if parts.iter().zip(vals).any(|(p, v)| p.as_u64().is_some_and(|x| x != v)) {
                continue;
            }
            let m = Expr::all(
                parts
                    .iter()
                    .zip(vals)
                    .filter(|(p, _)| p.is_sym())
                    .map(|(p, v)| Expr::eq(p.expr(), k64(v))),
            );
            misses.push(Expr::not(m.clone()));
            out.push((Some(m), Some(t.id)));
        }
        out.push((Some(Expr::all(misses)), None));
        out
    }

    fn pin(&self, m: &Model, v: &SymValue, what: &str, diags: &mut Vec<String>, pins: &mut Option<Expr>) -> u128 {
        match v.as_con() {
            Some(x) => x,
            None => {
                let x = m.eval(&v.expr());
                diags.push(format!("concretized {what} to {x:#x}"));
                *pins = conj(pins.take(), Expr::eq(v.expr(), Expr::constant(x, v.width())));
                x
            }
        }
    }

    fn check_range(&self, addr: u64, len: u64) -> Result<(), Abort> {
        match addr.checked_add(len) {
            Some(end) if end <= self.mem.size() => Ok(()),
            _ => Err(Abort::Mem(MemError::OutOfBounds { addr, len })),
        }
    }
}

/// `db_find_i64`, `db_lowerbound_i64`, `db_upperbound_i64`.
pub fn emu_lookup(ctx: &EmuCtx, mode: Lookup, code: &SymValue, scope: &SymValue, table: &SymValue, id: &SymValue) -> EmuResult {
    let mut cands = Vec::new();
    for (tc, tid) in ctx.tables_for(code, scope, table) {
        let Some(tid) = tid else {
            cands.push(Outcome::abort(Abort::Db(DbError::TableAbsent)).when(tc));
            continue;
        };
        let t = ctx.db.table(&tid).unwrap();
        let rows: Vec<(u64, Handle)> = t.rows.iter().map(|(k, r)| (*k, r.handle)).collect();
        if let Some(idv) = id.as_u64() {
            let hit = match mode {
                Lookup::Find => rows.iter().find(|r| r.0 == idv),
                Lookup::Lower => rows.iter().find(|r| r.0 >= idv),
                Lookup::Upper => rows.iter().find(|r| r.0 > idv),
            };
            cands.push(Outcome::ret(hit.map_or(t.end(), |r| r.1)).when(tc));
            continue;
        }
        let x = id.expr();
        let lt = |a: Expr, b: Expr| Expr::cmp(CmpOp::Ult, a, b);
        let le = |a: Expr, b: Expr| Expr::cmp(CmpOp::Ule, a, b);
        for (i, &(k, h)) in rows.iter().enumerate() {
            let c = match mode {
                Lookup::Find => Expr::eq(k64(k), x.clone()),
                Lookup::Lower => {
                    let upper = le(x.clone(), k64(k));
                    match i {
                        0 => upper,
                        _ => Expr::and(lt(k64(rows[i - 1].0), x.clone()), upper),
                    }
                }
                Lookup::Upper => {
                    let upper = lt(x.clone(), k64(k));
                    match i {
                        0 => upper,
                        _ => Expr::and(le(k64(rows[i - 1].0), x.clone()), upper),
                    }
                }
            };
            cands.push(Outcome::ret(h).when(tc.clone()).when(Some(c)));
        }
        let end_c = match (mode, rows.last()) {
            (_, None) => None,
            (Lookup::Find, _) => Some(Expr::all(rows.iter().map(|r| Expr::ne(k64(r.0), x.clone())))),
            (Lookup::Lower, Some(last)) => Some(lt(k64(last.0), x.clone())),
            (Lookup::Upper, Some(last)) => Some(le(k64(last.0), x.clone())),
        };
        cands.push(Outcome::ret(t.end()).when(tc).when(end_c));
    }
    ctx.filter(cands)
}

/// `db_end_i64`: End handle of an existing table, else [`NO_ITER`].
pub fn emu_end(ctx: &EmuCtx, code: &SymValue, scope: &SymValue, table: &SymValue) -> EmuResult {
    let cands = ctx
        .tables_for(code, scope, table)
        .into_iter()
        .map(|(tc, tid)| {
            let h = tid.map_or(NO_ITER, |t| ctx.db.table(&t).unwrap().end());
            Outcome::ret(h).when(tc)
        })
        .collect();
    ctx.filter(cands)
}

fn get_concrete(ctx: &EmuCtx, h: Handle, data: u64, len: u64) -> Outcome {
    let Some((_, _, row)) = ctx.db.row(h) else {
        return Outcome::abort(Abort::Db(DbError::BadIterator));
    };
    let taint = ctx.chain_taint("db_get_i64");
    let size = row.value.len() as u64;
    if len == 0 {
        let mut o = Outcome::default();
        o.ret = Some(SymValue::i32(size as u32).with_taints(taint));
        return o;
    }
    let n = size.min(len);
    if let Err(a) = ctx.check_range(data, n) {
        return Outcome::abort(a);
    }
    let bytes: Vec<SymValue> = row.value[..n as usize].iter().map(|b| b.clone().add_taints(&taint)).collect();
    Outcome {
        ret: Some(SymValue::i32(n as u32).with_taints(taint)),
        mem_writes: if n > 0 { vec![(data, bytes)] } else { vec![] },
        ..Outcome::default()
    }
}

/// `db_get_i64(iter, data, length)`; `data` is already concretized.
pub fn emu_get(ctx: &EmuCtx, iter: &SymValue, data: u64, len: &SymValue) -> EmuResult {
    let mut diags = Vec::new();
    let mut pins = None;
    let len = match len.as_con() {
        Some(l) => l as u64,
        None => match ctx.base_model() {
            Ok(m) => ctx.pin(&m, len, "db_get_i64 length", &mut diags, &mut pins) as u64,
            Err(a) => return EmuResult { outcomes: vec![Outcome::abort(a)], diagnostics: diags },
        },
    };
    let mut cands = Vec::new();
    match iter.as_con() {
        Some(h) => cands.push(get_concrete(ctx, h as u32 as i32, data, len).when(pins)),
        None => {
            for h in ctx.db.data_handles() {
                let c = Expr::eq(iter.expr(), h32(h));
                cands.push(get_concrete(ctx, h, data, len).when(pins.clone()).when(Some(c)));
            }
        }
    }
    let mut r = ctx.filter(cands);
    for o in &mut r.outcomes {
        o.diagnostics.extend(diags.iter().cloned());
    }
    r
}

fn step_concrete(db: &OnChainDB, dir: Direction, h: Handle, prim: u64, check: impl Fn(u64) -> Result<(), Abort>) -> Outcome {
    let target = match (db.resolve(h), dir) {
        (None, _) | (Some(IterPos::End(_)), Direction::Next) => return Outcome::abort(Abort::Db(DbError::BadIterator)),
        (Some(IterPos::Row(t, k)), Direction::Next) => {
            let table = db.table(&t).unwrap();
            match table.rows.range(k + 1..).next() {
                Some((nk, r)) => Some((*nk, r.handle)),
                None => return Outcome::ret(table.end()),
            }
        }
        (Some(IterPos::Row(t, k)), Direction::Previous) => db.table(&t).unwrap().rows.range(..k).next_back().map(|(pk, r)| (*pk, r.handle)),
        (Some(IterPos::End(t)), Direction::Previous) => db.table(&t).unwrap().rows.iter().next_back().map(|(pk, r)| (*pk, r.handle)),
    };
    match target {
        None => Outcome::ret(NO_ITER),
        Some((key, handle)) => {
            if let Err(a) = check(prim) {
                return Outcome::abort(a);
            }
            let cells = SymValue::i64(key);
            Outcome {
                ret: Some(SymValue::i32(handle as u32)),
                mem_writes: vec![(prim, crate::sym::memory::split(&cells))],
                ..Outcome::default()
            }
        }
    }
}

/// `db_next_i64` / `db_previous_i64`; `prim` is already concretized.
pub fn emu_step(ctx: &EmuCtx, dir: Direction, iter: &SymValue, prim: u64) -> EmuResult {
    let check = |p: u64| ctx.check_range(p, 8);
    match iter.as_con() {
        Some(h) => ctx.filter(vec![step_concrete(ctx.db, dir, h as u32 as i32, prim, check)]),
        None => {
            let mut cands = Vec::new();
            for t in ctx.db.tables() {
                let handles: Vec<Handle> = t.rows.values().map(|r| r.handle).collect();
                let range = match dir {
                    Direction::Next => &handles[..handles.len().saturating_sub(1)],
                    Direction::Previous => handles.get(1..).unwrap_or(&[]),
                };
                for &h in range {
                    let c = Expr::eq(iter.expr(), h32(h));
                    cands.push(step_concrete(ctx.db, dir, h, prim, check).when(Some(c)));
                }
            }
            ctx.filter(cands)
        }
    }
}

fn read_payload(ctx: &EmuCtx, data: u64, len: u64) -> Result<Vec<SymValue>, Abort> {
    ctx.mem.read_bytes(data, len).map_err(Abort::Mem)
}

fn finish_write(ctx: &EmuCtx, o: Outcome, pins: Option<Expr>, model: Model, diags: Vec<String>) -> EmuResult {
    let mut o = o.when(pins);
    o.diagnostics = diags;
    if o.constraint.is_some() {
        o.model = Some(model);
    }
    let _ = ctx;
    EmuResult {
        outcomes: vec![o],
        diagnostics: vec![],
    }
}

fn single_abort(a: Abort) -> EmuResult {
    EmuResult {
        outcomes: vec![Outcome::abort(a)],
        diagnostics: vec![],
    }
}

/// `db_store_i64(scope, table, payer, id, data, len)`. Symbolic arguments are
/// pinned to one model; a symbolic `id` prefers a value not already stored.
pub fn emu_store(ctx: &EmuCtx, scope: &SymValue, table: &SymValue, id: &SymValue, data: u64, len: &SymValue) -> EmuResult {
    let mut model = match ctx.base_model() {
        Ok(m) => m,
        Err(a) => return single_abort(a),
    };
    let (mut diags, mut pins) = (Vec::new(), None);
    let scope_v = ctx.pin(&model, scope, "db_store_i64 scope", &mut diags, &mut pins) as u64;
    let table_v = ctx.pin(&model, table, "db_store_i64 table", &mut diags, &mut pins) as u64;
    let tid = TableId::new(ctx.receiver, scope_v, table_v);
    if id.is_sym() {
        let keys = ctx.db.table(&tid).map(|t| t.keys()).unwrap_or_default();
        let fresh = Expr::all(keys.iter().map(|&k| Expr::ne(id.expr(), k64(k))));
        let probe = match &pins {
            Some(p) => Expr::and(p.clone(), fresh),
            None => fresh,
        };
        if let SolveResult::Sat(m) = ctx.pc.check_with(&probe, ctx.solver) {
            model = m;
        }
    }
    let key = ctx.pin(&model, id, "db_store_i64 id", &mut diags, &mut pins) as u64;
    let len_v = ctx.pin(&model, len, "db_store_i64 length", &mut diags, &mut pins) as u64;
    let value = match read_payload(ctx, data, len_v) {
        Ok(v) => v,
        Err(a) => return finish_write(ctx, Outcome::abort(a), pins, model, diags),
    };
    if ctx.db.table(&tid).is_some_and(|t| t.rows.contains_key(&key)) {
        return finish_write(ctx, Outcome::abort(Abort::Db(DbError::DuplicateKey)), pins, model, diags);
    }
    let handle = ctx.db.next_handle();
    let mut o = Outcome::ret(handle);
    o.mutation = Some(DbMutation {
        op: MutationOp::Store,
        table: tid,
        key,
        handle,
        value: Some(value),
    });
    finish_write(ctx, o, pins, model, diags)
}

fn owned_row(ctx: &EmuCtx, h: Handle) -> Result<(TableId, u64), Abort> {
    match ctx.db.resolve(h) {
        Some(IterPos::Row(t, k)) if t.owner == ctx.receiver => Ok((t, k)),
        Some(IterPos::Row(..)) => Err(Abort::Db(DbError::AccessViolation)),
        _ => Err(Abort::Db(DbError::BadIterator)),
    }
}

/// `db_update_i64(iter, payer, data, len)`.
pub fn emu_update(ctx: &EmuCtx, iter: &SymValue, data: u64, len: &SymValue) -> EmuResult {
    let model = match ctx.base_model() {
        Ok(m) => m,
        Err(a) => return single_abort(a),
    };
    let (mut diags, mut pins) = (Vec::new(), None);
    let h = ctx.pin(&model, iter, "db_update_i64 iterator", &mut diags, &mut pins) as u32 as i32;
    let len_v = ctx.pin(&model, len, "db_update_i64 length", &mut diags, &mut pins) as u64;
    let o = match owned_row(ctx, h).and_then(|(t, k)| Ok((t, k, read_payload(ctx, data, len_v)?))) {
        Err(a) => Outcome::abort(a),
        Ok((t, k, value)) => Outcome {
            mutation: Some(DbMutation {
                op: MutationOp::Update,
                table: t,
                key: k,
                handle: h,
                value: Some(value),
            }),
            ..Outcome::default()
        },
    };
    finish_write(ctx, o, pins, model, diags)
}

/// `db_remove_i64(iter)`.
pub fn emu_remove(ctx: &EmuCtx, iter: &SymValue) -> EmuResult {
    let model = match ctx.base_model() {
        Ok(m) => m,
        Err(a) => return single_abort(a),
    };
    let (mut diags, mut pins) = (Vec::new(), None);
    let h = ctx.pin(&model, iter, "db_remove_i64 iterator", &mut diags, &mut pins) as u32 as i32;
    let o = match owned_row(ctx, h) {
        Err(a) => Outcome::abort(a),
        Ok((t, k)) => Outcome {
            mutation: Some(DbMutation {
                op: MutationOp::Remove,
                table: t,
                key: k,
                handle: h,
                value: None,
            }),
            ..Outcome::default()
        },
    };
    finish_write(ctx, o, pins, model, diags)
}

#[cfg(test)]
mod tests;
