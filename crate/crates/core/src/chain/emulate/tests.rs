use super::*;
use crate::chain::db::bytes_to_cells;
use crate::chain::oracle::{oracle_apply, DbCall, OracleResult};
use crate::sym::BitBlastSolver;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RECV: u64 = 0x1000;
const OTHER: u64 = 0x2000;
const PAYLOAD: u64 = 100;
const DATA: u64 = 200;
const PRIM: u64 = 300;

fn random_db(rng: &mut ChaCha8Rng) -> OnChainDB {
    let mut db = OnChainDB::new();
    for _ in 0..rng.random_range(0..12) {
        let owner = if rng.random_bool(0.7) { RECV } else { OTHER };
        let id = TableId::new(owner, rng.random_range(1..3), rng.random_range(10..12));
        let len = rng.random_range(0..6);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let _ = db.store(id, rng.random_range(0..8), bytes_to_cells(&bytes));
    }
    for h in db.data_handles() {
        if rng.random_bool(0.2) {
            db.remove(h).unwrap();
        }
    }
    db
}

fn random_iter(rng: &mut ChaCha8Rng, db: &OnChainDB) -> Handle {
    let data = db.data_handles();
    match rng.random_range(0..10) {
        0 => NO_ITER,
        1 => rng.random_range(-6..20),
        2 | 3 => -2 - rng.random_range(0..db.next_ordinal().max(1)) as i32,
        _ if !data.is_empty() => data[rng.random_range(0..data.len())],
        _ => rng.random_range(-4..4),
    }
}

fn random_call(rng: &mut ChaCha8Rng, db: &OnChainDB) -> DbCall {
    let code = if rng.random_bool(0.7) { RECV } else { OTHER };
    let scope = rng.random_range(1..3);
    let table = rng.random_range(10..12);
    let id = rng.random_range(0..9);
    let bytes = |rng: &mut ChaCha8Rng| (0..rng.random_range(0..6)).map(|_| rng.random()).collect();
    match rng.random_range(0..10) {
        0 => DbCall::Find { code, scope, table, id },
        1 => DbCall::Lowerbound { code, scope, table, id },
        2 => DbCall::Upperbound { code, scope, table, id },
        3 => DbCall::End { code, scope, table },
        4 => DbCall::Get { iter: random_iter(rng, db), data: DATA as u32, len: rng.random_range(0..8) },
        5 => DbCall::Next { iter: random_iter(rng, db), prim: PRIM as u32 },
        6 => DbCall::Previous { iter: random_iter(rng, db), prim: PRIM as u32 },
        7 => DbCall::Store { scope, table, payer: RECV, id, data: bytes(rng) },
        8 => DbCall::Update { iter: random_iter(rng, db), payer: RECV, data: bytes(rng) },
        _ => DbCall::Remove { iter: random_iter(rng, db) },
    }
}

fn v64(x: u64) -> SymValue {
    SymValue::i64(x)
}

fn v32(x: i32) -> SymValue {
    SymValue::i32(x as u32)
}

fn emulate(ctx: &EmuCtx, call: &DbCall) -> EmuResult {
    match call {
        DbCall::Find { code, scope, table, id } => emu_lookup(ctx, Lookup::Find, &v64(*code), &v64(*scope), &v64(*table), &v64(*id)),
        DbCall::Lowerbound { code, scope, table, id } => emu_lookup(ctx, Lookup::Lower, &v64(*code), &v64(*scope), &v64(*table), &v64(*id)),
        DbCall::Upperbound { code, scope, table, id } => emu_lookup(ctx, Lookup::Upper, &v64(*code), &v64(*scope), &v64(*table), &v64(*id)),
        DbCall::End { code, scope, table } => emu_end(ctx, &v64(*code), &v64(*scope), &v64(*table)),
        DbCall::Get { iter, data, len } => emu_get(ctx, &v32(*iter), u64::from(*data), &v32(*len as i32)),
        DbCall::Next { iter, prim } => emu_step(ctx, Direction::Next, &v32(*iter), u64::from(*prim)),
        DbCall::Previous { iter, prim } => emu_step(ctx, Direction::Previous, &v32(*iter), u64::from(*prim)),
        DbCall::Store { scope, table, id, data, .. } => emu_store(ctx, &v64(*scope), &v64(*table), &v64(*id), PAYLOAD, &v32(data.len() as i32)),
        DbCall::Update { iter, data, .. } => emu_update(ctx, &v32(*iter), PAYLOAD, &v32(data.len() as i32)),
        DbCall::Remove { iter } => emu_remove(ctx, &v32(*iter)),
    }
}

fn concrete(cells: &[SymValue]) -> Vec<u8> {
    cells.iter().map(|c| c.as_con().expect("concrete byte") as u8).collect()
}

#[test]
fn concrete_calls_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdb);
    let solver = BitBlastSolver::default();
    for case in 0..10_000 {
        let db = random_db(&mut rng);
        let call = random_call(&mut rng, &db);
        let mut mem = SymMemory::new(1, None);
        if let DbCall::Store { data, .. } | DbCall::Update { data, .. } = &call {
            mem.write_concrete(PAYLOAD, data).unwrap();
        }
        let pc = PathConstraints::new();
        let ctx = EmuCtx { db: &db, mem: &mem, pc: &pc, solver: &solver, receiver: RECV, ordinal: 0 };
        let res = emulate(&ctx, &call);
        assert_eq!(res.outcomes.len(), 1, "case {case}: {call:?}");
        let o = &res.outcomes[0];
        assert!(o.constraint.is_none(), "case {case}: concrete call added a constraint");
        let expected = oracle_apply(&db, RECV, &call);
        match (&o.abort, expected) {
            (Some(Abort::Db(e)), Err(x)) => assert_eq!(*e, x, "case {case}: {call:?}"),
            (None, Ok((db2, r))) => {
                let got = OracleResult {
                    ret: o.ret.as_ref().map(|v| v.as_con().unwrap() as u32 as i32),
                    mem_writes: o.mem_writes.iter().map(|(a, b)| (*a as u32, concrete(b))).collect(),
                };
                assert_eq!(got, r, "case {case}: {call:?}");
                let mut after = db.clone();
                if let Some(m) = &o.mutation {
                    after.apply(m).unwrap();
                }
                assert_eq!(after, db2, "case {case}: {call:?}");
            }
            (a, e) => panic!("case {case}: {call:?}: emulator {a:?} vs oracle {e:?}"),
        }
    }
}

fn table_with_keys(keys: &[u64]) -> (OnChainDB, TableId) {
    let mut db = OnChainDB::new();
    let id = TableId::new(RECV, 1, 10);
    db.create_table(id);
    for &k in keys {
        db.store(id, k, bytes_to_cells(&[k as u8])).unwrap();
    }
    (db, id)
}

/// Every 4-bit id lands in exactly one fork, whose result matches the
/// concrete call for that id.
#[test]
fn lookup_forks_partition_id_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let solver = BitBlastSolver::default();
    let mem = SymMemory::new(1, None);
    let pc = PathConstraints::new();
    let id = SymValue::sym(Expr::zext(Expr::var("x", 4), 64));
    for _ in 0..20 {
        let mut keys: Vec<u64> = (0..rng.random_range(0..6)).map(|_| rng.random_range(0..16)).collect();
        keys.sort();
        keys.dedup();
        let (db, tid) = table_with_keys(&keys);
        let ctx = EmuCtx { db: &db, mem: &mem, pc: &pc, solver: &solver, receiver: RECV, ordinal: 0 };
        for mode in [Lookup::Find, Lookup::Lower, Lookup::Upper] {
            let res = emu_lookup(&ctx, mode, &v64(RECV), &v64(1), &v64(10), &id);
            assert!(res.diagnostics.is_empty());
            for x in 0..16u64 {
                let mut m = Model::new();
                m.set("x", u128::from(x));
                let hits: Vec<&Outcome> = res.outcomes.iter().filter(|o| o.constraint.as_ref().is_none_or(|c| m.eval(c) == 1)).collect();
                assert_eq!(hits.len(), 1, "{mode:?} keys {keys:?} x {x}");
                let call = match mode {
                    Lookup::Find => DbCall::Find { code: RECV, scope: 1, table: 10, id: x },
                    Lookup::Lower => DbCall::Lowerbound { code: RECV, scope: 1, table: 10, id: x },
                    Lookup::Upper => DbCall::Upperbound { code: RECV, scope: 1, table: 10, id: x },
                };
                let (_, r) = oracle_apply(&db, RECV, &call).unwrap();
                assert_eq!(hits[0].ret.as_ref().unwrap().as_con().unwrap() as u32 as i32, r.ret.unwrap());
            }
            // every kept fork is reachable
            for o in &res.outcomes {
                if let Some(c) = &o.constraint {
                    assert_eq!(o.model.as_ref().unwrap().eval(c), 1);
                }
            }
        }
        let _ = tid;
    }
}

#[test]
fn find_drops_unsat_forks() {
    let (db, _) = table_with_keys(&[1, 2, 3]);
    let solver = BitBlastSolver::default();
    let mem = SymMemory::new(1, None);
    let x = Expr::var("x", 64);
    let mut pc = PathConstraints::new();
    pc.push_unchecked(Expr::eq(x.clone(), Expr::constant(2, 64)));
    let ctx = EmuCtx { db: &db, mem: &mem, pc: &pc, solver: &solver, receiver: RECV, ordinal: 0 };
    let res = emu_lookup(&ctx, Lookup::Find, &v64(RECV), &v64(1), &v64(10), &SymValue::sym(x));
    assert_eq!(res.outcomes.len(), 1);
    assert_eq!(res.outcomes[0].ret.as_ref().unwrap().as_con(), Some(1));
}

#[test]
fn symbolic_get_forks_once_per_row() {
    let mut db = OnChainDB::new();
    let mut n = 0;
    for (scope, keys) in [(1u64, vec![1u64, 5, 9]), (2, vec![]), (3, vec![4, 6])] {
        let id = TableId::new(if scope == 3 { OTHER } else { RECV }, scope, 10);
        db.create_table(id);
        for k in keys {
            db.store(id, k, bytes_to_cells(&[k as u8, 0xAA])).unwrap();
            n += 1;
        }
    }
    let solver = BitBlastSolver::default();
    let mem = SymMemory::new(1, None);
    let pc = PathConstraints::new();
    let ctx = EmuCtx { db: &db, mem: &mem, pc: &pc, solver: &solver, receiver: RECV, ordinal: 3 };
    let it = SymValue::var("it", 32);
    let res = emu_get(&ctx, &it, DATA, &v32(8));
    assert_eq!(res.outcomes.len(), n);
    for o in &res.outcomes {
        let m = o.model.as_ref().unwrap();
        let h = m.get("it").unwrap() as u32 as i32;
        let (_, key, _) = db.row(h).unwrap();
        let (addr, bytes) = &o.mem_writes[0];
        assert_eq!(*addr, DATA);
        assert_eq!(concrete(bytes), vec![key as u8, 0xAA]);
        assert!(bytes.iter().all(|b| b.taints().has_origin(TaintOrigin::ChainData)));
    }

    let next = emu_step(&ctx, Direction::Next, &it, PRIM);
    assert_eq!(next.outcomes.len(), n - 2);
    let prev = emu_step(&ctx, Direction::Previous, &it, PRIM);
    assert_eq!(prev.outcomes.len(), n - 2);
}

#[test]
fn symbolic_scope_forks_over_tables() {
    let mut db = OnChainDB::new();
    for scope in [1u64, 2] {
        db.store(TableId::new(RECV, scope, 10), 7, bytes_to_cells(&[1])).unwrap();
    }
    let solver = BitBlastSolver::default();
    let mem = SymMemory::new(1, None);
    let pc = PathConstraints::new();
    let ctx = EmuCtx { db: &db, mem: &mem, pc: &pc, solver: &solver, receiver: RECV, ordinal: 0 };
    let res = emu_lookup(&ctx, Lookup::Find, &v64(RECV), &SymValue::var("s", 64), &v64(10), &v64(7));
    assert_eq!(res.outcomes.len(), 3);
    assert_eq!(res.outcomes.iter().filter(|o| o.abort == Some(Abort::Db(DbError::TableAbsent))).count(), 1);
    let ends = emu_end(&ctx, &v64(RECV), &SymValue::var("s", 64), &v64(10));
    let mut rets: Vec<i32> = ends.outcomes.iter().map(|o| o.ret.as_ref().unwrap().as_con().unwrap() as u32 as i32).collect();
    rets.sort();
    assert_eq!(rets, vec![-3, -2, NO_ITER]);
}

#[test]
fn store_pins_id_to_fresh_key() {
    let (db, tid) = table_with_keys(&[0, 1, 2]);
    let solver = BitBlastSolver::default();
    let mut mem = SymMemory::new(1, None);
    mem.write_concrete(PAYLOAD, &[9, 9]).unwrap();
    let pc = PathConstraints::new();
    let ctx = EmuCtx { db: &db, mem: &mem, pc: &pc, solver: &solver, receiver: RECV, ordinal: 0 };
    let res = emu_store(&ctx, &v64(1), &v64(10), &SymValue::var("id", 64), PAYLOAD, &v32(2));
    let o = &res.outcomes[0];
    assert!(o.abort.is_none());
    let m = o.mutation.as_ref().unwrap();
    assert_eq!(m.table, tid);
    assert!(m.key > 2);
    assert_eq!(o.model.as_ref().unwrap().eval(o.constraint.as_ref().unwrap()), 1);
    assert_eq!(o.diagnostics.len(), 1);
    assert_eq!(o.ret.as_ref().unwrap().as_con(), Some(3));
}

#[test]
fn writes_to_foreign_tables_are_rejected() {
    let mut db = OnChainDB::new();
    let h = db.store(TableId::new(OTHER, 1, 10), 1, vec![]).unwrap();
    let solver = BitBlastSolver::default();
    let mem = SymMemory::new(1, None);
    let pc = PathConstraints::new();
    let ctx = EmuCtx { db: &db, mem: &mem, pc: &pc, solver: &solver, receiver: RECV, ordinal: 0 };
    let r = emu_remove(&ctx, &v32(h));
    assert_eq!(r.outcomes[0].abort, Some(Abort::Db(DbError::AccessViolation)));
    let r = emu_update(&ctx, &v32(h), PAYLOAD, &v32(0));
    assert_eq!(r.outcomes[0].abort, Some(Abort::Db(DbError::AccessViolation)));
}
