//! Reference semantics of the `db_*_i64` API over concrete arguments.
//!
//! Deliberately written against its own flat representation with linear
//! scans, so it shares no lookup logic with [`OnChainDB`] or the emulator.

use super::db::{DbError, Handle, OnChainDB, TableId, NO_ITER};
use crate::sym::SymValue;

/// A concrete API call. `owner` of written tables is the receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DbCall {
    Find { code: u64, scope: u64, table: u64, id: u64 },
    Lowerbound { code: u64, scope: u64, table: u64, id: u64 },
    Upperbound { code: u64, scope: u64, table: u64, id: u64 },
    End { code: u64, scope: u64, table: u64 },
    Get { iter: Handle, data: u32, len: u32 },
    Next { iter: Handle, prim: u32 },
    Previous { iter: Handle, prim: u32 },
    Store { scope: u64, table: u64, payer: u64, id: u64, data: Vec<u8> },
    Update { iter: Handle, payer: u64, data: Vec<u8> },
    Remove { iter: Handle },
}

impl DbCall {
    pub fn api_name(&self) -> &'static str {
        match self {
            DbCall::Find { .. } => "db_find_i64",
            DbCall::Lowerbound { .. } => "db_lowerbound_i64",
            DbCall::Upperbound { .. } => "db_upperbound_i64",
            DbCall::End { .. } => "db_end_i64",
            DbCall::Get { .. } => "db_get_i64",
            DbCall::Next { .. } => "db_next_i64",
            DbCall::Previous { .. } => "db_previous_i64",
            DbCall::Store { .. } => "db_store_i64",
            DbCall::Update { .. } => "db_update_i64",
            DbCall::Remove { .. } => "db_remove_i64",
        }
    }
}

/// Return value (absent for void APIs) and bytes written to memory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleResult {
    pub ret: Option<i32>,
    pub mem_writes: Vec<(u32, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FlatTable {
    owner: u64,
    scope: u64,
    name: u64,
    ordinal: u32,
    /// (key, handle, value) in ascending key order.
    rows: Vec<(u64, Handle, Vec<u8>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FlatDb {
    tables: Vec<FlatTable>,
    next_handle: Handle,
    next_ordinal: u32,
}

impl FlatDb {
    fn from_db(db: &OnChainDB) -> FlatDb {
        let mut tables: Vec<FlatTable> = db
            .tables()
            .map(|t| FlatTable {
                owner: t.id.owner,
                scope: t.id.scope,
                name: t.id.name,
                ordinal: t.ordinal,
                rows: t
                    .rows
                    .iter()
                    .map(|(k, r)| (*k, r.handle, r.concrete_value().expect("oracle needs concrete rows")))
                    .collect(),
            })
            .collect();
        tables.sort_by_key(|t| t.ordinal);
        let next_ordinal = tables.iter().map(|t| t.ordinal + 1).max().unwrap_or(0);
        FlatDb {
            tables,
            next_handle: db.next_handle(),
            next_ordinal: next_ordinal.max(db.next_ordinal()),
        }
    }

    fn to_db(&self) -> OnChainDB {
        let mut db = OnChainDB::new();
        for t in &self.tables {
            let id = TableId::new(t.owner, t.scope, t.name);
            db.insert_table_raw(id, t.ordinal);
            for (k, h, v) in &t.rows {
                db.insert_row_raw(id, *k, *h, v.iter().map(|&b| SymValue::byte(b)).collect());
            }
        }
        db.set_counters_raw(self.next_handle, self.next_ordinal);
        db
    }

    fn find_table(&self, owner: u64, scope: u64, name: u64) -> Option<usize> {
        self.tables
            .iter()
            .position(|t| t.owner == owner && t.scope == scope && t.name == name)
    }

    /// (table index, row index or None for End)
    fn locate(&self, h: Handle) -> Option<(usize, Option<usize>)> {
        for (ti, t) in self.tables.iter().enumerate() {
            if -2 - t.ordinal as i32 == h {
                return Some((ti, None));
            }
            for (ri, r) in t.rows.iter().enumerate() {
                if r.1 == h {
                    return Some((ti, Some(ri)));
                }
            }
        }
        None
    }
}

fn end_of(t: &FlatTable) -> Handle {
    -2 - t.ordinal as i32
}

/// Applies one concrete call. Read calls return the database unchanged.
pub fn oracle_apply(db: &OnChainDB, receiver: u64, call: &DbCall) -> Result<(OnChainDB, OracleResult), DbError> {
    let mut f = FlatDb::from_db(db);
    let r = apply_flat(&mut f, receiver, call)?;
    Ok((f.to_db(), r))
}

fn ret(v: i32) -> OracleResult {
    OracleResult {
        ret: Some(v),
        mem_writes: vec![],
    }
}

fn apply_flat(db: &mut FlatDb, receiver: u64, call: &DbCall) -> Result<OracleResult, DbError> {
    match call {
        DbCall::Find { code, scope, table, id } => {
            let t = &db.tables[db.find_table(*code, *scope, *table).ok_or(DbError::TableAbsent)?];
            let hit = t.rows.iter().find(|r| r.0 == *id).map(|r| r.1);
            Ok(ret(hit.unwrap_or(end_of(t))))
        }
        DbCall::Lowerbound { code, scope, table, id } | DbCall::Upperbound { code, scope, table, id } => {
            let upper = matches!(call, DbCall::Upperbound { .. });
            let t = &db.tables[db.find_table(*code, *scope, *table).ok_or(DbError::TableAbsent)?];
            let mut best: Option<(u64, Handle)> = None;
            for r in &t.rows {
                let ok = if upper { r.0 > *id } else { r.0 >= *id };
                if ok && best.is_none_or(|(k, _)| r.0 < k) {
                    best = Some((r.0, r.1));
                }
            }
            Ok(ret(best.map(|b| b.1).unwrap_or(end_of(t))))
        }
        DbCall::End { code, scope, table } => Ok(ret(match db.find_table(*code, *scope, *table) {
            Some(i) => end_of(&db.tables[i]),
            None => NO_ITER,
        })),
        DbCall::Get { iter, data, len } => {
            let (ti, ri) = db.locate(*iter).ok_or(DbError::BadIterator)?;
            let row = &db.tables[ti].rows[ri.ok_or(DbError::BadIterator)?];
            let size = row.2.len() as u32;
            if *len == 0 {
                return Ok(ret(size as i32));
            }
            let n = size.min(*len);
            let mut out = ret(n as i32);
            if n > 0 {
                out.mem_writes.push((*data, row.2[..n as usize].to_vec()));
            }
            Ok(out)
        }
        DbCall::Next { iter, prim } => {
            let (ti, ri) = db.locate(*iter).ok_or(DbError::BadIterator)?;
            let t = &db.tables[ti];
            let ri = ri.ok_or(DbError::BadIterator)?;
            if ri + 1 == t.rows.len() {
                return Ok(ret(end_of(t)));
            }
            let next = &t.rows[ri + 1];
            Ok(OracleResult {
                ret: Some(next.1),
                mem_writes: vec![(*prim, next.0.to_le_bytes().to_vec())],
            })
        }
        DbCall::Previous { iter, prim } => {
            let (ti, ri) = db.locate(*iter).ok_or(DbError::BadIterator)?;
            let t = &db.tables[ti];
            let target = match ri {
                None => t.rows.len().checked_sub(1),
                Some(i) => i.checked_sub(1),
            };
            match target {
                None => Ok(ret(NO_ITER)),
                Some(i) => Ok(OracleResult {
                    ret: Some(t.rows[i].1),
                    mem_writes: vec![(*prim, t.rows[i].0.to_le_bytes().to_vec())],
                }),
            }
        }
        DbCall::Store { scope, table, id, data, .. } => {
            let ti = match db.find_table(receiver, *scope, *table) {
                Some(i) => i,
                None => {
                    db.tables.push(FlatTable {
                        owner: receiver,
                        scope: *scope,
                        name: *table,
                        ordinal: db.next_ordinal,
                        rows: vec![],
                    });
                    db.next_ordinal += 1;
                    db.tables.len() - 1
                }
            };
            let t = &mut db.tables[ti];
            if t.rows.iter().any(|r| r.0 == *id) {
                return Err(DbError::DuplicateKey);
            }
            let h = db.next_handle;
            db.next_handle += 1;
            let pos = t.rows.iter().take_while(|r| r.0 < *id).count();
            t.rows.insert(pos, (*id, h, data.clone()));
            Ok(ret(h))
        }
        DbCall::Update { iter, data, .. } => {
            let (ti, ri) = db.locate(*iter).ok_or(DbError::BadIterator)?;
            let ri = ri.ok_or(DbError::BadIterator)?;
            if db.tables[ti].owner != receiver {
                return Err(DbError::AccessViolation);
            }
            db.tables[ti].rows[ri].2 = data.clone();
            Ok(OracleResult::default())
        }
        DbCall::Remove { iter } => {
            let (ti, ri) = db.locate(*iter).ok_or(DbError::BadIterator)?;
            let ri = ri.ok_or(DbError::BadIterator)?;
            if db.tables[ti].owner != receiver {
                return Err(DbError::AccessViolation);
            }
            db.tables[ti].rows.remove(ri);
            Ok(OracleResult::default())
        }
    }
}
