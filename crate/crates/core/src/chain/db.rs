use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sym::SymValue;

/// Iterator handle: non-negative for data rows, `-2 - ordinal` for a
/// table's End sentinel, [`NO_ITER`] for "none".
pub type Handle = i32;

pub const NO_ITER: Handle = -1;

pub fn end_handle(ordinal: u32) -> Handle {
    -2 - ordinal as i32
}

fn ordinal_of_end(h: Handle) -> Option<u32> {
    (h <= -2).then(|| (-2 - h) as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TableId {
    pub owner: u64,
    pub scope: u64,
    pub name: u64,
}

impl TableId {
    pub fn new(owner: u64, scope: u64, name: u64) -> Self {
        TableId { owner, scope, name }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
pub enum DbError {
    #[error("table does not exist")]
    TableAbsent,
    #[error("invalid iterator")]
    BadIterator,
    #[error("duplicate primary key")]
    DuplicateKey,
    #[error("write to a table owned by another account")]
    AccessViolation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub handle: Handle,
    /// Byte cells; symbolic only inside exploratory states.
    pub value: Vec<SymValue>,
}

impl Row {
    pub fn concrete_value(&self) -> Option<Vec<u8>> {
        self.value.iter().map(|b| b.as_con().map(|v| v as u8)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub id: TableId,
    pub ordinal: u32,
    pub rows: BTreeMap<u64, Row>,
}

impl Table {
    pub fn end(&self) -> Handle {
        end_handle(self.ordinal)
    }

    /// Data-row handles in key order followed by the End sentinel.
    pub fn iters(&self) -> Vec<Handle> {
        let mut v: Vec<Handle> = self.rows.values().map(|r| r.handle).collect();
        v.push(self.end());
        v
    }

    pub fn keys(&self) -> Vec<u64> {
        self.rows.keys().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationOp {
    Store,
    Update,
    Remove,
}

/// One applied change to the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbMutation {
    pub op: MutationOp,
    pub table: TableId,
    pub key: u64,
    pub handle: Handle,
    /// New row bytes for Store/Update.
    pub value: Option<Vec<SymValue>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Store {
    tables: BTreeMap<TableId, Table>,
    /// Data-row handle → (table, key).
    registry: BTreeMap<Handle, (TableId, u64)>,
    /// End ordinal → table.
    ends: BTreeMap<u32, TableId>,
    next_handle: Handle,
    next_ordinal: u32,
}

/// The persistent table store, with a stack of snapshots for rollback.
#[derive(Debug, Clone, Default)]
pub struct OnChainDB {
    store: Store,
    snapshots: Vec<Store>,
}

impl PartialEq for OnChainDB {
    fn eq(&self, other: &Self) -> bool {
        self.store == other.store
    }
}

impl Eq for OnChainDB {}

/// Where a handle points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterPos {
    Row(TableId, u64),
    End(TableId),
}

impl OnChainDB {
    pub fn new() -> Self {
        OnChainDB::default()
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.store.tables.values()
    }

    pub fn table(&self, id: &TableId) -> Option<&Table> {
        self.store.tables.get(id)
    }

    pub fn is_empty(&self) -> bool {
        self.store.tables.is_empty()
    }

    pub fn row_count(&self) -> usize {
        self.store.registry.len()
    }

    /// All registered data-row handles in ascending order.
    pub fn data_handles(&self) -> Vec<Handle> {
        self.store.registry.keys().copied().collect()
    }

    pub fn next_handle(&self) -> Handle {
        self.store.next_handle
    }

    pub fn resolve(&self, h: Handle) -> Option<IterPos> {
        if h >= 0 {
            self.store.registry.get(&h).map(|&(t, k)| IterPos::Row(t, k))
        } else {
            let ord = ordinal_of_end(h)?;
            self.store.ends.get(&ord).map(|&t| IterPos::End(t))
        }
    }

    pub fn row(&self, h: Handle) -> Option<(&Table, u64, &Row)> {
        let &(t, k) = self.store.registry.get(&h)?;
        let table = &self.store.tables[&t];
        Some((table, k, &table.rows[&k]))
    }

    pub fn create_table(&mut self, id: TableId) -> &mut Table {
        let s = &mut self.store;
        if !s.tables.contains_key(&id) {
            let ordinal = s.next_ordinal;
            s.next_ordinal += 1;
            s.ends.insert(ordinal, id);
            s.tables.insert(
                id,
                Table {
                    id,
                    ordinal,
                    rows: BTreeMap::new(),
                },
            );
        }
        s.tables.get_mut(&id).unwrap()
    }

    /// Inserts a row, creating the table when needed. Returns the new handle.
    pub fn store(&mut self, id: TableId, key: u64, value: Vec<SymValue>) -> Result<Handle, DbError> {
        if self.table(&id).is_some_and(|t| t.rows.contains_key(&key)) {
            return Err(DbError::DuplicateKey);
        }
        let handle = self.store.next_handle;
        self.store.next_handle += 1;
        self.create_table(id).rows.insert(key, Row { handle, value });
        self.store.registry.insert(handle, (id, key));
        Ok(handle)
    }

    pub fn update(&mut self, h: Handle, value: Vec<SymValue>) -> Result<(TableId, u64), DbError> {
        let &(t, k) = self.store.registry.get(&h).ok_or(DbError::BadIterator)?;
        self.store.tables.get_mut(&t).unwrap().rows.get_mut(&k).unwrap().value = value;
        Ok((t, k))
    }

    pub fn remove(&mut self, h: Handle) -> Result<(TableId, u64), DbError> {
        let (t, k) = self.store.registry.remove(&h).ok_or(DbError::BadIterator)?;
        self.store.tables.get_mut(&t).unwrap().rows.remove(&k);
        Ok((t, k))
    }

    /// Replays a recorded mutation.
    pub fn apply(&mut self, m: &DbMutation) -> Result<(), DbError> {
        match m.op {
            MutationOp::Store => {
                if self.table(&m.table).is_some_and(|t| t.rows.contains_key(&m.key)) {
                    return Err(DbError::DuplicateKey);
                }
                // keep the handle chosen when the mutation was recorded
                self.create_table(m.table)
                    .rows
                    .insert(m.key, Row { handle: m.handle, value: m.value.clone().unwrap_or_default() });
                self.store.registry.insert(m.handle, (m.table, m.key));
                self.store.next_handle = self.store.next_handle.max(m.handle + 1);
                Ok(())
            }
            MutationOp::Update => self.update(m.handle, m.value.clone().unwrap_or_default()).map(|_| ()),
            MutationOp::Remove => self.remove(m.handle).map(|_| ()),
        }
    }

    pub fn next_ordinal(&self) -> u32 {
        self.store.next_ordinal
    }

    pub(crate) fn insert_table_raw(&mut self, id: TableId, ordinal: u32) {
        let s = &mut self.store;
        s.ends.insert(ordinal, id);
        s.tables.insert(id, Table { id, ordinal, rows: BTreeMap::new() });
        s.next_ordinal = s.next_ordinal.max(ordinal + 1);
    }

    pub(crate) fn insert_row_raw(&mut self, id: TableId, key: u64, handle: Handle, value: Vec<SymValue>) {
        self.store.tables.get_mut(&id).unwrap().rows.insert(key, Row { handle, value });
        self.store.registry.insert(handle, (id, key));
    }

    pub(crate) fn set_counters_raw(&mut self, next_handle: Handle, next_ordinal: u32) {
        self.store.next_handle = next_handle;
        self.store.next_ordinal = next_ordinal;
    }

    pub fn snapshot(&mut self) {
        self.snapshots.push(self.store.clone());
    }

    /// Rolls back to the most recent snapshot.
    pub fn restore(&mut self) {
        if let Some(s) = self.snapshots.pop() {
            self.store = s;
        }
    }

    /// Drops the most recent snapshot, keeping current contents.
    pub fn commit(&mut self) {
        self.snapshots.pop();
    }

    pub fn dump(&self) -> DbDump {
        DbDump {
            tables: self
                .tables()
                .map(|t| TableDump {
                    owner: t.id.owner,
                    scope: t.id.scope,
                    name: t.id.name,
                    rows: t
                        .rows
                        .iter()
                        .map(|(k, r)| RowDump {
                            key: *k,
                            value_hex: r
                                .value
                                .iter()
                                .map(|b| match b.as_con() {
                                    Some(v) => format!("{:02x}", v as u8),
                                    None => "??".to_string(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDump {
    pub key: u64,
    pub value_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDump {
    pub owner: u64,
    pub scope: u64,
    pub name: u64,
    pub rows: Vec<RowDump>,
}

/// Debug/acceptance snapshot format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbDump {
    pub tables: Vec<TableDump>,
}

pub fn bytes_to_cells(bytes: &[u8]) -> Vec<SymValue> {
    bytes.iter().map(|&b| SymValue::byte(b)).collect()
}
