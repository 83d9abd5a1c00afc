//! Byte-granular symbolic linear memory with copy-on-write chunks.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::constraints::PathConstraints;
use super::expr::Expr;
use super::solver::{SolveResult, Solver};
use super::value::{Payload, SymValue, Taints};
use crate::wasm::PAGE_SIZE;

const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("out-of-bounds access of {len} bytes at {addr:#x}")]
    OutOfBounds { addr: u64, len: u64 },
    #[error("symbolic address could not be concretized: {0}")]
    Unresolved(String),
}

/// Recorded whenever a symbolic address is pinned to one model value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConcretizedAddress {
    pub expr: String,
    pub value: u64,
}

#[derive(Clone, Default)]
struct Chunk {
    bytes: Vec<u8>,
    /// Cells holding symbolic or tainted bytes; `bytes` is ignored there.
    sym: BTreeMap<u16, SymValue>,
}

impl Chunk {
    fn new() -> Self {
        Chunk {
            bytes: vec![0; CHUNK],
            sym: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Default)]
pub struct SymMemory {
    pages: u32,
    max_pages: Option<u32>,
    chunks: Arc<BTreeMap<u64, Arc<Chunk>>>,
}

impl std::fmt::Debug for SymMemory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymMemory({} pages)", self.pages)
    }
}

impl SymMemory {
    pub fn new(pages: u32, max_pages: Option<u32>) -> Self {
        SymMemory {
            pages,
            max_pages,
            chunks: Arc::default(),
        }
    }

    pub fn pages(&self) -> u32 {
        self.pages
    }

    pub fn size(&self) -> u64 {
        u64::from(self.pages) * PAGE_SIZE
    }

    /// `memory.grow`: returns the previous page count, or `None` on failure.
    pub fn grow(&mut self, delta: u32) -> Option<u32> {
        let limit = self.max_pages.unwrap_or(crate::wasm::MAX_PAGES).min(crate::wasm::MAX_PAGES);
        let new = self.pages.checked_add(delta)?;
        if new > limit {
            return None;
        }
        let old = self.pages;
        self.pages = new;
        Some(old)
    }

    fn check(&self, addr: u64, len: u64) -> Result<(), MemError> {
        match addr.checked_add(len) {
            Some(end) if end <= self.size() => Ok(()),
            _ => Err(MemError::OutOfBounds { addr, len }),
        }
    }

    pub fn read_byte(&self, addr: u64) -> SymValue {
        let (c, o) = (addr / CHUNK as u64, (addr % CHUNK as u64) as usize);
        match self.chunks.get(&c) {
            None => SymValue::byte(0),
            Some(ch) => match ch.sym.get(&(o as u16)) {
                Some(v) => v.clone(),
                None => SymValue::byte(ch.bytes[o]),
            },
        }
    }

    fn chunk_mut(&mut self, c: u64) -> &mut Chunk {
        let map = Arc::make_mut(&mut self.chunks);
        Arc::make_mut(map.entry(c).or_insert_with(|| Arc::new(Chunk::new())))
    }

    pub fn write_byte(&mut self, addr: u64, v: SymValue) {
        debug_assert_eq!(v.width(), 8);
        let (c, o) = (addr / CHUNK as u64, (addr % CHUNK as u64) as usize);
        let ch = self.chunk_mut(c);
        match v.payload() {
            Payload::Con(b) if v.taints().is_empty() => {
                ch.bytes[o] = *b as u8;
                ch.sym.remove(&(o as u16));
            }
            _ => {
                ch.sym.insert(o as u16, v);
            }
        }
    }

    /// Little-endian load of `n` bytes at a concrete address.
    pub fn read(&self, addr: u64, n: u32) -> Result<SymValue, MemError> {
        self.check(addr, u64::from(n))?;
        let mut cells = Vec::with_capacity(n as usize);
        for i in 0..u64::from(n) {
            cells.push(self.read_byte(addr + i));
        }
        Ok(compose(&cells))
    }

    /// Little-endian store of `v` (width a multiple of 8) at a concrete address.
    pub fn write(&mut self, addr: u64, v: &SymValue) -> Result<(), MemError> {
        assert!(v.width() % 8 == 0, "store width must be whole bytes");
        let n = v.width() / 8;
        self.check(addr, u64::from(n))?;
        for (i, b) in split(v).into_iter().enumerate() {
            self.write_byte(addr + i as u64, b);
        }
        Ok(())
    }

    pub fn read_bytes(&self, addr: u64, n: u64) -> Result<Vec<SymValue>, MemError> {
        self.check(addr, n)?;
        Ok((0..n).map(|i| self.read_byte(addr + i)).collect())
    }

    pub fn write_bytes(&mut self, addr: u64, bytes: &[SymValue]) -> Result<(), MemError> {
        self.check(addr, bytes.len() as u64)?;
        for (i, b) in bytes.iter().enumerate() {
            self.write_byte(addr + i as u64, b.clone());
        }
        Ok(())
    }

    pub fn write_concrete(&mut self, addr: u64, bytes: &[u8]) -> Result<(), MemError> {
        self.check(addr, bytes.len() as u64)?;
        for (i, &b) in bytes.iter().enumerate() {
            self.write_byte(addr + i as u64, SymValue::byte(b));
        }
        Ok(())
    }

    /// Concrete bytes, or `None` if any cell in the range is symbolic.
    pub fn concrete_bytes(&self, addr: u64, n: u64) -> Result<Option<Vec<u8>>, MemError> {
        let cells = self.read_bytes(addr, n)?;
        Ok(cells.iter().map(|c| c.as_con().map(|b| b as u8)).collect())
    }
}

/// Joins byte cells (least significant first) into one value.
pub fn compose(cells: &[SymValue]) -> SymValue {
    let taints = cells.iter().fold(Taints::none(), |t, c| t.union(c.taints()));
    if cells.iter().all(SymValue::is_con) {
        let v = cells
            .iter()
            .rev()
            .fold(0u128, |acc, c| (acc << 8) | c.as_con().unwrap());
        return SymValue::con(v, 8 * cells.len() as u32).with_taints(taints);
    }
    let mut acc = cells[0].expr();
    for c in &cells[1..] {
        acc = Expr::concat(c.expr(), acc);
    }
    SymValue::sym(acc).with_taints(taints)
}

/// Splits a value into byte cells, least significant first. Every byte
/// carries the value's full taint set.
pub fn split(v: &SymValue) -> Vec<SymValue> {
    let n = v.width() / 8;
    match v.payload() {
        Payload::Con(x) => (0..n)
            .map(|i| SymValue::byte((x >> (8 * i)) as u8).with_taints(v.taints().clone()))
            .collect(),
        Payload::Sym(e) => (0..n)
            .map(|i| SymValue::sym(Expr::extract(e.clone(), 8 * i + 7, 8 * i)).with_taints(v.taints().clone()))
            .collect(),
    }
}

/// Pins a possibly symbolic address to a concrete value. A symbolic address
/// is fixed to the current witness (or a fresh model) and the equality is
/// appended to θ.
pub fn resolve_address(
    addr: &SymValue,
    pc: &mut PathConstraints,
    solver: &dyn Solver,
) -> Result<(u64, Option<ConcretizedAddress>), MemError> {
    if let Some(a) = addr.as_con() {
        return Ok((a as u64, None));
    }
    let e = addr.expr();
    let model = match pc.witness() {
        Some(m) => m.clone(),
        None => match pc.check(solver) {
            SolveResult::Sat(m) => m,
            SolveResult::Unsat => return Err(MemError::Unresolved("path is infeasible".into())),
            SolveResult::Unknown(r) => return Err(MemError::Unresolved(r)),
        },
    };
    let value = model.eval(&e);
    let pin = Expr::eq(e.clone(), Expr::constant(value, e.width()));
    pc.push_with_model(pin, model);
    Ok((
        value as u64,
        Some(ConcretizedAddress {
            expr: e.to_string(),
            value: value as u64,
        }),
    ))
}

/// `mem_read`: loads `n` bytes at `addr`, pinning a symbolic address first.
pub fn mem_read(
    mem: &SymMemory,
    addr: &SymValue,
    n: u32,
    pc: &mut PathConstraints,
    solver: &dyn Solver,
) -> Result<(SymValue, Option<ConcretizedAddress>), MemError> {
    let (a, diag) = resolve_address(addr, pc, solver)?;
    Ok((mem.read(a, n)?, diag))
}

/// `mem_write`: stores `v` at `addr`, pinning a symbolic address first.
pub fn mem_write(
    mem: &mut SymMemory,
    addr: &SymValue,
    v: &SymValue,
    pc: &mut PathConstraints,
    solver: &dyn Solver,
) -> Result<Option<ConcretizedAddress>, MemError> {
    let (a, diag) = resolve_address(addr, pc, solver)?;
    mem.write(a, v)?;
    Ok(diag)
}
