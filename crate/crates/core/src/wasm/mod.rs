//! WebAssembly 1.0 module model, binary decoder and validator.
//!
//! The decoder produces a [`WasmModule`] whose function bodies are flat
//! instruction lists with structured-control targets already resolved, which
//! is the shape the symbolic interpreter walks.

mod decode;
mod instr;
mod reader;
mod validate;

pub use decode::parse_module;
pub use instr::{float_signature, BlockType, Instr, IntOp, LoadKind, MemArg, StoreKind};
pub use validate::{validate_module, ValidationReport, Violation};

use std::collections::BTreeMap;

use thiserror::Error;

pub const PAGE_SIZE: u64 = 65_536;
/// WASM 1.0 caps linear memory at 4 GiB.
pub const MAX_PAGES: u32 = 65_536;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoadError {
    #[error("malformed binary at offset {offset}: {reason}")]
    MalformedBinary { offset: usize, reason: String },
    #[error("unsupported feature at offset {offset}: {feature}")]
    UnsupportedFeature { offset: usize, feature: String },
    #[error("no `apply(i64, i64, i64)` export: {0}")]
    NoEntry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValType {
    I32,
    I64,
    F32,
    F64,
}

impl ValType {
    pub fn bits(self) -> u32 {
        match self {
            ValType::I32 | ValType::F32 => 32,
            ValType::I64 | ValType::F64 => 64,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, ValType::F32 | ValType::F64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FuncType {
    pub params: Vec<ValType>,
    pub results: Vec<ValType>,
}

impl FuncType {
    pub fn new(params: impl Into<Vec<ValType>>, results: impl Into<Vec<ValType>>) -> Self {
        FuncType {
            params: params.into(),
            results: results.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalType {
    pub ty: ValType,
    pub mutable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportKind {
    Func(u32),
    Table(Limits),
    Memory(Limits),
    Global(GlobalType),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Import {
    pub module: String,
    pub field: String,
    pub kind: ImportKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Func,
    Table,
    Memory,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Export {
    pub kind: ExportKind,
    pub index: u32,
}

/// Constant initializer expression (WASM 1.0 allows a single instruction).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstExpr {
    I32(i32),
    I64(i64),
    F32(u32),
    F64(u64),
    GlobalGet(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Global {
    pub ty: GlobalType,
    pub init: ConstExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub memory: u32,
    pub offset: ConstExpr,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSegment {
    pub table: u32,
    pub offset: ConstExpr,
    pub functions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionBody {
    /// Index into [`WasmModule::types`].
    pub type_index: u32,
    /// Declared locals, expanded (parameters are not included).
    pub locals: Vec<ValType>,
    pub code: Vec<Instr>,
}

/// A decoded module. Immutable after parsing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WasmModule {
    pub types: Vec<FuncType>,
    pub imports: Vec<Import>,
    /// Bodies of module-defined functions; their function indices start after
    /// the imported functions.
    pub functions: Vec<FunctionBody>,
    pub tables: Vec<Limits>,
    pub memory: Option<Limits>,
    pub globals: Vec<Global>,
    pub exports: BTreeMap<String, Export>,
    pub start: Option<u32>,
    pub elements: Vec<ElementSegment>,
    pub data: Vec<DataSegment>,
}

/// What a function index resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuncRef<'a> {
    Imported(&'a Import),
    Defined(&'a FunctionBody),
}

impl WasmModule {
    pub fn imported_func_count(&self) -> u32 {
        self.imports
            .iter()
            .filter(|i| matches!(i.kind, ImportKind::Func(_)))
            .count() as u32
    }

    pub fn imported_global_count(&self) -> u32 {
        self.imports
            .iter()
            .filter(|i| matches!(i.kind, ImportKind::Global(_)))
            .count() as u32
    }

    pub fn func_count(&self) -> u32 {
        self.imported_func_count() + self.functions.len() as u32
    }

    pub fn global_count(&self) -> u32 {
        self.imported_global_count() + self.globals.len() as u32
    }

    pub fn table_count(&self) -> u32 {
        let imported = self
            .imports
            .iter()
            .filter(|i| matches!(i.kind, ImportKind::Table(_)))
            .count() as u32;
        imported + self.tables.len() as u32
    }

    /// Memory limits, whether defined or imported.
    pub fn memory_limits(&self) -> Option<Limits> {
        self.memory.or_else(|| {
            self.imports.iter().find_map(|i| match i.kind {
                ImportKind::Memory(l) => Some(l),
                _ => None,
            })
        })
    }

    pub fn func(&self, index: u32) -> Option<FuncRef<'_>> {
        let imported = self.imported_func_count();
        if index < imported {
            self.imports
                .iter()
                .filter(|i| matches!(i.kind, ImportKind::Func(_)))
                .nth(index as usize)
                .map(FuncRef::Imported)
        } else {
            self.functions
                .get((index - imported) as usize)
                .map(FuncRef::Defined)
        }
    }

    pub fn func_type(&self, index: u32) -> Option<&FuncType> {
        let type_index = match self.func(index)? {
            FuncRef::Imported(Import {
                kind: ImportKind::Func(t),
                ..
            }) => *t,
            FuncRef::Imported(_) => return None,
            FuncRef::Defined(body) => body.type_index,
        };
        self.types.get(type_index as usize)
    }

    pub fn global_type(&self, index: u32) -> Option<GlobalType> {
        let imported: Vec<GlobalType> = self
            .imports
            .iter()
            .filter_map(|i| match i.kind {
                ImportKind::Global(g) => Some(g),
                _ => None,
            })
            .collect();
        if (index as usize) < imported.len() {
            Some(imported[index as usize])
        } else {
            self.globals
                .get(index as usize - imported.len())
                .map(|g| g.ty)
        }
    }

    /// Returns the function index of the `apply(receiver, code, action)`
    /// dispatcher every EOSIO contract exports.
    pub fn find_entry(&self) -> Result<u32, LoadError> {
        let export = self
            .exports
            .get("apply")
            .ok_or_else(|| LoadError::NoEntry("export `apply` is missing".into()))?;
        if export.kind != ExportKind::Func {
            return Err(LoadError::NoEntry("`apply` is not a function".into()));
        }
        let ty = self
            .func_type(export.index)
            .ok_or_else(|| LoadError::NoEntry("`apply` has no valid type".into()))?;
        let expected = FuncType::new([ValType::I64; 3], []);
        if *ty != expected {
            return Err(LoadError::NoEntry(format!(
                "`apply` has signature {:?} -> {:?}",
                ty.params, ty.results
            )));
        }
        Ok(export.index)
    }
}
