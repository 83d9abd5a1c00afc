use serde::Serialize;

use crate::chain::{DbMutation, OnChainDB};
use crate::sym::{PathConstraints, SymMemory, SymValue, Taints};

/// A code location: function index and instruction index within its body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Pc {
    pub func: u32,
    pub offset: u32,
}

impl std::fmt::Display for Pc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "func:{} off:{}", self.func, self.offset)
    }
}

/// One imported-function call along a path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostCallRecord {
    pub name: String,
    pub args: Vec<SymValue>,
    pub ordinal: u32,
    pub pc: Pc,
}

/// Ordered path log consumed by the detectors and the driver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Host(HostCallRecord),
    /// A branch decision on a tainted or symbolic condition.
    Branch { pc: Pc, taints: Taints },
    /// A remainder instruction with at least one tainted operand.
    Rem { pc: Pc, taints: Taints },
    Db { pc: Pc, mutation: DbMutation },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason")]
pub enum Status {
    Running,
    Terminated,
    /// Trap, failed assertion or failed authorization; all effects roll back.
    Aborted(String),
    /// A budget ran out; the path is incomplete.
    Truncated(String),
}

impl Status {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Status::Running)
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self, Status::Aborted(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LabelKind {
    Block,
    Loop,
}

#[derive(Debug, Clone)]
pub(crate) struct Label {
    pub kind: LabelKind,
    /// Instruction index a branch to this label continues at.
    pub target: u32,
    /// Values carried by a branch.
    pub arity: usize,
    /// Operand stack height when the label was entered.
    pub height: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub func: u32,
    /// Index into the module's defined functions.
    pub body: usize,
    pub pc: u32,
    pub locals: Vec<SymValue>,
    pub labels: Vec<Label>,
    pub height: usize,
    pub arity: usize,
    /// Iterations of each loop header entered in this activation.
    pub loops: Vec<(u32, u32)>,
}

/// Overflow candidate recorded at an arithmetic instruction and judged once
/// the path ends.
#[derive(Debug, Clone)]
pub struct OverflowSite {
    pub pc: Pc,
    /// Satisfiable exactly when the operation wraps.
    pub condition: crate::sym::Expr,
}

/// One execution path: tables, memory, path condition and return value,
/// plus interpreter state.
#[derive(Debug, Clone)]
pub struct ExecState {
    /// Exploration order, unique within a run.
    pub id: u64,
    pub db: OnChainDB,
    pub mem: SymMemory,
    pub constraints: PathConstraints,
    pub ret: Option<SymValue>,
    pub stack: Vec<SymValue>,
    pub(crate) frames: Vec<Frame>,
    pub globals: Vec<SymValue>,
    pub trace: Vec<Pc>,
    pub events: Vec<Event>,
    pub overflow_sites: Vec<OverflowSite>,
    pub status: Status,
    pub diagnostics: Vec<String>,
    /// Set when a symbolic address or argument was pinned to one value.
    pub concretized: bool,
    /// Symbolic-fork depth.
    pub depth: u32,
    pub(crate) host_seq: u32,
    /// Cached per-path blockchain-info values.
    pub(crate) env_values: Vec<(&'static str, SymValue)>,
}

impl ExecState {
    pub fn host_records(&self) -> impl Iterator<Item = &HostCallRecord> {
        self.events.iter().filter_map(|e| match e {
            Event::Host(r) => Some(r),
            _ => None,
        })
    }

    pub fn mutations(&self) -> impl Iterator<Item = &DbMutation> {
        self.events.iter().filter_map(|e| match e {
            Event::Db { mutation, .. } => Some(mutation),
            _ => None,
        })
    }

    pub fn has_mutation(&self) -> bool {
        self.mutations().next().is_some()
    }

    pub fn pc(&self) -> Option<Pc> {
        self.frames.last().map(|f| Pc {
            func: f.func,
            offset: f.pc,
        })
    }

    pub(crate) fn push(&mut self, v: SymValue) {
        self.stack.push(v);
    }

    pub(crate) fn pop(&mut self) -> SymValue {
        self.stack.pop().expect("operand stack underflow in validated code")
    }

    pub(crate) fn next_ordinal(&mut self) -> u32 {
        self.host_seq += 1;
        self.host_seq - 1
    }

    pub(crate) fn abort(&mut self, reason: impl Into<String>) {
        self.status = Status::Aborted(reason.into());
    }

    pub(crate) fn truncate(&mut self, reason: impl Into<String>) {
        self.status = Status::Truncated(reason.into());
    }

    /// Text trace dump, one `func:<idx> off:<n>` line per instruction.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for pc in &self.trace {
            out.push_str(&pc.to_string());
            out.push('\n');
        }
        out
    }
}
