//! Symbolic values, path constraints, memory and solving.

pub mod constraints;
pub mod expr;
pub mod memory;
pub mod ops;
pub mod solver;
pub mod value;

pub use constraints::{solver_check, PathConstraints};
pub use expr::Expr;
pub use memory::SymMemory;
pub use solver::{BitBlastSolver, EnumSolver, Model, SolveResult, Solver};
pub use value::{value_kind, SymValue, TaintLabel, TaintOrigin, Taints, ValueKind};
