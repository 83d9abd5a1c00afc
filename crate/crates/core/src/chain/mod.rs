//! On-chain database model and emulation of its host API.

pub mod db;
pub mod emulate;
pub mod name;
pub mod oracle;

pub use db::{DbError, DbMutation, Handle, MutationOp, OnChainDB, TableId, NO_ITER};
pub use name::{name, name_from_str, name_to_string};
