//! Concolic analysis of EOSIO-style WebAssembly contracts.

pub mod chain;
pub mod cli;
pub mod detect;
pub mod driver;
pub mod engine;
pub mod host;
pub mod sym;
pub mod wasm;
