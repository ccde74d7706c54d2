//! ptrlift lifts local raw pointers in transpiled Rust crates to safe
//! container and reference types, validating every rewrite with the compiler
//! and the crate's own test suite and rolling back anything it cannot repair
//! within a bounded retry budget.

pub mod config;
pub mod gateway;
pub mod lifting;
pub mod pipeline;
pub mod refactor;
pub mod repair;
pub mod report;
pub mod snapshot;
pub mod source_index;
pub mod templates;
pub mod verify;
