//! Grammar-driven SQL fuzzing with constraint-guided instantiation of
//! mutated parse trees and a multi-plan execution oracle, tested against a
//! small in-memory relational engine with switchable optimizer defects.

pub mod dialect;
pub mod fuzzer;
pub mod grammar;
pub mod instantiator;
pub mod minidb;
pub mod mutator;
pub mod oracle;
pub mod semtree;

/// Version string embedded in bug reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
