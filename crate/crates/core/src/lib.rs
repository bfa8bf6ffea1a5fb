//! Strategic term rewriting: a small strategy language over many-sorted terms, an
//! interpreter with a step budget, type-directed queries, and static analyses for
//! failure, reachability of type-specific cases and termination.

pub mod error;
pub mod fallibility;
pub mod fixtures;
pub mod interp;
pub mod laws;
pub mod lattice;
pub mod program;
pub mod query;
pub mod reach;
pub mod rules;
pub mod signature;
pub mod strategy;
pub mod syntax;
pub mod term;
pub mod termination;
