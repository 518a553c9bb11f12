//! Structural analysis of IEC 60848 GRAFCET control specifications.
//!
//! The analyzer over-approximates step reachability, step concurrency and
//! the values of internal and output variables without exploring the state
//! space, then reports race conditions, unsatisfiable conditions and
//! unbounded activations.
//!
//! The usual entry point is [`pipeline::analyze`].

pub mod checks;
pub mod finding;
pub mod hierarchy;
pub mod ingest;
pub mod invariants;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod reachconc;
pub mod varapprox;
