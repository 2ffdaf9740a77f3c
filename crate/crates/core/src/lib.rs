// SPDX-License-Identifier: Apache-2.0

//! Contextual module-completion benchmarks for small multi-file Verilog
//! projects.
//!
//! The pipeline turns a corpus of projects into tasks where one module body
//! is masked and has to be regenerated from the rest of the design:
//!
//! 1. [`corpus`] discovers projects and applies the structural filter.
//! 2. [`preprocess`] merges each project into one self-contained design.
//! 3. [`frontend`] parses the merged design and computes size metrics.
//! 4. [`taskgen`] masks one module at a time to produce tasks.
//! 5. [`dedup`] removes near-duplicate designs across shuttles (oldest wins).
//! 6. [`equiv`] judges candidate modules against the golden one with a miter,
//!    a SAT solver and bounded k-induction, over netlists from [`netlist`].
//! 7. [`contamination`] computes Min-K curves over log-probability dumps.
//!
//! [`pipeline`] wires these together; the `rtlbench` binary is a thin
//! command-line wrapper around it. See `examples/` for one runnable program
//! per capability.

pub mod contamination;
pub mod corpus;
pub mod dedup;
pub mod equiv;
pub mod frontend;
pub mod netlist;
pub mod pipeline;
pub mod preprocess;
pub mod sat;
pub mod taskgen;

pub use corpus::{ProjectManifest, ProjectRecord, ShuttleId};
pub use equiv::{EqvStatus, EvalResult};
pub use frontend::{ModuleDecl, PortDecl, SourceUnit};
pub use netlist::Netlist;
pub use preprocess::MergedDesign;
