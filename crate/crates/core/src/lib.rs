//! Simulator suite for a fault-tolerant 2-D deep-learning-accelerator
//! computing array backed by a dot-production processing unit (DPPU) that
//! recomputes work mapped to faulty PEs.
//!
//! The crate models the full loop: seeded fault injection (random and
//! clustered), repair assignment under row/column/diagonal spares and the
//! hybrid DPPU scheme, column-granularity degradation, the recompute
//! dataflow timeline, a bit-accurate functional emulator proving recovered
//! outputs exact, the runtime fault-detection scan, an analytical
//! performance model over benchmark networks, and a deterministic
//! Monte-Carlo experiment harness emitting CSV reports.

pub mod config;
pub mod dataflow;
pub mod detect;
pub mod emulator;
pub mod fault;
mod matching;
pub mod harness;
pub mod perf;
pub mod repair;

pub use config::{derive_sizing, ArrayConfig, DerivedSizing, DppuStructure, PECoord};
pub use fault::{per_from_ber, FaultMap, FaultModel, FaultModelParams};
pub use perf::{layer_cycles, LayerSpec, PerfOutcome};
pub use repair::{
    dppu_effective_capacity, evaluate_reliability, repair, ArrayDims, RepairPlan, SchemeKind,
};
