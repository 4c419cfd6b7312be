// SPDX-License-Identifier: Apache-2.0

//! Core library for the snapshot-restore laboratory: deterministic guest
//! execution, layered copy-on-write memory, base/diff snapshot generation,
//! restoration strategies, an analytic cold-start cost model validated
//! against the simulator, and memory-bound throughput projection.

pub mod corpus;
pub mod costmodel;
pub mod guest;
pub mod harness;
pub mod hash;
pub mod mem;
pub mod pagefile;
pub mod restore;
pub mod snapshot;
pub mod throughput;
pub mod workload;

// The types that cross crate boundaries, re-exported for downstream crates.
pub use costmodel::{CostParams, EventLedger, LatencyBreakdown, TenthUs};
pub use harness::{BenchConfig, FunctionArtifacts, LoadedArtifacts, ReportRecord};
pub use pagefile::SparsePageFile;
pub use restore::{RestorePlan, StrategyId};
pub use snapshot::{FullSnapshot, Snapshot, WorkingSetFile};
pub use throughput::Scenario;
pub use workload::WorkloadSpec;
