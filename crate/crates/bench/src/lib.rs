// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures for the criterion benchmarks: corpus workloads prepared
//! into in-memory artifacts so the benches measure compute paths, not disk
//! I/O.

use snaplab_core::corpus;
use snaplab_core::costmodel::CostParams;
use snaplab_core::snapshot::{
    generate_base, generate_diff, generate_full_ws, generate_ws, Snapshot, WorkingSetFile,
};
use snaplab_core::workload::WorkloadSpec;

/// One corpus function's complete artifact set, generated in memory.
pub struct PreparedArtifacts {
    pub spec: WorkloadSpec,
    pub base: Snapshot,
    pub diff: Snapshot,
    pub ws: WorkingSetFile,
    pub full_ws: WorkingSetFile,
    pub params: CostParams,
}

/// Generate base, diff, and both working-set recordings for a corpus
/// function. Panics on unknown names or generation failures — benchmarks
/// have no error path worth modelling.
pub fn prepare(function: &str) -> PreparedArtifacts {
    let spec = corpus::function_spec(function)
        .unwrap_or_else(|| panic!("unknown corpus function {function:?}"));
    let params = corpus::default_params();
    let base = generate_base(&spec, params.page_size_bytes).expect("base generation");
    let diff = generate_diff(&spec, &base).expect("diff generation");
    let ws = generate_ws(&spec, &base, &diff, spec.workload_seed).expect("working set");
    let full_ws =
        generate_full_ws(&spec, &base, &diff, spec.workload_seed).expect("full working set");
    PreparedArtifacts {
        spec,
        base,
        diff,
        ws,
        full_ws,
        params,
    }
}
