// SPDX-License-Identifier: Apache-2.0

//! Restoration strategies: per-page plans, booting instances under them,
//! and invoking the resulting guests while the event ledger records every
//! page event.
//!
//! Six strategies cover the design space:
//!
//! | strategy        | memory source                                  | boot-time phases |
//! |-----------------|------------------------------------------------|------------------|
//! | `regular`       | none — run every phase from scratch            | all pre-request  |
//! | `full-demand`   | whole snapshot, each page faulted on first use | none             |
//! | `reap`          | whole snapshot, working set eager, rest demand | none             |
//! | `seuss`         | language base copy-on-write                    | function init    |
//! | `snapfaas-`     | base copy-on-write + whole diff eager          | none             |
//! | `snapfaas`      | base copy-on-write + diff∩WS eager, rest demand| none             |
//!
//! Every strategy must converge: after boot and one invocation with the same
//! request, the guest's state digest is identical to a from-scratch run —
//! restoration is an optimization, never a semantic change. Costs differ
//! only in *when* pages are paid for: eagerly in one batched read overlapped
//! with configuration, or synchronously at first touch during execution.

use crate::costmodel::{eager_restore_cost, CostParams, EventLedger, TenthUs};
use crate::guest::{
    run_phases, AccessTracker, DeviceState, ExecOptions, GuestError, GuestState, Registers,
};
use crate::mem::{LayeredMemory, MemError, MemoryMode, PagePolicy};
use crate::pagefile::PageImage;
use crate::snapshot::{
    check_base_diff_pair, FullSnapshot, Snapshot, SnapshotError, SnapshotKind, WorkingSetFile,
};
use crate::workload::WorkloadSpec;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum RestoreError {
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error(transparent)]
    Guest(#[from] GuestError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("strategy {strategy} requires a {artifact}, which was not provided")]
    MissingArtifact {
        strategy: StrategyId,
        artifact: &'static str,
    },
    #[error(
        "working set was recorded for diff {found:016x}, but the plan restores diff {expected:016x}"
    )]
    ForeignWorkingSet { expected: u64, found: u64 },
    #[error("restore plan does not fit this workload: {0}")]
    PlanSpecMismatch(String),
    #[error(
        "instance is not request-ready: phase cursor {cursor} (expected {expected}), \
         request channel connected: {vsock_connected}"
    )]
    NotRequestReady {
        cursor: usize,
        expected: usize,
        vsock_connected: bool,
    },
    #[error("unknown strategy {0:?}; expected one of regular, full-demand, reap, seuss, snapfaas-, snapfaas")]
    UnknownStrategy(String),
}

/// The closed set of restoration strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyId {
    /// Run every phase from scratch; no snapshot artifacts.
    Regular,
    /// Whole-snapshot restore with every page demand-faulted.
    FullDemand,
    /// Whole-snapshot restore, recorded working set eager, rest demand.
    Reap,
    /// Language base copy-on-write, function init re-executed from source.
    Seuss,
    /// Base copy-on-write plus the entire diff restored eagerly.
    SnapFaasMinus,
    /// Base copy-on-write, diff split by working set into eager and demand.
    SnapFaas,
}

impl StrategyId {
    pub const ALL: [StrategyId; 6] = [
        StrategyId::Regular,
        StrategyId::FullDemand,
        StrategyId::Reap,
        StrategyId::Seuss,
        StrategyId::SnapFaasMinus,
        StrategyId::SnapFaas,
    ];

    /// Stable label used by the CLI, config files, and reports.
    pub const fn as_str(self) -> &'static str {
        match self {
            StrategyId::Regular => "regular",
            StrategyId::FullDemand => "full-demand",
            StrategyId::Reap => "reap",
            StrategyId::Seuss => "seuss",
            StrategyId::SnapFaasMinus => "snapfaas-",
            StrategyId::SnapFaas => "snapfaas",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StrategyId {
    type Err = RestoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| RestoreError::UnknownStrategy(s.to_string()))
    }
}

impl Serialize for StrategyId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StrategyId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Which phases the booted instance still executes from source before it is
/// request-ready.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootWindow {
    /// Everything before the execution phases (fresh boot).
    AllPreExecution,
    /// Only the function-init phases (base-only restore).
    FunctionInitOnly,
    /// Nothing; the snapshot already covers all pre-request phases.
    NoPhases,
}

/// Where the booted instance's registers, device state, and phase cursor
/// come from.
#[derive(Debug, Clone)]
pub enum MetadataSource {
    /// Start from zeroed registers and a powered-off device.
    FreshBoot,
    /// Install captured metadata.
    Restored {
        registers: Registers,
        device: DeviceState,
        phase_cursor: usize,
        /// Guest memory size of the capturing instance; `None` for
        /// language-wide bases, whose generator's size is not binding.
        memory_pages: Option<u64>,
    },
}

/// A per-page restoration plan plus everything boot needs to execute it.
/// Pages absent from `policy_overrides` are zero-filled.
#[derive(Debug, Clone)]
pub struct RestorePlan {
    pub strategy: StrategyId,
    /// Page policies that differ from the zero-fill default.
    pub policy_overrides: BTreeMap<u64, PagePolicy>,
    /// Exactly the pages with [`PagePolicy::EagerDisk`], ascending.
    pub eager_page_ids: Vec<u64>,
    pub boot_window: BootWindow,
    pub metadata_source: MetadataSource,
    /// In-memory image backing [`PagePolicy::SharedCow`] pages.
    pub base_image: Option<PageImage>,
    /// Disk-tier image backing eager and demand pages.
    pub disk_image: Option<PageImage>,
}

fn restored_metadata(
    registers: Registers,
    device: DeviceState,
    phase_cursor: usize,
    memory_pages: Option<u64>,
) -> MetadataSource {
    MetadataSource::Restored {
        registers,
        device,
        phase_cursor,
        memory_pages,
    }
}

fn require_base(strategy: StrategyId, base: Option<&Snapshot>) -> Result<&Snapshot, RestoreError> {
    let base = base.ok_or(RestoreError::MissingArtifact {
        strategy,
        artifact: "base snapshot",
    })?;
    if base.metadata.snapshot_kind != SnapshotKind::Base {
        return Err(SnapshotError::KindMismatch {
            expected: SnapshotKind::Base,
            found: base.metadata.snapshot_kind,
        }
        .into());
    }
    Ok(base)
}

fn check_ws_for_diff(ws: &WorkingSetFile, diff: &Snapshot) -> Result<(), RestoreError> {
    if ws.diff_id != diff.metadata.content_id {
        return Err(RestoreError::ForeignWorkingSet {
            expected: diff.metadata.content_id,
            found: ws.diff_id,
        });
    }
    if !ws.is_subset_of(diff.pages.page_ids()) {
        return Err(SnapshotError::Malformed(
            "working set lists pages its diff snapshot does not contain".into(),
        )
        .into());
    }
    Ok(())
}

/// Build the per-page plan for `strategy` from the artifacts it needs.
///
/// Artifact requirements — regular: none; full-demand: full; reap: full +
/// working set; seuss: base; snapfaas-: base + diff; snapfaas: base + diff +
/// working set. Extra artifacts are accepted and cross-checked when they
/// allow it (a working set is verified against the diff whenever the diff
/// is present).
pub fn plan_restore(
    strategy: StrategyId,
    base: Option<&Snapshot>,
    diff: Option<&Snapshot>,
    ws: Option<&WorkingSetFile>,
    full: Option<&FullSnapshot>,
) -> Result<RestorePlan, RestoreError> {
    let missing = |artifact: &'static str| RestoreError::MissingArtifact { strategy, artifact };
    let mut policy_overrides = BTreeMap::new();
    let plan = match strategy {
        StrategyId::Regular => RestorePlan {
            strategy,
            policy_overrides,
            eager_page_ids: Vec::new(),
            boot_window: BootWindow::AllPreExecution,
            metadata_source: MetadataSource::FreshBoot,
            base_image: None,
            disk_image: None,
        },
        StrategyId::FullDemand => {
            let full = full.ok_or_else(|| missing("full-function snapshot"))?;
            for page in full.pages.page_ids() {
                policy_overrides.insert(page, PagePolicy::DemandDisk);
            }
            RestorePlan {
                strategy,
                policy_overrides,
                eager_page_ids: Vec::new(),
                boot_window: BootWindow::NoPhases,
                metadata_source: restored_metadata(
                    full.registers,
                    full.device,
                    full.phase_cursor,
                    Some(full.memory_pages),
                ),
                base_image: None,
                disk_image: Some(Arc::clone(&full.pages)),
            }
        }
        StrategyId::Reap => {
            let full = full.ok_or_else(|| missing("full-function snapshot"))?;
            let ws = ws.ok_or_else(|| missing("working set"))?;
            if let Some(diff) = diff {
                if ws.diff_id != diff.metadata.content_id {
                    return Err(RestoreError::ForeignWorkingSet {
                        expected: diff.metadata.content_id,
                        found: ws.diff_id,
                    });
                }
            }
            if !ws.is_subset_of(full.pages.page_ids()) {
                return Err(SnapshotError::Malformed(
                    "working set lists pages the full snapshot does not contain".into(),
                )
                .into());
            }
            let eager: std::collections::BTreeSet<u64> = ws.ws_page_ids.iter().copied().collect();
            for page in full.pages.page_ids() {
                let policy = if eager.contains(&page) {
                    PagePolicy::EagerDisk
                } else {
                    PagePolicy::DemandDisk
                };
                policy_overrides.insert(page, policy);
            }
            RestorePlan {
                strategy,
                policy_overrides,
                eager_page_ids: ws.ws_page_ids.clone(),
                boot_window: BootWindow::NoPhases,
                metadata_source: restored_metadata(
                    full.registers,
                    full.device,
                    full.phase_cursor,
                    Some(full.memory_pages),
                ),
                base_image: None,
                disk_image: Some(Arc::clone(&full.pages)),
            }
        }
        StrategyId::Seuss => {
            let base = require_base(strategy, base)?;
            for page in base.pages.page_ids() {
                policy_overrides.insert(page, PagePolicy::SharedCow);
            }
            RestorePlan {
                strategy,
                policy_overrides,
                eager_page_ids: Vec::new(),
                boot_window: BootWindow::FunctionInitOnly,
                metadata_source: restored_metadata(
                    base.metadata.registers,
                    base.metadata.device,
                    base.metadata.phase_cursor,
                    None,
                ),
                base_image: Some(Arc::clone(&base.pages)),
                disk_image: None,
            }
        }
        StrategyId::SnapFaasMinus => {
            let base = require_base(strategy, base)?;
            let diff = diff.ok_or_else(|| missing("diff snapshot"))?;
            check_base_diff_pair(base, diff)?;
            for page in base.pages.page_ids() {
                policy_overrides.insert(page, PagePolicy::SharedCow);
            }
            // Diff pages override the base on overlap.
            for page in diff.pages.page_ids() {
                policy_overrides.insert(page, PagePolicy::EagerDisk);
            }
            RestorePlan {
                strategy,
                policy_overrides,
                eager_page_ids: diff.pages.page_ids().collect(),
                boot_window: BootWindow::NoPhases,
                metadata_source: restored_metadata(
                    diff.metadata.registers,
                    diff.metadata.device,
                    diff.metadata.phase_cursor,
                    Some(diff.metadata.memory_pages),
                ),
                base_image: Some(Arc::clone(&base.pages)),
                disk_image: Some(Arc::clone(&diff.pages)),
            }
        }
        StrategyId::SnapFaas => {
            let base = require_base(strategy, base)?;
            let diff = diff.ok_or_else(|| missing("diff snapshot"))?;
            let ws = ws.ok_or_else(|| missing("working set"))?;
            check_base_diff_pair(base, diff)?;
            check_ws_for_diff(ws, diff)?;
            for page in base.pages.page_ids() {
                policy_overrides.insert(page, PagePolicy::SharedCow);
            }
            let eager: std::collections::BTreeSet<u64> = ws.ws_page_ids.iter().copied().collect();
            for page in diff.pages.page_ids() {
                let policy = if eager.contains(&page) {
                    PagePolicy::EagerDisk
                } else {
                    PagePolicy::DemandDisk
                };
                policy_overrides.insert(page, policy);
            }
            RestorePlan {
                strategy,
                policy_overrides,
                eager_page_ids: ws.ws_page_ids.clone(),
                boot_window: BootWindow::NoPhases,
                metadata_source: restored_metadata(
                    diff.metadata.registers,
                    diff.metadata.device,
                    diff.metadata.phase_cursor,
                    Some(diff.metadata.memory_pages),
                ),
                base_image: Some(Arc::clone(&base.pages)),
                disk_image: Some(Arc::clone(&diff.pages)),
            }
        }
    };
    debug_assert!(
        plan.eager_page_ids.iter().copied().eq(plan
            .policy_overrides
            .iter()
            .filter(|(_, &p)| p == PagePolicy::EagerDisk)
            .map(|(&page, _)| page)),
        "eager_page_ids must equal exactly the pages planned EagerDisk"
    );
    Ok(plan)
}

fn boot_window_range(window: BootWindow, spec: &WorkloadSpec) -> Range<usize> {
    match window {
        BootWindow::AllPreExecution => 0..spec.execution_phases().start,
        BootWindow::FunctionInitOnly => spec.function_init_phases(),
        BootWindow::NoPhases => {
            let start = spec.execution_phases().start;
            start..start
        }
    }
}

/// Boot an instance under `plan` until it is request-ready.
///
/// Charges the configuration cost `c` overlapped with the eager batch as
/// `max(c, eager_batch_cost)`, installs captured metadata or executes the
/// plan's boot-window phases, and performs residual initialization (the
/// request-channel connect analog, plus any boot-window compute and fault
/// charges). The returned ledger records the eager page count and the full
/// residual-init cost; demand and copy-on-write counters belong to
/// [`invoke`].
pub fn boot(
    plan: &RestorePlan,
    spec: &WorkloadSpec,
    params: &CostParams,
    mode: MemoryMode,
) -> Result<(GuestState, EventLedger, TenthUs), RestoreError> {
    let window = boot_window_range(plan.boot_window, spec);
    let mut state = match &plan.metadata_source {
        MetadataSource::FreshBoot => {
            if window.start != 0 {
                return Err(RestoreError::PlanSpecMismatch(
                    "fresh boot must start from phase 0".into(),
                ));
            }
            GuestState::fresh(spec, params.page_size_bytes, mode)
        }
        MetadataSource::Restored {
            registers,
            device,
            phase_cursor,
            memory_pages,
        } => {
            if let Some(pages) = memory_pages {
                if *pages != spec.memory_pages {
                    return Err(RestoreError::PlanSpecMismatch(format!(
                        "snapshot guest memory is {pages} pages, workload declares {}",
                        spec.memory_pages
                    )));
                }
            }
            if *phase_cursor != window.start {
                return Err(RestoreError::PlanSpecMismatch(format!(
                    "snapshot resumes at phase {phase_cursor}, plan expects phase {}",
                    window.start
                )));
            }
            for image in [&plan.base_image, &plan.disk_image].into_iter().flatten() {
                if image.page_size() != params.page_size_bytes {
                    return Err(RestoreError::PlanSpecMismatch(format!(
                        "snapshot page size {} differs from configured page size {}",
                        image.page_size(),
                        params.page_size_bytes
                    )));
                }
            }
            let mut policies = vec![PagePolicy::ZeroFill; spec.memory_pages as usize];
            for (&page, &policy) in &plan.policy_overrides {
                if page >= spec.memory_pages {
                    return Err(RestoreError::PlanSpecMismatch(format!(
                        "plan covers page {page}, outside guest memory of {} pages",
                        spec.memory_pages
                    )));
                }
                policies[page as usize] = policy;
            }
            let mem = LayeredMemory::with_policies(
                policies,
                params.page_size_bytes,
                mode,
                plan.base_image.clone(),
                plan.disk_image.clone(),
            );
            GuestState::restored(mem, *registers, *device, *phase_cursor)
        }
    };

    let eager_pages = state.mem.load_eager()?;
    debug_assert_eq!(eager_pages, plan.eager_page_ids.len() as u64);

    let before = state.mem.counters();
    let stats = run_phases(&mut state, spec, window, &ExecOptions::default(), None)?;
    let faults = state.mem.counters().delta_since(before);
    let fault_charge_us = faults.cow_faults * params.lat_mem_fault_us
        + faults.demand_faults * params.lat_disk_fault_us;
    let residual_init_us = params.residual_init_us + stats.compute_us + fault_charge_us;

    // The request channel comes up as the last step of residual init; its
    // cost is part of the configured residual floor.
    state.device.vsock_connected = true;

    let latency = TenthUs::from_us(params.c_us).max(eager_restore_cost(eager_pages, params))
        + TenthUs::from_us(residual_init_us);
    let ledger = EventLedger {
        eager_pages_disk: eager_pages,
        demand_pages_disk: 0,
        cow_faults: 0,
        compute_us: 0,
        residual_init_us,
    };
    Ok((state, ledger, latency))
}

/// Serve one request on a request-ready instance.
///
/// Runs the execution phases with `request_seed`; every first touch of a
/// demand page costs `lat_disk_fault_us` and every first write to a shared
/// base page costs `lat_mem_fault_us`. Execution latency is the declared
/// compute plus those charges; the response digest is the run's read
/// checksum.
pub fn invoke(
    state: &mut GuestState,
    spec: &WorkloadSpec,
    request_seed: u64,
    params: &CostParams,
) -> Result<(u64, EventLedger, TenthUs), RestoreError> {
    invoke_traced(state, spec, request_seed, params, None, None)
}

/// [`invoke`] with read jitter and page-level access tracing attached.
pub fn invoke_traced(
    state: &mut GuestState,
    spec: &WorkloadSpec,
    request_seed: u64,
    params: &CostParams,
    jitter_salt: Option<u64>,
    tracker: Option<&mut AccessTracker>,
) -> Result<(u64, EventLedger, TenthUs), RestoreError> {
    let window = spec.execution_phases();
    if state.phase_cursor != window.start || !state.device.vsock_connected {
        return Err(RestoreError::NotRequestReady {
            cursor: state.phase_cursor,
            expected: window.start,
            vsock_connected: state.device.vsock_connected,
        });
    }
    let before = state.mem.counters();
    let stats = run_phases(
        state,
        spec,
        window,
        &ExecOptions {
            request_seed,
            jitter_salt,
        },
        tracker,
    )?;
    let faults = state.mem.counters().delta_since(before);
    let fault_charge_us = faults.cow_faults * params.lat_mem_fault_us
        + faults.demand_faults * params.lat_disk_fault_us;
    let latency = TenthUs::from_us(stats.compute_us + fault_charge_us);
    let ledger = EventLedger {
        eager_pages_disk: 0,
        demand_pages_disk: faults.demand_faults,
        cow_faults: faults.cow_faults,
        compute_us: stats.compute_us,
        residual_init_us: 0,
    };
    Ok((stats.read_checksum, ledger, latency))
}

/// Re-serve the same request on an instance that already executed it: the
/// warm baseline. All touched pages are already private, so the ledger
/// records zero faults and the latency is the declared compute alone.
pub fn warm_invoke(
    state: &mut GuestState,
    spec: &WorkloadSpec,
    request_seed: u64,
    params: &CostParams,
) -> Result<(u64, EventLedger, TenthUs), RestoreError> {
    let window = spec.execution_phases();
    if state.phase_cursor != window.end {
        return Err(RestoreError::NotRequestReady {
            cursor: state.phase_cursor,
            expected: window.end,
            vsock_connected: state.device.vsock_connected,
        });
    }
    state.rewind_to(window.start);
    invoke(state, spec, request_seed, params)
}

/// Resolve every page through the layering order into one flat byte array,
/// charging nothing. Test and digest plumbing; content mode only.
pub fn materialize_memory(state: &GuestState) -> Result<Vec<u8>, RestoreError> {
    let page_size = state.mem.page_size() as usize;
    let mut flat = vec![0u8; state.mem.num_pages() as usize * page_size];
    for page in 0..state.mem.num_pages() {
        let offset = page as usize * page_size;
        flat[offset..offset + page_size].copy_from_slice(state.mem.peek_page(page)?);
    }
    Ok(flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pagefile::SparsePageFile;
    use crate::snapshot::{
        generate_base, generate_diff, generate_ws, merge_full, SnapshotMetadata,
    };
    use proptest::prelude::*;

    const PS: u32 = 64;

    fn test_params() -> CostParams {
        CostParams {
            page_size_bytes: PS,
            ..CostParams::default()
        }
    }

    /// Kernel writes 0..4, runtime writes 4..8; init mounts the app fs,
    /// writes 8..12 and overwrites base page 7; execution reads base and
    /// diff pages, dirties base pages 2..4 and diff page 9, and writes a
    /// fresh scratch region 12..14.
    fn fixture_spec() -> WorkloadSpec {
        WorkloadSpec::parse_str(
            &serde_json::json!({
                "name": "fx",
                "language_tag": "tl",
                "workload_seed": 0x11,
                "memory_pages": 32,
                "appfs_pages": {"start_page": 8, "page_count": 4},
                "phases": [
                    {"name": "kernel", "provenance": "kernel", "steps": [
                        {"type": "write", "start_page": 0, "page_count": 4, "step_seed": 1},
                        {"type": "compute", "duration_us": 10}
                    ]},
                    {"name": "osinit", "provenance": "os_init", "steps": [
                        {"type": "compute", "duration_us": 5}
                    ]},
                    {"name": "runtime", "provenance": "runtime", "steps": [
                        {"type": "write", "start_page": 4, "page_count": 4, "step_seed": 2},
                        {"type": "read", "start_page": 0, "page_count": 2},
                        {"type": "compute", "duration_us": 20}
                    ]},
                    {"name": "init", "provenance": "function_init", "steps": [
                        {"type": "mount_appfs"},
                        {"type": "write", "start_page": 8, "page_count": 4, "step_seed": 10},
                        {"type": "write", "start_page": 7, "page_count": 1, "step_seed": 11},
                        {"type": "read", "start_page": 8, "page_count": 1},
                        {"type": "compute", "duration_us": 30}
                    ]},
                    {"name": "handler", "provenance": "execution", "steps": [
                        {"type": "read", "start_page": 0, "page_count": 6},
                        {"type": "read", "start_page": 8, "page_count": 2},
                        {"type": "write", "start_page": 2, "page_count": 2, "step_seed": 90},
                        {"type": "write", "start_page": 9, "page_count": 1, "step_seed": 91},
                        {"type": "write", "start_page": 12, "page_count": 2, "step_seed": 92},
                        {"type": "compute", "duration_us": 100}
                    ]}
                ]
            })
            .to_string(),
        )
        .unwrap()
    }

    struct Artifacts {
        spec: WorkloadSpec,
        base: Snapshot,
        diff: Snapshot,
        ws: WorkingSetFile,
        full: FullSnapshot,
    }

    fn build_artifacts() -> Artifacts {
        let spec = fixture_spec();
        let base = generate_base(&spec, PS).unwrap();
        let diff = generate_diff(&spec, &base).unwrap();
        let ws = generate_ws(&spec, &base, &diff, 99).unwrap();
        let full = merge_full(&base, &diff).unwrap();
        Artifacts {
            spec,
            base,
            diff,
            ws,
            full,
        }
    }

    fn plan_for(a: &Artifacts, strategy: StrategyId) -> RestorePlan {
        plan_restore(
            strategy,
            Some(&a.base),
            Some(&a.diff),
            Some(&a.ws),
            Some(&a.full),
        )
        .unwrap()
    }

    #[test]
    fn strategy_labels_round_trip() {
        for id in StrategyId::ALL {
            assert_eq!(id.as_str().parse::<StrategyId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(serde_json::from_str::<StrategyId>(&json).unwrap(), id);
        }
        assert_eq!(
            serde_json::to_string(&StrategyId::SnapFaasMinus).unwrap(),
            "\"snapfaas-\""
        );
        assert!(matches!(
            "warmish".parse::<StrategyId>(),
            Err(RestoreError::UnknownStrategy(_))
        ));
    }

    /// Synthetic 4-page diff with working set {100, 101}: the split must be
    /// eager {100, 101} and demand {102, 103}.
    #[test]
    fn snapfaas_plan_splits_diff_by_working_set() {
        let page = |seed: u8| vec![seed; PS as usize].into_boxed_slice();
        let base_pages = SparsePageFile::from_entries(PS, vec![(0, page(1)), (1, page(2))]);
        let diff_pages =
            SparsePageFile::from_entries(PS, (100..104).map(|p| (p, page(p as u8))).collect());
        let meta = |kind, pages: &SparsePageFile, parent| SnapshotMetadata {
            snapshot_kind: kind,
            name: "syn".into(),
            language_tag: "tl".into(),
            workload_seed: 1,
            page_size: PS,
            memory_pages: 128,
            phase_cursor: 2,
            registers: Registers::default(),
            device: DeviceState::default(),
            content_id: pages.digest(),
            parent_base_id: parent,
            dirty_page_ids: match kind {
                SnapshotKind::Base => None,
                SnapshotKind::Diff => Some(pages.page_ids().collect()),
            },
            provenance_digest: 7,
        };
        let base = Snapshot {
            metadata: meta(SnapshotKind::Base, &base_pages, None),
            pages: Arc::new(base_pages),
        };
        let diff = Snapshot {
            metadata: meta(
                SnapshotKind::Diff,
                &diff_pages,
                Some(base.metadata.content_id),
            ),
            pages: Arc::new(diff_pages),
        };
        let ws = WorkingSetFile {
            diff_id: diff.metadata.content_id,
            generation_request_seed: 0,
            ws_page_ids: vec![100, 101],
        };
        let plan = plan_restore(
            StrategyId::SnapFaas,
            Some(&base),
            Some(&diff),
            Some(&ws),
            None,
        )
        .unwrap();
        assert_eq!(plan.eager_page_ids, vec![100, 101]);
        assert_eq!(plan.policy_overrides[&100], PagePolicy::EagerDisk);
        assert_eq!(plan.policy_overrides[&101], PagePolicy::EagerDisk);
        assert_eq!(plan.policy_overrides[&102], PagePolicy::DemandDisk);
        assert_eq!(plan.policy_overrides[&103], PagePolicy::DemandDisk);
        assert_eq!(plan.policy_overrides[&0], PagePolicy::SharedCow);
        assert_eq!(plan.policy_overrides[&1], PagePolicy::SharedCow);
    }

    #[test]
    fn reap_with_complete_working_set_leaves_no_demand_pages() {
        let a = build_artifacts();
        let all_pages = WorkingSetFile {
            diff_id: a.diff.metadata.content_id,
            generation_request_seed: 0,
            ws_page_ids: a.full.pages.page_ids().collect(),
        };
        let plan = plan_restore(
            StrategyId::Reap,
            None,
            Some(&a.diff),
            Some(&all_pages),
            Some(&a.full),
        )
        .unwrap();
        assert!(plan
            .policy_overrides
            .values()
            .all(|&p| p == PagePolicy::EagerDisk));
        assert_eq!(plan.eager_page_ids.len(), a.full.pages.len());
    }

    #[test]
    fn snapfaas_with_empty_diff_plans_like_seuss_without_init_execution() {
        // A function whose init dirties nothing: pure compute.
        let spec = WorkloadSpec::parse_str(
            &serde_json::json!({
                "name": "lean",
                "language_tag": "tl",
                "workload_seed": 0x11,
                "memory_pages": 16,
                "appfs_pages": null,
                "phases": [
                    {"name": "kernel", "provenance": "kernel", "steps": [
                        {"type": "write", "start_page": 0, "page_count": 4, "step_seed": 1}
                    ]},
                    {"name": "osinit", "provenance": "os_init", "steps": [
                        {"type": "compute", "duration_us": 5}
                    ]},
                    {"name": "runtime", "provenance": "runtime", "steps": [
                        {"type": "compute", "duration_us": 20}
                    ]},
                    {"name": "init", "provenance": "function_init", "steps": [
                        {"type": "read", "start_page": 0, "page_count": 2},
                        {"type": "compute", "duration_us": 30}
                    ]},
                    {"name": "handler", "provenance": "execution", "steps": [
                        {"type": "read", "start_page": 0, "page_count": 4},
                        {"type": "compute", "duration_us": 50}
                    ]}
                ]
            })
            .to_string(),
        )
        .unwrap();
        let params = test_params();
        let base = generate_base(&spec, PS).unwrap();
        let diff = generate_diff(&spec, &base).unwrap();
        assert!(diff.pages.is_empty());
        let ws = generate_ws(&spec, &base, &diff, 7).unwrap();
        assert!(ws.ws_page_ids.is_empty());
        let sf = plan_restore(
            StrategyId::SnapFaas,
            Some(&base),
            Some(&diff),
            Some(&ws),
            None,
        )
        .unwrap();
        let seuss = plan_restore(StrategyId::Seuss, Some(&base), None, None, None).unwrap();
        // Identical page policies; the only difference is that seuss still
        // executes the init phase while snapfaas restores its metadata.
        assert_eq!(sf.policy_overrides, seuss.policy_overrides);
        assert!(sf.eager_page_ids.is_empty());
        assert_eq!(sf.boot_window, BootWindow::NoPhases);
        assert_eq!(seuss.boot_window, BootWindow::FunctionInitOnly);
        // Both converge to the same request-ready state.
        let (sf_state, _, _) = boot(&sf, &spec, &params, MemoryMode::Content).unwrap();
        let (seuss_state, _, _) = boot(&seuss, &spec, &params, MemoryMode::Content).unwrap();
        assert_eq!(
            sf_state.state_digest().unwrap(),
            seuss_state.state_digest().unwrap()
        );
    }

    #[test]
    fn missing_artifacts_are_named() {
        let a = build_artifacts();
        let cases: [(StrategyId, &str); 5] = [
            (StrategyId::FullDemand, "full-function snapshot"),
            (StrategyId::Reap, "full-function snapshot"),
            (StrategyId::Seuss, "base snapshot"),
            (StrategyId::SnapFaasMinus, "diff snapshot"),
            (StrategyId::SnapFaas, "working set"),
        ];
        for (strategy, expected) in cases {
            let (base, diff) = match strategy {
                StrategyId::Seuss => (None, None),
                StrategyId::SnapFaasMinus => (Some(&a.base), None),
                StrategyId::SnapFaas => (Some(&a.base), Some(&a.diff)),
                _ => (None, None),
            };
            match plan_restore(strategy, base, diff, None, None) {
                Err(RestoreError::MissingArtifact { artifact, .. }) => {
                    assert_eq!(artifact, expected, "strategy {strategy}");
                }
                other => panic!("expected MissingArtifact for {strategy}, got {other:?}"),
            }
        }
        assert!(plan_restore(StrategyId::Regular, None, None, None, None).is_ok());
    }

    #[test]
    fn foreign_working_set_is_rejected() {
        let a = build_artifacts();
        let foreign = WorkingSetFile {
            diff_id: a.ws.diff_id ^ 1,
            ..a.ws.clone()
        };
        assert!(matches!(
            plan_restore(
                StrategyId::SnapFaas,
                Some(&a.base),
                Some(&a.diff),
                Some(&foreign),
                None
            ),
            Err(RestoreError::ForeignWorkingSet { .. })
        ));
        assert!(matches!(
            plan_restore(
                StrategyId::Reap,
                None,
                Some(&a.diff),
                Some(&foreign),
                Some(&a.full)
            ),
            Err(RestoreError::ForeignWorkingSet { .. })
        ));
        // Right id but pages outside the diff: corrupt, not just foreign.
        let oversized = WorkingSetFile {
            diff_id: a.ws.diff_id,
            generation_request_seed: 0,
            ws_page_ids: vec![0],
        };
        assert!(matches!(
            plan_restore(
                StrategyId::SnapFaas,
                Some(&a.base),
                Some(&a.diff),
                Some(&oversized),
                None
            ),
            Err(RestoreError::Snapshot(SnapshotError::Malformed(_)))
        ));
    }

    #[test]
    fn boot_overlaps_configuration_with_the_eager_batch() {
        let a = build_artifacts();
        let plan = plan_for(&a, StrategyId::SnapFaasMinus);
        assert_eq!(plan.eager_page_ids.len(), 5);
        // Configuration-bound: 5 eager pages of 64 B at 500 MB/s (6.4
        // tenths, rounded 6) stay far below c = 6000 µs.
        let params = test_params();
        let (_, ledger, latency) = boot(&plan, &a.spec, &params, MemoryMode::PolicyOnly).unwrap();
        assert_eq!(ledger.eager_pages_disk, 5);
        assert_eq!(ledger.residual_init_us, params.residual_init_us);
        assert_eq!(
            latency,
            TenthUs::from_us(params.c_us) + TenthUs::from_us(params.residual_init_us)
        );
        // Bandwidth-bound: shrink c until the batch dominates.
        let slow = CostParams {
            c_us: 1,
            bw_disk_bytes_per_s: 1_000_000,
            ..test_params()
        };
        let (_, _, latency) = boot(&plan, &a.spec, &slow, MemoryMode::PolicyOnly).unwrap();
        // 5·64 B at 1 MB/s = 320 µs ≫ c = 1 µs.
        assert_eq!(
            latency,
            TenthUs::from_us(320) + TenthUs::from_us(slow.residual_init_us)
        );
    }

    #[test]
    fn regular_boot_pays_declared_initialization_compute() {
        let a = build_artifacts();
        let params = test_params();
        let plan = plan_restore(StrategyId::Regular, None, None, None, None).unwrap();
        let (state, ledger, latency) = boot(&plan, &a.spec, &params, MemoryMode::Content).unwrap();
        // Pre-execution compute: 10 + 5 + 20 + 30 µs across the four phases.
        assert_eq!(ledger.residual_init_us, params.residual_init_us + 65);
        assert_eq!(ledger.eager_pages_disk, 0);
        assert_eq!(
            latency,
            TenthUs::from_us(params.c_us + params.residual_init_us + 65)
        );
        assert!(state.device.vsock_connected);
        assert!(state.device.appfs_mounted);
        assert_eq!(state.phase_cursor, a.spec.execution_phases().start);
    }

    #[test]
    fn seuss_boot_charges_init_faults_to_residual_init() {
        let a = build_artifacts();
        let params = test_params();
        let plan = plan_for(&a, StrategyId::Seuss);
        let (_, ledger, _) = boot(&plan, &a.spec, &params, MemoryMode::PolicyOnly).unwrap();
        // Init compute is 30 µs; the write to base page 7 is one
        // copy-on-write fault at lat_mem.
        assert_eq!(
            ledger.residual_init_us,
            params.residual_init_us + 30 + params.lat_mem_fault_us
        );
    }

    #[test]
    fn every_strategy_converges_to_the_regular_end_state() {
        let a = build_artifacts();
        let params = test_params();
        let seed = a.ws.generation_request_seed;
        let mut digests = Vec::new();
        for strategy in StrategyId::ALL {
            let plan = plan_for(&a, strategy);
            let (mut state, _, _) = boot(&plan, &a.spec, &params, MemoryMode::Content).unwrap();
            let (response, _, _) = invoke(&mut state, &a.spec, seed, &params).unwrap();
            digests.push((strategy, state.state_digest().unwrap(), response));
        }
        let (_, regular_digest, regular_response) = digests[0];
        for (strategy, digest, response) in &digests {
            assert_eq!(*digest, regular_digest, "state digest diverged: {strategy}");
            assert_eq!(*response, regular_response, "response diverged: {strategy}");
        }
    }

    #[test]
    fn exact_working_set_eliminates_demand_faults() {
        let a = build_artifacts();
        let params = test_params();
        let plan = plan_for(&a, StrategyId::SnapFaas);
        let (mut state, _, _) = boot(&plan, &a.spec, &params, MemoryMode::PolicyOnly).unwrap();
        let (_, ledger, _) =
            invoke(&mut state, &a.spec, a.ws.generation_request_seed, &params).unwrap();
        assert_eq!(ledger.demand_pages_disk, 0);
        // Execution writes base pages 2 and 3: exactly two page copies.
        assert_eq!(ledger.cow_faults, 2);
        assert_eq!(ledger.compute_us, 100);
    }

    #[test]
    fn truncated_working_set_costs_demand_faults() {
        let a = build_artifacts();
        let params = test_params();
        assert_eq!(a.ws.ws_page_ids, vec![8, 9]);
        let truncated = WorkingSetFile {
            ws_page_ids: vec![8],
            ..a.ws.clone()
        };
        let plan = plan_restore(
            StrategyId::SnapFaas,
            Some(&a.base),
            Some(&a.diff),
            Some(&truncated),
            None,
        )
        .unwrap();
        let (mut state, _, _) = boot(&plan, &a.spec, &params, MemoryMode::PolicyOnly).unwrap();
        let (_, ledger, latency) =
            invoke(&mut state, &a.spec, a.ws.generation_request_seed, &params).unwrap();
        // Page 9 is read then written: one demand fault, promoted private.
        assert_eq!(ledger.demand_pages_disk, 1);
        assert_eq!(ledger.cow_faults, 2);
        assert_eq!(
            latency,
            TenthUs::from_us(
                ledger.compute_us
                    + ledger.demand_pages_disk * params.lat_disk_fault_us
                    + ledger.cow_faults * params.lat_mem_fault_us
            )
        );
    }

    #[test]
    fn fault_counts_are_recomputable_from_the_access_trace() {
        let a = build_artifacts();
        let params = test_params();
        let plan = plan_for(&a, StrategyId::SnapFaas);
        let (mut state, _, _) = boot(&plan, &a.spec, &params, MemoryMode::PolicyOnly).unwrap();
        let mut tracker = AccessTracker::new(a.spec.memory_pages);
        let (_, ledger, _) = invoke_traced(
            &mut state,
            &a.spec,
            a.ws.generation_request_seed,
            &params,
            None,
            Some(&mut tracker),
        )
        .unwrap();
        let cow_from_trace = tracker
            .dirtied_ids()
            .into_iter()
            .filter(|p| plan.policy_overrides.get(p) == Some(&PagePolicy::SharedCow))
            .count() as u64;
        let demand_from_trace = tracker
            .accessed_ids()
            .into_iter()
            .filter(|p| plan.policy_overrides.get(p) == Some(&PagePolicy::DemandDisk))
            .count() as u64;
        assert_eq!(cow_from_trace, ledger.cow_faults);
        assert_eq!(demand_from_trace, ledger.demand_pages_disk);
    }

    #[test]
    fn warm_invoke_is_fault_free() {
        let a = build_artifacts();
        let params = test_params();
        let seed = a.ws.generation_request_seed;
        let plan = plan_for(&a, StrategyId::SnapFaas);
        let (mut state, _, _) = boot(&plan, &a.spec, &params, MemoryMode::Content).unwrap();
        let (_, _, cold_latency) = invoke(&mut state, &a.spec, seed, &params).unwrap();
        let cold_memory = materialize_memory(&state).unwrap();
        let (_, warm_ledger, warm_latency) =
            warm_invoke(&mut state, &a.spec, seed, &params).unwrap();
        // Same request, same write bytes: memory is unchanged by the re-run.
        assert_eq!(materialize_memory(&state).unwrap(), cold_memory);
        assert_eq!(warm_ledger.demand_pages_disk, 0);
        assert_eq!(warm_ledger.cow_faults, 0);
        assert_eq!(warm_latency, TenthUs::from_us(warm_ledger.compute_us));
        assert!(warm_latency < cold_latency);
    }

    #[test]
    fn invoke_rejects_instances_that_are_not_request_ready() {
        let a = build_artifacts();
        let params = test_params();
        // Fresh instance that never booted: cursor 0, channel down.
        let mut cold = GuestState::fresh(&a.spec, PS, MemoryMode::PolicyOnly);
        assert!(matches!(
            invoke(&mut cold, &a.spec, 0, &params),
            Err(RestoreError::NotRequestReady { .. })
        ));
        // Booted instance invoked twice without a rewind.
        let plan = plan_for(&a, StrategyId::SnapFaasMinus);
        let (mut state, _, _) = boot(&plan, &a.spec, &params, MemoryMode::PolicyOnly).unwrap();
        invoke(&mut state, &a.spec, 0, &params).unwrap();
        assert!(matches!(
            invoke(&mut state, &a.spec, 0, &params),
            Err(RestoreError::NotRequestReady { .. })
        ));
    }

    #[test]
    fn split_restore_materializes_the_from_scratch_memory() {
        let a = build_artifacts();
        let params = test_params();
        let split = plan_for(&a, StrategyId::SnapFaasMinus);
        let (split_state, _, _) = boot(&split, &a.spec, &params, MemoryMode::Content).unwrap();
        let regular = plan_restore(StrategyId::Regular, None, None, None, None).unwrap();
        let (regular_state, _, _) = boot(&regular, &a.spec, &params, MemoryMode::Content).unwrap();
        let split_mem = materialize_memory(&split_state).unwrap();
        let regular_mem = materialize_memory(&regular_state).unwrap();
        assert_eq!(split_mem, regular_mem);
        // The overlap page resolves to the diff content, not the base.
        let page7 = &split_mem[7 * PS as usize..8 * PS as usize];
        assert_eq!(page7, a.diff.pages.get(7).unwrap());
        assert_ne!(page7, a.base.pages.get(7).unwrap());
    }

    #[test]
    fn mismatched_plan_and_spec_are_rejected_at_boot() {
        let a = build_artifacts();
        let params = test_params();
        let plan = plan_for(&a, StrategyId::SnapFaasMinus);
        // Same structure, different declared memory size.
        let mut shrunk = fixture_spec();
        shrunk.memory_pages = 16;
        assert!(matches!(
            boot(&plan, &shrunk, &params, MemoryMode::PolicyOnly),
            Err(RestoreError::PlanSpecMismatch(_))
        ));
        // Page size disagreement between snapshot and configuration.
        let wrong_page = CostParams {
            page_size_bytes: 128,
            ..test_params()
        };
        assert!(matches!(
            boot(&plan, &a.spec, &wrong_page, MemoryMode::PolicyOnly),
            Err(RestoreError::PlanSpecMismatch(_))
        ));
        // A spec with an extra pre-request phase desynchronizes the cursor.
        let mut extra_phase = fixture_spec();
        let init = extra_phase.phases[3].clone();
        extra_phase.phases.insert(3, init);
        assert!(matches!(
            boot(&plan, &extra_phase, &params, MemoryMode::PolicyOnly),
            Err(RestoreError::PlanSpecMismatch(_))
        ));
    }

    proptest! {
        /// For any working-set subset of the diff, the plan's eager list is
        /// exactly the EagerDisk pages, the rest of the diff is demand, and
        /// the base stays copy-on-write.
        #[test]
        fn snapfaas_plan_partitions_the_diff(mask in proptest::collection::vec(any::<bool>(), 5)) {
            let a = build_artifacts();
            let ws_page_ids: Vec<u64> = a
                .diff
                .pages
                .page_ids()
                .zip(mask.iter())
                .filter(|(_, &keep)| keep)
                .map(|(page, _)| page)
                .collect();
            let ws = WorkingSetFile {
                diff_id: a.diff.metadata.content_id,
                generation_request_seed: 0,
                ws_page_ids: ws_page_ids.clone(),
            };
            let plan = plan_restore(
                StrategyId::SnapFaas,
                Some(&a.base),
                Some(&a.diff),
                Some(&ws),
                None,
            )
            .unwrap();
            prop_assert_eq!(&plan.eager_page_ids, &ws_page_ids);
            for page in a.diff.pages.page_ids() {
                let expected = if ws_page_ids.contains(&page) {
                    PagePolicy::EagerDisk
                } else {
                    PagePolicy::DemandDisk
                };
                prop_assert_eq!(plan.policy_overrides[&page], expected);
            }
            for page in a.base.pages.page_ids() {
                if !a.diff.pages.contains(page) {
                    prop_assert_eq!(plan.policy_overrides[&page], PagePolicy::SharedCow);
                }
            }
        }
    }
}
