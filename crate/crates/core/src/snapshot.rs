// SPDX-License-Identifier: Apache-2.0

//! Snapshot generation, persistence, and the base/diff split.
//!
//! A *base* snapshot captures a language runtime after its boot phases
//! (kernel, os-init, runtime) and is shared by every function of that
//! language; the application file system is never mounted at base capture.
//! A *diff* snapshot captures exactly the pages a specific function dirtied
//! during its function-init phases on top of the base; diff pages override
//! base pages on restore. Merging the two yields the function's *full*
//! snapshot, equivalent to a conventional single-file snapshot; the merge is
//! derived at load time and never stored.
//!
//! Two working-set recordings replay the execution phases over a fully
//! on-demand restore of the merged snapshot with access tracking on and read
//! jitter off:
//!
//! * [`generate_ws`] records the accessed pages **backed by the diff file**
//!   — the prefetch list for a split-snapshot restore, always a subset of
//!   the diff's dirty pages.
//! * [`generate_full_ws`] records the accessed pages backed by the merged
//!   file — the prefetch list for a whole-snapshot eager restore.
//!
//! On disk a snapshot is a directory holding `metadata.json` and a sparse
//! `pages.bin`; loading recomputes the page-file digest and rejects any
//! mismatch with the recorded content id, and checks the metadata's explicit
//! dirty-page list against the file's actual page ids. Snapshots are always
//! captured before any request is served, so metadata claiming a connected
//! request channel is rejected as corrupt.

use crate::guest::{run_phases, AccessTracker, DeviceState, ExecOptions, GuestState, Registers};
use crate::mem::{LayeredMemory, MemoryMode, PagePolicy};
use crate::pagefile::{PageFileError, PageImage, SparsePageFile};
use crate::workload::WorkloadSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

pub const METADATA_FILE: &str = "metadata.json";
pub const PAGES_FILE: &str = "pages.bin";

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error(transparent)]
    PageFile(#[from] PageFileError),
    #[error(transparent)]
    Guest(#[from] crate::guest::GuestError),
    #[error("malformed snapshot metadata: {0}")]
    Malformed(String),
    #[error("captured state violates a snapshot invariant: {0}")]
    InvariantViolation(String),
    #[error("snapshot is a {found:?} snapshot, expected {expected:?}")]
    KindMismatch {
        expected: SnapshotKind,
        found: SnapshotKind,
    },
    #[error("snapshot does not match this workload's {what}: expected {expected}, found {found}")]
    SpecMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("base {what} mismatch: expected {expected:016x}, found {found:016x}")]
    BaseMismatch {
        what: &'static str,
        expected: u64,
        found: u64,
    },
    #[error("page file digest {computed:016x} does not match recorded content id {recorded:016x}")]
    IntegrityMismatch { recorded: u64, computed: u64 },
    #[error("io error accessing {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SnapshotError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        SnapshotError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Base,
    Diff,
}

/// 64-bit ids are stored as fixed-width lowercase hex in JSON.
mod hex_id {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(serde::de::Error::custom)
    }

    pub fn parse(raw: &str) -> Result<u64, String> {
        if raw.len() != 16 {
            return Err(format!("id must be 16 hex digits, got {raw:?}"));
        }
        u64::from_str_radix(raw, 16).map_err(|e| format!("bad id {raw:?}: {e}"))
    }
}

mod hex_id_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_some(&format!("{v:016x}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let raw = Option::<String>::deserialize(d)?;
        raw.map(|r| super::hex_id::parse(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Everything needed to resume from a snapshot except the pages themselves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMetadata {
    pub snapshot_kind: SnapshotKind,
    /// Name of the workload that generated the snapshot.
    pub name: String,
    pub language_tag: String,
    pub workload_seed: u64,
    pub page_size: u32,
    /// Guest memory size of the generating instance, in pages.
    pub memory_pages: u64,
    /// Index of the next phase to run when resuming from this snapshot.
    pub phase_cursor: usize,
    pub registers: Registers,
    pub device: DeviceState,
    /// Digest of the page file, recomputed and checked on load.
    #[serde(with = "hex_id")]
    pub content_id: u64,
    /// For diffs: content id of the base the diff was captured against.
    #[serde(with = "hex_id_opt")]
    pub parent_base_id: Option<u64>,
    /// For diffs: explicit record of the dirtied pages, kept even though it
    /// is derivable from the sparse file; a consistency check enforces the
    /// two always agree.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dirty_page_ids: Option<Vec<u64>>,
    /// Structural digest of the phases executed before capture; restore
    /// refuses a snapshot whose digest disagrees with the workload.
    #[serde(with = "hex_id")]
    pub provenance_digest: u64,
}

/// A base or diff snapshot: metadata plus its sparse page file.
///
/// Base snapshots are held resident in memory and shared copy-on-write;
/// diff (and merged) page files act as the disk tier for eager and demand
/// restoration.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub metadata: SnapshotMetadata,
    pub pages: PageImage,
}

impl Snapshot {
    /// Stable artifact id: bases read `language_tag-digest` so one store can
    /// hold a base per language; diffs are the bare content digest.
    pub fn id(&self) -> String {
        match self.metadata.snapshot_kind {
            SnapshotKind::Base => format!(
                "{}-{:016x}",
                self.metadata.language_tag, self.metadata.content_id
            ),
            SnapshotKind::Diff => format!("{:016x}", self.metadata.content_id),
        }
    }
}

/// A function's complete snapshot, derived by merging base and diff.
/// Never persisted; the split files are the artifacts of record.
#[derive(Debug, Clone)]
pub struct FullSnapshot {
    pub name: String,
    pub language_tag: String,
    pub workload_seed: u64,
    pub page_size: u32,
    pub memory_pages: u64,
    pub phase_cursor: usize,
    pub registers: Registers,
    pub device: DeviceState,
    /// Digest of the merged page file.
    pub content_id: u64,
    pub pages: PageImage,
}

/// Snapshot pages accessed by a recorded invocation — the eager prefetch
/// list for later restores of the same function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkingSetFile {
    /// Content id of the diff snapshot this recording belongs to.
    #[serde(with = "hex_id")]
    pub diff_id: u64,
    /// Request seed the recording ran with, so later invokes can tell
    /// same-input benchmarking from novel inputs.
    pub generation_request_seed: u64,
    /// Strictly increasing page ids.
    pub ws_page_ids: Vec<u64>,
}

fn capture_pages(state: &GuestState) -> Result<SparsePageFile, SnapshotError> {
    let entries = state
        .mem
        .private_pages()
        .into_iter()
        .map(|page| {
            state
                .mem
                .peek_page(page)
                .map(|bytes| (page, Box::<[u8]>::from(bytes)))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(crate::guest::GuestError::from)?;
    Ok(SparsePageFile::from_entries(state.mem.page_size(), entries))
}

fn capture_metadata(
    state: &GuestState,
    spec: &WorkloadSpec,
    kind: SnapshotKind,
    pages: &SparsePageFile,
    parent_base_id: Option<u64>,
) -> SnapshotMetadata {
    SnapshotMetadata {
        snapshot_kind: kind,
        name: spec.name.clone(),
        language_tag: spec.language_tag.clone(),
        workload_seed: spec.workload_seed,
        page_size: state.mem.page_size(),
        memory_pages: state.mem.num_pages(),
        phase_cursor: state.phase_cursor,
        registers: state.regs,
        device: state.device,
        content_id: pages.digest(),
        parent_base_id,
        dirty_page_ids: match kind {
            SnapshotKind::Base => None,
            SnapshotKind::Diff => Some(pages.page_ids().collect()),
        },
        provenance_digest: spec.provenance_digest(state.phase_cursor, state.mem.page_size()),
    }
}

/// Run a workload's boot phases (kernel, os-init, runtime) from scratch with
/// dirty tracking and capture the language runtime image every function of
/// the language shares.
pub fn generate_base(spec: &WorkloadSpec, page_size: u32) -> Result<Snapshot, SnapshotError> {
    if spec.base_phases().is_empty() {
        return Err(SnapshotError::InvariantViolation(format!(
            "workload {:?} has no boot phases to capture a base from",
            spec.name
        )));
    }
    let mut state = GuestState::fresh(spec, page_size, MemoryMode::Content);
    run_phases(
        &mut state,
        spec,
        spec.base_phases(),
        &ExecOptions::default(),
        None,
    )?;
    if state.device.appfs_mounted {
        return Err(SnapshotError::InvariantViolation(
            "application fs mounted before the base capture point".into(),
        ));
    }
    debug_assert!(!state.device.vsock_connected, "snapshots precede requests");
    let pages = capture_pages(&state)?;
    let metadata = capture_metadata(&state, spec, SnapshotKind::Base, &pages, None);
    Ok(Snapshot {
        metadata,
        pages: Arc::new(pages),
    })
}

/// Check that a base snapshot is the one this workload's boot phases would
/// produce, so restoring it is indistinguishable from booting.
pub fn check_base_compat(
    spec: &WorkloadSpec,
    page_size: u32,
    base: &Snapshot,
) -> Result<(), SnapshotError> {
    if base.metadata.snapshot_kind != SnapshotKind::Base {
        return Err(SnapshotError::KindMismatch {
            expected: SnapshotKind::Base,
            found: base.metadata.snapshot_kind,
        });
    }
    let checks: [(&'static str, String, String); 3] = [
        (
            "language",
            spec.language_tag.clone(),
            base.metadata.language_tag.clone(),
        ),
        (
            "workload seed",
            format!("{:#x}", spec.workload_seed),
            format!("{:#x}", base.metadata.workload_seed),
        ),
        (
            "page size",
            page_size.to_string(),
            base.metadata.page_size.to_string(),
        ),
    ];
    for (what, expected, found) in checks {
        if expected != found {
            return Err(SnapshotError::SpecMismatch {
                what,
                expected,
                found,
            });
        }
    }
    let expected_digest = spec.base_provenance_digest(page_size);
    if base.metadata.provenance_digest != expected_digest {
        return Err(SnapshotError::BaseMismatch {
            what: "boot provenance digest",
            expected: expected_digest,
            found: base.metadata.provenance_digest,
        });
    }
    if base.metadata.phase_cursor != spec.base_phases().end {
        return Err(SnapshotError::SpecMismatch {
            what: "boot phase count",
            expected: spec.base_phases().end.to_string(),
            found: base.metadata.phase_cursor.to_string(),
        });
    }
    Ok(())
}

/// Check that a diff snapshot belongs to this workload: right function,
/// right memory size, right pre-request provenance, and an application file
/// system state matching what the workload declares.
pub fn check_diff_matches_spec(
    spec: &WorkloadSpec,
    page_size: u32,
    diff: &Snapshot,
) -> Result<(), SnapshotError> {
    if diff.metadata.snapshot_kind != SnapshotKind::Diff {
        return Err(SnapshotError::KindMismatch {
            expected: SnapshotKind::Diff,
            found: diff.metadata.snapshot_kind,
        });
    }
    let exec_start = spec.execution_phases().start;
    let checks: [(&'static str, String, String); 6] = [
        (
            "function name",
            spec.name.clone(),
            diff.metadata.name.clone(),
        ),
        (
            "language",
            spec.language_tag.clone(),
            diff.metadata.language_tag.clone(),
        ),
        (
            "memory size",
            spec.memory_pages.to_string(),
            diff.metadata.memory_pages.to_string(),
        ),
        (
            "page size",
            page_size.to_string(),
            diff.metadata.page_size.to_string(),
        ),
        (
            "pre-request provenance",
            format!("{:016x}", spec.provenance_digest(exec_start, page_size)),
            format!("{:016x}", diff.metadata.provenance_digest),
        ),
        (
            "application fs state",
            spec.declares_appfs_mount().to_string(),
            diff.metadata.device.appfs_mounted.to_string(),
        ),
    ];
    for (what, expected, found) in checks {
        if expected != found {
            return Err(SnapshotError::SpecMismatch {
                what,
                expected,
                found,
            });
        }
    }
    Ok(())
}

/// Restore a base snapshot copy-on-write, run the workload's function-init
/// phases with dirty tracking, and capture exactly the pages dirtied on top.
pub fn generate_diff(spec: &WorkloadSpec, base: &Snapshot) -> Result<Snapshot, SnapshotError> {
    let page_size = base.metadata.page_size;
    check_base_compat(spec, page_size, base)?;
    let mut policies = vec![PagePolicy::ZeroFill; spec.memory_pages as usize];
    for page in base.pages.page_ids() {
        policies[page as usize] = PagePolicy::SharedCow;
    }
    let mem = LayeredMemory::with_policies(
        policies,
        page_size,
        MemoryMode::Content,
        Some(Arc::clone(&base.pages)),
        None,
    );
    let mut state = GuestState::restored(
        mem,
        base.metadata.registers,
        base.metadata.device,
        base.metadata.phase_cursor,
    );
    run_phases(
        &mut state,
        spec,
        spec.function_init_phases(),
        &ExecOptions::default(),
        None,
    )?;
    let pages = capture_pages(&state)?;
    let metadata = capture_metadata(
        &state,
        spec,
        SnapshotKind::Diff,
        &pages,
        Some(base.metadata.content_id),
    );
    Ok(Snapshot {
        metadata,
        pages: Arc::new(pages),
    })
}

/// Check that `diff` was captured against exactly this `base`: right kinds,
/// matching parent content id, matching page size.
pub fn check_base_diff_pair(base: &Snapshot, diff: &Snapshot) -> Result<(), SnapshotError> {
    if base.metadata.snapshot_kind != SnapshotKind::Base {
        return Err(SnapshotError::KindMismatch {
            expected: SnapshotKind::Base,
            found: base.metadata.snapshot_kind,
        });
    }
    if diff.metadata.snapshot_kind != SnapshotKind::Diff {
        return Err(SnapshotError::KindMismatch {
            expected: SnapshotKind::Diff,
            found: diff.metadata.snapshot_kind,
        });
    }
    match diff.metadata.parent_base_id {
        Some(id) if id == base.metadata.content_id => {}
        other => {
            return Err(SnapshotError::BaseMismatch {
                what: "content id",
                expected: other.unwrap_or(0),
                found: base.metadata.content_id,
            })
        }
    }
    if base.metadata.page_size != diff.metadata.page_size {
        return Err(SnapshotError::SpecMismatch {
            what: "page size",
            expected: base.metadata.page_size.to_string(),
            found: diff.metadata.page_size.to_string(),
        });
    }
    Ok(())
}

/// Merge a base and a diff into the function's full snapshot. Diff pages
/// override base pages on overlap.
pub fn merge_full(base: &Snapshot, diff: &Snapshot) -> Result<FullSnapshot, SnapshotError> {
    check_base_diff_pair(base, diff)?;
    // Merge two strictly increasing entry lists; diff wins on overlap.
    let mut entries = Vec::with_capacity(base.pages.len() + diff.pages.len());
    let mut base_iter = base.pages.iter().peekable();
    let mut diff_iter = diff.pages.iter().peekable();
    loop {
        match (base_iter.peek(), diff_iter.peek()) {
            (Some(&(bp, _)), Some(&(dp, _))) => {
                if bp < dp {
                    let (p, bytes) = base_iter.next().unwrap();
                    entries.push((p, Box::<[u8]>::from(bytes)));
                } else {
                    if bp == dp {
                        base_iter.next();
                    }
                    let (p, bytes) = diff_iter.next().unwrap();
                    entries.push((p, Box::<[u8]>::from(bytes)));
                }
            }
            (Some(_), None) => {
                let (p, bytes) = base_iter.next().unwrap();
                entries.push((p, Box::<[u8]>::from(bytes)));
            }
            (None, Some(_)) => {
                let (p, bytes) = diff_iter.next().unwrap();
                entries.push((p, Box::<[u8]>::from(bytes)));
            }
            (None, None) => break,
        }
    }
    let pages = SparsePageFile::from_entries(base.metadata.page_size, entries);
    let content_id = pages.digest();
    Ok(FullSnapshot {
        name: diff.metadata.name.clone(),
        language_tag: diff.metadata.language_tag.clone(),
        workload_seed: diff.metadata.workload_seed,
        page_size: diff.metadata.page_size,
        memory_pages: diff.metadata.memory_pages,
        phase_cursor: diff.metadata.phase_cursor,
        registers: diff.metadata.registers,
        device: diff.metadata.device,
        content_id,
        pages: Arc::new(pages),
    })
}

/// Replay the execution phases over a fully on-demand restore of the merged
/// snapshot, with access tracking on and jitter off. Returns the trace.
fn record_access_trace(
    spec: &WorkloadSpec,
    full: &FullSnapshot,
    request_seed: u64,
) -> Result<AccessTracker, SnapshotError> {
    let mut policies = vec![PagePolicy::ZeroFill; full.memory_pages as usize];
    for page in full.pages.page_ids() {
        policies[page as usize] = PagePolicy::DemandDisk;
    }
    // Policy-only: the recording needs touch events, not byte contents.
    let mem = LayeredMemory::with_policies(
        policies,
        full.page_size,
        MemoryMode::PolicyOnly,
        None,
        Some(Arc::clone(&full.pages)),
    );
    let mut state = GuestState::restored(mem, full.registers, full.device, full.phase_cursor);
    let mut tracker = AccessTracker::new(full.memory_pages);
    run_phases(
        &mut state,
        spec,
        spec.execution_phases(),
        &ExecOptions {
            request_seed,
            jitter_salt: None,
        },
        Some(&mut tracker),
    )?;
    Ok(tracker)
}

/// Record which **diff-backed** pages one execution accesses: the prefetch
/// list for split-snapshot restores. Always a subset of the diff's pages.
pub fn generate_ws(
    spec: &WorkloadSpec,
    base: &Snapshot,
    diff: &Snapshot,
    request_seed: u64,
) -> Result<WorkingSetFile, SnapshotError> {
    check_diff_matches_spec(spec, diff.metadata.page_size, diff)?;
    let full = merge_full(base, diff)?;
    let tracker = record_access_trace(spec, &full, request_seed)?;
    let ws_page_ids: Vec<u64> = diff
        .pages
        .page_ids()
        .filter(|&p| tracker.accessed(p))
        .collect();
    let ws = WorkingSetFile {
        diff_id: diff.metadata.content_id,
        generation_request_seed: request_seed,
        ws_page_ids,
    };
    ws.validate()?;
    debug_assert!(ws.is_subset_of(diff.pages.page_ids()));
    Ok(ws)
}

/// Record which **merged-snapshot** pages one execution accesses: the
/// prefetch list for whole-snapshot eager restores. Keyed by the same diff
/// id; a superset of the split-restore working set.
pub fn generate_full_ws(
    spec: &WorkloadSpec,
    base: &Snapshot,
    diff: &Snapshot,
    request_seed: u64,
) -> Result<WorkingSetFile, SnapshotError> {
    check_diff_matches_spec(spec, diff.metadata.page_size, diff)?;
    let full = merge_full(base, diff)?;
    let tracker = record_access_trace(spec, &full, request_seed)?;
    let ws_page_ids: Vec<u64> = full
        .pages
        .page_ids()
        .filter(|&p| tracker.accessed(p))
        .collect();
    let ws = WorkingSetFile {
        diff_id: diff.metadata.content_id,
        generation_request_seed: request_seed,
        ws_page_ids,
    };
    ws.validate()?;
    Ok(ws)
}

impl Snapshot {
    /// Write `metadata.json` and `pages.bin` into `dir` (created if absent).
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SnapshotError> {
        std::fs::create_dir_all(dir).map_err(|e| SnapshotError::io(dir, e))?;
        let meta_path = dir.join(METADATA_FILE);
        let mut json = serde_json::to_string_pretty(&self.metadata)
            .map_err(|e| SnapshotError::Malformed(e.to_string()))?;
        json.push('\n');
        std::fs::write(&meta_path, json).map_err(|e| SnapshotError::io(&meta_path, e))?;
        self.pages.write_to_path(&dir.join(PAGES_FILE))?;
        Ok(())
    }

    /// Load and validate a snapshot directory: strict metadata parse, page
    /// file decode, digest check against the recorded content id, dirty-list
    /// consistency, kind-specific metadata rules, and page ids bounded by
    /// the recorded memory size.
    pub fn load_from_dir(dir: &Path) -> Result<Snapshot, SnapshotError> {
        let meta_path = dir.join(METADATA_FILE);
        let raw =
            std::fs::read_to_string(&meta_path).map_err(|e| SnapshotError::io(&meta_path, e))?;
        let metadata: SnapshotMetadata =
            serde_json::from_str(&raw).map_err(|e| SnapshotError::Malformed(e.to_string()))?;
        if metadata.device.vsock_connected {
            return Err(SnapshotError::Malformed(
                "snapshot claims a connected request channel; snapshots precede requests".into(),
            ));
        }
        match metadata.snapshot_kind {
            SnapshotKind::Base => {
                if metadata.parent_base_id.is_some() {
                    return Err(SnapshotError::Malformed(
                        "base snapshot must not reference a parent base".into(),
                    ));
                }
                if metadata.device.appfs_mounted {
                    return Err(SnapshotError::Malformed(
                        "base snapshot captured with the application fs mounted".into(),
                    ));
                }
                if metadata.dirty_page_ids.is_some() {
                    return Err(SnapshotError::Malformed(
                        "dirty page list belongs to diff snapshots only".into(),
                    ));
                }
            }
            SnapshotKind::Diff => {
                if metadata.parent_base_id.is_none() {
                    return Err(SnapshotError::Malformed(
                        "diff snapshot missing its parent base id".into(),
                    ));
                }
                if metadata.dirty_page_ids.is_none() {
                    return Err(SnapshotError::Malformed(
                        "diff snapshot missing its dirty page list".into(),
                    ));
                }
            }
        }
        let pages = SparsePageFile::read_from_path(&dir.join(PAGES_FILE))?;
        if pages.page_size() != metadata.page_size {
            return Err(SnapshotError::SpecMismatch {
                what: "page size",
                expected: metadata.page_size.to_string(),
                found: pages.page_size().to_string(),
            });
        }
        let computed = pages.digest();
        if computed != metadata.content_id {
            return Err(SnapshotError::IntegrityMismatch {
                recorded: metadata.content_id,
                computed,
            });
        }
        if let Some(dirty) = &metadata.dirty_page_ids {
            if dirty.iter().copied().ne(pages.page_ids()) {
                return Err(SnapshotError::Malformed(
                    "metadata dirty page list disagrees with the page file".into(),
                ));
            }
        }
        if let Some((last, _)) = pages.iter().last() {
            if last >= metadata.memory_pages {
                return Err(SnapshotError::Malformed(format!(
                    "page {last} outside guest memory of {} pages",
                    metadata.memory_pages
                )));
            }
        }
        Ok(Snapshot {
            metadata,
            pages: Arc::new(pages),
        })
    }
}

impl WorkingSetFile {
    pub fn validate(&self) -> Result<(), SnapshotError> {
        if !self.ws_page_ids.windows(2).all(|w| w[0] < w[1]) {
            return Err(SnapshotError::Malformed(
                "working set page ids must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// True when every working-set page appears in `reference` (an
    /// increasing id sequence, e.g. a page file's ids).
    pub fn is_subset_of(&self, reference: impl Iterator<Item = u64>) -> bool {
        let mut ws = self.ws_page_ids.iter().copied().peekable();
        for id in reference {
            while let Some(&w) = ws.peek() {
                if w == id {
                    ws.next();
                } else if w < id {
                    return false;
                } else {
                    break;
                }
            }
        }
        ws.peek().is_none()
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        let mut json = serde_json::to_string_pretty(self)
            .map_err(|e| SnapshotError::Malformed(e.to_string()))?;
        json.push('\n');
        std::fs::write(path, json).map_err(|e| SnapshotError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<WorkingSetFile, SnapshotError> {
        let raw = std::fs::read_to_string(path).map_err(|e| SnapshotError::io(path, e))?;
        let ws: WorkingSetFile =
            serde_json::from_str(&raw).map_err(|e| SnapshotError::Malformed(e.to_string()))?;
        ws.validate()?;
        Ok(ws)
    }
}
