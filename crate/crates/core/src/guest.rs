// SPDX-License-Identifier: Apache-2.0

//! Deterministic guest execution over layered memory.
//!
//! A guest instance is memory plus a small architectural state: four named
//! registers, three device flags, and a cursor into the workload's phase
//! list. Running a window of phases replays each step:
//!
//! * `Write` fills whole pages with bytes derived from the workload seed,
//!   the step seed (mixed with the request seed in execution-provenance
//!   phases, so distinct requests write distinct content), the page id, and
//!   the byte offset.
//! * `Read` touches pages in order and folds every observed byte into the
//!   run's read checksum.
//! * `Compute` accrues declared microseconds without touching memory.
//! * `MountAppfs` flips the device flag, erroring on a repeated mount.
//!
//! Register evolution is deterministic and content-faithful in content mode;
//! in policy-only mode reads fold range structure instead of bytes, so the
//! register trace and read checksum are meaningful only in content mode.
//! Fault accounting is identical in both modes.
//!
//! Optional read jitter models request-dependent access spread: a seeded
//! stream of extra single-page reads per execution phase. Jitter reads fault
//! and are visible to page tracking, but are excluded from the read checksum
//! and register evolution, so checksums stay comparable across jitter
//! settings while fault counts vary.

use crate::hash::{splitmix64, Fnv64, SPLITMIX_GAMMA};
use crate::mem::{LayeredMemory, MemError, MemoryMode};
use crate::workload::{Phase, Provenance, Step, WorkloadSpec};
use serde::{Deserialize, Serialize};
use std::ops::Range;

const PAGE_MIX: u64 = 0xBF58_476D_1CE4_E5B9;
const OFFSET_MIX: u64 = 0x94D0_49BB_1331_11EB;
/// Folded into the accumulator register by a mount step.
const MOUNT_TAG: u64 = 0xA9F5;

#[derive(Debug, thiserror::Error)]
pub enum GuestError {
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error("phase window starts at {requested} but instance cursor is at {cursor}")]
    PhaseOrder { requested: usize, cursor: usize },
    #[error("phase window {start}..{end} exceeds {available} phases")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        available: usize,
    },
    #[error("application file system mounted twice")]
    MountConflict,
}

/// Byte written at `offset` within `page` by a write step.
///
/// The value is the low byte of a well-mixed 64-bit hash of all four
/// coordinates, so any change to seed, page, or offset reshuffles content.
pub fn fill_byte(workload_seed: u64, step_seed: u64, page: u64, offset: u64) -> u8 {
    splitmix64(
        workload_seed
            ^ step_seed.wrapping_mul(SPLITMIX_GAMMA)
            ^ page.wrapping_mul(PAGE_MIX)
            ^ offset.wrapping_mul(OFFSET_MIX),
    ) as u8
}

/// Fill a whole page buffer as a write step does.
pub fn fill_page_into(buf: &mut [u8], workload_seed: u64, step_seed: u64, page: u64) {
    for (offset, b) in buf.iter_mut().enumerate() {
        *b = fill_byte(workload_seed, step_seed, page, offset as u64);
    }
}

/// Step seed actually used by a write: execution-provenance phases mix the
/// request seed so distinct requests produce distinct page content.
pub fn effective_step_seed(step_seed: u64, provenance: Provenance, request_seed: u64) -> u64 {
    if provenance == Provenance::Execution {
        step_seed ^ request_seed
    } else {
        step_seed
    }
}

/// Architectural registers, folded into the state digest in field order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registers {
    /// Steps executed since the instance was created.
    pub pc: u64,
    /// Folds the provenance rank of every phase entered.
    pub sp: u64,
    /// Folds step effects: written seeds/ranges and observed read content.
    pub acc: u64,
    /// Folds the effective seed of every write step.
    pub csr: u64,
}

/// Device flags, folded into the state digest in field order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceState {
    /// Set when an os-init phase runs (or restored from a snapshot).
    pub net_configured: bool,
    /// Set by the mount step of a function-init phase.
    pub appfs_mounted: bool,
    /// Set when an instance begins serving a request; never captured as set.
    pub vsock_connected: bool,
}

/// Access trace of a run: which pages were accessed (read or written) and
/// which were dirtied (written). Working-set recording reads the accessed
/// set; dirty-page capture and the copy-on-write trace oracle read the
/// dirtied set.
#[derive(Debug, Clone)]
pub struct AccessTracker {
    accessed: Vec<bool>,
    dirtied: Vec<bool>,
    accessed_count: u64,
    dirtied_count: u64,
}

impl AccessTracker {
    pub fn new(num_pages: u64) -> Self {
        AccessTracker {
            accessed: vec![false; num_pages as usize],
            dirtied: vec![false; num_pages as usize],
            accessed_count: 0,
            dirtied_count: 0,
        }
    }

    pub fn mark_read(&mut self, page: u64) {
        let slot = &mut self.accessed[page as usize];
        if !*slot {
            *slot = true;
            self.accessed_count += 1;
        }
    }

    pub fn mark_write(&mut self, page: u64) {
        self.mark_read(page);
        let slot = &mut self.dirtied[page as usize];
        if !*slot {
            *slot = true;
            self.dirtied_count += 1;
        }
    }

    pub fn accessed(&self, page: u64) -> bool {
        self.accessed.get(page as usize).copied().unwrap_or(false)
    }

    pub fn dirtied(&self, page: u64) -> bool {
        self.dirtied.get(page as usize).copied().unwrap_or(false)
    }

    pub fn accessed_count(&self) -> u64 {
        self.accessed_count
    }

    pub fn dirtied_count(&self) -> u64 {
        self.dirtied_count
    }

    /// Accessed page ids in increasing order.
    pub fn accessed_ids(&self) -> Vec<u64> {
        self.accessed
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| t.then_some(i as u64))
            .collect()
    }

    /// Dirtied page ids in increasing order.
    pub fn dirtied_ids(&self) -> Vec<u64> {
        self.dirtied
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| t.then_some(i as u64))
            .collect()
    }
}

/// Per-run execution options.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    /// Mixed into execution-provenance write seeds.
    pub request_seed: u64,
    /// When set, enables seeded read jitter for execution phases.
    pub jitter_salt: Option<u64>,
}

/// Extra uniform single-page reads injected per execution phase when jitter
/// is enabled.
pub const JITTER_READS_PER_PHASE: u32 = 16;

struct JitterStream {
    state: u64,
}

impl JitterStream {
    fn new(workload_seed: u64, request_seed: u64, salt: u64) -> Self {
        JitterStream {
            state: splitmix64(splitmix64(salt) ^ splitmix64(request_seed) ^ workload_seed),
        }
    }

    fn next(&mut self) -> u64 {
        let v = splitmix64(self.state);
        self.state = self.state.wrapping_add(SPLITMIX_GAMMA);
        v
    }
}

/// Outputs of one phase-window run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseRunStats {
    /// Sum of declared compute durations in the window, microseconds.
    pub compute_us: u64,
    /// FNV-1a 64 over every byte observed by declared reads, in order.
    /// Zero in policy-only mode, where no bytes are materialized.
    pub read_checksum: u64,
    /// Declared steps executed (jitter reads excluded).
    pub steps_executed: u64,
}

/// A guest instance: layered memory plus architectural state.
#[derive(Debug)]
pub struct GuestState {
    pub mem: LayeredMemory,
    pub regs: Registers,
    pub device: DeviceState,
    /// Index of the next phase to run.
    pub phase_cursor: usize,
}

impl GuestState {
    /// Fresh instance over all-zero memory, as a from-scratch boot begins.
    pub fn fresh(spec: &WorkloadSpec, page_size: u32, mode: MemoryMode) -> Self {
        GuestState {
            mem: LayeredMemory::new_zero(spec.memory_pages, page_size, mode),
            regs: Registers::default(),
            device: DeviceState::default(),
            phase_cursor: 0,
        }
    }

    /// Instance over pre-built memory with restored architectural state.
    pub fn restored(
        mem: LayeredMemory,
        regs: Registers,
        device: DeviceState,
        phase_cursor: usize,
    ) -> Self {
        GuestState {
            mem,
            regs,
            device,
            phase_cursor,
        }
    }

    /// Digest of the full materialized state: every page in index order,
    /// then registers, then device flags. Content mode only.
    pub fn state_digest(&self) -> Result<u64, GuestError> {
        let mut h = Fnv64::new();
        for page in 0..self.mem.num_pages() {
            h.write(self.mem.peek_page(page)?);
        }
        h.write_u64(self.regs.pc);
        h.write_u64(self.regs.sp);
        h.write_u64(self.regs.acc);
        h.write_u64(self.regs.csr);
        h.write(&[
            self.device.net_configured as u8,
            self.device.appfs_mounted as u8,
            self.device.vsock_connected as u8,
        ]);
        Ok(h.finish())
    }

    /// Reset the cursor to re-run a window on an already-hot instance.
    /// Memory, registers, and device flags keep their current values.
    pub fn rewind_to(&mut self, phase_index: usize) {
        self.phase_cursor = phase_index;
    }
}

/// Run `window` phases of `spec` on `state`, charging faults to the
/// instance's memory and marking `tracker` (when attached) with every page
/// touched, jitter included.
pub fn run_phases(
    state: &mut GuestState,
    spec: &WorkloadSpec,
    window: Range<usize>,
    opts: &ExecOptions,
    mut tracker: Option<&mut AccessTracker>,
) -> Result<PhaseRunStats, GuestError> {
    if window.start > window.end || window.end > spec.phases.len() {
        return Err(GuestError::WindowOutOfRange {
            start: window.start,
            end: window.end,
            available: spec.phases.len(),
        });
    }
    if state.phase_cursor != window.start {
        return Err(GuestError::PhaseOrder {
            requested: window.start,
            cursor: state.phase_cursor,
        });
    }
    let mut stats = PhaseRunStats {
        compute_us: 0,
        read_checksum: 0,
        steps_executed: 0,
    };
    let mut checksum = Fnv64::new();
    for index in window.clone() {
        let phase = &spec.phases[index];
        run_one_phase(
            state,
            spec,
            phase,
            opts,
            &mut stats,
            &mut checksum,
            &mut tracker,
        )?;
        state.phase_cursor = index + 1;
    }
    stats.read_checksum = match state.mem.mode() {
        MemoryMode::Content => checksum.finish(),
        // No bytes are observed; zero marks the checksum as not meaningful.
        MemoryMode::PolicyOnly => 0,
    };
    Ok(stats)
}

fn run_one_phase(
    state: &mut GuestState,
    spec: &WorkloadSpec,
    phase: &Phase,
    opts: &ExecOptions,
    stats: &mut PhaseRunStats,
    checksum: &mut Fnv64,
    tracker: &mut Option<&mut AccessTracker>,
) -> Result<(), GuestError> {
    state.regs.sp = splitmix64(state.regs.sp ^ (phase.provenance.rank() as u64 + 1));
    if phase.provenance == Provenance::OsInit {
        state.device.net_configured = true;
    }
    for step in &phase.steps {
        match *step {
            Step::Write {
                start_page,
                page_count,
                step_seed,
            } => {
                let seed = effective_step_seed(step_seed, phase.provenance, opts.request_seed);
                for page in start_page..start_page + page_count {
                    state.mem.write_page_with(page, |buf| {
                        fill_page_into(buf, spec.workload_seed, seed, page);
                    })?;
                    if let Some(t) = tracker.as_deref_mut() {
                        t.mark_write(page);
                    }
                }
                state.regs.acc = splitmix64(
                    state.regs.acc
                        ^ seed
                        ^ start_page.wrapping_mul(PAGE_MIX)
                        ^ page_count.wrapping_mul(OFFSET_MIX),
                );
                state.regs.csr = splitmix64(state.regs.csr ^ seed);
            }
            Step::Read {
                start_page,
                page_count,
            } => {
                let mut step_fold = Fnv64::new();
                for page in start_page..start_page + page_count {
                    if let Some(bytes) = state.mem.read_page(page)? {
                        checksum.write(bytes);
                        step_fold.write(bytes);
                    }
                    if let Some(t) = tracker.as_deref_mut() {
                        t.mark_read(page);
                    }
                }
                let fold = match state.mem.mode() {
                    MemoryMode::Content => step_fold.finish(),
                    MemoryMode::PolicyOnly => {
                        start_page.wrapping_mul(PAGE_MIX) ^ page_count.wrapping_mul(OFFSET_MIX)
                    }
                };
                state.regs.acc = splitmix64(state.regs.acc ^ fold);
            }
            Step::Compute { duration_us } => {
                stats.compute_us += duration_us;
                state.regs.acc = splitmix64(state.regs.acc ^ duration_us);
            }
            Step::MountAppfs => {
                if state.device.appfs_mounted {
                    return Err(GuestError::MountConflict);
                }
                state.device.appfs_mounted = true;
                state.regs.acc = splitmix64(state.regs.acc ^ MOUNT_TAG);
            }
        }
        state.regs.pc += 1;
        stats.steps_executed += 1;
    }
    if phase.provenance == Provenance::Execution {
        if let Some(salt) = opts.jitter_salt {
            let mut stream = JitterStream::new(spec.workload_seed, opts.request_seed, salt);
            for _ in 0..JITTER_READS_PER_PHASE {
                let page = stream.next() % state.mem.num_pages();
                state.mem.read_page(page)?;
                if let Some(t) = tracker.as_deref_mut() {
                    t.mark_read(page);
                }
            }
        }
    }
    Ok(())
}
