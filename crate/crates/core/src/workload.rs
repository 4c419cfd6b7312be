// SPDX-License-Identifier: Apache-2.0

//! Workload documents: the deterministic programs the sandbox executes.
//!
//! A workload is a list of phases in non-decreasing provenance order
//! (Kernel, OsInit, Runtime, FunctionInit, Execution). Snapshot points sit at
//! the provenance boundaries: the base image is captured after the last
//! Runtime phase, the diff after the last FunctionInit phase.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hash::Fnv64;

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("malformed workload document: {0}")]
    Malformed(String),
    #[error("workload invariant violated in phase {phase:?} (index {phase_index}), step {step_index}: {reason}")]
    InvariantViolation {
        phase: String,
        phase_index: usize,
        step_index: usize,
        reason: String,
    },
    #[error("i/o error reading workload: {0}")]
    Io(#[from] std::io::Error),
}

/// Lifecycle stage a phase belongs to. Order is load-bearing: phases may not
/// go backward, and snapshot points are defined by these boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Kernel,
    OsInit,
    Runtime,
    FunctionInit,
    Execution,
}

impl Provenance {
    pub fn rank(self) -> u8 {
        match self {
            Provenance::Kernel => 0,
            Provenance::OsInit => 1,
            Provenance::Runtime => 2,
            Provenance::FunctionInit => 3,
            Provenance::Execution => 4,
        }
    }
}

/// One deterministic instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Step {
    /// Fill whole pages with seed-derived content.
    Write {
        start_page: u64,
        page_count: u64,
        step_seed: u64,
    },
    /// Observe whole pages, folding every byte into the read checksum.
    Read { start_page: u64, page_count: u64 },
    /// Spend declared virtual time.
    Compute { duration_us: u64 },
    /// Mount the function's application filesystem. FunctionInit only, at
    /// most once per workload.
    MountAppfs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub provenance: Provenance,
    pub steps: Vec<Step>,
}

/// Contiguous page range; used to declare AppFS-backed pages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRange {
    pub start_page: u64,
    pub page_count: u64,
}

impl PageRange {
    pub fn contains(&self, page: u64) -> bool {
        page >= self.start_page && page - self.start_page < self.page_count
    }

    pub fn end(&self) -> u64 {
        self.start_page + self.page_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub name: String,
    pub language_tag: String,
    pub workload_seed: u64,
    /// Addressable page count; every step range must stay below it.
    pub memory_pages: u64,
    /// Pages served from the application filesystem. Execution may only touch
    /// them after MountAppfs has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appfs_pages: Option<PageRange>,
    pub phases: Vec<Phase>,
}

impl WorkloadSpec {
    pub fn parse_str(text: &str) -> Result<Self, WorkloadError> {
        let spec: WorkloadSpec =
            serde_json::from_str(text).map_err(|e| WorkloadError::Malformed(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse_file(path: &Path) -> Result<Self, WorkloadError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Structural validation; every error names the offending phase and step.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let violation = |pi: usize, si: usize, reason: String| WorkloadError::InvariantViolation {
            phase: self
                .phases
                .get(pi)
                .map(|p| p.name.clone())
                .unwrap_or_default(),
            phase_index: pi,
            step_index: si,
            reason,
        };
        if self.memory_pages == 0 {
            return Err(WorkloadError::Malformed("memory_pages must be >= 1".into()));
        }
        if let Some(r) = &self.appfs_pages {
            if r.page_count == 0
                || r.start_page.checked_add(r.page_count).is_none()
                || r.end() > self.memory_pages
            {
                return Err(WorkloadError::Malformed(format!(
                    "appfs_pages [{}, +{}) outside memory of {} pages",
                    r.start_page, r.page_count, self.memory_pages
                )));
            }
        }
        let mut mount_seen = false;
        let mut last_rank = 0u8;
        for (pi, phase) in self.phases.iter().enumerate() {
            let rank = phase.provenance.rank();
            if rank < last_rank {
                return Err(violation(
                    pi,
                    0,
                    format!(
                        "provenance {:?} goes backward (previous phase rank {})",
                        phase.provenance, last_rank
                    ),
                ));
            }
            last_rank = rank;
            for (si, step) in phase.steps.iter().enumerate() {
                match step {
                    Step::Write {
                        start_page,
                        page_count,
                        ..
                    }
                    | Step::Read {
                        start_page,
                        page_count,
                    } => {
                        if *page_count == 0 {
                            return Err(violation(pi, si, "empty page range".into()));
                        }
                        let end = start_page.checked_add(*page_count);
                        if end.is_none() || end.unwrap() > self.memory_pages {
                            return Err(violation(
                                pi,
                                si,
                                format!(
                                    "page range [{start_page}, +{page_count}) outside memory of {} pages",
                                    self.memory_pages
                                ),
                            ));
                        }
                    }
                    Step::Compute { .. } => {}
                    Step::MountAppfs => {
                        if phase.provenance != Provenance::FunctionInit {
                            return Err(violation(
                                pi,
                                si,
                                "mount_appfs outside a function_init phase".into(),
                            ));
                        }
                        if mount_seen {
                            return Err(violation(
                                pi,
                                si,
                                "mount_appfs appears more than once".into(),
                            ));
                        }
                        mount_seen = true;
                    }
                }
            }
        }
        Ok(())
    }

    /// True if any phase declares a MountAppfs step.
    pub fn declares_appfs_mount(&self) -> bool {
        self.phases
            .iter()
            .any(|p| p.steps.iter().any(|s| matches!(s, Step::MountAppfs)))
    }

    fn first_index_past(&self, rank: u8) -> usize {
        self.phases
            .iter()
            .position(|p| p.provenance.rank() > rank)
            .unwrap_or(self.phases.len())
    }

    /// Phases executed before the base snapshot point (Kernel..Runtime).
    pub fn base_phases(&self) -> Range<usize> {
        0..self.first_index_past(Provenance::Runtime.rank())
    }

    /// FunctionInit phases: between the base and diff snapshot points.
    pub fn function_init_phases(&self) -> Range<usize> {
        self.first_index_past(Provenance::Runtime.rank())
            ..self.first_index_past(Provenance::FunctionInit.rank())
    }

    /// Everything before the request-ready point.
    pub fn boot_phases(&self) -> Range<usize> {
        0..self.first_index_past(Provenance::FunctionInit.rank())
    }

    /// Execution phases: consume the request payload seed.
    pub fn execution_phases(&self) -> Range<usize> {
        self.first_index_past(Provenance::FunctionInit.rank())..self.phases.len()
    }

    /// Sum of declared Compute time over a phase range, in microseconds.
    pub fn declared_compute_us(&self, range: Range<usize>) -> u64 {
        self.phases[range]
            .iter()
            .flat_map(|p| &p.steps)
            .map(|s| match s {
                Step::Compute { duration_us } => *duration_us,
                _ => 0,
            })
            .sum()
    }

    /// Digest of everything that determines memory content up to (not
    /// including) phase index `upto`, given a page size. Phase names and the
    /// function name are deliberately excluded so cosmetic renames do not
    /// break base-snapshot sharing across same-language workloads.
    pub fn provenance_digest(&self, upto: usize, page_size: u32) -> u64 {
        let mut h = Fnv64::new();
        h.write_str(&self.language_tag);
        h.write_u64(self.workload_seed);
        h.write_u64(u64::from(page_size));
        h.write_u64(upto as u64);
        for phase in &self.phases[..upto] {
            h.write_u64(u64::from(phase.provenance.rank()));
            h.write_u64(phase.steps.len() as u64);
            for step in &phase.steps {
                match step {
                    Step::Write {
                        start_page,
                        page_count,
                        step_seed,
                    } => {
                        h.write_u64(0);
                        h.write_u64(*start_page);
                        h.write_u64(*page_count);
                        h.write_u64(*step_seed);
                    }
                    Step::Read {
                        start_page,
                        page_count,
                    } => {
                        h.write_u64(1);
                        h.write_u64(*start_page);
                        h.write_u64(*page_count);
                    }
                    Step::Compute { duration_us } => {
                        h.write_u64(2);
                        h.write_u64(*duration_us);
                    }
                    Step::MountAppfs => h.write_u64(3),
                }
            }
        }
        h.finish()
    }

    /// Digest of the pre-FunctionInit prefix; recorded in base snapshot
    /// metadata and checked when a diff is generated against a base.
    pub fn base_provenance_digest(&self, page_size: u32) -> u64 {
        self.provenance_digest(self.base_phases().end, page_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(phases: Vec<Phase>) -> WorkloadSpec {
        WorkloadSpec {
            name: "t".into(),
            language_tag: "lang".into(),
            workload_seed: 7,
            memory_pages: 64,
            appfs_pages: None,
            phases,
        }
    }

    fn phase(name: &str, provenance: Provenance, steps: Vec<Step>) -> Phase {
        Phase {
            name: name.into(),
            provenance,
            steps,
        }
    }

    #[test]
    fn json_roundtrip() {
        let spec = minimal(vec![
            phase(
                "k",
                Provenance::Kernel,
                vec![Step::Write {
                    start_page: 0,
                    page_count: 4,
                    step_seed: 1,
                }],
            ),
            phase(
                "fi",
                Provenance::FunctionInit,
                vec![Step::MountAppfs, Step::Compute { duration_us: 5 }],
            ),
            phase(
                "run",
                Provenance::Execution,
                vec![Step::Read {
                    start_page: 0,
                    page_count: 2,
                }],
            ),
        ]);
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back = WorkloadSpec::parse_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn provenance_must_not_go_backward() {
        let spec = minimal(vec![
            phase("r", Provenance::Runtime, vec![]),
            phase("k", Provenance::Kernel, vec![]),
        ]);
        match spec.validate() {
            Err(WorkloadError::InvariantViolation { phase_index, .. }) => {
                assert_eq!(phase_index, 1)
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn mount_outside_function_init_rejected() {
        let spec = minimal(vec![phase(
            "r",
            Provenance::Runtime,
            vec![Step::MountAppfs],
        )]);
        assert!(matches!(
            spec.validate(),
            Err(WorkloadError::InvariantViolation { .. })
        ));
    }

    #[test]
    fn repeated_mount_rejected() {
        let spec = minimal(vec![phase(
            "fi",
            Provenance::FunctionInit,
            vec![Step::MountAppfs, Step::MountAppfs],
        )]);
        match spec.validate() {
            Err(WorkloadError::InvariantViolation { step_index, .. }) => assert_eq!(step_index, 1),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_write_rejected() {
        let spec = minimal(vec![phase(
            "k",
            Provenance::Kernel,
            vec![Step::Write {
                start_page: 60,
                page_count: 8,
                step_seed: 0,
            }],
        )]);
        assert!(matches!(
            spec.validate(),
            Err(WorkloadError::InvariantViolation { .. })
        ));
    }

    #[test]
    fn overflowing_range_rejected() {
        let spec = minimal(vec![phase(
            "k",
            Provenance::Kernel,
            vec![Step::Read {
                start_page: u64::MAX,
                page_count: 2,
            }],
        )]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn empty_range_rejected() {
        let spec = minimal(vec![phase(
            "k",
            Provenance::Kernel,
            vec![Step::Read {
                start_page: 0,
                page_count: 0,
            }],
        )]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_malformed() {
        let err = WorkloadSpec::parse_str(r#"{"name":"x","bogus":1}"#).unwrap_err();
        assert!(matches!(err, WorkloadError::Malformed(_)));
    }

    #[test]
    fn phase_boundaries() {
        let spec = minimal(vec![
            phase("k", Provenance::Kernel, vec![]),
            phase("os", Provenance::OsInit, vec![]),
            phase("rt1", Provenance::Runtime, vec![]),
            phase("rt2", Provenance::Runtime, vec![]),
            phase("fi", Provenance::FunctionInit, vec![]),
            phase("x1", Provenance::Execution, vec![]),
            phase("x2", Provenance::Execution, vec![]),
        ]);
        assert_eq!(spec.base_phases(), 0..4);
        assert_eq!(spec.function_init_phases(), 4..5);
        assert_eq!(spec.boot_phases(), 0..5);
        assert_eq!(spec.execution_phases(), 5..7);
    }

    #[test]
    fn empty_provenance_classes_collapse() {
        let spec = minimal(vec![phase("x", Provenance::Execution, vec![])]);
        assert_eq!(spec.base_phases(), 0..0);
        assert_eq!(spec.function_init_phases(), 0..0);
        assert_eq!(spec.execution_phases(), 0..1);
    }

    #[test]
    fn provenance_digest_ignores_names_but_not_structure() {
        let a = minimal(vec![phase(
            "k",
            Provenance::Kernel,
            vec![Step::Write {
                start_page: 0,
                page_count: 4,
                step_seed: 1,
            }],
        )]);
        let mut b = a.clone();
        b.phases[0].name = "renamed".into();
        b.name = "other".into();
        assert_eq!(
            a.base_provenance_digest(4096),
            b.base_provenance_digest(4096)
        );
        let mut c = a.clone();
        c.phases[0].steps[0] = Step::Write {
            start_page: 0,
            page_count: 5,
            step_seed: 1,
        };
        assert_ne!(
            a.base_provenance_digest(4096),
            c.base_provenance_digest(4096)
        );
        let mut d = a;
        d.workload_seed = 8;
        assert_ne!(
            d.base_provenance_digest(4096),
            b.base_provenance_digest(4096)
        );
    }
}
