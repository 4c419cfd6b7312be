// SPDX-License-Identifier: Apache-2.0

//! Artifact registration and the benchmark pipeline.
//!
//! This module turns the lower layers into the end-to-end workflow the CLI
//! exposes: register a function (generate or reuse its language base, derive
//! the diff snapshot, record its working sets, write a manifest), then run
//! strategy comparisons over many rounds and emit machine-readable reports.
//!
//! Artifact stores use one fixed layout rooted at a directory of the
//! caller's choosing:
//!
//! ```text
//! <store>/
//! ├── bases/<base_id>/{metadata.json, pages.bin}
//! └── functions/<name>/
//!     ├── manifest.json     cross-references everything below
//!     ├── spec.json         canonical copy of the workload spec
//!     ├── diff/{metadata.json, pages.bin}
//!     ├── ws.json           pages of the diff one recorded request touched
//!     └── full-ws.json      pages of the merged snapshot the same request touched
//! ```
//!
//! All manifest paths are relative to the manifest's own directory, so a
//! store can be moved or copied as a unit.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::costmodel::{breakdown, CostParams, ModelError, TenthUs};
use crate::guest::AccessTracker;
use crate::mem::{MemoryMode, PagePolicy};
use crate::restore::{
    boot, invoke_traced, plan_restore, warm_invoke, RestoreError, RestorePlan, StrategyId,
};
use crate::snapshot::{
    check_base_compat, check_base_diff_pair, check_diff_matches_spec, generate_base, generate_diff,
    generate_full_ws, generate_ws, merge_full, FullSnapshot, Snapshot, SnapshotError,
    WorkingSetFile,
};
use crate::workload::{WorkloadError, WorkloadSpec};

/// File name of a function's artifact manifest.
pub const MANIFEST_FILE: &str = "manifest.json";
/// Store subdirectory holding language base snapshots, one per id.
pub const BASES_DIR: &str = "bases";
/// Store subdirectory holding per-function artifact directories.
pub const FUNCTIONS_DIR: &str = "functions";
/// Strategy label used for the warm-baseline rows of a benchmark report.
pub const WARM_STRATEGY_LABEL: &str = "warm";

/// Pipeline failures: artifact problems, configuration problems, and
/// violations of the invariants the benchmark is contracted to uphold.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A required artifact does not exist where the store says it should.
    #[error("missing artifact: {what} (looked in {path})")]
    MissingArtifact { what: String, path: PathBuf },
    /// A loaded artifact disagrees with the manifest that referenced it.
    #[error("artifact mismatch: {what}: expected {expected}, found {found}")]
    ArtifactMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    /// A configuration or record file failed to parse or failed validation.
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    /// Jitter-free rounds of one benchmark cell disagreed.
    #[error("determinism violation: {0}")]
    DeterminismViolation(String),
    /// A pipeline self-check failed; results cannot be trusted.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Manifests and registration
// ---------------------------------------------------------------------------

/// A registered function's manifest: where its artifacts live and the seeds
/// they were generated with. Paths are relative to the manifest file's
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionArtifacts {
    pub function: String,
    pub language_tag: String,
    /// Canonical copy of the workload spec the artifacts were built from.
    pub spec_path: PathBuf,
    /// Id of the language base snapshot (`<language_tag>-<digest>`).
    pub base_id: String,
    pub base_path: PathBuf,
    /// Content digest of the diff snapshot, 16 hex digits.
    pub diff_id: String,
    pub diff_path: PathBuf,
    /// Working set over diff pages only (split-snapshot prefetch list).
    pub ws_path: PathBuf,
    /// Working set over the merged snapshot (whole-snapshot prefetch list).
    pub full_ws_path: PathBuf,
    /// Request seed the working-set recordings ran with. Benchmarks reuse it
    /// by default so they measure "same inputs" behavior.
    pub generation_request_seed: u64,
}

impl FunctionArtifacts {
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Malformed {
            what: "manifest",
            detail: e.to_string(),
        })?;
        text.push('\n');
        fs::write(path, text).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<FunctionArtifacts, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Malformed {
            what: "manifest",
            detail: format!("{}: {e}", path.display()),
        })
    }
}

/// Knobs for [`register_function`].
#[derive(Debug, Clone)]
pub struct RegisterOptions {
    /// Generate and store the language base when the store lacks it. When
    /// false, a missing base is an error — bases are shared artifacts and
    /// creating one is normally an explicit step.
    pub generate_base: bool,
    /// Request seed for the working-set recordings; defaults to the spec's
    /// workload seed.
    pub request_seed: Option<u64>,
    /// Guest page size for all generated artifacts.
    pub page_size: u32,
}

impl Default for RegisterOptions {
    fn default() -> Self {
        RegisterOptions {
            generate_base: false,
            request_seed: None,
            page_size: 4096,
        }
    }
}

/// What [`register_function`] produced.
#[derive(Debug)]
pub struct RegisterOutcome {
    pub manifest: FunctionArtifacts,
    pub manifest_path: PathBuf,
    /// True when this call generated and stored the language base; false
    /// when an existing base was reused.
    pub base_generated: bool,
    /// Non-fatal oddities (e.g. an empty diff snapshot).
    pub warnings: Vec<String>,
}

/// Generate (or verify) the language base for `spec` in `store_dir` and
/// return its id and directory. The base is content-addressed: regenerating
/// is deterministic, so an existing directory is verified against a fresh
/// in-memory generation rather than trusted blindly.
pub fn ensure_base(
    spec: &WorkloadSpec,
    store_dir: &Path,
    page_size: u32,
) -> Result<(String, PathBuf, bool), HarnessError> {
    let base = generate_base(spec, page_size)?;
    let id = base.id();
    let dir = store_dir.join(BASES_DIR).join(&id);
    if dir.is_dir() {
        let existing = Snapshot::load_from_dir(&dir)?;
        check_base_compat(spec, existing.metadata.page_size, &existing)?;
        if existing.metadata.content_id != base.metadata.content_id {
            return Err(HarnessError::ArtifactMismatch {
                what: "base snapshot content",
                expected: base.id(),
                found: existing.id(),
            });
        }
        Ok((id, dir, false))
    } else {
        base.write_to_dir(&dir)?;
        Ok((id, dir, true))
    }
}

/// Register one function: generate or reuse its language base, derive the
/// diff snapshot, record both working sets with the configured request seed,
/// and write every artifact plus the manifest under
/// `<store>/functions/<name>/`.
///
/// Registration is idempotent: all artifacts are content-addressed
/// derivations of the spec, so registering the same spec twice yields
/// identical ids and byte-identical files.
pub fn register_function(
    spec: &WorkloadSpec,
    store_dir: &Path,
    opts: &RegisterOptions,
) -> Result<RegisterOutcome, HarnessError> {
    spec.validate()?;
    let base = generate_base(spec, opts.page_size)?;
    let base_id = base.id();
    let base_dir = store_dir.join(BASES_DIR).join(&base_id);
    let base_generated = if base_dir.is_dir() {
        let existing = Snapshot::load_from_dir(&base_dir)?;
        check_base_compat(spec, existing.metadata.page_size, &existing)?;
        if existing.metadata.content_id != base.metadata.content_id {
            return Err(HarnessError::ArtifactMismatch {
                what: "base snapshot content",
                expected: base.id(),
                found: existing.id(),
            });
        }
        false
    } else if opts.generate_base {
        base.write_to_dir(&base_dir)?;
        true
    } else {
        return Err(HarnessError::MissingArtifact {
            what: format!("base snapshot {base_id} for language {}", spec.language_tag),
            path: base_dir,
        });
    };

    let diff = generate_diff(spec, &base)?;
    let seed = opts.request_seed.unwrap_or(spec.workload_seed);
    let ws = generate_ws(spec, &base, &diff, seed)?;
    let full_ws = generate_full_ws(spec, &base, &diff, seed)?;

    let mut warnings = Vec::new();
    if diff.pages.is_empty() {
        warnings.push(format!(
            "{}: function-init dirtied no pages; the diff snapshot is empty",
            spec.name
        ));
    }

    let fn_dir = store_dir.join(FUNCTIONS_DIR).join(&spec.name);
    fs::create_dir_all(&fn_dir).map_err(io_err(&fn_dir))?;
    let spec_file = fn_dir.join("spec.json");
    let mut spec_text =
        serde_json::to_string_pretty(spec).map_err(|e| HarnessError::Malformed {
            what: "workload spec",
            detail: e.to_string(),
        })?;
    spec_text.push('\n');
    fs::write(&spec_file, spec_text).map_err(io_err(&spec_file))?;
    diff.write_to_dir(&fn_dir.join("diff"))?;
    ws.save(&fn_dir.join("ws.json"))?;
    full_ws.save(&fn_dir.join("full-ws.json"))?;

    let manifest = FunctionArtifacts {
        function: spec.name.clone(),
        language_tag: spec.language_tag.clone(),
        spec_path: PathBuf::from("spec.json"),
        base_id: base_id.clone(),
        base_path: PathBuf::from("..")
            .join("..")
            .join(BASES_DIR)
            .join(&base_id),
        diff_id: diff.id(),
        diff_path: PathBuf::from("diff"),
        ws_path: PathBuf::from("ws.json"),
        full_ws_path: PathBuf::from("full-ws.json"),
        generation_request_seed: seed,
    };
    let manifest_path = fn_dir.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    Ok(RegisterOutcome {
        manifest,
        manifest_path,
        base_generated,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Loading registered artifacts
// ---------------------------------------------------------------------------

/// A function's artifacts loaded into memory and cross-validated.
#[derive(Debug)]
pub struct LoadedArtifacts {
    pub manifest: FunctionArtifacts,
    pub spec: WorkloadSpec,
    pub base: Snapshot,
    pub diff: Snapshot,
    pub ws: WorkingSetFile,
    pub full_ws: WorkingSetFile,
}

/// Load everything a manifest references and verify the pieces belong
/// together: ids match the manifest, the diff descends from the base, the
/// spec reproduces both, and each working set is a subset of the snapshot it
/// indexes.
pub fn load_artifacts(manifest_path: &Path) -> Result<LoadedArtifacts, HarnessError> {
    let manifest = FunctionArtifacts::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let spec = WorkloadSpec::parse_file(&dir.join(&manifest.spec_path))?;
    let base = Snapshot::load_from_dir(&dir.join(&manifest.base_path))?;
    let diff = Snapshot::load_from_dir(&dir.join(&manifest.diff_path))?;
    let ws = WorkingSetFile::load(&dir.join(&manifest.ws_path))?;
    let full_ws = WorkingSetFile::load(&dir.join(&manifest.full_ws_path))?;
    let loaded = LoadedArtifacts {
        manifest,
        spec,
        base,
        diff,
        ws,
        full_ws,
    };
    loaded.cross_validate()?;
    Ok(loaded)
}

impl LoadedArtifacts {
    fn cross_validate(&self) -> Result<(), HarnessError> {
        let mismatch = |what: &'static str, expected: String, found: String| {
            Err(HarnessError::ArtifactMismatch {
                what,
                expected,
                found,
            })
        };
        if self.spec.name != self.manifest.function {
            return mismatch(
                "function name",
                self.manifest.function.clone(),
                self.spec.name.clone(),
            );
        }
        if self.spec.language_tag != self.manifest.language_tag {
            return mismatch(
                "language tag",
                self.manifest.language_tag.clone(),
                self.spec.language_tag.clone(),
            );
        }
        if self.base.id() != self.manifest.base_id {
            return mismatch("base id", self.manifest.base_id.clone(), self.base.id());
        }
        if self.diff.id() != self.manifest.diff_id {
            return mismatch("diff id", self.manifest.diff_id.clone(), self.diff.id());
        }
        check_base_compat(&self.spec, self.base.metadata.page_size, &self.base)?;
        check_diff_matches_spec(&self.spec, self.diff.metadata.page_size, &self.diff)?;
        check_base_diff_pair(&self.base, &self.diff)?;
        for (what, ws) in [
            ("working set", &self.ws),
            ("full working set", &self.full_ws),
        ] {
            ws.validate()?;
            if ws.diff_id != self.diff.metadata.content_id {
                return mismatch(
                    what,
                    format!("diff id {:016x}", self.diff.metadata.content_id),
                    format!("diff id {:016x}", ws.diff_id),
                );
            }
            if ws.generation_request_seed != self.manifest.generation_request_seed {
                return mismatch(
                    what,
                    format!("request seed {}", self.manifest.generation_request_seed),
                    format!("request seed {}", ws.generation_request_seed),
                );
            }
        }
        if !self.ws.is_subset_of(self.diff.pages.page_ids()) {
            return Err(HarnessError::InvariantViolation(
                "working set lists pages outside the diff snapshot".into(),
            ));
        }
        let union: BTreeSet<u64> = self
            .base
            .pages
            .page_ids()
            .chain(self.diff.pages.page_ids())
            .collect();
        if !self.full_ws.is_subset_of(union.into_iter()) {
            return Err(HarnessError::InvariantViolation(
                "full working set lists pages outside the merged snapshot".into(),
            ));
        }
        Ok(())
    }

    /// Merge base and diff into the function's complete snapshot, as needed
    /// by the whole-snapshot strategies.
    pub fn merged(&self) -> Result<FullSnapshot, HarnessError> {
        Ok(merge_full(&self.base, &self.diff)?)
    }

    /// Build the restore plan for one strategy, passing exactly the
    /// artifacts that strategy consumes. `full` must be supplied (via
    /// [`LoadedArtifacts::merged`]) for the strategies that restore the
    /// whole snapshot; see [`requires_full_snapshot`].
    pub fn plan(
        &self,
        strategy: StrategyId,
        full: Option<&FullSnapshot>,
    ) -> Result<RestorePlan, HarnessError> {
        if requires_full_snapshot(strategy) && full.is_none() {
            return Err(HarnessError::InvariantViolation(format!(
                "{strategy} needs the merged snapshot; call merged() and pass it in"
            )));
        }
        let plan = match strategy {
            StrategyId::Regular => plan_restore(strategy, None, None, None, None)?,
            StrategyId::FullDemand => plan_restore(strategy, None, None, None, full)?,
            StrategyId::Reap => {
                plan_restore(strategy, None, Some(&self.diff), Some(&self.full_ws), full)?
            }
            StrategyId::Seuss => plan_restore(strategy, Some(&self.base), None, None, None)?,
            StrategyId::SnapFaasMinus => {
                plan_restore(strategy, Some(&self.base), Some(&self.diff), None, None)?
            }
            StrategyId::SnapFaas => plan_restore(
                strategy,
                Some(&self.base),
                Some(&self.diff),
                Some(&self.ws),
                None,
            )?,
        };
        Ok(plan)
    }
}

/// Whether a strategy restores from the merged (base+diff) snapshot and so
/// needs [`LoadedArtifacts::merged`] before planning.
pub fn requires_full_snapshot(strategy: StrategyId) -> bool {
    matches!(strategy, StrategyId::FullDemand | StrategyId::Reap)
}

// ---------------------------------------------------------------------------
// Benchmark configuration and records
// ---------------------------------------------------------------------------

fn default_rounds() -> u32 {
    100
}

/// One benchmark run: which functions, which strategies, how many rounds,
/// and under what cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Workload spec files, resolved relative to the invoking directory.
    pub functions: Vec<PathBuf>,
    pub strategies: Vec<StrategyId>,
    /// Rounds per (function, strategy) cell. With jitter off every round is
    /// identical and the harness enforces that.
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    /// Request seed for every invoke. `null` (the default) reuses each
    /// function's working-set generation seed — the "same inputs" setup.
    /// Setting a different seed benchmarks novel inputs against working
    /// sets recorded for other ones.
    #[serde(default)]
    pub request_seed: Option<u64>,
    /// Add per-round read jitter to every execution (salted by round index),
    /// modelling input-dependent access patterns.
    #[serde(default)]
    pub jitter: bool,
    #[serde(default)]
    pub params: CostParams,
}

impl BenchConfig {
    pub fn parse_str(text: &str) -> Result<BenchConfig, HarnessError> {
        let config: BenchConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Malformed {
                what: "bench config",
                detail: e.to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn parse_file(path: &Path) -> Result<BenchConfig, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse_str(&text).map_err(|e| match e {
            HarnessError::Malformed { what, detail } => HarnessError::Malformed {
                what,
                detail: format!("{}: {detail}", path.display()),
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |detail: String| HarnessError::Malformed {
            what: "bench config",
            detail,
        };
        if self.functions.is_empty() {
            return Err(bad("functions list is empty".into()));
        }
        if self.strategies.is_empty() {
            return Err(bad("strategies list is empty".into()));
        }
        if self.rounds == 0 {
            return Err(bad("rounds must be at least 1".into()));
        }
        self.params.validate()?;
        Ok(())
    }
}

/// One benchmark measurement: a single cold start (or warm baseline) of one
/// function under one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRecord {
    pub function: String,
    pub language_tag: String,
    /// Strategy label, or `"warm"` for the warm-baseline rows.
    pub strategy: String,
    pub round: u32,
    pub boot_us: TenthUs,
    pub exec_us: TenthUs,
    /// End-to-end latency; always `boot_us + exec_us`.
    pub e2e_us: TenthUs,
    /// Overhead clause A: configuration and non-memory restore.
    #[serde(rename = "A_us")]
    pub a_us: TenthUs,
    /// Overhead clause B: eager restore of the unique-page batch.
    #[serde(rename = "B_us")]
    pub b_us: TenthUs,
    /// Overhead clause C: residual initialization.
    #[serde(rename = "C_us")]
    pub c_us: TenthUs,
    /// Overhead clause D: execution slowdown versus warm.
    #[serde(rename = "D_us")]
    pub d_us: TenthUs,
    /// Bytes restored eagerly at boot.
    pub eager_bytes: u64,
    /// Pages demand-faulted from disk during execution.
    pub demand_pages: u64,
    /// Copy-on-write faults during boot and execution.
    pub cow_faults: u64,
}

impl ReportRecord {
    fn same_modulo_round(&self, other: &ReportRecord) -> bool {
        let mut other = other.clone();
        other.round = self.round;
        *self == other
    }
}

/// Run the full benchmark described by `config`, registering artifacts into
/// `store_dir` (reusing any that already exist there).
///
/// For every function × strategy cell the restore plan is built once; each
/// round is a fresh boot plus one invoke. The first cold instance of each
/// function is additionally re-invoked warm to measure the warm execution
/// baseline that clause D is defined against. Warm-baseline rows are
/// appended per function under the `"warm"` strategy label with all
/// overhead clauses zero.
///
/// With jitter off the harness verifies that all rounds of a cell agree and
/// fails with [`HarnessError::DeterminismViolation`] otherwise. Every
/// record's clauses are checked to recompose exactly to its end-to-end
/// overhead.
pub fn run_bench(
    config: &BenchConfig,
    store_dir: &Path,
) -> Result<Vec<ReportRecord>, HarnessError> {
    config.validate()?;
    let mut records = Vec::new();
    for spec_path in &config.functions {
        let spec = WorkloadSpec::parse_file(spec_path)?;
        let outcome = register_function(
            &spec,
            store_dir,
            &RegisterOptions {
                generate_base: true,
                // Working sets always use their canonical seed; a custom
                // bench seed means "novel inputs against recorded sets".
                request_seed: None,
                page_size: config.params.page_size_bytes,
            },
        )?;
        let arts = load_artifacts(&outcome.manifest_path)?;
        let request_seed = config
            .request_seed
            .unwrap_or(arts.manifest.generation_request_seed);
        let full = if config
            .strategies
            .iter()
            .copied()
            .any(requires_full_snapshot)
        {
            Some(arts.merged()?)
        } else {
            None
        };
        let mut warm_exec: Option<TenthUs> = None;
        for &strategy in &config.strategies {
            let plan = arts.plan(strategy, full.as_ref())?;
            let cell_params = config.params.for_strategy(strategy.as_str());
            let mut first_of_cell: Option<ReportRecord> = None;
            for round in 0..config.rounds {
                let jitter_salt = config.jitter.then(|| u64::from(round));
                let (mut state, boot_ledger, boot_latency) =
                    boot(&plan, &arts.spec, &cell_params, MemoryMode::PolicyOnly)?;
                let (_response, exec_ledger, exec_latency) = invoke_traced(
                    &mut state,
                    &arts.spec,
                    request_seed,
                    &cell_params,
                    jitter_salt,
                    None,
                )?;
                let warm = match warm_exec {
                    Some(w) => w,
                    None => {
                        let (_, warm_ledger, warm_latency) =
                            warm_invoke(&mut state, &arts.spec, request_seed, &cell_params)?;
                        if warm_ledger.demand_pages_disk != 0 || warm_ledger.cow_faults != 0 {
                            return Err(HarnessError::InvariantViolation(format!(
                                "{}: warm baseline faulted ({} demand, {} cow)",
                                spec.name, warm_ledger.demand_pages_disk, warm_ledger.cow_faults
                            )));
                        }
                        warm_exec = Some(warm_latency);
                        warm_latency
                    }
                };
                let merged = boot_ledger.merged(exec_ledger);
                let clauses = breakdown(&merged, warm, boot_latency, exec_latency, &cell_params)?;
                let e2e = boot_latency + exec_latency;
                if clauses.composed_overhead() != e2e - warm {
                    return Err(HarnessError::InvariantViolation(format!(
                        "{} × {strategy}: clauses recompose to {} but overhead is {}",
                        spec.name,
                        clauses.composed_overhead(),
                        e2e - warm,
                    )));
                }
                let record = ReportRecord {
                    function: spec.name.clone(),
                    language_tag: spec.language_tag.clone(),
                    strategy: strategy.as_str().to_string(),
                    round,
                    boot_us: boot_latency,
                    exec_us: exec_latency,
                    e2e_us: e2e,
                    a_us: clauses.a,
                    b_us: clauses.b,
                    c_us: clauses.c,
                    d_us: clauses.d,
                    eager_bytes: merged.eager_pages_disk * u64::from(cell_params.page_size_bytes),
                    demand_pages: merged.demand_pages_disk,
                    cow_faults: merged.cow_faults,
                };
                if !config.jitter {
                    match &first_of_cell {
                        None => first_of_cell = Some(record.clone()),
                        Some(first) => {
                            if !first.same_modulo_round(&record) {
                                return Err(HarnessError::DeterminismViolation(format!(
                                    "{} × {strategy}: round {round} diverged from round {}",
                                    spec.name, first.round
                                )));
                            }
                        }
                    }
                }
                records.push(record);
            }
        }
        let warm = warm_exec.ok_or_else(|| {
            HarnessError::InvariantViolation("benchmark produced no warm baseline".into())
        })?;
        for round in 0..config.rounds {
            records.push(ReportRecord {
                function: spec.name.clone(),
                language_tag: spec.language_tag.clone(),
                strategy: WARM_STRATEGY_LABEL.to_string(),
                round,
                boot_us: TenthUs::ZERO,
                exec_us: warm,
                e2e_us: warm,
                a_us: TenthUs::ZERO,
                b_us: TenthUs::ZERO,
                c_us: TenthUs::ZERO,
                d_us: TenthUs::ZERO,
                eager_bytes: 0,
                demand_pages: 0,
                cow_faults: 0,
            });
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Copy-on-write ratio report
// ---------------------------------------------------------------------------

/// One function's copy-on-write pressure on its shared language base.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CowRatioRow {
    pub function: String,
    /// Pages in the shared language base image.
    pub base_pages: u64,
    /// Shared pages the invocation wrote (copy-on-write faults).
    pub cow_faults: u64,
    /// `cow_faults / base_pages`.
    pub ratio: f64,
}

/// Measure, for every function registered in `store_dir`, how many shared
/// base pages one recorded-seed invocation under the split-snapshot strategy
/// copies on write. Each ledger count is independently recomputed from a
/// page-level access trace; disagreement fails the report rather than
/// silently picking one side.
pub fn cow_ratio_report(
    store_dir: &Path,
    params: &CostParams,
) -> Result<Vec<CowRatioRow>, HarnessError> {
    let mut rows = Vec::new();
    for manifest_path in registered_manifests(store_dir)? {
        let arts = load_artifacts(&manifest_path)?;
        let plan = arts.plan(StrategyId::SnapFaas, None)?;
        let cell_params = params.for_strategy(StrategyId::SnapFaas.as_str());
        let (mut state, boot_ledger, _) =
            boot(&plan, &arts.spec, &cell_params, MemoryMode::PolicyOnly)?;
        let mut tracker = AccessTracker::new(arts.spec.memory_pages);
        let (_, exec_ledger, _) = invoke_traced(
            &mut state,
            &arts.spec,
            arts.manifest.generation_request_seed,
            &cell_params,
            None,
            Some(&mut tracker),
        )?;
        let ledger_cow = boot_ledger.cow_faults + exec_ledger.cow_faults;
        let traced_cow = tracker
            .dirtied_ids()
            .into_iter()
            .filter(|page| plan.policy_overrides.get(page) == Some(&PagePolicy::SharedCow))
            .count() as u64;
        if traced_cow != ledger_cow {
            return Err(HarnessError::DeterminismViolation(format!(
                "{}: access trace recounts {traced_cow} copy-on-write faults, ledger says {ledger_cow}",
                arts.spec.name
            )));
        }
        let base_pages = arts.base.pages.len() as u64;
        rows.push(CowRatioRow {
            function: arts.spec.name.clone(),
            base_pages,
            cow_faults: ledger_cow,
            ratio: ledger_cow as f64 / base_pages as f64,
        });
    }
    Ok(rows)
}

/// All manifest paths registered in a store, sorted by function name.
pub fn registered_manifests(store_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let fns_dir = store_dir.join(FUNCTIONS_DIR);
    let entries = fs::read_dir(&fns_dir).map_err(io_err(&fns_dir))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(io_err(&fns_dir))?;
        let manifest = entry.path().join(MANIFEST_FILE);
        if manifest.is_file() {
            paths.push(manifest);
        }
    }
    if paths.is_empty() {
        return Err(HarnessError::MissingArtifact {
            what: "registered functions".into(),
            path: fns_dir,
        });
    }
    paths.sort();
    Ok(paths)
}

/// Render COW-ratio rows as CSV (ratio with six decimals).
pub fn cow_ratios_to_csv(rows: &[CowRatioRow]) -> Result<String, HarnessError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    write_csv_row(
        &mut writer,
        ["function", "base_pages", "cow_faults", "ratio"],
    )?;
    for row in rows {
        write_csv_row(
            &mut writer,
            [
                row.function.clone(),
                row.base_pages.to_string(),
                row.cow_faults.to_string(),
                format!("{:.6}", row.ratio),
            ],
        )?;
    }
    finish_csv(writer)
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

/// Output format for emitted tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    pub fn extension(self) -> &'static str {
        self.as_str()
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(HarnessError::Malformed {
                what: "report format",
                detail: format!("unknown format {other:?}; expected \"csv\" or \"json\""),
            }),
        }
    }
}

/// Serialize records as pretty JSON (stable field order, trailing newline).
pub fn records_to_json(records: &[ReportRecord]) -> Result<String, HarnessError> {
    let mut text = serde_json::to_string_pretty(records).map_err(|e| HarnessError::Malformed {
        what: "records",
        detail: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}

/// Serialize records as CSV, one row per record, header first.
pub fn records_to_csv(records: &[ReportRecord]) -> Result<String, HarnessError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for record in records {
        writer
            .serialize(record)
            .map_err(|e| HarnessError::Malformed {
                what: "records",
                detail: e.to_string(),
            })?;
    }
    finish_csv(writer)
}

/// Parse a records file produced by [`records_to_json`].
pub fn parse_records(text: &str) -> Result<Vec<ReportRecord>, HarnessError> {
    serde_json::from_str(text).map_err(|e| HarnessError::Malformed {
        what: "records",
        detail: e.to_string(),
    })
}

/// Write `records.json` and `records.csv` into `out_dir`, returning the
/// paths written. Output bytes are a pure function of the records.
pub fn write_bench_outputs(
    records: &[ReportRecord],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let json_path = out_dir.join("records.json");
    fs::write(&json_path, records_to_json(records)?).map_err(io_err(&json_path))?;
    let csv_path = out_dir.join("records.csv");
    fs::write(&csv_path, records_to_csv(records)?).map_err(io_err(&csv_path))?;
    Ok(vec![json_path, csv_path])
}

/// Per-cell means used by the summary tables.
struct CellMean {
    e2e_us: f64,
    a_tenths: f64,
    b_tenths: f64,
    c_tenths: f64,
    d_tenths: f64,
    eager_bytes: f64,
    count: u64,
}

struct Summary {
    functions: Vec<String>,
    /// Strategy labels in first-appearance order, warm excluded.
    strategies: Vec<String>,
    cells: BTreeMap<(String, String), CellMean>,
}

fn summarize(records: &[ReportRecord]) -> Summary {
    let mut functions = Vec::new();
    let mut strategies = Vec::new();
    let mut cells: BTreeMap<(String, String), CellMean> = BTreeMap::new();
    for record in records {
        if !functions.contains(&record.function) {
            functions.push(record.function.clone());
        }
        if record.strategy != WARM_STRATEGY_LABEL && !strategies.contains(&record.strategy) {
            strategies.push(record.strategy.clone());
        }
        let cell = cells
            .entry((record.function.clone(), record.strategy.clone()))
            .or_insert(CellMean {
                e2e_us: 0.0,
                a_tenths: 0.0,
                b_tenths: 0.0,
                c_tenths: 0.0,
                d_tenths: 0.0,
                eager_bytes: 0.0,
                count: 0,
            });
        cell.e2e_us += record.e2e_us.as_us_f64();
        cell.a_tenths += record.a_us.tenths() as f64;
        cell.b_tenths += record.b_us.tenths() as f64;
        cell.c_tenths += record.c_us.tenths() as f64;
        cell.d_tenths += record.d_us.tenths() as f64;
        cell.eager_bytes += record.eager_bytes as f64;
        cell.count += 1;
    }
    Summary {
        functions,
        strategies,
        cells,
    }
}

impl Summary {
    fn mean(&self, function: &str, strategy: &str) -> Option<&CellMean> {
        self.cells
            .get(&(function.to_string(), strategy.to_string()))
    }
}

impl CellMean {
    fn mean_e2e_us(&self) -> f64 {
        self.e2e_us / self.count as f64
    }

    fn mean_eager_bytes(&self) -> f64 {
        self.eager_bytes / self.count as f64
    }

    /// Mean of one clause as a rounded 0.1 µs quantity, for millisecond
    /// rendering at fixed precision.
    fn mean_clause(&self, tenths: f64) -> TenthUs {
        TenthUs::from_tenths((tenths / self.count as f64).round() as u64)
    }
}

/// Write the three summary tables derived from `records` into `out_dir`:
///
/// 1. `latency_normalized.*` — mean end-to-end latency per function and
///    strategy, normalized to the split-snapshot-with-working-set strategy.
/// 2. `overhead_breakdown.*` — mean A–D clauses in milliseconds (0.1 ms
///    precision in CSV), warm rows included.
/// 3. `eager_sizes.*` — mean bytes restored eagerly per function and
///    strategy (mebibytes in CSV).
///
/// Output is byte-deterministic given identical records. Returns the paths
/// written.
pub fn emit_report(
    records: &[ReportRecord],
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Malformed {
            what: "records",
            detail: "no records to report".into(),
        });
    }
    let summary = summarize(records);
    let reference = StrategyId::SnapFaas.as_str();
    if !summary.strategies.iter().any(|s| s == reference) {
        return Err(HarnessError::Malformed {
            what: "records",
            detail: format!("latency normalization needs {reference:?} records"),
        });
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    // Table 1: normalized latency.
    let latency_path = out_dir.join(format!("latency_normalized.{}", format.extension()));
    let latency_bytes = match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["function".to_string()];
            header.extend(summary.strategies.iter().cloned());
            write_csv_row(&mut writer, header)?;
            for function in &summary.functions {
                let Some(sf) = summary.mean(function, reference) else {
                    continue;
                };
                let sf_e2e = sf.mean_e2e_us();
                let mut row = vec![function.clone()];
                for strategy in &summary.strategies {
                    row.push(match summary.mean(function, strategy) {
                        Some(cell) => format!("{:.3}", cell.mean_e2e_us() / sf_e2e),
                        None => String::new(),
                    });
                }
                write_csv_row(&mut writer, row)?;
            }
            finish_csv(writer)?
        }
        ReportFormat::Json => {
            let mut table = Vec::new();
            for function in &summary.functions {
                let Some(sf) = summary.mean(function, reference) else {
                    continue;
                };
                let sf_e2e = sf.mean_e2e_us();
                let mut obj = serde_json::Map::new();
                obj.insert("function".into(), function.clone().into());
                for strategy in &summary.strategies {
                    if let Some(cell) = summary.mean(function, strategy) {
                        obj.insert(strategy.clone(), (cell.mean_e2e_us() / sf_e2e).into());
                    }
                }
                table.push(serde_json::Value::Object(obj));
            }
            to_pretty_json(&table)?
        }
    };
    fs::write(&latency_path, latency_bytes).map_err(io_err(&latency_path))?;
    written.push(latency_path);

    // Table 2: overhead breakdown, warm row last per function.
    let breakdown_path = out_dir.join(format!("overhead_breakdown.{}", format.extension()));
    let mut breakdown_strategies = summary.strategies.clone();
    if records.iter().any(|r| r.strategy == WARM_STRATEGY_LABEL) {
        breakdown_strategies.push(WARM_STRATEGY_LABEL.to_string());
    }
    let breakdown_bytes = match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            write_csv_row(
                &mut writer,
                ["function", "strategy", "A_ms", "B_ms", "C_ms", "D_ms"],
            )?;
            for function in &summary.functions {
                for strategy in &breakdown_strategies {
                    let Some(cell) = summary.mean(function, strategy) else {
                        continue;
                    };
                    write_csv_row(
                        &mut writer,
                        [
                            function.clone(),
                            strategy.clone(),
                            cell.mean_clause(cell.a_tenths).format_ms_1dp(),
                            cell.mean_clause(cell.b_tenths).format_ms_1dp(),
                            cell.mean_clause(cell.c_tenths).format_ms_1dp(),
                            cell.mean_clause(cell.d_tenths).format_ms_1dp(),
                        ],
                    )?;
                }
            }
            finish_csv(writer)?
        }
        ReportFormat::Json => {
            let mut table = Vec::new();
            for function in &summary.functions {
                for strategy in &breakdown_strategies {
                    let Some(cell) = summary.mean(function, strategy) else {
                        continue;
                    };
                    let ms = |tenths: f64| tenths / cell.count as f64 / 10_000.0;
                    let mut obj = serde_json::Map::new();
                    obj.insert("function".into(), function.clone().into());
                    obj.insert("strategy".into(), strategy.clone().into());
                    obj.insert("A_ms".into(), ms(cell.a_tenths).into());
                    obj.insert("B_ms".into(), ms(cell.b_tenths).into());
                    obj.insert("C_ms".into(), ms(cell.c_tenths).into());
                    obj.insert("D_ms".into(), ms(cell.d_tenths).into());
                    table.push(serde_json::Value::Object(obj));
                }
            }
            to_pretty_json(&table)?
        }
    };
    fs::write(&breakdown_path, breakdown_bytes).map_err(io_err(&breakdown_path))?;
    written.push(breakdown_path);

    // Table 3: eager restored sizes.
    let eager_path = out_dir.join(format!("eager_sizes.{}", format.extension()));
    const MIB: f64 = 1024.0 * 1024.0;
    let eager_bytes = match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["function".to_string()];
            header.extend(summary.strategies.iter().map(|s| format!("{s}_mib")));
            write_csv_row(&mut writer, header)?;
            for function in &summary.functions {
                let mut row = vec![function.clone()];
                for strategy in &summary.strategies {
                    row.push(match summary.mean(function, strategy) {
                        Some(cell) => format!("{:.2}", cell.mean_eager_bytes() / MIB),
                        None => String::new(),
                    });
                }
                write_csv_row(&mut writer, row)?;
            }
            finish_csv(writer)?
        }
        ReportFormat::Json => {
            let mut table = Vec::new();
            for function in &summary.functions {
                let mut obj = serde_json::Map::new();
                obj.insert("function".into(), function.clone().into());
                for strategy in &summary.strategies {
                    if let Some(cell) = summary.mean(function, strategy) {
                        obj.insert(strategy.clone(), cell.mean_eager_bytes().into());
                    }
                }
                table.push(serde_json::Value::Object(obj));
            }
            to_pretty_json(&table)?
        }
    };
    fs::write(&eager_path, eager_bytes).map_err(io_err(&eager_path))?;
    written.push(eager_path);

    Ok(written)
}

fn to_pretty_json<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Malformed {
        what: "report table",
        detail: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}

fn write_csv_row<I, S>(writer: &mut csv::Writer<Vec<u8>>, row: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    writer
        .write_record(row)
        .map_err(|e| HarnessError::Malformed {
            what: "csv row",
            detail: e.to_string(),
        })
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> Result<String, HarnessError> {
    let bytes = writer.into_inner().map_err(|e| HarnessError::Malformed {
        what: "csv output",
        detail: e.to_string(),
    })?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Malformed {
        what: "csv output",
        detail: e.to_string(),
    })
}
