// SPDX-License-Identifier: Apache-2.0

//! `snaplab` — deterministic cold-start experiments over split snapshots.
//!
//! The pipeline: `gen-base` stores a language base snapshot, `register`
//! derives a function's diff snapshot and working sets, `invoke` cold-starts
//! one instance under a chosen restore strategy, `bench` sweeps functions ×
//! strategies over many rounds, and `cow-ratio` / `throughput` / `report`
//! turn artifacts and records into tables.
//!
//! Exit codes: 0 success, 2 invariant or determinism violation (including
//! corrupt artifacts), 3 missing artifact or input file, 4 other I/O error.

use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use snaplab_core::costmodel::{breakdown, CostParams, ModelError};
use snaplab_core::harness::{
    cow_ratio_report, cow_ratios_to_csv, emit_report, ensure_base, load_artifacts, parse_records,
    register_function, requires_full_snapshot, run_bench, write_bench_outputs, BenchConfig,
    HarnessError, RegisterOptions, ReportFormat, ReportRecord,
};
use snaplab_core::mem::MemoryMode;
use snaplab_core::restore::{boot, invoke_traced, warm_invoke, RestoreError, StrategyId};
use snaplab_core::snapshot::SnapshotError;
use snaplab_core::throughput::{run_sweep, sweep_to_csv, Scenario, ThroughputError};
use snaplab_core::workload::{WorkloadError, WorkloadSpec};

const EXIT_INVARIANT: u8 = 2;
const EXIT_MISSING: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "snaplab",
    version,
    about = "Deterministic cold-start experiments over split snapshots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or verify) the language base snapshot for a workload spec.
    GenBase {
        /// Workload spec JSON file.
        spec: PathBuf,
        /// Artifact store directory.
        dir: PathBuf,
        /// Guest page size in bytes.
        #[arg(long, default_value_t = 4096)]
        page_size: u32,
    },
    /// Register a function: derive its diff snapshot and working sets.
    Register {
        /// Workload spec JSON file.
        spec: PathBuf,
        /// Artifact store directory.
        dir: PathBuf,
        /// Generate the language base if the store lacks it.
        #[arg(long)]
        gen_base: bool,
        /// Request seed for the working-set recordings (default: the spec's
        /// workload seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Guest page size in bytes.
        #[arg(long, default_value_t = 4096)]
        page_size: u32,
    },
    /// Cold-start one instance from a manifest and serve one request.
    Invoke {
        /// Path to a registered function's manifest.json.
        manifest: PathBuf,
        /// Restore strategy.
        #[arg(long)]
        strategy: StrategyId,
        /// Request seed (default: the seed the working sets were recorded
        /// with).
        #[arg(long)]
        seed: Option<u64>,
        /// Add read jitter to the execution (salt 0).
        #[arg(long)]
        jitter: bool,
        /// Cost parameter JSON file (default: built-in defaults).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run a benchmark configuration and write records.{json,csv}.
    Bench {
        /// Benchmark config JSON file.
        config: PathBuf,
        /// Output directory for records.
        #[arg(long)]
        out: PathBuf,
        /// Artifact store (default: <out>/artifacts).
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Copy-on-write pressure of every registered function, as CSV on stdout.
    CowRatio {
        /// Artifact store directory.
        dir: PathBuf,
        /// Cost parameter JSON file (default: built-in defaults).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Closed-form server-throughput sweep over cold-request fractions.
    Throughput {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summary tables (latency, overhead breakdown, eager sizes) from
    /// records.
    Report {
        /// records.json produced by `bench`.
        records: PathBuf,
        /// Output format: csv or json.
        #[arg(long)]
        format: ReportFormat,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Throughput(#[from] ThroughputError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<WorkloadError> for CliError {
    fn from(e: WorkloadError) -> Self {
        CliError::Harness(HarnessError::Workload(e))
    }
}

impl From<SnapshotError> for CliError {
    fn from(e: SnapshotError) -> Self {
        CliError::Harness(HarnessError::Snapshot(e))
    }
}

impl From<RestoreError> for CliError {
    fn from(e: RestoreError) -> Self {
        CliError::Harness(HarnessError::Restore(e))
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Harness(HarnessError::Model(e))
    }
}

/// Missing inputs are "missing artifact" (3); everything else I/O (4).
fn io_exit(source: &std::io::Error) -> u8 {
    if source.kind() == ErrorKind::NotFound {
        EXIT_MISSING
    } else {
        EXIT_IO
    }
}

fn harness_exit(err: &HarnessError) -> u8 {
    match err {
        HarnessError::MissingArtifact { .. } => EXIT_MISSING,
        HarnessError::Restore(RestoreError::MissingArtifact { .. }) => EXIT_MISSING,
        HarnessError::Io { source, .. } => io_exit(source),
        HarnessError::Workload(WorkloadError::Io(source)) => io_exit(source),
        HarnessError::Snapshot(SnapshotError::Io { source, .. }) => io_exit(source),
        HarnessError::Restore(RestoreError::Snapshot(SnapshotError::Io { source, .. })) => {
            io_exit(source)
        }
        HarnessError::Model(ModelError::Io { source, .. }) => io_exit(source),
        _ => EXIT_INVARIANT,
    }
}

fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::Harness(h) => harness_exit(h),
        CliError::Throughput(ThroughputError::Io { source, .. }) => io_exit(source),
        CliError::Throughput(_) => EXIT_INVARIANT,
        CliError::Io { source, .. } => io_exit(source),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_params(path: Option<&Path>) -> Result<CostParams, CliError> {
    match path {
        Some(path) => Ok(CostParams::from_path(path)?),
        None => Ok(CostParams::default()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenBase {
            spec,
            dir,
            page_size,
        } => {
            let spec = WorkloadSpec::parse_file(&spec)?;
            let (id, path, generated) = ensure_base(&spec, &dir, page_size)?;
            let verb = if generated { "generated" } else { "verified" };
            println!("{verb} base {id} at {}", path.display());
            Ok(())
        }
        Command::Register {
            spec,
            dir,
            gen_base,
            seed,
            page_size,
        } => {
            let spec = WorkloadSpec::parse_file(&spec)?;
            let outcome = register_function(
                &spec,
                &dir,
                &RegisterOptions {
                    generate_base: gen_base,
                    request_seed: seed,
                    page_size,
                },
            )?;
            for warning in &outcome.warnings {
                eprintln!("warning: {warning}");
            }
            println!(
                "registered {} (base {}, diff {}) at {}",
                outcome.manifest.function,
                outcome.manifest.base_id,
                outcome.manifest.diff_id,
                outcome.manifest_path.display()
            );
            Ok(())
        }
        Command::Invoke {
            manifest,
            strategy,
            seed,
            jitter,
            params,
        } => {
            let params = load_params(params.as_deref())?;
            let arts = load_artifacts(&manifest)?;
            let request_seed = seed.unwrap_or(arts.manifest.generation_request_seed);
            let full = if requires_full_snapshot(strategy) {
                Some(arts.merged()?)
            } else {
                None
            };
            let plan = arts.plan(strategy, full.as_ref())?;
            let cell_params = params.for_strategy(strategy.as_str());
            let (mut state, boot_ledger, boot_latency) =
                boot(&plan, &arts.spec, &cell_params, MemoryMode::Content)?;
            let jitter_salt = jitter.then_some(0);
            let (_, exec_ledger, exec_latency) = invoke_traced(
                &mut state,
                &arts.spec,
                request_seed,
                &cell_params,
                jitter_salt,
                None,
            )?;
            let digest = state
                .state_digest()
                .map_err(|e| CliError::from(RestoreError::from(e)))?;
            let (_, _, warm_latency) =
                warm_invoke(&mut state, &arts.spec, request_seed, &cell_params)?;
            let merged = boot_ledger.merged(exec_ledger);
            let clauses = breakdown(
                &merged,
                warm_latency,
                boot_latency,
                exec_latency,
                &cell_params,
            )
            .map_err(HarnessError::from)?;
            let record = ReportRecord {
                function: arts.spec.name.clone(),
                language_tag: arts.spec.language_tag.clone(),
                strategy: strategy.as_str().to_string(),
                round: 0,
                boot_us: boot_latency,
                exec_us: exec_latency,
                e2e_us: boot_latency + exec_latency,
                a_us: clauses.a,
                b_us: clauses.b,
                c_us: clauses.c,
                d_us: clauses.d,
                eager_bytes: merged.eager_pages_disk * u64::from(cell_params.page_size_bytes),
                demand_pages: merged.demand_pages_disk,
                cow_faults: merged.cow_faults,
            };
            let out = serde_json::json!({
                "record": record,
                "warm_exec_us": warm_latency,
                "state_digest": format!("{digest:016x}"),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("report record serializes")
            );
            Ok(())
        }
        Command::Bench { config, out, store } => {
            let config = BenchConfig::parse_file(&config)?;
            let store = store.unwrap_or_else(|| out.join("artifacts"));
            let records = run_bench(&config, &store)?;
            let written = write_bench_outputs(&records, &out)?;
            println!(
                "wrote {} records for {} functions × {} strategies × {} rounds",
                records.len(),
                config.functions.len(),
                config.strategies.len(),
                config.rounds
            );
            for path in written {
                println!("  {}", path.display());
            }
            Ok(())
        }
        Command::CowRatio { dir, params } => {
            let params = load_params(params.as_deref())?;
            let rows = cow_ratio_report(&dir, &params)?;
            print!("{}", cow_ratios_to_csv(&rows)?);
            Ok(())
        }
        Command::Throughput { scenario, out } => {
            let scenario = Scenario::parse_file(&scenario)?;
            let rows = run_sweep(&scenario)?;
            std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            let path = out.join("throughput.csv");
            write_file(&path, &sweep_to_csv(&rows))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Report {
            records,
            format,
            out,
        } => {
            let text = std::fs::read_to_string(&records).map_err(|source| CliError::Io {
                path: records.clone(),
                source,
            })?;
            let records = parse_records(&text)?;
            let written = emit_report(&records, format, &out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
