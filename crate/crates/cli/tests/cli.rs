// SPDX-License-Identifier: Apache-2.0

//! End-to-end tests of the `snaplab` binary: pipeline flow, output shapes,
//! and the exit-code contract (0 ok, 2 invariant, 3 missing artifact, 4 I/O).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SPEC_JSON: &str = r#"{
  "name": "cli-fn",
  "language_tag": "clilang",
  "workload_seed": 305419896,
  "memory_pages": 32,
  "appfs_pages": { "start_page": 8, "page_count": 4 },
  "phases": [
    { "name": "kernel", "provenance": "kernel", "steps": [
      { "type": "write", "start_page": 0, "page_count": 4, "step_seed": 1 },
      { "type": "compute", "duration_us": 40 } ] },
    { "name": "os-init", "provenance": "os_init", "steps": [
      { "type": "write", "start_page": 4, "page_count": 2, "step_seed": 2 } ] },
    { "name": "runtime", "provenance": "runtime", "steps": [
      { "type": "write", "start_page": 6, "page_count": 2, "step_seed": 3 },
      { "type": "compute", "duration_us": 25 } ] },
    { "name": "function-init", "provenance": "function_init", "steps": [
      { "type": "mount_appfs" },
      { "type": "write", "start_page": 8, "page_count": 4, "step_seed": 10 },
      { "type": "write", "start_page": 7, "page_count": 1, "step_seed": 11 },
      { "type": "compute", "duration_us": 30 } ] },
    { "name": "handler", "provenance": "execution", "steps": [
      { "type": "read", "start_page": 0, "page_count": 6 },
      { "type": "write", "start_page": 2, "page_count": 2, "step_seed": 90 },
      { "type": "read", "start_page": 8, "page_count": 2 },
      { "type": "write", "start_page": 12, "page_count": 2, "step_seed": 92 },
      { "type": "compute", "duration_us": 100 } ] }
  ]
}
"#;

fn snaplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snaplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = snaplab(args);
    assert!(
        out.status.success(),
        "snaplab {args:?} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is UTF-8")
}

fn exit_code(args: &[&str]) -> i32 {
    snaplab(args).status.code().expect("no signal")
}

fn write_spec(dir: &Path) -> PathBuf {
    let path = dir.join("cli-fn.json");
    fs::write(&path, SPEC_JSON).unwrap();
    path
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pipeline_registers_invokes_and_converges_across_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path());
    let store = dir.path().join("store");

    let out = run_ok(&["gen-base", s(&spec), s(&store)]);
    assert!(out.contains("generated base clilang-"), "{out}");
    // Second run verifies instead of regenerating.
    let out = run_ok(&["gen-base", s(&spec), s(&store)]);
    assert!(out.contains("verified base clilang-"), "{out}");

    // With the base present, register needs no --gen-base.
    let out = run_ok(&["register", s(&spec), s(&store)]);
    assert!(out.contains("registered cli-fn"), "{out}");

    let manifest = store.join("functions/cli-fn/manifest.json");
    let mut digests = Vec::new();
    for strategy in [
        "regular",
        "full-demand",
        "reap",
        "seuss",
        "snapfaas-",
        "snapfaas",
    ] {
        let out = run_ok(&["invoke", s(&manifest), "--strategy", strategy]);
        let parsed: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(parsed["record"]["strategy"], strategy);
        let boot = parsed["record"]["boot_us"].as_f64().unwrap();
        let exec = parsed["record"]["exec_us"].as_f64().unwrap();
        let e2e = parsed["record"]["e2e_us"].as_f64().unwrap();
        assert_eq!(boot + exec, e2e);
        digests.push(parsed["state_digest"].as_str().unwrap().to_string());
    }
    assert!(
        digests.iter().all(|d| d == &digests[0]),
        "all strategies must reach the regular end state: {digests:?}"
    );
}

#[test]
fn missing_artifacts_exit_3_and_corrupt_artifacts_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path());
    let store = dir.path().join("store");

    // No base in the store and no --gen-base.
    assert_eq!(exit_code(&["register", s(&spec), s(&store)]), 3);

    // Nonexistent manifest.
    let ghost = dir.path().join("nope/manifest.json");
    assert_eq!(
        exit_code(&["invoke", s(&ghost), "--strategy", "regular"]),
        3
    );

    // Nonexistent spec file.
    let ghost_spec = dir.path().join("nope.json");
    assert_eq!(exit_code(&["gen-base", s(&ghost_spec), s(&store)]), 3);

    // Register properly, then truncate the diff page file: corrupt artifact.
    run_ok(&["register", s(&spec), s(&store), "--gen-base"]);
    let manifest = store.join("functions/cli-fn/manifest.json");
    run_ok(&["invoke", s(&manifest), "--strategy", "snapfaas"]);
    let pages = store.join("functions/cli-fn/diff/pages.bin");
    let bytes = fs::read(&pages).unwrap();
    fs::write(&pages, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(
        exit_code(&["invoke", s(&manifest), "--strategy", "snapfaas"]),
        2
    );

    // Unknown strategy: clap usage error.
    assert_eq!(
        exit_code(&["invoke", s(&manifest), "--strategy", "warp-drive"]),
        2
    );
}

#[test]
fn bench_report_cow_and_throughput_produce_stable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path());
    let config_path = dir.path().join("bench.json");
    let config = serde_json::json!({
        "functions": [s(&spec)],
        "strategies": ["regular", "reap", "snapfaas"],
        "rounds": 2
    });
    fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let out_a = dir.path().join("run-a");
    let out_b = dir.path().join("run-b");
    run_ok(&["bench", s(&config_path), "--out", s(&out_a)]);
    run_ok(&["bench", s(&config_path), "--out", s(&out_b)]);
    for name in ["records.json", "records.csv"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} must be byte-identical across runs");
    }

    let report_dir = dir.path().join("report");
    let records = out_a.join("records.json");
    run_ok(&[
        "report",
        s(&records),
        "--format",
        "csv",
        "--out",
        s(&report_dir),
    ]);
    for name in [
        "latency_normalized.csv",
        "overhead_breakdown.csv",
        "eager_sizes.csv",
    ] {
        assert!(report_dir.join(name).is_file(), "missing {name}");
    }
    let latency = fs::read_to_string(report_dir.join("latency_normalized.csv")).unwrap();
    assert!(
        latency.starts_with("function,regular,reap,snapfaas\n"),
        "{latency}"
    );

    let cow = run_ok(&["cow-ratio", s(&out_a.join("artifacts"))]);
    assert!(
        cow.starts_with("function,base_pages,cow_faults,ratio\n"),
        "{cow}"
    );
    assert!(cow.contains("cli-fn,8,2,0.250000"), "{cow}");

    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/throughput.json");
    let tput_dir = dir.path().join("tput");
    run_ok(&["throughput", s(&scenario), "--out", s(&tput_dir)]);
    let csv = fs::read_to_string(tput_dir.join("throughput.csv")).unwrap();
    assert!(
        csv.starts_with("cold_fraction,tput_regular,tput_snapfaas,rel_diff\n"),
        "{csv}"
    );
    assert!(csv.lines().count() > 20, "full sweep expected: {csv}");

    // Malformed bench config: unknown strategy label.
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"functions": ["x.json"], "strategies": ["warp-drive"]}"#,
    )
    .unwrap();
    assert_eq!(exit_code(&["bench", s(&bad), "--out", s(&out_a)]), 2);
}
