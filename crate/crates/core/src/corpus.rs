// SPDX-License-Identifier: Apache-2.0

//! Embedded copies of the shipped scenario corpus.
//!
//! The `scenarios/` directory at the repository root is the source of truth;
//! this module embeds those files at compile time so that library consumers
//! and the integration tests can load the corpus without knowing where the
//! repository happens to live on disk. The CLI reads the same files from
//! disk paths supplied by the user.

use crate::costmodel::CostParams;
use crate::throughput::Scenario;
use crate::workload::WorkloadSpec;

/// Names of the ten corpus functions, in the order they appear in the
/// default benchmark configuration.
pub const FUNCTION_NAMES: [&str; 10] = [
    "lorem",
    "sentiment-analysis",
    "thumbnail",
    "ocr",
    "img-resize",
    "alexa-door",
    "alexa-reminder",
    "audio-fingerprint",
    "matmul",
    "tpcc",
];

/// Corpus functions whose handler runs for multiple seconds of virtual
/// compute; the remaining six are short handlers.
pub const LONG_FUNCTION_NAMES: [&str; 4] = ["ocr", "img-resize", "matmul", "tpcc"];

const FUNCTION_SOURCES: [(&str, &str); 10] = [
    (
        "lorem",
        include_str!("../../../scenarios/functions/lorem.json"),
    ),
    (
        "sentiment-analysis",
        include_str!("../../../scenarios/functions/sentiment-analysis.json"),
    ),
    (
        "thumbnail",
        include_str!("../../../scenarios/functions/thumbnail.json"),
    ),
    ("ocr", include_str!("../../../scenarios/functions/ocr.json")),
    (
        "img-resize",
        include_str!("../../../scenarios/functions/img-resize.json"),
    ),
    (
        "alexa-door",
        include_str!("../../../scenarios/functions/alexa-door.json"),
    ),
    (
        "alexa-reminder",
        include_str!("../../../scenarios/functions/alexa-reminder.json"),
    ),
    (
        "audio-fingerprint",
        include_str!("../../../scenarios/functions/audio-fingerprint.json"),
    ),
    (
        "matmul",
        include_str!("../../../scenarios/functions/matmul.json"),
    ),
    (
        "tpcc",
        include_str!("../../../scenarios/functions/tpcc.json"),
    ),
];

/// Raw JSON text of the default cost-model parameters (`scenarios/params.json`).
pub const DEFAULT_PARAMS_JSON: &str = include_str!("../../../scenarios/params.json");

/// Raw JSON text of the default benchmark configuration (`scenarios/bench.json`).
pub const DEFAULT_BENCH_JSON: &str = include_str!("../../../scenarios/bench.json");

/// Raw JSON text of the default throughput scenario (`scenarios/throughput.json`).
pub const DEFAULT_THROUGHPUT_JSON: &str = include_str!("../../../scenarios/throughput.json");

/// Returns the raw JSON text of one corpus function, or `None` for an
/// unknown name.
pub fn function_json(name: &str) -> Option<&'static str> {
    FUNCTION_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Parses one corpus function by name.
///
/// Panics if the embedded file fails validation; the corpus is fixed at
/// compile time and covered by tests, so a failure here is a build defect
/// rather than a runtime condition.
pub fn function_spec(name: &str) -> Option<WorkloadSpec> {
    function_json(name)
        .map(|text| WorkloadSpec::parse_str(text).expect("embedded corpus function must be valid"))
}

/// Parses all ten corpus functions in their canonical order.
pub fn all_function_specs() -> Vec<WorkloadSpec> {
    FUNCTION_SOURCES
        .iter()
        .map(|(_, text)| {
            WorkloadSpec::parse_str(text).expect("embedded corpus function must be valid")
        })
        .collect()
}

/// Returns true if `name` is one of the long-running corpus handlers.
pub fn is_long_function(name: &str) -> bool {
    LONG_FUNCTION_NAMES.contains(&name)
}

/// Parses the default cost-model parameters shipped with the corpus.
pub fn default_params() -> CostParams {
    CostParams::from_json_str(DEFAULT_PARAMS_JSON)
        .expect("embedded default parameters must be valid")
}

/// Parses the default throughput scenario shipped with the corpus.
pub fn default_throughput_scenario() -> Scenario {
    Scenario::parse_str(DEFAULT_THROUGHPUT_JSON)
        .expect("embedded default throughput scenario must be valid")
}
