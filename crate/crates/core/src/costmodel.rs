// SPDX-License-Identifier: Apache-2.0

//! First-principles lower bound on snapshot-restore overhead, the storage
//! parameters it is evaluated against, the per-invocation event ledger, and
//! the A–D latency breakdown reports are built from.
//!
//! The model says: any restore strategy must pay at least
//!
//! ```text
//! max(c, pgs_unique·P / bw_disk) + init + pgs_shared·lat_mem
//! ```
//!
//! where `c` covers pre-configuration and non-memory state restore,
//! `pgs_unique` counts function-private pages that must come from disk
//! (eagerly, at sequential bandwidth `bw_disk`, overlappable with `c`),
//! `init` is residual initialization work after memory is mapped, and
//! `pgs_shared` counts shared pages copied on first write at `lat_mem`
//! each.
//!
//! All latencies are carried as integer tenths of a microsecond
//! ([`TenthUs`]) so reports are reproducible bit-for-bit; the only rounding
//! point is the disk-bandwidth term, fixed as round-half-up to 0.1 µs.
//!
//! The simulator and the model are kept honest against each other:
//! [`validate_model_vs_sim`] recomposes a measured [`LatencyBreakdown`] and
//! checks it equals [`model_min_overhead`] evaluated on the run's own
//! [`EventLedger`] — exactly, not approximately.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(
        "measured execution ({measured_exec}) faster than the warm baseline ({warm_exec}); \
         with jitter off the slowdown clause cannot be negative"
    )]
    NegativeD {
        measured_exec: TenthUs,
        warm_exec: TenthUs,
    },
    #[error(
        "model validation requires a run with no demand-paged disk faults, \
         ledger recorded {demand_pages_disk}"
    )]
    PreconditionViolated { demand_pages_disk: u64 },
    #[error("invalid cost parameters: {0}")]
    InvalidParams(String),
    #[error("io error accessing {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A latency as an integer count of tenths of a microsecond.
///
/// Integer arithmetic end-to-end keeps every derived report byte-stable;
/// floats appear only at the serialization boundary (JSON values are plain
/// microseconds, e.g. `24.6`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TenthUs(u64);

impl TenthUs {
    pub const ZERO: TenthUs = TenthUs(0);

    pub const fn from_tenths(tenths: u64) -> Self {
        TenthUs(tenths)
    }

    pub const fn from_us(us: u64) -> Self {
        TenthUs(us * 10)
    }

    pub const fn tenths(self) -> u64 {
        self.0
    }

    pub fn as_us_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn abs_diff(self, other: TenthUs) -> TenthUs {
        TenthUs(self.0.abs_diff(other.0))
    }

    /// Milliseconds rounded half-up to one decimal place, e.g. `"5.7"`.
    /// One 0.1 ms unit is exactly 1000 tenths, so this never touches floats.
    pub fn format_ms_1dp(self) -> String {
        let tenths_of_ms = (self.0 + 500) / 1000;
        format!("{}.{}", tenths_of_ms / 10, tenths_of_ms % 10)
    }
}

impl fmt::Display for TenthUs {
    /// Microseconds with one decimal, e.g. `7002.0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Add for TenthUs {
    type Output = TenthUs;
    fn add(self, rhs: TenthUs) -> TenthUs {
        TenthUs(self.0 + rhs.0)
    }
}

impl AddAssign for TenthUs {
    fn add_assign(&mut self, rhs: TenthUs) {
        self.0 += rhs.0;
    }
}

impl Sub for TenthUs {
    type Output = TenthUs;
    fn sub(self, rhs: TenthUs) -> TenthUs {
        TenthUs(self.0 - rhs.0)
    }
}

impl Sum for TenthUs {
    fn sum<I: Iterator<Item = TenthUs>>(iter: I) -> TenthUs {
        TenthUs(iter.map(|t| t.0).sum())
    }
}

impl Serialize for TenthUs {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_us_f64())
    }
}

impl<'de> Deserialize<'de> for TenthUs {
    fn deserialize<'d, D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let us = f64::deserialize(d)?;
        if !us.is_finite() || us < 0.0 {
            return Err(serde::de::Error::custom(format!(
                "latency must be a non-negative number of microseconds, got {us}"
            )));
        }
        Ok(TenthUs((us * 10.0).round() as u64))
    }
}

/// Storage and configuration parameters the overhead model is evaluated
/// against. Defaults describe a commodity NVMe-class host; every field is a
/// tunable, not a truth claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Pre-configuration plus non-memory state restore, µs (symbol `c`).
    pub c_us: u64,
    /// Sequential disk read bandwidth for eager restores (symbol `bw_disk`).
    pub bw_disk_bytes_per_s: u64,
    /// Cost of one synchronous demand-paged disk fault, µs.
    pub lat_disk_fault_us: u64,
    /// Cost of one copy-on-write page copy, µs (symbol `lat_mem`).
    pub lat_mem_fault_us: u64,
    /// Guest page size in bytes (symbol `P`).
    pub page_size_bytes: u32,
    /// Residual initialization after memory is mapped, µs (symbol `init`).
    pub residual_init_us: u64,
    /// One-time seek penalty when an eager batch is non-empty, µs.
    #[serde(default)]
    pub batch_seek_us: u64,
    /// Per-strategy overrides of `c_us`, keyed by strategy label, for
    /// setups where configuration cost differs by restore path.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub c_overrides_us: BTreeMap<String, u64>,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            c_us: 6_000,
            bw_disk_bytes_per_s: 500_000_000,
            lat_disk_fault_us: 50,
            lat_mem_fault_us: 1,
            page_size_bytes: 4096,
            residual_init_us: 5_000,
            batch_seek_us: 0,
            c_overrides_us: BTreeMap::new(),
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positives = [
            ("c_us", self.c_us),
            ("bw_disk_bytes_per_s", self.bw_disk_bytes_per_s),
            ("lat_disk_fault_us", self.lat_disk_fault_us),
            ("lat_mem_fault_us", self.lat_mem_fault_us),
            ("residual_init_us", self.residual_init_us),
        ];
        for (name, value) in positives {
            if value == 0 {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be strictly positive"
                )));
            }
        }
        if !self.page_size_bytes.is_power_of_two() {
            return Err(ModelError::InvalidParams(format!(
                "page_size_bytes must be a power of two, got {}",
                self.page_size_bytes
            )));
        }
        for (strategy, &c) in &self.c_overrides_us {
            if c == 0 {
                return Err(ModelError::InvalidParams(format!(
                    "c override for {strategy:?} must be strictly positive"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(raw: &str) -> Result<CostParams, ModelError> {
        let params: CostParams =
            serde_json::from_str(raw).map_err(|e| ModelError::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_path(path: &Path) -> Result<CostParams, ModelError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json_str(&raw)
    }

    /// The configuration cost in effect for a strategy label.
    pub fn effective_c_us(&self, strategy_label: &str) -> u64 {
        self.c_overrides_us
            .get(strategy_label)
            .copied()
            .unwrap_or(self.c_us)
    }

    /// A copy of these parameters with `c_us` specialized to one strategy,
    /// so model, simulator, and breakdown all see the same `c`.
    pub fn for_strategy(&self, strategy_label: &str) -> CostParams {
        CostParams {
            c_us: self.effective_c_us(strategy_label),
            c_overrides_us: BTreeMap::new(),
            ..self.clone()
        }
    }
}

/// What one boot+invoke actually did, in events. Written once by the
/// simulator and treated as read-only afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventLedger {
    /// Pages restored from disk up front in one sequential batch.
    pub eager_pages_disk: u64,
    /// Pages faulted in from disk on first touch during execution.
    pub demand_pages_disk: u64,
    /// Shared pages copied on first write during execution.
    pub cow_faults: u64,
    /// Declared execution compute, µs.
    pub compute_us: u64,
    /// Residual initialization actually performed at boot, µs: the
    /// configured floor plus any boot-window compute and fault charges.
    pub residual_init_us: u64,
}

impl EventLedger {
    /// Field-wise sum: combines the boot half of a cold start with its
    /// invoke half into the single ledger reports are built from.
    pub fn merged(self, other: EventLedger) -> EventLedger {
        EventLedger {
            eager_pages_disk: self.eager_pages_disk + other.eager_pages_disk,
            demand_pages_disk: self.demand_pages_disk + other.demand_pages_disk,
            cow_faults: self.cow_faults + other.cow_faults,
            compute_us: self.compute_us + other.compute_us,
            residual_init_us: self.residual_init_us + other.residual_init_us,
        }
    }
}

/// Cost of eagerly restoring `pages` pages from disk in one sequential
/// batch: `pages·P/bw_disk`, rounded half-up to 0.1 µs, plus the one-time
/// seek penalty when the batch is non-empty.
pub fn eager_restore_cost(pages: u64, params: &CostParams) -> TenthUs {
    if pages == 0 {
        return TenthUs::ZERO;
    }
    // tenths = pages·P bytes / (bw bytes/s) · 10^7 tenths/s, half-up.
    let numerator = pages as u128 * params.page_size_bytes as u128 * 10_000_000;
    let divisor = params.bw_disk_bytes_per_s as u128;
    let tenths = (numerator * 2 + divisor) / (2 * divisor);
    TenthUs::from_tenths(tenths as u64) + TenthUs::from_us(params.batch_seek_us)
}

/// The minimum overhead any restore strategy must pay:
/// `max(c, pgs_unique·P/bw_disk) + init + pgs_shared·lat_mem`.
///
/// Exact rational arithmetic; the bandwidth term is the single rounding
/// point (half-up to 0.1 µs).
pub fn model_min_overhead(
    pgs_unique: u64,
    pgs_shared: u64,
    init_us: u64,
    params: &CostParams,
) -> TenthUs {
    let config = TenthUs::from_us(params.c_us);
    let disk = eager_restore_cost(pgs_unique, params);
    config.max(disk)
        + TenthUs::from_us(init_us)
        + TenthUs::from_us(pgs_shared * params.lat_mem_fault_us)
}

/// Smallest eager batch for which the disk term reaches the configuration
/// term: the least `n` with `n·P/bw ≥ c`, i.e. `ceil(c·bw/P)` with `c` in
/// seconds. Exact integer arithmetic (seek penalty excluded: this bounds
/// the bandwidth clause itself).
pub fn bandwidth_break_even_pages(params: &CostParams) -> u64 {
    let numerator = params.c_us as u128 * params.bw_disk_bytes_per_s as u128;
    let divisor = params.page_size_bytes as u128 * 1_000_000;
    numerator.div_ceil(divisor) as u64
}

/// One cold start decomposed into the model's four clauses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    /// Configuration and non-memory restore (`c`).
    pub a: TenthUs,
    /// Eager disk restore of the unique-page batch.
    pub b: TenthUs,
    /// Residual initialization.
    pub c: TenthUs,
    /// Execution slowdown versus the warm baseline.
    pub d: TenthUs,
}

impl LatencyBreakdown {
    /// The warm-row convention: a warm invoke pays none of the clauses.
    pub const ZERO: LatencyBreakdown = LatencyBreakdown {
        a: TenthUs::ZERO,
        b: TenthUs::ZERO,
        c: TenthUs::ZERO,
        d: TenthUs::ZERO,
    };

    /// `max(A,B) + C + D`: A and B overlap, C and D are serial.
    pub fn composed_overhead(&self) -> TenthUs {
        self.a.max(self.b) + self.c + self.d
    }
}

/// Decompose one measured cold start into the A–D clauses using its event
/// ledger and the warm execution baseline for the same workload and request.
///
/// `max(A,B) + C + D` equals `(measured_boot + measured_exec) − warm_exec`
/// exactly whenever the measurements come from the simulator run the ledger
/// describes and `params` match those the run was charged with.
pub fn breakdown(
    ledger: &EventLedger,
    warm_exec: TenthUs,
    measured_boot: TenthUs,
    measured_exec: TenthUs,
    params: &CostParams,
) -> Result<LatencyBreakdown, ModelError> {
    if measured_exec < warm_exec {
        return Err(ModelError::NegativeD {
            measured_exec,
            warm_exec,
        });
    }
    let out = LatencyBreakdown {
        a: TenthUs::from_us(params.c_us),
        b: eager_restore_cost(ledger.eager_pages_disk, params),
        c: TenthUs::from_us(ledger.residual_init_us),
        d: measured_exec - warm_exec,
    };
    debug_assert_eq!(
        out.composed_overhead(),
        measured_boot + measured_exec - warm_exec,
        "breakdown fed measurements inconsistent with its ledger/params"
    );
    Ok(out)
}

/// Check the simulator against the model: recompose the measured breakdown
/// and compare it with the model evaluated on the run's own ledger. Requires
/// a run whose unique pages were fully prefetched (no demand-paged disk
/// faults); returns the absolute difference, which the contract pins to
/// zero in exact arithmetic and ≤ 0.1 µs after rounding.
pub fn validate_model_vs_sim(
    ledger: &EventLedger,
    breakdown: &LatencyBreakdown,
    params: &CostParams,
) -> Result<TenthUs, ModelError> {
    if ledger.demand_pages_disk > 0 {
        return Err(ModelError::PreconditionViolated {
            demand_pages_disk: ledger.demand_pages_disk,
        });
    }
    let model = model_min_overhead(
        ledger.eager_pages_disk,
        ledger.cow_faults,
        ledger.residual_init_us,
        params,
    );
    Ok(breakdown.composed_overhead().abs_diff(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_model_is_the_configuration_cost() {
        let params = CostParams::default();
        assert_eq!(
            model_min_overhead(0, 0, 0, &params),
            TenthUs::from_us(params.c_us)
        );
    }

    #[test]
    fn model_evaluates_the_documented_example_exactly() {
        let params = CostParams {
            c_us: 6_000,
            bw_disk_bytes_per_s: 500_000_000,
            page_size_bytes: 4096,
            lat_mem_fault_us: 1,
            ..CostParams::default()
        };
        // max(6000, 3·4096/500e6 s = 24.576 µs) + 1000 + 2·1 = 7002.0 µs.
        let overhead = model_min_overhead(3, 2, 1_000, &params);
        assert_eq!(overhead, TenthUs::from_tenths(70_020));
        assert_eq!(overhead.to_string(), "7002.0");
    }

    #[test]
    fn small_eager_batch_cost_rounds_half_up() {
        let params = CostParams::default();
        // 3·4096 bytes at 500 MB/s = 24.576 µs → 245.76 tenths → 246.
        assert_eq!(eager_restore_cost(3, &params), TenthUs::from_tenths(246));
        assert_eq!(eager_restore_cost(3, &params).format_ms_1dp(), "0.0");
        // Exactly .05 µs: 1 page of 2 bytes at 40 MB/s = 0.05 µs → 1 tenth.
        let tiny = CostParams {
            page_size_bytes: 2,
            bw_disk_bytes_per_s: 40_000_000,
            ..CostParams::default()
        };
        assert_eq!(eager_restore_cost(1, &tiny), TenthUs::from_tenths(1));
    }

    #[test]
    fn empty_batch_skips_the_seek_penalty() {
        let params = CostParams {
            batch_seek_us: 100,
            ..CostParams::default()
        };
        assert_eq!(eager_restore_cost(0, &params), TenthUs::ZERO);
        assert_eq!(
            eager_restore_cost(1, &params),
            TenthUs::from_tenths(82) + TenthUs::from_us(100)
        );
        // The model inherits the seek term through the bandwidth clause.
        assert_eq!(
            model_min_overhead(0, 0, 0, &params),
            TenthUs::from_us(params.c_us)
        );
    }

    #[test]
    fn break_even_batch_matches_direct_evaluation() {
        let params = CostParams::default();
        // 6000 µs · 500 MB/s / 4096 B = 732.42… pages → 733.
        assert_eq!(bandwidth_break_even_pages(&params), 733);
        let at = eager_restore_cost(733, &params);
        let below = eager_restore_cost(732, &params);
        assert!(at >= TenthUs::from_us(params.c_us));
        assert!(below < TenthUs::from_us(params.c_us));
    }

    #[test]
    fn defaults_encode_the_disk_memory_dichotomy() {
        let params = CostParams::default();
        params.validate().unwrap();
        // Per-fault latency gap: a synchronous disk fault costs 50x a
        // copy-on-write page copy.
        assert_eq!(params.lat_disk_fault_us / params.lat_mem_fault_us, 50);
        // Batched sequential reads beat per-page demand faults: one page in
        // an eager batch costs ~8.2 µs against a 50 µs random fault.
        let per_page_eager = eager_restore_cost(1, &params);
        assert!(per_page_eager < TenthUs::from_us(params.lat_disk_fault_us));
    }

    #[test]
    fn breakdown_recomposes_to_the_measured_overhead() {
        let params = CostParams::default();
        let ledger = EventLedger {
            eager_pages_disk: 3,
            demand_pages_disk: 0,
            cow_faults: 2,
            compute_us: 100,
            residual_init_us: 1_000,
        };
        // A simulator-consistent measurement set: boot pays max(c, batch)
        // plus residual init; execution pays compute plus two page copies.
        let boot = TenthUs::from_us(params.c_us) + TenthUs::from_us(1_000);
        let warm = TenthUs::from_us(100);
        let exec = warm + TenthUs::from_us(2);
        let b = breakdown(&ledger, warm, boot, exec, &params).unwrap();
        assert_eq!(b.a, TenthUs::from_us(6_000));
        assert_eq!(b.b, TenthUs::from_tenths(246));
        assert_eq!(b.b.as_us_f64(), 24.6);
        assert_eq!(b.c, TenthUs::from_us(1_000));
        assert_eq!(b.d, TenthUs::from_us(2));
        assert_eq!(b.composed_overhead(), boot + exec - warm);
        // The same run validates against the model with zero delta.
        assert_eq!(
            validate_model_vs_sim(&ledger, &b, &params).unwrap(),
            TenthUs::ZERO
        );
    }

    #[test]
    fn negative_slowdown_is_rejected() {
        let ledger = EventLedger::default();
        let err = breakdown(
            &ledger,
            TenthUs::from_us(100),
            TenthUs::ZERO,
            TenthUs::from_us(99),
            &CostParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NegativeD { .. }));
    }

    #[test]
    fn demand_faults_violate_the_validation_precondition() {
        let ledger = EventLedger {
            demand_pages_disk: 4,
            ..EventLedger::default()
        };
        let err = validate_model_vs_sim(&ledger, &LatencyBreakdown::ZERO, &CostParams::default())
            .unwrap_err();
        assert!(matches!(
            err,
            ModelError::PreconditionViolated {
                demand_pages_disk: 4
            }
        ));
    }

    #[test]
    fn params_json_round_trips_and_fills_defaults() {
        let params = CostParams {
            batch_seek_us: 7,
            c_overrides_us: BTreeMap::from([("regular".to_string(), 9_000)]),
            ..CostParams::default()
        };
        let json = serde_json::to_string(&params).unwrap();
        assert_eq!(CostParams::from_json_str(&json).unwrap(), params);
        // Minimal config: extension fields default.
        let minimal = r#"{
            "c_us": 6000, "bw_disk_bytes_per_s": 500000000,
            "lat_disk_fault_us": 50, "lat_mem_fault_us": 1,
            "page_size_bytes": 4096, "residual_init_us": 5000
        }"#;
        let parsed = CostParams::from_json_str(minimal).unwrap();
        assert_eq!(parsed.batch_seek_us, 0);
        assert!(parsed.c_overrides_us.is_empty());
        assert!(CostParams::from_json_str("{\"c_us\": 1}").is_err());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let zero_c = CostParams {
            c_us: 0,
            ..CostParams::default()
        };
        assert!(zero_c.validate().is_err());
        let odd_page = CostParams {
            page_size_bytes: 3000,
            ..CostParams::default()
        };
        assert!(odd_page.validate().is_err());
        let zero_override = CostParams {
            c_overrides_us: BTreeMap::from([("reap".to_string(), 0)]),
            ..CostParams::default()
        };
        assert!(zero_override.validate().is_err());
    }

    #[test]
    fn strategy_overrides_specialize_c() {
        let params = CostParams {
            c_overrides_us: BTreeMap::from([("regular".to_string(), 9_000)]),
            ..CostParams::default()
        };
        assert_eq!(params.effective_c_us("regular"), 9_000);
        assert_eq!(params.effective_c_us("snapfaas"), 6_000);
        let specialized = params.for_strategy("regular");
        assert_eq!(specialized.c_us, 9_000);
        assert!(specialized.c_overrides_us.is_empty());
        assert_eq!(params.for_strategy("snapfaas").c_us, 6_000);
    }

    #[test]
    fn tenths_format_milliseconds_to_one_decimal() {
        assert_eq!(TenthUs::from_tenths(57_491).format_ms_1dp(), "5.7");
        assert_eq!(TenthUs::from_tenths(57_500).format_ms_1dp(), "5.8");
        assert_eq!(TenthUs::from_us(10_300).format_ms_1dp(), "10.3");
        assert_eq!(TenthUs::ZERO.format_ms_1dp(), "0.0");
        assert_eq!(TenthUs::from_tenths(246).to_string(), "24.6");
    }

    #[test]
    fn tenths_serialize_as_microseconds() {
        let v = TenthUs::from_tenths(70_020);
        assert_eq!(serde_json::to_string(&v).unwrap(), "7002.0");
        let back: TenthUs = serde_json::from_str("7002.0").unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<TenthUs>("-1.0").is_err());
    }

    prop_compose! {
        fn arb_params()(
            c_us in 1u64..10_000_000,
            bw in 1u64..1_000_000_000_000,
            lat_disk in 1u64..1_000,
            lat_mem in 1u64..1_000,
            page_pow in 0u32..21,
            residual in 1u64..10_000_000,
            seek in 0u64..10_000,
        ) -> CostParams {
            CostParams {
                c_us,
                bw_disk_bytes_per_s: bw,
                lat_disk_fault_us: lat_disk,
                lat_mem_fault_us: lat_mem,
                page_size_bytes: 1 << page_pow,
                residual_init_us: residual,
                batch_seek_us: seek,
                c_overrides_us: BTreeMap::new(),
            }
        }
    }

    proptest! {
        #[test]
        fn model_monotone_in_every_count(
            params in arb_params(),
            unique in 0u64..1_000_000,
            shared in 0u64..1_000_000,
            init in 0u64..1_000_000,
        ) {
            let base = model_min_overhead(unique, shared, init, &params);
            prop_assert!(model_min_overhead(unique + 1, shared, init, &params) >= base);
            prop_assert!(model_min_overhead(unique, shared + 1, init, &params) >= base);
            prop_assert!(model_min_overhead(unique, shared, init + 1, &params) >= base);
            let slower = CostParams {
                bw_disk_bytes_per_s: params.bw_disk_bytes_per_s + 1,
                ..params.clone()
            };
            prop_assert!(model_min_overhead(unique, shared, init, &slower) <= base);
        }

        #[test]
        fn break_even_is_the_least_dominating_batch(params in arb_params()) {
            // Compare n·P·10^6 against c·bw exactly in integers; the seek
            // penalty is excluded from the clause by definition.
            let n = bandwidth_break_even_pages(&params);
            let c_bw = params.c_us as u128 * params.bw_disk_bytes_per_s as u128;
            let disk = |pages: u64| pages as u128 * params.page_size_bytes as u128 * 1_000_000;
            prop_assert!(disk(n) >= c_bw);
            if n > 0 {
                prop_assert!(disk(n - 1) < c_bw);
            }
        }
    }
}
