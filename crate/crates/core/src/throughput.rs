// SPDX-License-Identifier: Apache-2.0

//! Capacity-versus-latency tradeoff for a fleet serving a mix of warm and
//! cold requests.
//!
//! Keeping language base snapshots resident costs memory, which costs
//! concurrent instance slots; in exchange every cold start gets cheaper.
//! This module answers when that trade pays off, with a saturated
//! closed-system model: every slot is always busy, so
//!
//! ```text
//! mean_service = cold_fraction·cold_service + (1−cold_fraction)·warm_service
//! throughput   = slots / mean_service
//! ```
//!
//! per mode (`regular` boots cold instances from scratch and keeps nothing
//! resident; `snapfaas` keeps the base resident and restores cold instances
//! from split snapshots). [`find_crossover`] solves for the cold fraction
//! where the two modes tie, and [`des_throughput`] is an independent
//! discrete-event oracle — a per-slot request loop — that bounds the
//! closed-form model's error.

use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ThroughputError {
    #[error(
        "no instance slots: total memory {total_memory_bytes} minus resident base \
         {resident_base_bytes} leaves less than one instance of {per_instance_memory_bytes}"
    )]
    NoCapacity {
        total_memory_bytes: u64,
        per_instance_memory_bytes: u64,
        resident_base_bytes: u64,
    },
    #[error("malformed throughput scenario: {0}")]
    Malformed(String),
    #[error("io error accessing {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Memory capacity of one machine in one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub total_memory_bytes: u64,
    pub per_instance_memory_bytes: u64,
    /// Memory pinned by resident base snapshots; 0 in regular mode.
    pub resident_base_bytes: u64,
}

impl MachineSpec {
    /// Concurrent instance slots: `floor((total − resident)/per_instance)`.
    pub fn slots(&self) -> Result<u64, ThroughputError> {
        let no_capacity = ThroughputError::NoCapacity {
            total_memory_bytes: self.total_memory_bytes,
            per_instance_memory_bytes: self.per_instance_memory_bytes,
            resident_base_bytes: self.resident_base_bytes,
        };
        if self.per_instance_memory_bytes == 0 {
            return Err(ThroughputError::Malformed(
                "per_instance_memory_bytes must be strictly positive".into(),
            ));
        }
        let available = self
            .total_memory_bytes
            .checked_sub(self.resident_base_bytes)
            .ok_or(no_capacity)?;
        match available / self.per_instance_memory_bytes {
            0 => Err(ThroughputError::NoCapacity {
                total_memory_bytes: self.total_memory_bytes,
                per_instance_memory_bytes: self.per_instance_memory_bytes,
                resident_base_bytes: self.resident_base_bytes,
            }),
            slots => Ok(slots),
        }
    }

    /// This machine with nothing held resident.
    pub fn regular_mode(&self) -> MachineSpec {
        MachineSpec {
            resident_base_bytes: 0,
            ..*self
        }
    }
}

/// Request mix and per-mode service times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadMix {
    /// Share of requests that hit no warm instance; scenario sweeps fill
    /// this in, so it defaults to 0 in the scenario file's mix object.
    #[serde(default)]
    pub cold_fraction: f64,
    pub warm_service_us: u64,
    pub cold_service_us_regular: u64,
    pub cold_service_us_snapfaas: u64,
}

impl WorkloadMix {
    pub fn validate(&self) -> Result<(), ThroughputError> {
        if !(0.0..=1.0).contains(&self.cold_fraction) {
            return Err(ThroughputError::Malformed(format!(
                "cold_fraction must lie in [0, 1], got {}",
                self.cold_fraction
            )));
        }
        if self.warm_service_us == 0 {
            return Err(ThroughputError::Malformed(
                "warm_service_us must be strictly positive".into(),
            ));
        }
        for (mode, cold) in [
            ("regular", self.cold_service_us_regular),
            ("snapfaas", self.cold_service_us_snapfaas),
        ] {
            if cold < self.warm_service_us {
                return Err(ThroughputError::Malformed(format!(
                    "cold service ({cold} µs, {mode}) must not undercut warm service ({} µs)",
                    self.warm_service_us
                )));
            }
        }
        Ok(())
    }

    pub fn with_cold_fraction(&self, cold_fraction: f64) -> WorkloadMix {
        WorkloadMix {
            cold_fraction,
            ..*self
        }
    }

    fn mean_service_us(&self, cold_service_us: u64) -> f64 {
        self.cold_fraction * cold_service_us as f64
            + (1.0 - self.cold_fraction) * self.warm_service_us as f64
    }
}

/// Closed-form throughput of both modes under one mix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputResult {
    pub requests_per_s_regular: f64,
    pub requests_per_s_snapfaas: f64,
    /// `(snapfaas − regular) / regular`.
    pub relative_difference: f64,
}

/// Saturated closed-system throughput for both modes, requests per second.
pub fn simulate_throughput(
    machine_regular: &MachineSpec,
    machine_snapfaas: &MachineSpec,
    mix: &WorkloadMix,
) -> Result<ThroughputResult, ThroughputError> {
    mix.validate()?;
    let rps = |machine: &MachineSpec, cold_service_us: u64| -> Result<f64, ThroughputError> {
        let slots = machine.slots()?;
        Ok(slots as f64 * 1_000_000.0 / mix.mean_service_us(cold_service_us))
    };
    let requests_per_s_regular = rps(machine_regular, mix.cold_service_us_regular)?;
    let requests_per_s_snapfaas = rps(machine_snapfaas, mix.cold_service_us_snapfaas)?;
    Ok(ThroughputResult {
        requests_per_s_regular,
        requests_per_s_snapfaas,
        relative_difference: (requests_per_s_snapfaas - requests_per_s_regular)
            / requests_per_s_regular,
    })
}

/// The cold fraction at which the two modes' throughputs tie.
///
/// The tie condition is linear in the cold fraction, so the interior
/// crossover (when one exists) is solved in closed form; when one mode
/// dominates across the whole range the boundary value 0 or 1 is returned.
/// `mix.cold_fraction` is ignored.
pub fn find_crossover(
    machine_regular: &MachineSpec,
    machine_snapfaas: &MachineSpec,
    mix: &WorkloadMix,
) -> Result<f64, ThroughputError> {
    mix.with_cold_fraction(0.0).validate()?;
    let at = |f: f64| -> Result<ThroughputResult, ThroughputError> {
        simulate_throughput(
            machine_regular,
            machine_snapfaas,
            &mix.with_cold_fraction(f),
        )
    };
    if at(0.0)?.relative_difference >= 0.0 {
        return Ok(0.0);
    }
    if at(1.0)?.relative_difference <= 0.0 {
        return Ok(1.0);
    }
    // slots_s·(w + f(cr−w)) = slots_r·(w + f(cs−w)), solved for f.
    let slots_r = machine_regular.slots()? as f64;
    let slots_s = machine_snapfaas.slots()? as f64;
    let w = mix.warm_service_us as f64;
    let cr = mix.cold_service_us_regular as f64;
    let cs = mix.cold_service_us_snapfaas as f64;
    let f = w * (slots_r - slots_s) / (slots_s * (cr - w) - slots_r * (cs - w));
    Ok(f.clamp(0.0, 1.0))
}

/// Independent oracle: run `requests_per_slot` sequential requests on every
/// slot, spreading cold requests evenly through the stream, and measure
/// completed requests over elapsed time. Deterministic; no randomness.
pub fn des_throughput(
    machine: &MachineSpec,
    mix: &WorkloadMix,
    cold_service_us: u64,
    requests_per_slot: u64,
) -> Result<f64, ThroughputError> {
    mix.validate()?;
    let slots = machine.slots()?;
    // Even spreading via the integer staircase floor((i+1)·cf) − floor(i·cf)
    // with cf held in millionths.
    let cold_per_million = (mix.cold_fraction * 1_000_000.0).round() as u64;
    let mut slot_busy_us: u64 = 0;
    for i in 0..requests_per_slot {
        let cold = ((i + 1) * cold_per_million) / 1_000_000 > (i * cold_per_million) / 1_000_000;
        slot_busy_us += if cold {
            cold_service_us
        } else {
            mix.warm_service_us
        };
    }
    // All slots execute the same stream in parallel.
    Ok((slots * requests_per_slot) as f64 * 1_000_000.0 / slot_busy_us as f64)
}

/// A sweep scenario: one machine (its resident bytes apply to snapfaas
/// mode; regular mode runs the same machine with nothing resident), one
/// service-time mix, and a cold-fraction range `[start, end, step]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub machine: MachineSpec,
    pub mix: WorkloadMix,
    pub sweep: Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// `[start, end, step]` over the cold fraction, inclusive of both ends.
    pub cold_fraction: [f64; 3],
}

impl Scenario {
    pub fn parse_str(raw: &str) -> Result<Scenario, ThroughputError> {
        let scenario: Scenario =
            serde_json::from_str(raw).map_err(|e| ThroughputError::Malformed(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn parse_file(path: &Path) -> Result<Scenario, ThroughputError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ThroughputError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse_str(&raw)
    }

    pub fn validate(&self) -> Result<(), ThroughputError> {
        let [start, end, step] = self.sweep.cold_fraction;
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || start > end {
            return Err(ThroughputError::Malformed(format!(
                "sweep range [{start}, {end}] must satisfy 0 ≤ start ≤ end ≤ 1"
            )));
        }
        if !step.is_finite() || step <= 0.0 {
            return Err(ThroughputError::Malformed(format!(
                "sweep step must be strictly positive, got {step}"
            )));
        }
        self.mix.with_cold_fraction(start).validate()?;
        // Both modes must have capacity before any sweep point runs.
        self.machine.regular_mode().slots()?;
        self.machine.slots()?;
        Ok(())
    }

    /// The sweep's cold-fraction grid, computed in millionths so step
    /// accumulation cannot drift.
    pub fn grid(&self) -> Vec<f64> {
        let [start, end, step] = self.sweep.cold_fraction;
        let to_millionths = |v: f64| (v * 1_000_000.0).round() as u64;
        let (start_m, end_m, step_m) = (
            to_millionths(start),
            to_millionths(end),
            to_millionths(step),
        );
        (0..)
            .map(|k| start_m + k * step_m)
            .take_while(|&f| f <= end_m)
            .map(|f| f as f64 / 1_000_000.0)
            .collect()
    }
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cold_fraction: f64,
    pub tput_regular: f64,
    pub tput_snapfaas: f64,
    pub rel_diff: f64,
}

/// Evaluate the scenario over its grid.
pub fn run_sweep(scenario: &Scenario) -> Result<Vec<SweepRow>, ThroughputError> {
    scenario.validate()?;
    let regular = scenario.machine.regular_mode();
    scenario
        .grid()
        .into_iter()
        .map(|cold_fraction| {
            let result = simulate_throughput(
                &regular,
                &scenario.machine,
                &scenario.mix.with_cold_fraction(cold_fraction),
            )?;
            Ok(SweepRow {
                cold_fraction,
                tput_regular: result.requests_per_s_regular,
                tput_snapfaas: result.requests_per_s_snapfaas,
                rel_diff: result.relative_difference,
            })
        })
        .collect()
}

/// Render sweep rows as CSV with fixed-precision numbers, so identical
/// inputs always produce byte-identical output.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("cold_fraction,tput_regular,tput_snapfaas,rel_diff\n");
    for row in rows {
        out.push_str(&format!(
            "{:.4},{:.6},{:.6},{:.6}\n",
            row.cold_fraction, row.tput_regular, row.tput_snapfaas, row.rel_diff
        ));
    }
    out
}
