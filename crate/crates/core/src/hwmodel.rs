//! Memory-traffic model of an extended-precision CG accelerator.
//!
//! A CG iteration streams the `n×n` matrix once (at 64 bits per entry) and
//! touches a handful of length-`n` vectors. On a memory-bound machine the
//! iteration time is that traffic divided by the bandwidth. Precisions up to
//! 512 bits run at the 512-bit rate; 1024 bits pays a fixed multiplicative
//! penalty on top.
//!
//! All outputs are estimates of a hypothetical device.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accelerator constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HwParams {
    /// Bytes per second.
    pub mem_bandwidth: f64,
    /// One load of `load_bytes` every `load_cycles` cycles per core.
    pub load_bytes: f64,
    pub load_cycles: f64,
    pub clock_hz: f64,
    /// Time multiplier of 1024-bit relative to 512-bit.
    pub penalty_1024: f64,
    pub cores: u32,
    pub cache_line_bytes: u32,
    /// Resident vector streams per iteration.
    pub vector_streams: u32,
    pub matrix_bits: u32,
}

impl Default for HwParams {
    fn default() -> Self {
        Self {
            mem_bandwidth: 2.4e12,
            load_bytes: 8.0,
            load_cycles: 4.0,
            clock_hz: 2e9,
            penalty_1024: 1.2,
            cores: 600,
            cache_line_bytes: 64,
            vector_streams: 6,
            matrix_bits: 64,
        }
    }
}

impl HwParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mem_bandwidth", self.mem_bandwidth),
            ("load_bytes", self.load_bytes),
            ("load_cycles", self.load_cycles),
            ("clock_hz", self.clock_hz),
            ("penalty_1024", self.penalty_1024),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cores == 0 || self.cache_line_bytes == 0 || self.matrix_bits == 0 {
            return Err(Error::Config("hardware counts must be positive".into()));
        }
        Ok(())
    }
}

/// Bytes moved by one CG iteration:
/// `n²·matrix_bits/8 + vector_streams·n·vector_bits/8`.
pub fn traffic_per_cg_iter(n: usize, matrix_bits: u32, vector_bits: u32, vector_streams: u32) -> f64 {
    let n = n as f64;
    n * n * (matrix_bits as f64 / 8.0) + vector_streams as f64 * n * (vector_bits as f64 / 8.0)
}

/// Width whose traffic sets the memory-bound rate.
const RATE_BITS: u32 = 512;

/// Estimated seconds per CG iteration at `bits`.
pub fn cg_iter_time(n: usize, bits: u32, hw: &HwParams) -> Result<f64> {
    if !(53..=1024).contains(&bits) {
        return Err(Error::UnsupportedPrecision(bits));
    }
    let base = traffic_per_cg_iter(n, hw.matrix_bits, RATE_BITS, hw.vector_streams) / hw.mem_bandwidth;
    Ok(if bits > RATE_BITS { base * hw.penalty_1024 } else { base })
}

/// Cores needed before the load units outrun the memory system.
pub fn cores_to_saturate(hw: &HwParams) -> u64 {
    let per_core = hw.load_bytes / hw.load_cycles * hw.clock_hz;
    if hw.mem_bandwidth <= 0.0 {
        return 0;
    }
    (hw.mem_bandwidth / per_core).ceil() as u64
}

/// Attainable flop/s at `intensity` flop/byte.
pub fn roofline(intensity: f64, hw: &HwParams, peak_flops: f64) -> f64 {
    if intensity >= peak_flops / hw.mem_bandwidth {
        peak_flops
    } else {
        (intensity * hw.mem_bandwidth).min(peak_flops)
    }
}

/// Per-step seconds for one precision.
pub fn step_times(iterations: &[usize], n: usize, bits: u32, hw: &HwParams) -> Result<Vec<f64>> {
    let t = cg_iter_time(n, bits, hw)?;
    Ok(iterations.iter().map(|&k| k as f64 * t).collect())
}

/// `Σ_k iterations_k · cg_iter_time(n, bits)`.
pub fn estimate_trace_time(iterations: &[usize], n: usize, bits: u32, hw: &HwParams) -> Result<f64> {
    if iterations.is_empty() {
        return Err(Error::ScheduleMismatch("empty trace".into()));
    }
    Ok(step_times(iterations, n, bits, hw)?.iter().sum())
}

/// Per-step precision choice and the resulting totals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrecisionSchedule {
    /// Precision charged at each step.
    pub chosen_bits: Vec<u32>,
    /// Seconds charged at each step.
    pub step_seconds: Vec<f64>,
    pub total_s: f64,
    /// Per-step estimates for every available precision.
    pub per_precision_step_s: BTreeMap<u32, Vec<f64>>,
    pub per_precision_total_s: BTreeMap<u32, f64>,
    /// `T(64) / T(schedule)` when a 64-bit trace is present.
    pub gain_vs_64b: Option<f64>,
    /// `T(1024) / T(schedule) − 1` when a 1024-bit trace is present.
    pub gain_vs_1024b: Option<f64>,
}

fn per_precision(traces: &BTreeMap<u32, Vec<usize>>, n: usize, hw: &HwParams) -> Result<BTreeMap<u32, Vec<f64>>> {
    let mut lens = traces.values().map(Vec::len);
    let Some(len) = lens.next() else {
        return Err(Error::ScheduleMismatch("no traces".into()));
    };
    if len == 0 {
        return Err(Error::ScheduleMismatch("empty trace".into()));
    }
    if lens.any(|l| l != len) {
        let desc: Vec<String> = traces.iter().map(|(b, t)| format!("{b}-bit: {} steps", t.len())).collect();
        return Err(Error::ScheduleMismatch(desc.join(", ")));
    }
    traces.iter().map(|(&b, t)| Ok((b, step_times(t, n, b, hw)?))).collect()
}

fn finish(
    chosen_bits: Vec<u32>,
    step_seconds: Vec<f64>,
    per_precision_step_s: BTreeMap<u32, Vec<f64>>,
) -> PrecisionSchedule {
    let total_s: f64 = step_seconds.iter().sum();
    let per_precision_total_s: BTreeMap<u32, f64> =
        per_precision_step_s.iter().map(|(&b, s)| (b, s.iter().sum())).collect();
    let gain_vs_64b = per_precision_total_s.get(&64).map(|t| t / total_s);
    let gain_vs_1024b = per_precision_total_s.get(&1024).map(|t| t / total_s - 1.0);
    PrecisionSchedule {
        chosen_bits,
        step_seconds,
        total_s,
        per_precision_step_s,
        per_precision_total_s,
        gain_vs_64b,
        gain_vs_1024b,
    }
}

/// Picks, at every step, the precision with the smallest estimated time
/// (lower precision on ties).
pub fn adaptive_schedule(traces: &BTreeMap<u32, Vec<usize>>, n: usize, hw: &HwParams) -> Result<PrecisionSchedule> {
    let times = per_precision(traces, n, hw)?;
    let steps = times.values().next().map_or(0, Vec::len);
    let mut chosen = Vec::with_capacity(steps);
    let mut charged = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut best: Option<(u32, f64)> = None;
        for (&b, t) in &times {
            if best.is_none_or(|(_, bt)| t[k] < bt) {
                best = Some((b, t[k]));
            }
        }
        let (b, t) = best.expect("at least one precision");
        chosen.push(b);
        charged.push(t);
    }
    Ok(finish(chosen, charged, times))
}

/// A schedule that can only learn by probing. It starts at the lowest
/// precision; every `period` steps it runs the step at every precision
/// (paying for all of them) and switches to the fastest one if that beats
/// the current choice by at least `threshold` (relative).
pub fn online_schedule(
    traces: &BTreeMap<u32, Vec<usize>>,
    n: usize,
    hw: &HwParams,
    period: usize,
    threshold: f64,
) -> Result<PrecisionSchedule> {
    if period == 0 {
        return Err(Error::Config("probe period must be at least 1".into()));
    }
    if !(threshold >= 0.0) {
        return Err(Error::Config(format!("gain threshold must be nonnegative, got {threshold}")));
    }
    let times = per_precision(traces, n, hw)?;
    let steps = times.values().next().map_or(0, Vec::len);
    let mut current = *times.keys().next().expect("nonempty");
    let mut chosen = Vec::with_capacity(steps);
    let mut charged = Vec::with_capacity(steps);
    for k in 0..steps {
        if k % period == 0 {
            let probe: f64 = times.values().map(|t| t[k]).sum();
            let (mut best_b, mut best_t) = (current, times[&current][k]);
            for (&b, t) in &times {
                if t[k] < best_t {
                    best_b = b;
                    best_t = t[k];
                }
            }
            if best_b != current && times[&current][k] >= best_t * (1.0 + threshold) {
                current = best_b;
            }
            chosen.push(current);
            charged.push(probe);
        } else {
            chosen.push(current);
            charged.push(times[&current][k]);
        }
    }
    Ok(finish(chosen, charged, times))
}
