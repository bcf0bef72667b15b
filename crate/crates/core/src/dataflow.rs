//! Cycle-level timeline model of the recompute pipeline: per-iteration
//! output-buffer phases, Ping-Pong register-file occupancy, and DPPU
//! utilization for the unified and grouped structures.
//!
//! The timeline is analytical. One iteration produces one output feature per
//! PE and lasts `c*k*k` cycles; the output-buffer port serves the 2-D array
//! for `delay_d` cycles, then the DPPU for one cycle per repaired fault, and
//! idles for the rest. The per-cycle register-file trace exists for small
//! configurations and debugging.

use thiserror::Error;

use crate::config::{ArrayConfig, DppuStructure};
use crate::fault::FaultMap;
use crate::perf::{LayerKind, LayerSpec};
use crate::repair::dppu_effective_capacity;

/// Output-buffer phase split of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationSchedule {
    /// Cycles per iteration: `c * k * k`.
    pub t_iteration: u64,
    /// Cycles the 2-D array owns the output-buffer port.
    pub t_2d_write: u64,
    /// Cycles the DPPU owns the port: one per repaired fault.
    pub t_dppu_write: u64,
    /// Remaining port-idle cycles.
    pub idle: u64,
    /// Cycles the DPPU computes during one iteration.
    pub dppu_busy_cycles: u64,
}

/// Builds the three-phase schedule for a conv layer with `fault_count`
/// repaired faults.
///
/// Fails when `delay_d + fault_count` exceeds the iteration length (the
/// output-buffer port cannot serve both writers) or when a delay window's
/// recomputation cannot finish before its source bank is overwritten.
pub fn build_schedule(
    cfg: &ArrayConfig,
    layer: &LayerSpec,
    fault_count: u32,
) -> Result<IterationSchedule, DataflowError> {
    if layer.kind != LayerKind::Conv {
        return Err(DataflowError::NotConv(layer.name.clone()));
    }
    let t_iteration = layer.macs_per_output();
    let t_2d_write = cfg.delay_d as u64;
    let t_dppu_write = fault_count as u64;
    if t_2d_write + t_dppu_write > t_iteration {
        return Err(DataflowError::Infeasible {
            layer: layer.name.clone(),
            needed: t_2d_write + t_dppu_write,
            available: t_iteration,
        });
    }
    let util = dppu_utilization(cfg, cfg.dppu_structure);
    let groups = group_count(cfg) as u64;
    let per_window_busy =
        (fault_count as u64).div_ceil(groups) * util.cycles_per_fault as u64;
    if per_window_busy > cfg.delay_d as u64 {
        return Err(DataflowError::DeadlineViolation {
            layer: layer.name.clone(),
            busy: per_window_busy,
            window: cfg.delay_d as u64,
        });
    }
    let windows = t_iteration.div_ceil(cfg.delay_d as u64);
    Ok(IterationSchedule {
        t_iteration,
        t_2d_write,
        t_dppu_write,
        idle: t_iteration - t_2d_write - t_dppu_write,
        dppu_busy_cycles: windows * per_window_busy,
    })
}

fn group_count(cfg: &ArrayConfig) -> u32 {
    match cfg.dppu_structure {
        DppuStructure::Unified => 1,
        DppuStructure::Grouped => cfg.dppu_size.div_ceil(cfg.dppu_group_size),
    }
}

/// Width of the unit that consumes one fault's `cols` operands per pass.
fn lane_width(cfg: &ArrayConfig, structure: DppuStructure) -> u32 {
    match structure {
        DppuStructure::Unified => cfg.dppu_size,
        DppuStructure::Grouped => cfg.dppu_group_size.min(cfg.dppu_size),
    }
}

/// Throughput characteristics of one DPPU organization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DppuUtilization {
    pub structure: DppuStructure,
    /// Cycles to recompute one faulty PE's `cols`-element dot product.
    /// For the grouped structure this folds in the bank shifts of the
    /// segmented register file: one segment is consumed per cycle.
    pub cycles_per_fault: u32,
    /// Fraction of multiplier-cycles doing useful work.
    pub utilization: f64,
}

/// Utilization of the DPPU against `cols`-aligned register-file rows.
///
/// A unit of width `w` needs `ceil(cols / w)` passes per fault, touching
/// `w * passes` lane-cycles to do `cols` useful multiplies. The grouped
/// structure keeps `w = dppu_group_size` and stays fully utilized whenever
/// the group size divides `cols`; a unified DPPU is fully utilized only
/// when its size divides into, or equals, the column count.
pub fn dppu_utilization(cfg: &ArrayConfig, structure: DppuStructure) -> DppuUtilization {
    let width = lane_width(cfg, structure);
    let passes = cfg.cols.div_ceil(width);
    DppuUtilization {
        structure,
        cycles_per_fault: passes,
        utilization: cfg.cols as f64 / (width as f64 * passes as f64),
    }
}

/// Faulty-PE repair capacity after internal DPPU faults and structural
/// utilization: `floor(surviving_units * utilization)`, computed in integer
/// arithmetic.
pub fn effective_repair_capacity(
    cfg: &ArrayConfig,
    structure: DppuStructure,
    map: &FaultMap,
) -> u32 {
    let base = dppu_effective_capacity(cfg, map) as u64;
    let width = lane_width(cfg, structure) as u64;
    let passes = (cfg.cols as u64).div_ceil(width);
    (base * cfg.cols as u64 / (width * passes)) as u32
}

/// Ping-Pong register file banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bank {
    Ping,
    Pong,
}

impl std::fmt::Display for Bank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bank::Ping => write!(f, "ping"),
            Bank::Pong => write!(f, "pong"),
        }
    }
}

/// One cycle of register-file activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub cycle: u64,
    /// Bank the array-side stream writes this cycle.
    pub bank_write: Bank,
    /// Bank the DPPU reads this cycle, once data exists.
    pub bank_read: Option<Bank>,
    /// Delay window that produced the data being read.
    pub owner: Option<u64>,
}

/// Per-cycle WRF/IRF occupancy over `[start, start+len)`.
///
/// The stream fills one bank per `delay_d`-cycle window, alternating; the
/// DPPU reads the bank filled during the previous window, so every entry
/// lives exactly `delay_d` cycles after its window completes before being
/// overwritten. The returned trace is checked for same-cycle same-bank
/// write/read overlap.
pub fn register_file_trace(
    cfg: &ArrayConfig,
    start: u64,
    len: u64,
) -> Result<Vec<TraceEntry>, DataflowError> {
    let d = cfg.delay_d as u64;
    if len > 2 * d {
        return Err(DataflowError::WindowTooLong {
            len,
            max: 2 * d,
        });
    }
    let bank = |window: u64| if window % 2 == 0 { Bank::Ping } else { Bank::Pong };
    let trace: Vec<TraceEntry> = (start..start + len)
        .map(|cycle| {
            let window = cycle / d;
            let (bank_read, owner) = if window == 0 {
                (None, None)
            } else {
                (Some(bank(window - 1)), Some(window - 1))
            };
            TraceEntry {
                cycle,
                bank_write: bank(window),
                bank_read,
                owner,
            }
        })
        .collect();
    validate_trace(&trace)?;
    Ok(trace)
}

/// Rejects any cycle where the stream writes the bank the DPPU is reading.
pub fn validate_trace(trace: &[TraceEntry]) -> Result<(), DataflowError> {
    for e in trace {
        if e.bank_read == Some(e.bank_write) {
            return Err(DataflowError::BankOverlap { cycle: e.cycle });
        }
    }
    Ok(())
}

/// CSV export: `cycle,bank_write,bank_read,owner`.
pub fn trace_to_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("cycle,bank_write,bank_read,owner\n");
    for e in trace {
        let read = e
            .bank_read
            .map(|b| b.to_string())
            .unwrap_or_else(|| "-".into());
        let owner = e
            .owner
            .map(|w| w.to_string())
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!("{},{},{},{}\n", e.cycle, e.bank_write, read, owner));
    }
    out
}

#[derive(Debug, Error)]
pub enum DataflowError {
    #[error("layer `{0}` is not a conv layer")]
    NotConv(String),
    #[error("schedule infeasible for `{layer}`: port needs {needed} cycles but the iteration has {available}")]
    Infeasible {
        layer: String,
        needed: u64,
        available: u64,
    },
    #[error("recompute deadline violated for `{layer}`: {busy} busy cycles exceed the {window}-cycle window")]
    DeadlineViolation { layer: String, busy: u64, window: u64 },
    #[error("trace window of {len} cycles exceeds the {max}-cycle Ping-Pong period")]
    WindowTooLong { len: u64, max: u64 },
    #[error("bank overlap at cycle {cycle}: write and read hit the same bank")]
    BankOverlap { cycle: u64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::FaultMap;

    fn cfg32() -> ArrayConfig {
        ArrayConfig::default()
    }

    fn conv(c: u32, k: u32) -> LayerSpec {
        LayerSpec::conv("t", c, 64, 64, 64, k, 1).unwrap()
    }

    #[test]
    fn walkthrough_phases() {
        // c=64, k=3, three faults: 576-cycle iteration, 32-cycle array
        // write, 3-cycle DPPU write, 541 idle
        let s = build_schedule(&cfg32(), &conv(64, 3), 3).unwrap();
        assert_eq!(s.t_iteration, 576);
        assert_eq!(s.t_2d_write, 32);
        assert_eq!(s.t_dppu_write, 3);
        assert_eq!(s.idle, 541);
        assert_eq!(s.t_iteration, s.t_2d_write + s.t_dppu_write + s.idle);
    }

    #[test]
    fn fault_free_schedule() {
        let s = build_schedule(&cfg32(), &conv(64, 3), 0).unwrap();
        assert_eq!(s.t_dppu_write, 0);
        assert_eq!(s.idle, s.t_iteration - 32);
        assert_eq!(s.dppu_busy_cycles, 0);
    }

    #[test]
    fn tiny_layer_is_infeasible() {
        let layer = LayerSpec::conv("tiny", 1, 4, 4, 8, 1, 1).unwrap();
        match build_schedule(&cfg32(), &layer, 4) {
            Err(DataflowError::Infeasible {
                needed, available, ..
            }) => {
                assert_eq!(needed, 36);
                assert_eq!(available, 1);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn fc_layer_rejected() {
        let fc = LayerSpec::fc("fc", 128, 64).unwrap();
        assert!(matches!(
            build_schedule(&cfg32(), &fc, 0),
            Err(DataflowError::NotConv(_))
        ));
    }

    #[test]
    fn full_capacity_meets_the_window_deadline() {
        // 32 faults on 4 groups, 4 cycles each: exactly the 32-cycle window
        let s = build_schedule(&cfg32(), &conv(64, 3), 32).unwrap();
        let windows = 576u64.div_ceil(32);
        assert_eq!(s.dppu_busy_cycles, windows * 32);

        let mut cfg = cfg32();
        cfg.dppu_size = 16; // only 2 groups: 33+ cycles per window
        assert!(matches!(
            build_schedule(&cfg, &conv(64, 3), 32),
            Err(DataflowError::DeadlineViolation { .. })
        ));
    }

    #[test]
    fn grouped_utilization() {
        let u = dppu_utilization(&cfg32(), DppuStructure::Grouped);
        assert_eq!(u.cycles_per_fault, 4);
        assert_eq!(u.utilization, 1.0);
    }

    #[test]
    fn unified_utilization_points() {
        // enumeration oracle: lanes busy over passes
        let oracle = |size: u32, cols: u32| {
            let passes = cols.div_ceil(size);
            cols as f64 / (size * passes) as f64
        };
        for (size, expect) in [
            (16, 1.0),
            (24, 2.0 / 3.0),
            (32, 1.0),
            (40, 0.8),
            (48, 2.0 / 3.0),
        ] {
            let mut cfg = cfg32();
            cfg.dppu_size = size;
            let u = dppu_utilization(&cfg, DppuStructure::Unified);
            assert_eq!(u.utilization, expect, "size {size}");
            assert_eq!(u.utilization, oracle(size, 32), "size {size}");
        }
    }

    #[test]
    fn effective_capacity_scaling() {
        let healthy = FaultMap::empty(0);
        for (size, grouped_expect, unified_expect) in [
            (16u32, 16u32, 16u32),
            (24, 24, 16),
            (32, 32, 32),
            (40, 40, 32),
            (48, 48, 32),
        ] {
            let mut cfg = cfg32();
            cfg.dppu_size = size;
            cfg.dppu_structure = DppuStructure::Grouped;
            assert_eq!(
                effective_repair_capacity(&cfg, DppuStructure::Grouped, &healthy),
                grouped_expect,
                "grouped {size}"
            );
            cfg.dppu_structure = DppuStructure::Unified;
            assert_eq!(
                effective_repair_capacity(&cfg, DppuStructure::Unified, &healthy),
                unified_expect,
                "unified {size}"
            );
        }
    }

    #[test]
    fn effective_capacity_with_dead_group() {
        let cfg = cfg32();
        let mut map = FaultMap::empty(0);
        map.dppu_mult_faults.insert(0);
        map.dppu_mult_faults.insert(1);
        assert_eq!(effective_repair_capacity(&cfg, DppuStructure::Grouped, &map), 24);
    }

    #[test]
    fn trace_toy_config() {
        let mut cfg = cfg32();
        cfg.cols = 4;
        cfg.delay_d = 4;
        let trace = register_file_trace(&cfg, 0, 8).unwrap();
        let expect = [
            (0, Bank::Ping, None, None),
            (1, Bank::Ping, None, None),
            (2, Bank::Ping, None, None),
            (3, Bank::Ping, None, None),
            (4, Bank::Pong, Some(Bank::Ping), Some(0)),
            (5, Bank::Pong, Some(Bank::Ping), Some(0)),
            (6, Bank::Pong, Some(Bank::Ping), Some(0)),
            (7, Bank::Pong, Some(Bank::Ping), Some(0)),
        ];
        for (e, (cycle, w, r, o)) in trace.iter().zip(expect) {
            assert_eq!((e.cycle, e.bank_write, e.bank_read, e.owner), (cycle, w, r, o));
        }
    }

    #[test]
    fn trace_reads_lag_by_delay() {
        let cfg = cfg32();
        let trace = register_file_trace(&cfg, 32, 64).unwrap();
        for e in &trace {
            // the read bank at cycle t is the bank written at t - 32
            let writer_then = if (e.cycle - 32) / 32 % 2 == 0 {
                Bank::Ping
            } else {
                Bank::Pong
            };
            assert_eq!(e.bank_read, Some(writer_then));
            assert_ne!(Some(e.bank_write), e.bank_read);
        }
    }

    #[test]
    fn trace_window_limits() {
        let cfg = cfg32();
        assert_eq!(register_file_trace(&cfg, 5, 0).unwrap().len(), 0);
        assert!(matches!(
            register_file_trace(&cfg, 0, 65),
            Err(DataflowError::WindowTooLong { .. })
        ));
    }

    #[test]
    fn trace_csv_format() {
        let mut cfg = cfg32();
        cfg.cols = 2;
        cfg.delay_d = 2;
        let trace = register_file_trace(&cfg, 0, 3).unwrap();
        let csv = trace_to_csv(&trace);
        assert_eq!(
            csv,
            "cycle,bank_write,bank_read,owner\n0,ping,-,-\n1,ping,-,-\n2,pong,ping,0\n"
        );
    }

    #[test]
    fn equal_throughput_repair() {
        // capacity n repairs n faults with zero added latency: the schedule
        // with n <= capacity faults matches the fault-free iteration length
        let cfg = cfg32();
        let clean = build_schedule(&cfg, &conv(64, 3), 0).unwrap();
        for n in [1, 8, 32] {
            let s = build_schedule(&cfg, &conv(64, 3), n).unwrap();
            assert_eq!(s.t_iteration, clean.t_iteration);
        }
    }
}
