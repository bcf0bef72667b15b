//! Runtime fault-detection scan: a reserved DPPU group recomputes a short
//! operand window per PE, the CLB buffers the before/after accumulator
//! values, and a PE is flagged faulty when the accumulated result differs
//! from the base result plus the clean partial recomputation.
//!
//! Scanning walks the array sequentially, one comparison per cycle, so a
//! full pass costs `rows * cols + cols` cycles regardless of the reserved
//! group size.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::config::{sort_col_major, ArrayConfig, PECoord};
use crate::dataflow::effective_repair_capacity;
use crate::emulator::StuckMask;
use crate::fault::{stream_rng, streams, FaultMap};
use crate::perf::{layer_cycles, LayerSpec};

/// Parameters of the detection machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionConfig {
    /// PEs in the reserved detection group; sets the scanned window length.
    pub reserved_group_size: u32,
    /// CLB capacity in bytes (Ping-Pong halves of `cols` accumulators each).
    pub clb_bytes: u64,
    /// Cycles between scan activations.
    pub scan_period: u64,
    /// Whether a DPPU group is currently reserved for scanning, reducing
    /// repair capacity by one group.
    pub reserve_group: bool,
}

impl DetectionConfig {
    pub fn for_config(cfg: &ArrayConfig) -> Self {
        DetectionConfig {
            reserved_group_size: cfg.dppu_group_size,
            clb_bytes: 4 * cfg.accum_width_w as u64 * cfg.cols as u64,
            scan_period: 1 << 20,
            reserve_group: false,
        }
    }
}

/// Fault PE table: the coordinates the DPPU will recompute, bounded by the
/// DPPU size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fpt {
    entries: Vec<PECoord>,
    capacity: usize,
}

impl Fpt {
    pub fn new(capacity: usize) -> Self {
        Fpt {
            entries: Vec::new(),
            capacity,
        }
    }

    pub fn for_config(cfg: &ArrayConfig) -> Self {
        Fpt::new(cfg.dppu_size as usize)
    }

    pub fn entries(&self) -> &[PECoord] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn contains(&self, pe: &PECoord) -> bool {
        self.entries.contains(pe)
    }

    pub fn as_set(&self) -> BTreeSet<PECoord> {
        self.entries.iter().copied().collect()
    }
}

/// Outcome of one full scan of the array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanResult {
    /// PEs whose scanned window exposed a fault.
    pub detected: BTreeSet<PECoord>,
    /// `rows * cols + cols` exactly.
    pub scan_cycles: u64,
    /// Table after appending the detections, leftmost columns first when
    /// space runs out.
    pub fpt_after: Fpt,
    /// Detected faults that no longer fit in the table.
    pub overflow: Vec<PECoord>,
}

/// Cycles for one full detection pass.
pub fn scan_cycles(cfg: &ArrayConfig) -> u64 {
    cfg.rows as u64 * cfg.cols as u64 + cfg.cols as u64
}

/// Scans every PE once. For each PE the emulated array state supplies the
/// base accumulated result, the accumulated result after
/// `reserved_group_size` further MACs through the PE's register path, and
/// the detection group's clean partial product of the same operands. The PE
/// is flagged iff `AR != BAR + PR` in wrapping 32-bit arithmetic.
///
/// A stuck bit that does not flip any bit of the scanned window goes
/// undetected in this pass; detection is per-window, not guaranteed.
pub fn scan_array(
    cfg: &ArrayConfig,
    det: &DetectionConfig,
    masks: &BTreeMap<PECoord, StuckMask>,
    fpt_before: &Fpt,
    seed: u64,
) -> ScanResult {
    let mut detected = BTreeSet::new();
    for row in 0..cfg.rows {
        for col in 0..cfg.cols {
            let pe = PECoord::new(row, col);
            let clean = StuckMask::default();
            let mask = masks.get(&pe).unwrap_or(&clean);
            let mut rng = stream_rng(seed, streams::SCAN_BASE + (row * cfg.cols + col) as u64);

            // accumulator state carried in from the layer so far
            let carried: i32 = rng.random();
            let mut acc = mask.apply_accumulator(carried);
            let bar = acc;
            let mut pr: i32 = 0;
            for _ in 0..det.reserved_group_size {
                let x: i8 = rng.random();
                let w: i8 = rng.random();
                let x_reg = mask.apply_input(x);
                let w_reg = mask.apply_weight(w);
                let product = mask.apply_intermediate(x_reg as i16 * w_reg as i16);
                acc = mask.apply_accumulator(acc.wrapping_add(product as i32));
                // the reserved group sees the raw operands from the register files
                pr = pr.wrapping_add((x as i16 * w as i16) as i32);
            }
            let ar = acc;
            if ar != bar.wrapping_add(pr) {
                detected.insert(pe);
            }
        }
    }

    // append to the FPT, left columns first when space runs out
    let mut fpt_after = fpt_before.clone();
    let mut overflow = Vec::new();
    let new_faults: BTreeSet<PECoord> = detected
        .iter()
        .filter(|pe| !fpt_before.contains(pe))
        .copied()
        .collect();
    for pe in sort_col_major(&new_faults) {
        if fpt_after.entries.len() < fpt_after.capacity {
            fpt_after.entries.push(pe);
        } else {
            overflow.push(pe);
        }
    }

    ScanResult {
        detected,
        scan_cycles: scan_cycles(cfg),
        fpt_after,
        overflow,
    }
}

/// Repair capacity while a DPPU group is reserved for scanning.
pub fn repair_capacity_during_scan(cfg: &ArrayConfig, map: &FaultMap) -> u32 {
    effective_repair_capacity(cfg, cfg.dppu_structure, map).saturating_sub(cfg.dppu_group_size)
}

/// Per-layer detection coverage of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// One flag per layer: true iff the layer runs at least as long as a
    /// full scan.
    pub covered: Vec<bool>,
    pub layers_total: usize,
    pub layers_covered: usize,
}

impl CoverageReport {
    pub fn fraction(&self) -> f64 {
        if self.layers_total == 0 {
            1.0
        } else {
            self.layers_covered as f64 / self.layers_total as f64
        }
    }
}

/// A layer is covered iff its runtime can hide one full scan.
pub fn detection_coverage(cfg: &ArrayConfig, network: &[LayerSpec]) -> CoverageReport {
    let threshold = scan_cycles(cfg);
    let covered: Vec<bool> = network
        .iter()
        .map(|l| layer_cycles(l, cfg.rows, cfg.cols) >= threshold)
        .collect();
    let layers_covered = covered.iter().filter(|&&c| c).count();
    CoverageReport {
        layers_total: covered.len(),
        layers_covered,
        covered,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::{stuck_masks_for, Register};
    use crate::fault::{FaultModelParams, FaultModel};

    fn cfg32() -> ArrayConfig {
        ArrayConfig::default()
    }

    #[test]
    fn scan_cycle_formula() {
        assert_eq!(scan_cycles(&cfg32()), 1056);
        assert_eq!(scan_cycles(&ArrayConfig::with_dims(128, 128)), 16512);
    }

    #[test]
    fn fault_free_array_is_silent() {
        let cfg = cfg32();
        let det = DetectionConfig::for_config(&cfg);
        let result = scan_array(&cfg, &det, &BTreeMap::new(), &Fpt::for_config(&cfg), 5);
        assert!(result.detected.is_empty());
        assert!(result.overflow.is_empty());
        assert!(result.fpt_after.entries().is_empty());
    }

    #[test]
    fn active_stuck_bit_is_detected() {
        let cfg = cfg32();
        let det = DetectionConfig::for_config(&cfg);
        let pe = PECoord::new(3, 7);
        let mut masks = BTreeMap::new();
        // a low weight-register bit flips nearly every product
        masks.insert(pe, StuckMask::stuck_bit(Register::Weight, 0, true));
        let result = scan_array(&cfg, &det, &masks, &Fpt::for_config(&cfg), 5);
        assert!(result.detected.contains(&pe));
        assert_eq!(result.fpt_after.entries(), &[pe]);
    }

    #[test]
    fn detection_is_sound() {
        // nothing healthy is ever flagged, whatever the seed
        let cfg = cfg32();
        let det = DetectionConfig::for_config(&cfg);
        for seed in 0..10 {
            let map = crate::fault::generate(
                &cfg,
                &FaultModelParams {
                    model: FaultModel::Random,
                    ..FaultModelParams::random(0.05).without_dppu()
                },
                seed,
            );
            let masks = stuck_masks_for(&map, 0.05);
            let result = scan_array(&cfg, &det, &masks, &Fpt::for_config(&cfg), seed);
            assert!(
                result.detected.is_subset(&map.array_faults),
                "seed {seed}: false positive"
            );
        }
    }

    #[test]
    fn scan_time_independent_of_group_size() {
        let cfg = cfg32();
        let mut det = DetectionConfig::for_config(&cfg);
        let base = scan_array(&cfg, &det, &BTreeMap::new(), &Fpt::for_config(&cfg), 1).scan_cycles;
        det.reserved_group_size = 16;
        let wide = scan_array(&cfg, &det, &BTreeMap::new(), &Fpt::for_config(&cfg), 1).scan_cycles;
        assert_eq!(base, wide);
    }

    #[test]
    fn fpt_overflow_keeps_left_columns() {
        let mut cfg = cfg32();
        cfg.dppu_size = 2; // tiny table
        let det = DetectionConfig::for_config(&cfg);
        let mut masks = BTreeMap::new();
        for pe in [PECoord::new(0, 20), PECoord::new(5, 3), PECoord::new(9, 11)] {
            masks.insert(pe, StuckMask::stuck_bit(Register::Weight, 0, true));
        }
        let result = scan_array(&cfg, &det, &masks, &Fpt::for_config(&cfg), 2);
        assert_eq!(result.detected.len(), 3);
        assert_eq!(
            result.fpt_after.entries(),
            &[PECoord::new(5, 3), PECoord::new(9, 11)],
            "leftmost columns enter the table first"
        );
        assert_eq!(result.overflow, vec![PECoord::new(0, 20)]);
    }

    #[test]
    fn fpt_append_skips_known_entries() {
        let cfg = cfg32();
        let det = DetectionConfig::for_config(&cfg);
        let pe = PECoord::new(1, 1);
        let mut masks = BTreeMap::new();
        masks.insert(pe, StuckMask::stuck_bit(Register::Weight, 0, true));
        let mut fpt = Fpt::for_config(&cfg);
        fpt.entries.push(pe);
        let result = scan_array(&cfg, &det, &masks, &fpt, 3);
        assert_eq!(result.fpt_after.entries(), &[pe], "no duplicate entry");
    }

    #[test]
    fn scanning_costs_one_repair_group() {
        let cfg = cfg32();
        let map = FaultMap::empty(0);
        let full = effective_repair_capacity(&cfg, cfg.dppu_structure, &map);
        assert_eq!(full, 32);
        assert_eq!(repair_capacity_during_scan(&cfg, &map), 24);
    }

    #[test]
    fn coverage_boundary_is_exact() {
        let cfg = cfg32();
        // single-fold k=1 conv: cycles = c + rows + cols, so c=991 lands
        // exactly one cycle short of the 1056-cycle scan and c=992 covers it
        let short = LayerSpec::conv("short", 991, 4, 8, 32, 1, 1).unwrap();
        let exact = LayerSpec::conv("exact", 992, 4, 8, 32, 1, 1).unwrap();
        assert_eq!(layer_cycles(&short, 32, 32), scan_cycles(&cfg) - 1);
        assert_eq!(layer_cycles(&exact, 32, 32), scan_cycles(&cfg));
        let report = detection_coverage(&cfg, &[short, exact]);
        assert_eq!(report.covered, vec![false, true]);
        assert_eq!(report.layers_covered, 1);
        assert_eq!(report.fraction(), 0.5);
    }
}
