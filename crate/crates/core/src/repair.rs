//! Repair assignment for the four redundancy schemes, the column-granularity
//! degradation strategy, and Monte-Carlo reliability metrics.
//!
//! RR, CR and DR attach spare PEs to rows, columns and tile diagonals of the
//! 2-D array; the hybrid scheme repairs through the DPPU, which can take over
//! any faulty PE regardless of position up to its effective capacity.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::config::{sort_col_major, ArrayConfig, DppuStructure, PECoord};
use crate::fault::{self, FaultMap, FaultModelParams};
use crate::matching;

/// Redundancy scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemeKind {
    Rr,
    Cr,
    Dr,
    Hyca,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::Rr, SchemeKind::Cr, SchemeKind::Dr, SchemeKind::Hyca];
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchemeKind::Rr => write!(f, "rr"),
            SchemeKind::Cr => write!(f, "cr"),
            SchemeKind::Dr => write!(f, "dr"),
            SchemeKind::Hyca => write!(f, "hyca"),
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rr" => Ok(SchemeKind::Rr),
            "cr" => Ok(SchemeKind::Cr),
            "dr" => Ok(SchemeKind::Dr),
            "hyca" => Ok(SchemeKind::Hyca),
            other => Err(format!("unknown scheme `{other}` (expected rr|cr|dr|hyca)")),
        }
    }
}

/// A redundancy scheme together with its spare-PE budget on a given array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepairScheme {
    pub kind: SchemeKind,
    pub spares: u32,
}

impl RepairScheme {
    pub fn for_config(kind: SchemeKind, cfg: &ArrayConfig) -> Self {
        let spares = match kind {
            SchemeKind::Rr => cfg.rows,
            SchemeKind::Cr => cfg.cols,
            SchemeKind::Dr => dr_tiles(cfg).iter().map(|t| t.diag_size).sum(),
            SchemeKind::Hyca => cfg.dppu_size,
        };
        RepairScheme { kind, spares }
    }
}

/// Identifier of the spare resource assigned to a repaired fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpareId {
    Row(u32),
    Col(u32),
    Diag { tile: u32, index: u32 },
    DppuSlot(u32),
}

impl std::fmt::Display for SpareId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpareId::Row(r) => write!(f, "row[{r}]"),
            SpareId::Col(c) => write!(f, "col[{c}]"),
            SpareId::Diag { tile, index } => write!(f, "diag[t{tile}/{index}]"),
            SpareId::DppuSlot(i) => write!(f, "dppu[{i}]"),
        }
    }
}

/// Outcome of a repair assignment on one fault configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairPlan {
    pub scheme: SchemeKind,
    pub repaired: BTreeMap<PECoord, SpareId>,
    pub unrepaired: BTreeSet<PECoord>,
    /// Usable leftmost columns after column-granularity degradation.
    pub surviving_cols: u32,
    pub fully_functional: bool,
}

impl RepairPlan {
    fn finish(
        scheme: SchemeKind,
        cfg: &ArrayConfig,
        repaired: BTreeMap<PECoord, SpareId>,
        unrepaired: BTreeSet<PECoord>,
    ) -> Self {
        let surviving_cols = surviving_prefix_cols(cfg.cols, &unrepaired);
        let fully_functional = unrepaired.is_empty();
        RepairPlan {
            scheme,
            repaired,
            unrepaired,
            surviving_cols,
            fully_functional,
        }
    }

    /// Surviving fraction of the original array.
    pub fn normalized_power(&self, cfg: &ArrayConfig) -> f64 {
        self.surviving_cols as f64 / cfg.cols as f64
    }
}

/// The surviving array is the maximal prefix of columns free of unrepaired
/// faults; everything at or right of the first bad column is disconnected
/// from the left-edge buffers and discarded.
fn surviving_prefix_cols(cols: u32, unrepaired: &BTreeSet<PECoord>) -> u32 {
    unrepaired.iter().map(|p| p.col).min().unwrap_or(cols)
}

/// Row redundancy: one spare PE per row.
///
/// The spare column sits at the right edge of the array, and the bypass
/// chain of a row can only skip the fault closest to it, so when a row holds
/// several faults the rightmost one is repaired and the rest stay faulty.
pub fn repair_rr(cfg: &ArrayConfig, faults: &BTreeSet<PECoord>) -> RepairPlan {
    let mut repaired = BTreeMap::new();
    let mut unrepaired = BTreeSet::new();
    let mut rightmost: BTreeMap<u32, PECoord> = BTreeMap::new();
    for p in faults {
        let best = rightmost.entry(p.row).or_insert(*p);
        if p.col > best.col {
            *best = *p;
        }
    }
    for p in faults {
        if rightmost.get(&p.row) == Some(p) {
            repaired.insert(*p, SpareId::Row(p.row));
        } else {
            unrepaired.insert(*p);
        }
    }
    RepairPlan::finish(SchemeKind::Rr, cfg, repaired, unrepaired)
}

/// Column redundancy: one spare PE per column, repairing at most one fault
/// in that column (topmost-first).
pub fn repair_cr(cfg: &ArrayConfig, faults: &BTreeSet<PECoord>) -> RepairPlan {
    let mut repaired = BTreeMap::new();
    let mut unrepaired = BTreeSet::new();
    let mut seen_cols = BTreeSet::new();
    // BTreeSet iterates row-major, so the first fault of a column is topmost
    for p in faults {
        if seen_cols.insert(p.col) {
            repaired.insert(*p, SpareId::Col(p.col));
        } else {
            unrepaired.insert(*p);
        }
    }
    RepairPlan::finish(SchemeKind::Cr, cfg, repaired, unrepaired)
}

#[derive(Debug, Clone, Copy)]
struct DrTile {
    first_col: u32,
    width: u32,
    diag_size: u32,
}

/// Non-square arrays are split into square tiles along the column axis; the
/// remainder tile keeps a truncated diagonal.
fn dr_tiles(cfg: &ArrayConfig) -> Vec<DrTile> {
    let mut tiles = Vec::new();
    let mut first_col = 0;
    while first_col < cfg.cols {
        let width = cfg.rows.min(cfg.cols - first_col);
        tiles.push(DrTile {
            first_col,
            width,
            diag_size: cfg.rows.min(width),
        });
        first_col += cfg.rows;
    }
    tiles
}

/// Diagonal redundancy: spare `i` of a square tile serves the faults whose
/// row or tile-local column equals `i`. Assignment is a maximum bipartite
/// matching per tile; a greedy pass can strand repairable faults.
pub fn repair_dr(cfg: &ArrayConfig, faults: &BTreeSet<PECoord>) -> RepairPlan {
    let mut repaired = BTreeMap::new();
    let mut unrepaired = BTreeSet::new();
    let tiles = dr_tiles(cfg);
    for (tile_idx, tile) in tiles.iter().enumerate() {
        let tile_faults: Vec<PECoord> = sort_col_major(faults)
            .into_iter()
            .filter(|p| p.col >= tile.first_col && p.col < tile.first_col + tile.width)
            .collect();
        if tile_faults.is_empty() {
            continue;
        }
        let adj: Vec<Vec<usize>> = tile_faults
            .iter()
            .map(|p| {
                let local_col = p.col - tile.first_col;
                let mut spares = Vec::new();
                if p.row < tile.diag_size {
                    spares.push(p.row as usize);
                }
                if local_col != p.row && local_col < tile.diag_size {
                    spares.push(local_col as usize);
                }
                spares
            })
            .collect();
        let matches = matching::max_matching(&adj, tile.diag_size as usize);
        for (fault, spare) in tile_faults.iter().zip(matches) {
            match spare {
                Some(i) => {
                    repaired.insert(
                        *fault,
                        SpareId::Diag {
                            tile: tile_idx as u32,
                            index: i as u32,
                        },
                    );
                }
                None => {
                    unrepaired.insert(*fault);
                }
            }
        }
    }
    RepairPlan::finish(SchemeKind::Dr, cfg, repaired, unrepaired)
}

/// Hybrid repair: the DPPU recomputes any faulty PE, so repair priority goes
/// to the leftmost faults, keeping the surviving array connected to the
/// left-edge buffers.
pub fn repair_hyca(cfg: &ArrayConfig, faults: &BTreeSet<PECoord>, dppu_capacity: u32) -> RepairPlan {
    let ordered = sort_col_major(faults);
    let take = (dppu_capacity as usize).min(ordered.len());
    let mut repaired = BTreeMap::new();
    let mut unrepaired = BTreeSet::new();
    for (slot, p) in ordered.iter().enumerate() {
        if slot < take {
            repaired.insert(*p, SpareId::DppuSlot(slot as u32));
        } else {
            unrepaired.insert(*p);
        }
    }
    RepairPlan::finish(SchemeKind::Hyca, cfg, repaired, unrepaired)
}

/// Repairs `map` under `kind`. For the hybrid scheme the DPPU capacity is
/// derated by its own internal faults and structural utilization.
pub fn repair(cfg: &ArrayConfig, kind: SchemeKind, map: &FaultMap) -> RepairPlan {
    match kind {
        SchemeKind::Rr => repair_rr(cfg, &map.array_faults),
        SchemeKind::Cr => repair_cr(cfg, &map.array_faults),
        SchemeKind::Dr => repair_dr(cfg, &map.array_faults),
        SchemeKind::Hyca => {
            let capacity = crate::dataflow::effective_repair_capacity(cfg, cfg.dppu_structure, map);
            repair_hyca(cfg, &map.array_faults, capacity)
        }
    }
}

/// Ring of units sharing one spare; unit ids are global DPPU indices.
#[derive(Debug, Clone, Copy)]
pub struct SpareRing {
    pub first_unit: u32,
    /// Regular units plus the spare.
    pub len: u32,
}

impl SpareRing {
    fn survives(&self, faults: &BTreeSet<u32>) -> bool {
        let in_ring = faults
            .range(self.first_unit..self.first_unit + self.len)
            .count();
        in_ring <= 1
    }
}

/// One compute group of the DPPU: its multipliers and adder tree, each
/// partitioned into spare rings.
#[derive(Debug, Clone)]
pub struct DppuGroup {
    pub size: u32,
    pub mult_rings: Vec<SpareRing>,
    pub adder_rings: Vec<SpareRing>,
}

/// Unit-index layout of the DPPU under its configured structure.
///
/// A unified DPPU is a single group of `dppu_size` multipliers feeding one
/// adder tree; a grouped DPPU has `ceil(dppu_size / dppu_group_size)` groups.
/// Each group's multipliers are partitioned into rings of `mult_ring_arity`
/// units plus one spare, its `size - 1` tree adders into rings of
/// `adder_ring_arity` plus one spare; the last ring of a partition may be
/// smaller but still carries a spare.
#[derive(Debug, Clone)]
pub struct DppuLayout {
    pub groups: Vec<DppuGroup>,
    total_mult_units: u32,
    total_adder_units: u32,
}

impl DppuLayout {
    pub fn new(cfg: &ArrayConfig) -> Self {
        let group_sizes: Vec<u32> = match cfg.dppu_structure {
            DppuStructure::Unified => vec![cfg.dppu_size],
            DppuStructure::Grouped => {
                let mut sizes = Vec::new();
                let mut left = cfg.dppu_size;
                while left > 0 {
                    let s = cfg.dppu_group_size.min(left);
                    sizes.push(s);
                    left -= s;
                }
                sizes
            }
        };
        let mut groups = Vec::new();
        let mut next_mult = 0;
        let mut next_adder = 0;
        for size in group_sizes {
            let mult_rings = partition_rings(size, cfg.mult_ring_arity, &mut next_mult);
            let adder_rings = partition_rings(size.saturating_sub(1), cfg.adder_ring_arity, &mut next_adder);
            groups.push(DppuGroup {
                size,
                mult_rings,
                adder_rings,
            });
        }
        DppuLayout {
            groups,
            total_mult_units: next_mult,
            total_adder_units: next_adder,
        }
    }

    /// Total multiplier units, spares included.
    pub fn total_mult_units(&self) -> u32 {
        self.total_mult_units
    }

    /// Total adder units, spares included.
    pub fn total_adder_units(&self) -> u32 {
        self.total_adder_units
    }

    /// Capacity left after internal faults: a ring survives iff it holds at
    /// most one faulty unit, a group survives iff all its rings survive, and
    /// each surviving group contributes its size.
    pub fn surviving_capacity(&self, map: &FaultMap) -> u32 {
        self.groups
            .iter()
            .filter(|g| {
                g.mult_rings.iter().all(|r| r.survives(&map.dppu_mult_faults))
                    && g.adder_rings.iter().all(|r| r.survives(&map.dppu_adder_faults))
            })
            .map(|g| g.size)
            .sum()
    }
}

fn partition_rings(units: u32, arity: u32, next_id: &mut u32) -> Vec<SpareRing> {
    let mut rings = Vec::new();
    let mut left = units;
    while left > 0 {
        let regular = arity.min(left);
        let len = regular + 1; // spare travels with the ring
        rings.push(SpareRing {
            first_unit: *next_id,
            len,
        });
        *next_id += len;
        left -= regular;
    }
    rings
}

/// Number of faulty PEs the DPPU can still take over, before structural
/// utilization derating.
pub fn dppu_effective_capacity(cfg: &ArrayConfig, map: &FaultMap) -> u32 {
    DppuLayout::new(cfg).surviving_capacity(map)
}

/// Surviving array dimensions after discarding columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArrayDims {
    pub rows: u32,
    pub cols: u32,
}

impl std::fmt::Display for ArrayDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Applies column-granularity degradation to a repair plan.
pub fn degrade(cfg: &ArrayConfig, plan: &RepairPlan) -> ArrayDims {
    ArrayDims {
        rows: cfg.rows,
        cols: plan.surviving_cols,
    }
}

/// Aggregate reliability over a set of Monte-Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityMetrics {
    /// Fraction of trials repaired with zero performance loss.
    pub fully_functional_probability: f64,
    /// Mean surviving fraction of the array.
    pub normalized_computing_power: f64,
    pub trials: u64,
    pub base_seed: u64,
}

impl ReliabilityMetrics {
    /// One CSV row: `scheme,model,per,trials,fully_functional_prob,norm_power,base_seed`.
    pub fn csv_row(&self, scheme: SchemeKind, params: &FaultModelParams) -> String {
        format!(
            "{},{},{:.4},{},{:.6},{:.6},{}",
            scheme,
            params.model,
            params.per,
            self.trials,
            self.fully_functional_probability,
            self.normalized_computing_power,
            self.base_seed
        )
    }
}

/// Runs `trials` independent fault generations and repairs. Trial `t` uses
/// seed `base_seed + t`; aggregation is order-independent, so trials run on
/// the rayon pool.
pub fn evaluate_reliability(
    cfg: &ArrayConfig,
    kind: SchemeKind,
    params: &FaultModelParams,
    trials: u64,
    base_seed: u64,
) -> ReliabilityMetrics {
    let outcomes: Vec<(bool, u32)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let map = fault::generate(cfg, params, base_seed.wrapping_add(t));
            let plan = repair(cfg, kind, &map);
            (plan.fully_functional, plan.surviving_cols)
        })
        .collect();
    let functional = outcomes.iter().filter(|(ff, _)| *ff).count();
    let col_sum: u64 = outcomes.iter().map(|(_, c)| *c as u64).sum();
    ReliabilityMetrics {
        fully_functional_probability: functional as f64 / trials as f64,
        normalized_computing_power: col_sum as f64 / (trials as f64 * cfg.cols as f64),
        trials,
        base_seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(coords: &[(u32, u32)]) -> BTreeSet<PECoord> {
        coords.iter().map(|&(r, c)| PECoord::new(r, c)).collect()
    }

    fn cfg32() -> ArrayConfig {
        ArrayConfig::default()
    }

    #[test]
    fn rr_single_fault_is_functional() {
        let plan = repair_rr(&cfg32(), &set(&[(0, 0)]));
        assert!(plan.fully_functional);
        assert_eq!(plan.surviving_cols, 32);
    }

    #[test]
    fn rr_two_faults_one_row() {
        // the right-edge spare reaches (0,5); (0,0) stays faulty
        let plan = repair_rr(&cfg32(), &set(&[(0, 0), (0, 5)]));
        assert!(!plan.fully_functional);
        assert_eq!(plan.unrepaired, set(&[(0, 0)]));
        assert_eq!(plan.surviving_cols, 0);
    }

    #[test]
    fn rr_distinct_rows_all_repaired() {
        let plan = repair_rr(&cfg32(), &set(&[(0, 0), (1, 0), (2, 0)]));
        assert!(plan.fully_functional);
        assert_eq!(plan.repaired.len(), 3);
    }

    #[test]
    fn cr_column_spare_exhausts() {
        let plan = repair_cr(&cfg32(), &set(&[(0, 0), (5, 0)]));
        assert!(!plan.fully_functional);
        assert_eq!(plan.unrepaired, set(&[(5, 0)]), "topmost fault repaired");

        let plan = repair_cr(&cfg32(), &set(&[(0, 0), (0, 1), (0, 2)]));
        assert!(plan.fully_functional);

        let plan = repair_cr(&cfg32(), &BTreeSet::new());
        assert!(plan.fully_functional);
    }

    #[test]
    fn dr_cross_assignment() {
        // (1,2) and (2,1) compete for spares 1 and 2; a matching fixes both
        let plan = repair_dr(&cfg32(), &set(&[(1, 2), (2, 1)]));
        assert!(plan.fully_functional);
        assert_eq!(plan.repaired.len(), 2);
    }

    #[test]
    fn dr_on_diagonal_fault() {
        let plan = repair_dr(&cfg32(), &set(&[(3, 3)]));
        assert!(plan.fully_functional);
        assert_eq!(
            plan.repaired.values().next(),
            Some(&SpareId::Diag { tile: 0, index: 3 })
        );
    }

    #[test]
    fn dr_corner_block_saturates() {
        // 4 faults in the 2x2 corner touch only spares {0,1}: max matching 2
        let plan = repair_dr(&cfg32(), &set(&[(0, 0), (0, 1), (1, 0), (1, 1)]));
        assert_eq!(plan.repaired.len(), 2);
        assert_eq!(plan.unrepaired.len(), 2);
    }

    #[test]
    fn dr_tiles_non_square() {
        let cfg = ArrayConfig::with_dims(4, 10);
        let tiles = dr_tiles(&cfg);
        assert_eq!(tiles.len(), 3);
        assert_eq!(tiles[2].width, 2);
        assert_eq!(tiles[2].diag_size, 2, "remainder tile diagonal truncates");

        // fault in the remainder tile at a row beyond its diagonal can only
        // use its column spare
        let plan = repair_dr(&cfg, &set(&[(3, 8), (3, 9)]));
        assert_eq!(plan.repaired.len(), 2);
        let plan = repair_dr(&cfg, &set(&[(2, 8), (3, 8)]));
        assert_eq!(plan.repaired.len(), 1, "both need local column spare 0");
    }

    #[test]
    fn hyca_repairs_any_32_faults() {
        let cfg = cfg32();
        let mut faults = BTreeSet::new();
        // 32 faults crowded into two columns: hopeless for RR/CR/DR
        for r in 0..16 {
            faults.insert(PECoord::new(r, 3));
            faults.insert(PECoord::new(r, 4));
        }
        let plan = repair_hyca(&cfg, &faults, 32);
        assert!(plan.fully_functional);
        assert_eq!(plan.surviving_cols, 32);
    }

    #[test]
    fn hyca_left_priority_preserves_prefix() {
        let cfg = cfg32();
        let mut faults: BTreeSet<PECoord> = (0..32).map(|r| PECoord::new(r, 0)).collect();
        faults.insert(PECoord::new(0, 31));
        let plan = repair_hyca(&cfg, &faults, 32);
        assert!(!plan.fully_functional);
        assert_eq!(plan.unrepaired, set(&[(0, 31)]));
        assert_eq!(plan.surviving_cols, 31);
        assert_eq!(plan.normalized_power(&cfg), 31.0 / 32.0);
        assert_eq!(degrade(&cfg, &plan), ArrayDims { rows: 32, cols: 31 });
    }

    #[test]
    fn hyca_zero_capacity() {
        let plan = repair_hyca(&cfg32(), &set(&[(5, 7), (1, 9)]), 0);
        assert_eq!(plan.surviving_cols, 7, "leftmost faulty column bounds the prefix");
        assert!(!plan.fully_functional);
    }

    #[test]
    fn degrade_full_when_everything_repaired() {
        let cfg = cfg32();
        let plan = repair_rr(&cfg, &set(&[(4, 9)]));
        assert_eq!(degrade(&cfg, &plan), ArrayDims { rows: 32, cols: 32 });
    }

    #[test]
    fn rr_prefix_rule() {
        // unrepaired fault at (0,5) caps the surviving prefix at 5 columns
        let plan = repair_rr(&cfg32(), &set(&[(0, 5), (0, 20)]));
        assert_eq!(plan.unrepaired, set(&[(0, 5)]));
        assert_eq!(plan.surviving_cols, 5);
    }

    #[test]
    fn dppu_layout_default() {
        let cfg = cfg32();
        let layout = DppuLayout::new(&cfg);
        assert_eq!(layout.groups.len(), 4);
        // 32 multipliers in rings of 4 -> 8 spares
        assert_eq!(layout.total_mult_units(), 40);
        // 7 adders per group in rings of 3 -> 3 spares per group
        assert_eq!(layout.total_adder_units(), 4 * 10);
        assert_eq!(layout.surviving_capacity(&FaultMap::empty(0)), 32);
    }

    #[test]
    fn dppu_ring_survival() {
        let cfg = cfg32();
        let layout = DppuLayout::new(&cfg);

        let mut map = FaultMap::empty(0);
        map.dppu_mult_faults.insert(0);
        assert_eq!(layout.surviving_capacity(&map), 32, "spare absorbs one fault");

        map.dppu_mult_faults.insert(1);
        assert_eq!(layout.surviving_capacity(&map), 24, "two faults kill the ring's group");

        // a second group loses its adder ring
        let adder_ring0_of_group1 = layout.groups[1].adder_rings[0];
        map.dppu_adder_faults.insert(adder_ring0_of_group1.first_unit);
        map.dppu_adder_faults.insert(adder_ring0_of_group1.first_unit + 1);
        assert_eq!(layout.surviving_capacity(&map), 16);
    }

    #[test]
    fn unified_layout_is_single_group() {
        let mut cfg = cfg32();
        cfg.dppu_structure = DppuStructure::Unified;
        let layout = DppuLayout::new(&cfg);
        assert_eq!(layout.groups.len(), 1);
        let mut map = FaultMap::empty(0);
        map.dppu_mult_faults.insert(4);
        map.dppu_mult_faults.insert(5);
        // rings of 4+1: units 4 is ring 0's spare, 5 opens ring 1 — distinct
        assert_eq!(layout.surviving_capacity(&map), 32);
        map.dppu_mult_faults.insert(6);
        assert_eq!(layout.surviving_capacity(&map), 0, "one dead ring kills the unified DPPU");
    }

    #[test]
    fn evaluate_reliability_per_zero() {
        let cfg = cfg32();
        for kind in SchemeKind::ALL {
            let m = evaluate_reliability(&cfg, kind, &FaultModelParams::random(0.0), 100, 5);
            assert_eq!(m.fully_functional_probability, 1.0);
            assert_eq!(m.normalized_computing_power, 1.0);
        }
    }

    #[test]
    fn scheme_spare_budgets() {
        let cfg = cfg32();
        assert_eq!(RepairScheme::for_config(SchemeKind::Rr, &cfg).spares, 32);
        assert_eq!(RepairScheme::for_config(SchemeKind::Cr, &cfg).spares, 32);
        assert_eq!(RepairScheme::for_config(SchemeKind::Dr, &cfg).spares, 32);
        assert_eq!(RepairScheme::for_config(SchemeKind::Hyca, &cfg).spares, 32);
    }

    #[test]
    fn plans_partition_the_fault_set() {
        use rand::{Rng, SeedableRng};
        let cfg = cfg32();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(0..80);
            let faults: BTreeSet<PECoord> = (0..n)
                .map(|_| PECoord::new(rng.random_range(0..32), rng.random_range(0..32)))
                .collect();
            let map = FaultMap {
                array_faults: faults.clone(),
                ..FaultMap::empty(0)
            };
            for kind in SchemeKind::ALL {
                let plan = repair(&cfg, kind, &map);
                let mut union: BTreeSet<PECoord> = plan.repaired.keys().copied().collect();
                assert!(union.is_disjoint(&plan.unrepaired), "{kind}");
                union.extend(&plan.unrepaired);
                assert_eq!(union, faults, "{kind}");
                assert_eq!(plan.fully_functional, plan.unrepaired.is_empty());
                assert!(plan.surviving_cols <= cfg.cols);
            }
        }
    }

    #[test]
    fn adding_a_fault_never_helps() {
        use rand::{Rng, SeedableRng};
        let cfg = cfg32();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let n = rng.random_range(0..60);
            let faults: BTreeSet<PECoord> = (0..n)
                .map(|_| PECoord::new(rng.random_range(0..32), rng.random_range(0..32)))
                .collect();
            let extra = PECoord::new(rng.random_range(0..32), rng.random_range(0..32));
            if faults.contains(&extra) {
                continue;
            }
            let mut more = faults.clone();
            more.insert(extra);
            let map = |s: &BTreeSet<PECoord>| FaultMap {
                array_faults: s.clone(),
                ..FaultMap::empty(0)
            };
            for kind in SchemeKind::ALL {
                let before = repair(&cfg, kind, &map(&faults)).surviving_cols;
                let after = repair(&cfg, kind, &map(&more)).surviving_cols;
                assert!(after <= before, "{kind}: {before} -> {after} adding {extra}");
            }
        }
    }
}
