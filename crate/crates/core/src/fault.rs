//! BER-to-PER conversion and seeded fault map generation under the random
//! and clustered distribution models.
//!
//! Generators are pure functions of `(cfg, params, seed)`. All randomness
//! flows through a counter-based ChaCha stream so that maps are reproducible
//! bit-for-bit across platforms and trivially parallel across seeds.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ArrayConfig, PECoord};
use crate::repair::DppuLayout;

/// Sub-stream ids layered on top of a trial seed. Every random draw in the
/// crate derives from `(seed, stream)` so any value can be replayed in
/// isolation.
pub mod streams {
    /// Array-cell fault draws.
    pub const ARRAY: u64 = 0;
    /// DPPU multiplier fault draws.
    pub const DPPU_MULT: u64 = 1;
    /// DPPU adder fault draws.
    pub const DPPU_ADDER: u64 = 2;
    /// Stuck-bit mask draws for the functional emulator.
    pub const STUCK_MASK: u64 = 3;
    /// Operand draws for the detection scan; one stream per scanned PE,
    /// starting at this base.
    pub const SCAN_BASE: u64 = 16;
}

/// Seeded RNG on a dedicated sub-stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fault distribution model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultModel {
    Random,
    Clustered,
}

impl std::fmt::Display for FaultModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FaultModel::Random => write!(f, "random"),
            FaultModel::Clustered => write!(f, "clustered"),
        }
    }
}

impl std::str::FromStr for FaultModel {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, FaultError> {
        match s {
            "random" => Ok(FaultModel::Random),
            "clustered" => Ok(FaultModel::Clustered),
            other => Err(FaultError::Parse(format!(
                "unknown fault model `{other}` (expected random|clustered)"
            ))),
        }
    }
}

/// Parameters of the fault injection process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultModelParams {
    pub model: FaultModel,
    /// PE error rate in [0,1].
    pub per: f64,
    /// Standard deviation of the cluster offset, in PE units.
    pub cluster_sigma: f64,
    /// Expected faults per cluster.
    pub mean_cluster_size: f64,
    /// Whether DPPU multipliers/adders (including spares) are fault-injectable.
    pub inject_dppu: bool,
}

impl FaultModelParams {
    pub fn random(per: f64) -> Self {
        FaultModelParams {
            model: FaultModel::Random,
            per,
            cluster_sigma: 2.0,
            mean_cluster_size: 4.0,
            inject_dppu: true,
        }
    }

    pub fn clustered(per: f64) -> Self {
        FaultModelParams {
            model: FaultModel::Clustered,
            ..Self::random(per)
        }
    }

    pub fn without_dppu(mut self) -> Self {
        self.inject_dppu = false;
        self
    }

    pub fn validate(&self) -> Result<(), FaultError> {
        if !(0.0..=1.0).contains(&self.per) {
            return Err(FaultError::Domain(format!(
                "per must be in [0,1], got {}",
                self.per
            )));
        }
        if self.cluster_sigma <= 0.0 {
            return Err(FaultError::Domain("cluster_sigma must be > 0".into()));
        }
        if self.mean_cluster_size < 1.0 {
            return Err(FaultError::Domain("mean_cluster_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Converts a bit error rate to a PE error rate: `1 - (1 - ber)^pe_bits`.
///
/// Evaluated as `-expm1(pe_bits * ln_1p(-ber))` so small rates keep full
/// precision.
pub fn per_from_ber(ber: f64, pe_bits: u32) -> Result<f64, FaultError> {
    if !(0.0..=1.0).contains(&ber) {
        return Err(FaultError::Domain(format!(
            "ber must be in [0,1], got {ber}"
        )));
    }
    if pe_bits == 0 {
        return Err(FaultError::Domain("pe_bits must be >= 1".into()));
    }
    if ber == 0.0 {
        return Ok(0.0);
    }
    if ber == 1.0 {
        return Ok(1.0);
    }
    Ok(-f64::exp_m1(pe_bits as f64 * f64::ln_1p(-ber)))
}

/// Fault probability of a unit holding `unit_bits` of state, given the PE
/// error rate of a `pe_bits`-bit PE: `1 - (1 - per)^(unit_bits / pe_bits)`.
///
/// The common half-width case goes through `sqrt`, which is correctly
/// rounded and therefore identical on every platform.
pub fn scaled_unit_fault_prob(per: f64, unit_bits: u32, pe_bits: u32) -> f64 {
    debug_assert!((0.0..=1.0).contains(&per));
    if per == 0.0 || per == 1.0 || unit_bits == pe_bits {
        return per;
    }
    let survive = 1.0 - per;
    if pe_bits == 2 * unit_bits {
        1.0 - survive.sqrt()
    } else {
        let ratio = unit_bits as f64 / pe_bits as f64;
        -f64::exp_m1(ratio * f64::ln_1p(-per))
    }
}

/// The set of faulty units in one fault configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultMap {
    pub array_faults: BTreeSet<PECoord>,
    /// Faulty multiplier unit indices inside the DPPU, spares included.
    pub dppu_mult_faults: BTreeSet<u32>,
    /// Faulty adder unit indices inside the DPPU, spares included.
    pub dppu_adder_faults: BTreeSet<u32>,
    /// Seed that produced this map.
    pub seed: u64,
}

impl FaultMap {
    pub fn empty(seed: u64) -> Self {
        FaultMap {
            array_faults: BTreeSet::new(),
            dppu_mult_faults: BTreeSet::new(),
            dppu_adder_faults: BTreeSet::new(),
            seed,
        }
    }

    pub fn from_coords<I: IntoIterator<Item = (u32, u32)>>(coords: I, seed: u64) -> Self {
        let mut map = FaultMap::empty(seed);
        for (r, c) in coords {
            map.array_faults.insert(PECoord::new(r, c));
        }
        map
    }

    pub fn fault_count(&self) -> usize {
        self.array_faults.len()
    }

    pub fn validate(&self, cfg: &ArrayConfig) -> Result<(), FaultError> {
        for p in &self.array_faults {
            if !p.in_bounds(cfg) {
                return Err(FaultError::OutOfBounds(format!(
                    "{p} outside {}x{}",
                    cfg.rows, cfg.cols
                )));
            }
        }
        let layout = DppuLayout::new(cfg);
        if let Some(&i) = self.dppu_mult_faults.iter().next_back() {
            if i >= layout.total_mult_units() {
                return Err(FaultError::OutOfBounds(format!(
                    "multiplier unit {i} outside 0..{}",
                    layout.total_mult_units()
                )));
            }
        }
        if let Some(&i) = self.dppu_adder_faults.iter().next_back() {
            if i >= layout.total_adder_units() {
                return Err(FaultError::OutOfBounds(format!(
                    "adder unit {i} outside 0..{}",
                    layout.total_adder_units()
                )));
            }
        }
        Ok(())
    }

    /// Line-oriented text form: header `rows cols`, one `r c` pair per array
    /// fault, then `DPPU_MULT` / `DPPU_ADDER` index sections and a `SEED`
    /// line. Round-trips bit-exactly.
    pub fn to_text(&self, cfg: &ArrayConfig) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", cfg.rows, cfg.cols));
        for p in &self.array_faults {
            out.push_str(&format!("{} {}\n", p.row, p.col));
        }
        out.push_str("DPPU_MULT\n");
        for i in &self.dppu_mult_faults {
            out.push_str(&format!("{i}\n"));
        }
        out.push_str("DPPU_ADDER\n");
        for i in &self.dppu_adder_faults {
            out.push_str(&format!("{i}\n"));
        }
        out.push_str(&format!("SEED {}\n", self.seed));
        out
    }

    /// Parses the text form, returning the map and the `rows cols` header.
    pub fn from_text(text: &str) -> Result<(Self, u32, u32), FaultError> {
        #[derive(PartialEq)]
        enum Section {
            Array,
            Mult,
            Adder,
        }
        let mut lines = text
            .lines()
            .map(|l| crate::config::strip_comment(l).trim())
            .filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| {
            FaultError::Parse("empty fault map: missing `rows cols` header".into())
        })?;
        let (rows, cols) = parse_pair(header)
            .ok_or_else(|| FaultError::Parse(format!("bad header `{header}`")))?;
        let mut map = FaultMap::empty(0);
        let mut section = Section::Array;
        for line in lines {
            match line {
                "DPPU_MULT" => section = Section::Mult,
                "DPPU_ADDER" => section = Section::Adder,
                _ if line.starts_with("SEED") => {
                    let seed = line[4..].trim().parse::<u64>().map_err(|_| {
                        FaultError::Parse(format!("bad seed line `{line}`"))
                    })?;
                    map.seed = seed;
                }
                _ => match section {
                    Section::Array => {
                        let (r, c) = parse_pair(line)
                            .ok_or_else(|| FaultError::Parse(format!("bad fault `{line}`")))?;
                        if r >= rows || c >= cols {
                            return Err(FaultError::OutOfBounds(format!(
                                "({r},{c}) outside {rows}x{cols}"
                            )));
                        }
                        if !map.array_faults.insert(PECoord::new(r, c)) {
                            return Err(FaultError::Parse(format!(
                                "duplicate fault ({r},{c})"
                            )));
                        }
                    }
                    Section::Mult | Section::Adder => {
                        let i = line.parse::<u32>().map_err(|_| {
                            FaultError::Parse(format!("bad unit index `{line}`"))
                        })?;
                        let set = if section == Section::Mult {
                            &mut map.dppu_mult_faults
                        } else {
                            &mut map.dppu_adder_faults
                        };
                        set.insert(i);
                    }
                },
            }
        }
        Ok((map, rows, cols))
    }
}

fn parse_pair(line: &str) -> Option<(u32, u32)> {
    let mut it = line.split_whitespace();
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((a, b))
}

/// Generates a fault map under `params.model`.
pub fn generate(cfg: &ArrayConfig, params: &FaultModelParams, seed: u64) -> FaultMap {
    match params.model {
        FaultModel::Random => gen_random_faults(cfg, params, seed),
        FaultModel::Clustered => gen_clustered_faults(cfg, params, seed),
    }
}

/// Random model: every PE is independently faulty with probability `per`.
pub fn gen_random_faults(cfg: &ArrayConfig, params: &FaultModelParams, seed: u64) -> FaultMap {
    let mut map = FaultMap::empty(seed);
    let mut rng = stream_rng(seed, streams::ARRAY);
    for row in 0..cfg.rows {
        for col in 0..cfg.cols {
            if rng.random::<f64>() < params.per {
                map.array_faults.insert(PECoord::new(row, col));
            }
        }
    }
    if params.inject_dppu {
        inject_dppu_faults(cfg, params, seed, &mut map);
    }
    map
}

/// Clustered model: the marginal fault count matches the random model
/// (Binomial over all cells), but faults land around uniformly drawn cluster
/// centers with a discretized Gaussian offset of standard deviation
/// `cluster_sigma`.
///
/// The offset is a centered binomial sum of fair bits, which has exactly the
/// requested variance whenever `2 * sigma^2` is an integer (the default
/// sigma = 2 gives 16 bits per axis) and keeps the generator free of
/// platform-dependent floating point.
pub fn gen_clustered_faults(cfg: &ArrayConfig, params: &FaultModelParams, seed: u64) -> FaultMap {
    let mut map = FaultMap::empty(seed);
    let mut rng = stream_rng(seed, streams::ARRAY);
    let cells = cfg.pe_count();

    let count = (0..cells)
        .filter(|_| rng.random::<f64>() < params.per)
        .count();
    if count > 0 {
        let clusters = ((count as f64 / params.mean_cluster_size).round() as usize).max(1);
        let centers: Vec<PECoord> = (0..clusters)
            .map(|_| {
                PECoord::new(
                    rng.random_range(0..cfg.rows),
                    rng.random_range(0..cfg.cols),
                )
            })
            .collect();
        let offset_bits = offset_bits_for_sigma(params.cluster_sigma);
        for j in 0..count {
            let center = centers[j % clusters];
            let mut placed = false;
            for _attempt in 0..64 {
                let dr = centered_binomial(&mut rng, offset_bits);
                let dc = centered_binomial(&mut rng, offset_bits);
                let r = center.row as i64 + dr;
                let c = center.col as i64 + dc;
                if r < 0 || c < 0 || r >= cfg.rows as i64 || c >= cfg.cols as i64 {
                    continue;
                }
                if map.array_faults.insert(PECoord::new(r as u32, c as u32)) {
                    placed = true;
                    break;
                }
            }
            if !placed {
                // uniform placement over the remaining healthy cells
                let free: Vec<PECoord> = (0..cfg.rows)
                    .flat_map(|r| (0..cfg.cols).map(move |c| PECoord::new(r, c)))
                    .filter(|p| !map.array_faults.contains(p))
                    .collect();
                if free.is_empty() {
                    break;
                }
                let pick = free[rng.random_range(0..free.len())];
                map.array_faults.insert(pick);
            }
        }
    }
    if params.inject_dppu {
        inject_dppu_faults(cfg, params, seed, &mut map);
    }
    map
}

/// Number of fair bits per axis so the centered binomial variance matches
/// `sigma^2` (variance of a k-bit sum is k/4).
fn offset_bits_for_sigma(sigma: f64) -> u32 {
    let k = (4.0 * sigma * sigma).round() as u32;
    k.clamp(1, 256)
}

fn centered_binomial(rng: &mut ChaCha8Rng, bits: u32) -> i64 {
    let mut ones: u32 = 0;
    let mut remaining = bits;
    while remaining > 0 {
        let take = remaining.min(64);
        let word: u64 = rng.random();
        let mask = if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
        ones += (word & mask).count_ones();
        remaining -= take;
    }
    ones as i64 - (bits / 2) as i64
}

fn inject_dppu_faults(cfg: &ArrayConfig, params: &FaultModelParams, seed: u64, map: &mut FaultMap) {
    let layout = DppuLayout::new(cfg);
    let p_mult = scaled_unit_fault_prob(params.per, cfg.mult_unit_bits(), cfg.pe_bits());
    let p_adder = scaled_unit_fault_prob(params.per, cfg.adder_unit_bits(), cfg.pe_bits());
    let mut rng = stream_rng(seed, streams::DPPU_MULT);
    for i in 0..layout.total_mult_units() {
        if rng.random::<f64>() < p_mult {
            map.dppu_mult_faults.insert(i);
        }
    }
    let mut rng = stream_rng(seed, streams::DPPU_ADDER);
    for i in 0..layout.total_adder_units() {
        if rng.random::<f64>() < p_adder {
            map.dppu_adder_faults.insert(i);
        }
    }
}

#[derive(Debug, Error)]
pub enum FaultError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
}
