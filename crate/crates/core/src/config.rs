//! Architectural configuration and the coordinate/geometry types shared by
//! every other module.
//!
//! [`ArrayConfig`] is the single source of architectural truth: the 2-D
//! computing array dimensions, the per-PE register widths, the DPPU sizing
//! and internal redundancy arities, and the recompute delay. All derived
//! buffer and table sizes come out of [`derive_sizing`].

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// How the DPPU multipliers are organized.
///
/// A unified DPPU is a single wide dot-product unit; a grouped DPPU is split
/// into independent compute groups of `dppu_group_size` multipliers, each
/// with its own adder tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DppuStructure {
    Unified,
    Grouped,
}

impl fmt::Display for DppuStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DppuStructure::Unified => write!(f, "unified"),
            DppuStructure::Grouped => write!(f, "grouped"),
        }
    }
}

impl FromStr for DppuStructure {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "unified" => Ok(DppuStructure::Unified),
            "grouped" => Ok(DppuStructure::Grouped),
            other => Err(ConfigError::Parse(format!(
                "unknown dppu_structure `{other}` (expected unified|grouped)"
            ))),
        }
    }
}

/// Configuration of the 2-D computing array and its DPPU redundancy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayConfig {
    /// Number of PE rows.
    pub rows: u32,
    /// Number of PE columns.
    pub cols: u32,
    /// Input feature register width per PE, in bits.
    pub input_reg_bits: u32,
    /// Weight register width per PE, in bits.
    pub weight_reg_bits: u32,
    /// Intermediate (product) register width per PE, in bits.
    pub intermediate_bits: u32,
    /// Accumulator register width per PE, in bits.
    pub accumulator_bits: u32,
    /// Number of multipliers in the DPPU.
    pub dppu_size: u32,
    /// Multipliers per DPPU compute group.
    pub dppu_group_size: u32,
    /// Unified or grouped DPPU organization.
    pub dppu_structure: DppuStructure,
    /// Regular multipliers per internal spare ring (each ring gets one spare).
    pub mult_ring_arity: u32,
    /// Regular adders per internal spare ring (each ring gets one spare).
    pub adder_ring_arity: u32,
    /// Cycles the DPPU lags behind the 2-D array; must be >= `cols`.
    pub delay_d: u32,
    /// Accumulator width in bytes, used for CLB sizing.
    pub accum_width_w: u32,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self::with_dims(32, 32)
    }
}

impl ArrayConfig {
    /// Configuration for a `rows x cols` array with default register widths,
    /// a DPPU sized to the column count and `delay_d = cols`.
    pub fn with_dims(rows: u32, cols: u32) -> Self {
        ArrayConfig {
            rows,
            cols,
            input_reg_bits: 8,
            weight_reg_bits: 8,
            intermediate_bits: 16,
            accumulator_bits: 32,
            dppu_size: cols,
            dppu_group_size: 8,
            dppu_structure: DppuStructure::Grouped,
            mult_ring_arity: 4,
            adder_ring_arity: 3,
            delay_d: cols,
            accum_width_w: 4,
        }
    }

    /// Total register bits per PE.
    pub fn pe_bits(&self) -> u32 {
        self.input_reg_bits + self.weight_reg_bits + self.intermediate_bits + self.accumulator_bits
    }

    /// Bits of state in one DPPU multiplier unit (input, weight and product
    /// registers; the accumulator lives in the adder tree).
    pub fn mult_unit_bits(&self) -> u32 {
        self.input_reg_bits + self.weight_reg_bits + self.intermediate_bits
    }

    /// Bits of state in one DPPU adder unit.
    pub fn adder_unit_bits(&self) -> u32 {
        self.accumulator_bits
    }

    /// Number of PEs in the array.
    pub fn pe_count(&self) -> u64 {
        self.rows as u64 * self.cols as u64
    }

    /// Every violated invariant, not only the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.rows < 1 {
            v.push("rows must be >= 1".to_string());
        }
        if self.cols < 1 {
            v.push("cols must be >= 1".to_string());
        }
        if self.dppu_size < 1 {
            v.push("dppu_size must be >= 1".to_string());
        }
        if self.dppu_group_size < 1 {
            v.push("group size must be >= 1".to_string());
        }
        if self.delay_d < self.cols {
            v.push(format!(
                "delay_d < cols ({} < {}): the DPPU delay must cover the column count",
                self.delay_d, self.cols
            ));
        }
        if self.mult_ring_arity < 1 {
            v.push("mult_ring_arity must be >= 1".to_string());
        }
        if self.adder_ring_arity < 1 {
            v.push("adder_ring_arity must be >= 1".to_string());
        }
        if self.accum_width_w < 1 {
            v.push("accum_width_w must be >= 1".to_string());
        }
        if self.input_reg_bits < 1
            || self.weight_reg_bits < 1
            || self.intermediate_bits < 1
            || self.accumulator_bits < 1
        {
            v.push("register widths must be >= 1 bit".to_string());
        }
        v
    }

    /// Validates all invariants, returning the config or the full error list.
    pub fn validate(&self) -> Result<&Self, ConfigError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    /// Loads a configuration from a flat `key=value` text file.
    ///
    /// One key per line, `#` starts a comment, blank lines are ignored.
    /// Unknown keys are errors. Missing keys fall back to defaults;
    /// `delay_d` defaults to the (possibly overridden) column count.
    pub fn from_kv_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_kv_str(&text)
    }

    /// Parses the `key=value` format from a string. See [`Self::from_kv_file`].
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ArrayConfig::default();
        let mut delay_set = false;
        let mut dppu_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::Parse(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_u32 = |v: &str| -> Result<u32, ConfigError> {
                v.parse::<u32>().map_err(|_| {
                    ConfigError::Parse(format!("line {}: invalid number `{v}`", lineno + 1))
                })
            };
            match key {
                "rows" => cfg.rows = parse_u32(value)?,
                "cols" => cfg.cols = parse_u32(value)?,
                "input_reg_bits" => cfg.input_reg_bits = parse_u32(value)?,
                "weight_reg_bits" => cfg.weight_reg_bits = parse_u32(value)?,
                "intermediate_bits" => cfg.intermediate_bits = parse_u32(value)?,
                "accumulator_bits" => cfg.accumulator_bits = parse_u32(value)?,
                "dppu_size" => {
                    cfg.dppu_size = parse_u32(value)?;
                    dppu_set = true;
                }
                "dppu_group_size" => cfg.dppu_group_size = parse_u32(value)?,
                "dppu_structure" => cfg.dppu_structure = value.parse()?,
                "mult_ring_arity" => cfg.mult_ring_arity = parse_u32(value)?,
                "adder_ring_arity" => cfg.adder_ring_arity = parse_u32(value)?,
                "delay_d" => {
                    cfg.delay_d = parse_u32(value)?;
                    delay_set = true;
                }
                "accum_width_w" => cfg.accum_width_w = parse_u32(value)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        if !delay_set {
            cfg.delay_d = cfg.cols;
        }
        if !dppu_set {
            cfg.dppu_size = cfg.cols;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

/// Coordinate of a PE in the 2-D computing array, 0-based.
///
/// Ordering is row-major; repair code that needs column-major priority sorts
/// explicitly by `(col, row)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PECoord {
    pub row: u32,
    pub col: u32,
}

impl PECoord {
    pub fn new(row: u32, col: u32) -> Self {
        PECoord { row, col }
    }

    pub fn in_bounds(&self, cfg: &ArrayConfig) -> bool {
        self.row < cfg.rows && self.col < cfg.cols
    }
}

impl fmt::Display for PECoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Sorts coordinates by `(col, row)`, the left-priority repair order.
pub fn sort_col_major(coords: &BTreeSet<PECoord>) -> Vec<PECoord> {
    let mut v: Vec<PECoord> = coords.iter().copied().collect();
    v.sort_by_key(|p| (p.col, p.row));
    v
}

/// Buffer and table sizes derived from an [`ArrayConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedSizing {
    /// Weight/input register file depth: `2 * delay_d * rows` entries.
    pub wrf_irf_depth: u64,
    /// Fault PE table entries, one per DPPU capacity unit.
    pub fpt_entries: u32,
    /// Bits per FPT entry: row index width + column index width.
    pub fpt_bits_per_entry: u32,
    /// Checking list buffer size: `4 * accum_width_w * cols` bytes.
    pub clb_bytes: u64,
}

/// Width of an index addressing `n` items, clamped to at least 1 bit.
pub fn index_bits(n: u32) -> u32 {
    if n <= 1 {
        return 1;
    }
    32 - (n - 1).leading_zeros()
}

/// Computes all derived buffer/table sizes for a valid configuration.
pub fn derive_sizing(cfg: &ArrayConfig) -> Result<DerivedSizing, ConfigError> {
    cfg.validate()?;
    Ok(DerivedSizing {
        wrf_irf_depth: 2 * cfg.delay_d as u64 * cfg.rows as u64,
        fpt_entries: cfg.dppu_size,
        fpt_bits_per_entry: index_bits(cfg.rows) + index_bits(cfg.cols),
        clb_bytes: 4 * cfg.accum_width_w as u64 * cfg.cols as u64,
    })
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Parse(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("io error: {0}")]
    Io(String),
}
