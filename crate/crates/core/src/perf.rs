//! Analytical per-layer cycle model for the output-stationary array,
//! benchmark network ingestion, and performance normalization.
//!
//! Columns own output channels and rows own output pixels, so a conv layer
//! folds `ceil(oh*ow / rows) * ceil(m / cols)` times at `c*k*k` cycles per
//! fold, plus a one-time fill/drain of `rows + cols` cycles. Full-connection
//! layers stream through a single column: `ceil(m / rows) * c + rows + 1`
//! cycles, independent of the column count.

use std::path::Path;

use thiserror::Error;

use crate::repair::ArrayDims;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    Fc,
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerKind::Conv => write!(f, "conv"),
            LayerKind::Fc => write!(f, "fc"),
        }
    }
}

/// One neural-network layer, conv or FC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Input channels.
    pub in_ch: u32,
    /// Input height/width (already including any padding).
    pub in_h: u32,
    pub in_w: u32,
    /// Output channels.
    pub out_ch: u32,
    pub kernel: u32,
    pub stride: u32,
    /// Derived output size.
    pub out_h: u32,
    pub out_w: u32,
}

impl LayerSpec {
    pub fn conv(
        name: &str,
        in_ch: u32,
        in_h: u32,
        in_w: u32,
        out_ch: u32,
        kernel: u32,
        stride: u32,
    ) -> Result<Self, PerfError> {
        if in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 {
            return Err(PerfError::BadLayer(format!(
                "{name}: channel, kernel and stride counts must be >= 1"
            )));
        }
        if in_h < kernel || in_w < kernel {
            return Err(PerfError::BadLayer(format!(
                "{name}: kernel {kernel} does not fit input {in_h}x{in_w}"
            )));
        }
        let out_h = (in_h - kernel) / stride + 1;
        let out_w = (in_w - kernel) / stride + 1;
        Ok(LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Conv,
            in_ch,
            in_h,
            in_w,
            out_ch,
            kernel,
            stride,
            out_h,
            out_w,
        })
    }

    /// FC layer with `in_features -> out_features`, represented as a 1x1
    /// kernel over a 1x1 spatial extent.
    pub fn fc(name: &str, in_features: u32, out_features: u32) -> Result<Self, PerfError> {
        if in_features < 1 || out_features < 1 {
            return Err(PerfError::BadLayer(format!(
                "{name}: feature counts must be >= 1"
            )));
        }
        Ok(LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Fc,
            in_ch: in_features,
            in_h: 1,
            in_w: 1,
            out_ch: out_features,
            kernel: 1,
            stride: 1,
            out_h: 1,
            out_w: 1,
        })
    }

    /// MACs fed to one PE per output feature.
    pub fn macs_per_output(&self) -> u64 {
        self.in_ch as u64 * self.kernel as u64 * self.kernel as u64
    }
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Cycles to run one layer on a `rows x cols` array.
pub fn layer_cycles(layer: &LayerSpec, rows: u32, cols: u32) -> u64 {
    debug_assert!(rows >= 1 && cols >= 1);
    let rows = rows as u64;
    let cols = cols as u64;
    match layer.kind {
        LayerKind::Conv => {
            let pixels = layer.out_h as u64 * layer.out_w as u64;
            let folds = ceil_div(pixels, rows) * ceil_div(layer.out_ch as u64, cols);
            folds * layer.macs_per_output() + rows + cols
        }
        // only a single column carries an FC layer
        LayerKind::Fc => ceil_div(layer.out_ch as u64, rows) * layer.in_ch as u64 + rows + 1,
    }
}

/// Per-layer and total cycles of one network on one array shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerfReport {
    pub per_layer: Vec<(String, u64)>,
    pub total: u64,
}

/// Outcome of running a network on a (possibly degraded) array. An array
/// with no surviving columns cannot run at all and is reported distinctly
/// rather than with some huge cycle count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PerfOutcome {
    Report(PerfReport),
    Unusable,
}

impl PerfOutcome {
    pub fn total(&self) -> Option<u64> {
        match self {
            PerfOutcome::Report(r) => Some(r.total),
            PerfOutcome::Unusable => None,
        }
    }
}

/// Runs a network on the surviving array dimensions.
pub fn network_cycles(network: &[LayerSpec], dims: ArrayDims) -> PerfOutcome {
    if dims.rows == 0 || dims.cols == 0 {
        return PerfOutcome::Unusable;
    }
    let per_layer: Vec<(String, u64)> = network
        .iter()
        .map(|l| (l.name.clone(), layer_cycles(l, dims.rows, dims.cols)))
        .collect();
    let total = per_layer.iter().map(|(_, c)| c).sum();
    PerfOutcome::Report(PerfReport { per_layer, total })
}

/// Mean throughput over a set of trials. Unusable trials contribute zero
/// throughput, which keeps the aggregate finite and well ordered; reporting
/// mean cycles as the reciprocal (a harmonic mean) follows from that.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PerfAggregate {
    pub trials: u64,
    pub usable: u64,
    speed_sum: f64,
}

impl PerfAggregate {
    pub fn add(&mut self, outcome: &PerfOutcome, weight: u64) {
        self.trials += weight;
        if let Some(total) = outcome.total() {
            self.usable += weight;
            self.speed_sum += weight as f64 / total as f64;
        }
    }

    pub fn mean_speed(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.speed_sum / self.trials as f64
        }
    }

    /// Harmonic-mean cycles; `None` when every trial was unusable.
    pub fn mean_cycles(&self) -> Option<f64> {
        if self.speed_sum > 0.0 {
            Some(self.trials as f64 / self.speed_sum)
        } else {
            None
        }
    }
}

/// Performance of `scheme` normalized to `baseline` (ratio of mean cycles,
/// i.e. of mean throughputs). Both dead gives 1.0; only the baseline dead
/// gives infinity.
pub fn normalized_performance(scheme: &PerfAggregate, baseline: &PerfAggregate) -> f64 {
    let s = scheme.mean_speed();
    let b = baseline.mean_speed();
    if b == 0.0 {
        if s == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        s / b
    }
}

/// Reads a network description CSV.
///
/// Header `name,kind,c,h,w,m,k,stride` is required; blank lines and `#`
/// comments are ignored. FC rows use `c` as the input feature count and must
/// have `h=w=k=stride=1`.
pub fn load_network(path: &Path) -> Result<Vec<LayerSpec>, PerfError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PerfError::Io(format!("{}: {e}", path.display())))?;
    parse_network(&text)
}

pub fn parse_network(text: &str) -> Result<Vec<LayerSpec>, PerfError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, crate::config::strip_comment(l).trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| PerfError::Parse("empty network file".into()))?;
    let expected = "name,kind,c,h,w,m,k,stride";
    if normalize_header(header) != expected {
        return Err(PerfError::Parse(format!(
            "bad header `{header}` (expected `{expected}`)"
        )));
    }
    let mut layers = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(PerfError::Parse(format!(
                "line {lineno}: expected 8 fields, got {}",
                fields.len()
            )));
        }
        let num = |idx: usize| -> Result<u32, PerfError> {
            fields[idx].parse::<u32>().map_err(|_| {
                PerfError::Parse(format!("line {lineno}: invalid number `{}`", fields[idx]))
            })
        };
        let name = fields[0];
        let (c, h, w, m, k, stride) = (num(2)?, num(3)?, num(4)?, num(5)?, num(6)?, num(7)?);
        let layer = match fields[1] {
            "conv" => LayerSpec::conv(name, c, h, w, m, k, stride)?,
            "fc" => {
                if (h, w, k, stride) != (1, 1, 1, 1) {
                    return Err(PerfError::Parse(format!(
                        "line {lineno}: fc layers must have h=w=k=stride=1"
                    )));
                }
                LayerSpec::fc(name, c, m)?
            }
            other => {
                return Err(PerfError::Parse(format!(
                    "line {lineno}: unknown layer kind `{other}`"
                )))
            }
        };
        layers.push(layer);
    }
    if layers.is_empty() {
        return Err(PerfError::Parse("network has no layers".into()));
    }
    Ok(layers)
}

fn normalize_header(header: &str) -> String {
    header
        .split(',')
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("invalid layer: {0}")]
    BadLayer(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
