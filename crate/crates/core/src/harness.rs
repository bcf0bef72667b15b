//! Seeded experiment orchestration: plan files, Monte-Carlo sweeps over
//! fault rates and schemes, CSV report emission, and the run manifest.
//!
//! All randomness in a sweep derives from `base_seed + trial_index` plus a
//! per-purpose sub-stream, so any report row can be replayed as a single
//! trial. Reports contain no timestamps; running the same plan twice yields
//! byte-identical output trees.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{strip_comment, ArrayConfig, DppuStructure};
use crate::detect::detection_coverage;
use crate::fault::{self, FaultModel, FaultModelParams};
use crate::perf::{self, LayerSpec, PerfAggregate};
use crate::repair::{self, ArrayDims, SchemeKind};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Studies a sweep can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Reliability,
    Perf,
    Detection,
    ScalabilityArray,
    ScalabilityDppu,
}

impl std::fmt::Display for Study {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Study::Reliability => "reliability",
            Study::Perf => "perf",
            Study::Detection => "detection",
            Study::ScalabilityArray => "scalability_array",
            Study::ScalabilityDppu => "scalability_dppu",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Study {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "reliability" => Ok(Study::Reliability),
            "perf" => Ok(Study::Perf),
            "detection" => Ok(Study::Detection),
            "scalability_array" => Ok(Study::ScalabilityArray),
            "scalability_dppu" => Ok(Study::ScalabilityDppu),
            other => Err(HarnessError::Parse(format!("unknown study `{other}`"))),
        }
    }
}

/// A full experiment description, parsed from a plan file.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub pers: Vec<f64>,
    pub models: Vec<FaultModel>,
    pub schemes: Vec<SchemeKind>,
    pub trials: u64,
    pub base_seed: u64,
    pub networks: Vec<PathBuf>,
    /// Array for the reliability and performance studies.
    pub array: (u32, u32),
    pub scalability_arrays: Vec<(u32, u32)>,
    pub detection_arrays: Vec<(u32, u32)>,
    pub dppu_sizes: Vec<u32>,
    pub dppu_structures: Vec<DppuStructure>,
    pub studies: Vec<Study>,
    pub cluster_sigma: f64,
    pub mean_cluster_size: f64,
    pub inject_dppu: bool,
    pub reserve_detection_group: bool,
    /// Raw plan text, fingerprinted into the manifest.
    pub source_text: String,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            pers: per_range(0.0025, 0.06, 0.0025),
            models: vec![FaultModel::Random, FaultModel::Clustered],
            schemes: SchemeKind::ALL.to_vec(),
            trials: 2000,
            base_seed: 1,
            networks: Vec::new(),
            array: (32, 32),
            scalability_arrays: vec![(16, 16), (32, 32), (64, 64)],
            detection_arrays: vec![(16, 16), (32, 32), (64, 64), (128, 128)],
            dppu_sizes: vec![16, 24, 32, 40, 48],
            dppu_structures: vec![DppuStructure::Unified, DppuStructure::Grouped],
            studies: vec![
                Study::Reliability,
                Study::Perf,
                Study::Detection,
                Study::ScalabilityArray,
                Study::ScalabilityDppu,
            ],
            cluster_sigma: 2.0,
            mean_cluster_size: 4.0,
            inject_dppu: true,
            reserve_detection_group: false,
            source_text: String::new(),
        }
    }
}

fn per_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut i = 0u32;
    loop {
        let p = start + i as f64 * step;
        if p > stop + step * 1e-9 {
            break;
        }
        v.push(p);
        i += 1;
    }
    v
}

impl ExperimentPlan {
    /// Loads a plan file; relative network paths resolve against the plan's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses the `key=value` plan format. Unknown keys are hard errors.
    pub fn parse(text: &str, network_base: &Path) -> Result<Self, HarnessError> {
        let mut plan = ExperimentPlan {
            source_text: text.to_string(),
            ..ExperimentPlan::default()
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Parse(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = |msg: String| HarnessError::Parse(format!("line {}: {msg}", lineno + 1));
            match key {
                "per" => plan.pers = parse_per_list(value).map_err(ctx)?,
                "models" => {
                    plan.models = parse_list(value, |s| {
                        s.parse::<FaultModel>().map_err(|e| e.to_string())
                    })
                    .map_err(ctx)?
                }
                "schemes" => {
                    plan.schemes = parse_list(value, |s| s.parse::<SchemeKind>()).map_err(ctx)?
                }
                "trials" => {
                    plan.trials = value
                        .parse()
                        .map_err(|_| ctx(format!("invalid trials `{value}`")))?
                }
                "base_seed" => {
                    plan.base_seed = value
                        .parse()
                        .map_err(|_| ctx(format!("invalid base_seed `{value}`")))?
                }
                "networks" => {
                    plan.networks = parse_list(value, |s| Ok::<_, String>(network_base.join(s)))
                        .map_err(ctx)?
                }
                "array" => plan.array = parse_dims(value).map_err(ctx)?,
                "scalability_arrays" => {
                    plan.scalability_arrays = parse_list(value, parse_dims).map_err(ctx)?
                }
                "detection_arrays" => {
                    plan.detection_arrays = parse_list(value, parse_dims).map_err(ctx)?
                }
                "dppu_sizes" => {
                    plan.dppu_sizes = parse_list(value, |s| {
                        s.parse::<u32>().map_err(|_| format!("invalid size `{s}`"))
                    })
                    .map_err(ctx)?
                }
                "dppu_structures" => {
                    plan.dppu_structures = parse_list(value, |s| {
                        s.parse::<DppuStructure>().map_err(|e| e.to_string())
                    })
                    .map_err(ctx)?
                }
                "studies" => {
                    plan.studies =
                        parse_list(value, |s| s.parse::<Study>().map_err(|e| e.to_string()))
                            .map_err(ctx)?
                }
                "cluster_sigma" => {
                    plan.cluster_sigma = value
                        .parse()
                        .map_err(|_| ctx(format!("invalid cluster_sigma `{value}`")))?
                }
                "mean_cluster_size" => {
                    plan.mean_cluster_size = value
                        .parse()
                        .map_err(|_| ctx(format!("invalid mean_cluster_size `{value}`")))?
                }
                "inject_dppu" => plan.inject_dppu = parse_bool(value).map_err(ctx)?,
                "reserve_detection_group" => {
                    plan.reserve_detection_group = parse_bool(value).map_err(ctx)?
                }
                other => return Err(HarnessError::Parse(format!("unknown key `{other}`"))),
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials < 1 {
            return Err(HarnessError::Invalid("trials must be >= 1".into()));
        }
        if self.pers.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(HarnessError::Invalid("per values must be in [0,1]".into()));
        }
        if self.pers.is_empty() {
            return Err(HarnessError::Invalid("per list is empty".into()));
        }
        for n in &self.networks {
            if !n.is_file() {
                return Err(HarnessError::Invalid(format!(
                    "network file `{}` does not exist",
                    n.display()
                )));
            }
        }
        let needs_networks = self
            .studies
            .iter()
            .any(|s| matches!(s, Study::Perf | Study::Detection));
        if needs_networks && self.networks.is_empty() {
            return Err(HarnessError::Invalid(
                "perf/detection studies need at least one network".into(),
            ));
        }
        if self.studies.contains(&Study::Perf) && !self.schemes.contains(&SchemeKind::Rr) {
            return Err(HarnessError::Invalid(
                "the perf study normalizes against rr; include it in schemes".into(),
            ));
        }
        Ok(())
    }

    fn params(&self, model: FaultModel, per: f64) -> FaultModelParams {
        FaultModelParams {
            model,
            per,
            cluster_sigma: self.cluster_sigma,
            mean_cluster_size: self.mean_cluster_size,
            inject_dppu: self.inject_dppu,
        }
    }
}

fn parse_list<T, E: ToString>(
    value: &str,
    item: impl Fn(&str) -> Result<T, E>,
) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(s).map_err(|e| e.to_string()))
        .collect()
}

fn parse_per_list(value: &str) -> Result<Vec<f64>, String> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:stop:step, got `{value}`"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number `{s}`")))
            .collect::<Result<_, _>>()?;
        if nums[2] <= 0.0 {
            return Err("step must be positive".into());
        }
        Ok(per_range(nums[0], nums[1], nums[2]))
    } else {
        parse_list(value, |s| {
            s.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
        })
    }
}

fn parse_dims(value: &str) -> Result<(u32, u32), String> {
    let (r, c) = value
        .split_once('x')
        .ok_or_else(|| format!("expected ROWSxCOLS, got `{value}`"))?;
    let rows = r.trim().parse().map_err(|_| format!("bad rows `{r}`"))?;
    let cols = c.trim().parse().map_err(|_| format!("bad cols `{c}`"))?;
    Ok((rows, cols))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(format!("expected true|false, got `{other}`")),
    }
}

/// The in-memory result of a sweep: relative file path -> content.
#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub files: BTreeMap<PathBuf, String>,
    pub failures: Vec<String>,
}

impl SweepReport {
    /// Writes the report tree under `out_dir`.
    pub fn write_to(&self, out_dir: &Path) -> Result<(), HarnessError> {
        for (rel, content) in &self.files {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", parent.display())))?;
            }
            std::fs::write(&path, content)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Runs every study in the plan and assembles the report tree, including
/// the manifest. Failures of individual cells are recorded and the sweep
/// continues.
pub fn run_sweep(plan: &ExperimentPlan) -> SweepReport {
    let mut report = SweepReport::default();

    let networks: Vec<(String, Vec<LayerSpec>)> = plan
        .networks
        .iter()
        .filter_map(|path| {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            match perf::load_network(path) {
                Ok(layers) => Some((name, layers)),
                Err(e) => {
                    report
                        .failures
                        .push(format!("network {}: {e}", path.display()));
                    None
                }
            }
        })
        .collect();

    for study in &plan.studies {
        match study {
            Study::Reliability => run_reliability(plan, &mut report),
            Study::ScalabilityArray => run_scalability_array(plan, &mut report),
            Study::ScalabilityDppu => run_scalability_dppu(plan, &mut report),
            Study::Perf => run_perf(plan, &networks, &mut report),
            Study::Detection => run_detection(plan, &networks, &mut report),
        }
    }

    report
        .files
        .insert(PathBuf::from("manifest.txt"), manifest(plan, &report));
    report
}

/// Reliability sweep on the base array.
pub fn run_reliability(plan: &ExperimentPlan, report: &mut SweepReport) {
    let cfg = ArrayConfig::with_dims(plan.array.0, plan.array.1);
    let mut csv =
        String::from("scheme,model,per,trials,fully_functional_prob,norm_power,base_seed\n");
    for &scheme in &plan.schemes {
        for &model in &plan.models {
            for &per in &plan.pers {
                let params = plan.params(model, per);
                let metrics =
                    repair::evaluate_reliability(&cfg, scheme, &params, plan.trials, plan.base_seed);
                csv.push_str(&metrics.csv_row(scheme, &params));
                csv.push('\n');
            }
        }
    }
    report
        .files
        .insert(PathBuf::from("reliability/reliability.csv"), csv);
}

fn run_scalability_array(plan: &ExperimentPlan, report: &mut SweepReport) {
    let mut csv = String::from(
        "array,scheme,model,per,trials,fully_functional_prob,norm_power,base_seed\n",
    );
    for &(rows, cols) in &plan.scalability_arrays {
        let cfg = ArrayConfig::with_dims(rows, cols);
        for &scheme in &plan.schemes {
            for &model in &plan.models {
                for &per in &plan.pers {
                    let params = plan.params(model, per);
                    let metrics = repair::evaluate_reliability(
                        &cfg,
                        scheme,
                        &params,
                        plan.trials,
                        plan.base_seed,
                    );
                    let _ = write!(csv, "{rows}x{cols},");
                    csv.push_str(&metrics.csv_row(scheme, &params));
                    csv.push('\n');
                }
            }
        }
    }
    report
        .files
        .insert(PathBuf::from("reliability/scalability_array.csv"), csv);
}

fn run_scalability_dppu(plan: &ExperimentPlan, report: &mut SweepReport) {
    let mut csv = String::from(
        "structure,dppu_size,model,per,trials,fully_functional_prob,norm_power,base_seed\n",
    );
    for &structure in &plan.dppu_structures {
        for &size in &plan.dppu_sizes {
            let mut cfg = ArrayConfig::with_dims(plan.array.0, plan.array.1);
            cfg.dppu_size = size;
            cfg.dppu_structure = structure;
            for &model in &plan.models {
                for &per in &plan.pers {
                    let params = plan.params(model, per);
                    let metrics = repair::evaluate_reliability(
                        &cfg,
                        SchemeKind::Hyca,
                        &params,
                        plan.trials,
                        plan.base_seed,
                    );
                    let _ = write!(csv, "{structure},{size},");
                    // drop the redundant scheme column prefix
                    let row = metrics.csv_row(SchemeKind::Hyca, &params);
                    csv.push_str(row.strip_prefix("hyca,").unwrap_or(&row));
                    csv.push('\n');
                }
            }
        }
    }
    report
        .files
        .insert(PathBuf::from("reliability/scalability_dppu.csv"), csv);
}

/// Surviving-column histograms per scheme for one `(model, per)` cell, all
/// schemes sharing the trial seeds.
fn surviving_histograms(
    cfg: &ArrayConfig,
    plan: &ExperimentPlan,
    params: &FaultModelParams,
) -> BTreeMap<SchemeKind, BTreeMap<u32, u64>> {
    let per_trial: Vec<Vec<(SchemeKind, u32)>> = (0..plan.trials)
        .into_par_iter()
        .map(|t| {
            let map = fault::generate(cfg, params, plan.base_seed.wrapping_add(t));
            plan.schemes
                .iter()
                .map(|&kind| (kind, repair::repair(cfg, kind, &map).surviving_cols))
                .collect()
        })
        .collect();
    let mut hists: BTreeMap<SchemeKind, BTreeMap<u32, u64>> = BTreeMap::new();
    for trial in per_trial {
        for (kind, cols) in trial {
            *hists.entry(kind).or_default().entry(cols).or_default() += 1;
        }
    }
    hists
}

/// Performance sweep: one CSV per fault model, rows
/// `network,scheme,per,mean_cycles,normalized`, normalized against rr.
///
/// Identical surviving dimensions are deduplicated before the cycle model
/// runs; most fault configurations collapse to a handful of unique array
/// shapes.
pub fn run_perf(
    plan: &ExperimentPlan,
    networks: &[(String, Vec<LayerSpec>)],
    report: &mut SweepReport,
) {
    let cfg = ArrayConfig::with_dims(plan.array.0, plan.array.1);
    for &model in &plan.models {
        let mut csv = String::from("network,scheme,per,mean_cycles,normalized\n");
        // rows grouped per network for readability
        let mut rows: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for &per in &plan.pers {
            let params = plan.params(model, per);
            let hists = surviving_histograms(&cfg, plan, &params);
            for (name, layers) in networks {
                let mut aggregates: Vec<(SchemeKind, PerfAggregate)> = Vec::new();
                for &scheme in &plan.schemes {
                    let mut agg = PerfAggregate::default();
                    for (&cols, &count) in &hists[&scheme] {
                        let outcome = perf::network_cycles(
                            layers,
                            ArrayDims {
                                rows: cfg.rows,
                                cols,
                            },
                        );
                        agg.add(&outcome, count);
                    }
                    aggregates.push((scheme, agg));
                }
                let baseline = aggregates
                    .iter()
                    .find(|(s, _)| *s == SchemeKind::Rr)
                    .map(|(_, a)| *a)
                    .expect("plan validation guarantees rr");
                for (scheme, agg) in &aggregates {
                    let normalized = perf::normalized_performance(agg, &baseline);
                    rows.entry(name.as_str()).or_default().push(format!(
                        "{name},{scheme},{per:.4},{},{}\n",
                        fmt_cycles(agg.mean_cycles()),
                        fmt_ratio(normalized),
                    ));
                }
            }
        }
        for lines in rows.values() {
            for line in lines {
                csv.push_str(line);
            }
        }
        report
            .files
            .insert(PathBuf::from(format!("perf/perf_{model}.csv")), csv);
    }
}

fn fmt_cycles(c: Option<f64>) -> String {
    match c {
        Some(v) => format!("{v:.3}"),
        None => "inf".to_string(),
    }
}

fn fmt_ratio(r: f64) -> String {
    if r.is_infinite() {
        "inf".to_string()
    } else {
        format!("{r:.6}")
    }
}

/// Detection-coverage study: `network,array,layers_total,layers_covered`.
pub fn run_detection(
    plan: &ExperimentPlan,
    networks: &[(String, Vec<LayerSpec>)],
    report: &mut SweepReport,
) {
    let mut csv = String::from("network,array,layers_total,layers_covered\n");
    for (name, layers) in networks {
        for &(rows, cols) in &plan.detection_arrays {
            let cfg = ArrayConfig::with_dims(rows, cols);
            let coverage = detection_coverage(&cfg, layers);
            let _ = write!(
                csv,
                "{name},{rows}x{cols},{},{}\n",
                coverage.layers_total, coverage.layers_covered
            );
        }
    }
    report
        .files
        .insert(PathBuf::from("detection/coverage.csv"), csv);
}

fn manifest(plan: &ExperimentPlan, report: &SweepReport) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "tool_version={TOOL_VERSION}");
    let _ = writeln!(m, "plan_fingerprint={:016x}", fnv1a64(plan.source_text.as_bytes()));
    let _ = writeln!(m, "base_seed={}", plan.base_seed);
    let _ = writeln!(m, "trials={}", plan.trials);
    let _ = writeln!(
        m,
        "seed_lineage=trial t draws from seed base_seed+t on purpose-specific substreams"
    );
    let _ = writeln!(
        m,
        "studies={}",
        plan.studies
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    if plan.models.contains(&FaultModel::Clustered) {
        let _ = writeln!(
            m,
            "note=clustered results depend on this tool's cluster model concretization \
             (sigma={}, mean_cluster_size={})",
            plan.cluster_sigma, plan.mean_cluster_size
        );
    }
    if plan
        .scalability_arrays
        .iter()
        .any(|&(r, c)| r != c)
    {
        let _ = writeln!(
            m,
            "note=non-square arrays tile the diagonal redundancy into squares; the remainder \
             tile has a truncated diagonal"
        );
    }
    for f in &report.failures {
        let _ = writeln!(m, "failure={f}");
    }
    let _ = writeln!(m, "files={}", report.files.len() + 1);
    m
}

/// FNV-1a 64-bit content fingerprint.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::PerfOutcome;

    #[test]
    fn per_range_inclusive() {
        let v = per_range(0.0, 0.06, 0.01);
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], 0.0);
        assert!((v[6] - 0.06).abs() < 1e-12);
    }

    #[test]
    fn plan_parsing_and_unknown_keys() {
        let text = "\
per=0.01,0.02
models=random
schemes=rr,hyca
trials=10
base_seed=3
array=16x16
studies=reliability
";
        let plan = ExperimentPlan::parse(text, Path::new(".")).unwrap();
        assert_eq!(plan.pers, vec![0.01, 0.02]);
        assert_eq!(plan.schemes, vec![SchemeKind::Rr, SchemeKind::Hyca]);
        assert_eq!(plan.array, (16, 16));
        assert_eq!(plan.trials, 10);

        let err = ExperimentPlan::parse("nonsense_key=1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("nonsense_key"));
    }

    #[test]
    fn plan_validation() {
        assert!(ExperimentPlan::parse("trials=0\nstudies=reliability\n", Path::new(".")).is_err());
        assert!(ExperimentPlan::parse("per=2.0\nstudies=reliability\n", Path::new(".")).is_err());
        assert!(
            ExperimentPlan::parse("studies=perf\n", Path::new(".")).is_err(),
            "perf without networks"
        );
        assert!(
            ExperimentPlan::parse("networks=does_not_exist.csv\nstudies=reliability\n", Path::new("."))
                .is_err()
        );
    }

    #[test]
    fn single_trial_equals_direct_evaluation() {
        let cfg = ArrayConfig::default();
        let params = FaultModelParams::random(0.03);
        let metrics = repair::evaluate_reliability(&cfg, SchemeKind::Hyca, &params, 1, 77);
        let map = fault::generate(&cfg, &params, 77);
        let plan = repair::repair(&cfg, SchemeKind::Hyca, &map);
        assert_eq!(
            metrics.fully_functional_probability,
            if plan.fully_functional { 1.0 } else { 0.0 }
        );
        assert_eq!(
            metrics.normalized_computing_power,
            plan.surviving_cols as f64 / cfg.cols as f64
        );
    }

    #[test]
    fn sweep_is_deterministic() {
        let plan = ExperimentPlan {
            pers: vec![0.01, 0.03],
            trials: 40,
            studies: vec![Study::Reliability, Study::ScalabilityDppu],
            scalability_arrays: vec![(8, 8)],
            dppu_sizes: vec![16, 32],
            ..ExperimentPlan::default()
        };
        let a = run_sweep(&plan);
        let b = run_sweep(&plan);
        assert_eq!(a.files, b.files);
        assert!(a.failures.is_empty());
        assert!(a.files.contains_key(Path::new("manifest.txt")));
        let csv = &a.files[Path::new("reliability/reliability.csv")];
        // header + 4 schemes * 2 models * 2 pers
        assert_eq!(csv.lines().count(), 1 + 16);
    }

    #[test]
    fn dedup_matches_direct_per_trial_cycles() {
        let cfg = ArrayConfig::with_dims(8, 8);
        let plan = ExperimentPlan {
            trials: 30,
            schemes: vec![SchemeKind::Rr],
            ..ExperimentPlan::default()
        };
        let params = plan.params(FaultModel::Random, 0.05);
        let hists = surviving_histograms(&cfg, &plan, &params);
        let layers = vec![LayerSpec::conv("l", 8, 10, 10, 8, 3, 1).unwrap()];

        // direct: per-trial evaluation without the histogram cache
        let mut direct: BTreeMap<u32, u64> = BTreeMap::new();
        for t in 0..plan.trials {
            let map = fault::generate(&cfg, &params, plan.base_seed.wrapping_add(t));
            let plan_r = repair::repair(&cfg, SchemeKind::Rr, &map);
            *direct.entry(plan_r.surviving_cols).or_default() += 1;
        }
        assert_eq!(hists[&SchemeKind::Rr], direct);
        for (&cols, _) in &direct {
            let a = perf::network_cycles(&layers, ArrayDims { rows: 8, cols });
            let b = perf::network_cycles(&layers, ArrayDims { rows: 8, cols });
            assert_eq!(a, b);
            if cols == 0 {
                assert_eq!(a, PerfOutcome::Unusable);
            }
        }
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), fnv1a64(b"a"));
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
    }
}
