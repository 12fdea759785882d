//! Monte Carlo batch engine and table rendering.
//!
//! Every replication simulates one sample from a seed derived from
//! `(master_seed, replication index)` and runs every requested estimator on
//! that same sample. Selection counts are aggregated into a table shaped like
//! the published ones: rows are candidate orders, columns are estimators.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{estimate_order_penalized, PenaltyKind, PenaltySpec};
use crate::error::{Error, Result};
use crate::gdl::{estimate_order, GdlParams, OrderEstimate, OrderVerdict, MIN_SAMPLE_LEN};
use crate::generator::{
    build_tensor, default_burn_in, replication_seed, resolve_spec, simulate, MtdSpec, TransitionTensor,
    RNG_ALGORITHM,
};
use crate::sample::Sample;

/// Replications may fail at most this fraction before the run is rejected.
const MAX_ERROR_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Aic,
    Bic,
    Edc,
    Gdl,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [EstimatorKind::Aic, EstimatorKind::Bic, EstimatorKind::Edc, EstimatorKind::Gdl];

    fn penalty(self) -> Option<PenaltyKind> {
        match self {
            EstimatorKind::Aic => Some(PenaltyKind::Aic),
            EstimatorKind::Bic => Some(PenaltyKind::Bic),
            EstimatorKind::Edc => Some(PenaltyKind::Edc),
            EstimatorKind::Gdl => None,
        }
    }

    /// Column heading, capitalized like the published tables.
    pub fn heading(self) -> &'static str {
        match self {
            EstimatorKind::Aic => "Aic",
            EstimatorKind::Bic => "Bic",
            EstimatorKind::Edc => "Edc",
            EstimatorKind::Gdl => "Gdl",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Aic => "aic",
            EstimatorKind::Bic => "bic",
            EstimatorKind::Edc => "edc",
            EstimatorKind::Gdl => "gdl",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aic" => Ok(EstimatorKind::Aic),
            "bic" => Ok(EstimatorKind::Bic),
            "edc" => Ok(EstimatorKind::Edc),
            "gdl" => Ok(EstimatorKind::Gdl),
            other => Err(Error::invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Parses a comma-separated estimator list such as `gdl,aic,bic`.
pub fn parse_estimators(list: &str) -> Result<Vec<EstimatorKind>> {
    let mut out: Vec<EstimatorKind> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::invalid("estimator list is empty"));
    }
    Ok(out)
}

/// A builtin name (or spec-file path), or an inline spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorRef {
    Named(String),
    Inline(MtdSpec),
}

impl GeneratorRef {
    pub fn resolve(&self) -> Result<MtdSpec> {
        match self {
            GeneratorRef::Named(name) => resolve_spec(name),
            GeneratorRef::Inline(spec) => {
                spec.validate()?;
                Ok(spec.clone())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            GeneratorRef::Named(name) => name.clone(),
            GeneratorRef::Inline(spec) => spec.name.clone().unwrap_or_else(|| "inline".into()),
        }
    }
}

fn default_replications() -> usize {
    200
}

fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

fn default_edc_coefficient() -> f64 {
    PenaltySpec::DEFAULT_EDC_COEFFICIENT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorRef,
    pub n: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Probe bound `B`; overrides `gdl_params.B`. Defaults from `n` and `m`
    /// when neither is given.
    #[serde(rename = "B", alias = "bound", default)]
    pub bound: Option<usize>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub gdl_params: GdlParams,
    #[serde(default = "default_edc_coefficient")]
    pub edc_coefficient: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Defaults to `10 κ m`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(generator: GeneratorRef, n: usize) -> Self {
        ExperimentConfig {
            generator,
            n,
            replications: default_replications(),
            bound: None,
            estimators: default_estimators(),
            gdl_params: GdlParams::default(),
            edc_coefficient: default_edc_coefficient(),
            master_seed: 0,
            burn_in: None,
            output_path: None,
        }
    }

    /// Without a top-level `B`, a `B` given inside `gdl_params` sets the bound.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let nested = value
            .get("gdl_params")
            .and_then(|g| g.get("B").or_else(|| g.get("bound")))
            .is_some();
        let mut config: ExperimentConfig = serde_json::from_value(value)?;
        if config.bound.is_none() && nested {
            config.bound = Some(config.gdl_params.bound);
        }
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        ExperimentConfig::from_json(&text)
    }

    fn validate(&self, m: usize) -> Result<usize> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("at least one estimator is required"));
        }
        if self.n < MIN_SAMPLE_LEN {
            return Err(Error::SampleTooShort {
                what: "experiment",
                required: MIN_SAMPLE_LEN,
                actual: self.n,
            });
        }
        let bound = self.bound.unwrap_or_else(|| crate::gdl::default_bound(self.n, m));
        if bound + 2 > self.n {
            return Err(Error::invalid(format!("B = {bound} is too large for n = {}", self.n)));
        }
        self.gdl_params.validate()?;
        Ok(bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub generator: String,
    pub true_order: usize,
    pub alphabet_size: usize,
    pub config: ExperimentConfig,
    pub burn_in: usize,
    pub rng: &'static str,
    /// FNV-1a checksum of the sample each replication's estimators shared.
    pub sample_checksums: Vec<u64>,
    pub wall_time_secs: f64,
}

/// Per-estimator selection counts over the successful replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub bound: usize,
    pub estimators: Vec<EstimatorKind>,
    pub counts: BTreeMap<EstimatorKind, BTreeMap<OrderEstimate, usize>>,
    pub successful: usize,
    pub errored: usize,
    pub metadata: RunMetadata,
}

impl ResultTable {
    pub fn count(&self, estimator: EstimatorKind, outcome: OrderEstimate) -> usize {
        self.counts
            .get(&estimator)
            .and_then(|c| c.get(&outcome))
            .copied()
            .unwrap_or(0)
    }

    /// Selection percentage of `outcome` for `estimator`.
    pub fn percent(&self, estimator: EstimatorKind, outcome: OrderEstimate) -> f64 {
        if self.successful == 0 {
            return 0.0;
        }
        100.0 * self.count(estimator, outcome) as f64 / self.successful as f64
    }

    pub fn percent_at(&self, estimator: EstimatorKind, k: usize) -> f64 {
        self.percent(estimator, OrderEstimate::Order(k))
    }

    /// Row keys in canonical order: `0..=B`, then the saturation row if any
    /// estimator landed there.
    pub fn outcomes(&self) -> Vec<OrderEstimate> {
        let mut rows: Vec<OrderEstimate> = (0..=self.bound).map(OrderEstimate::Order).collect();
        let saturated = OrderEstimate::Saturated { bound: self.bound };
        if self.counts.values().any(|c| c.get(&saturated).copied().unwrap_or(0) > 0) {
            rows.push(saturated);
        }
        rows
    }
}

fn run_replication(
    index: usize,
    tensor: &TransitionTensor,
    config: &ExperimentConfig,
    gdl_params: &GdlParams,
    burn_in: usize,
) -> (u64, Result<Vec<(EstimatorKind, OrderEstimate)>>) {
    let seed = replication_seed(config.master_seed, index as u64);
    let sample = match simulate(tensor, config.n, seed, burn_in) {
        Ok(s) => s,
        Err(e) => return (0, Err(e)),
    };
    let checksum = sample.checksum();
    log::debug!("replication {index}: seed {seed:#018x}, sample checksum {checksum:#018x}");
    let verdicts = config
        .estimators
        .iter()
        .map(|&kind| {
            evaluate(&sample, kind, gdl_params, config.edc_coefficient).map(|v| (kind, v.0))
        })
        .collect();
    (checksum, verdicts)
}

fn evaluate(
    sample: &Sample,
    kind: EstimatorKind,
    gdl_params: &GdlParams,
    edc_coefficient: f64,
) -> Result<(OrderEstimate, Option<OrderVerdict>)> {
    match kind.penalty() {
        None => {
            let verdict = estimate_order(sample, gdl_params)?;
            Ok((verdict.estimate, Some(verdict)))
        }
        Some(penalty) => {
            let spec = PenaltySpec {
                kind: penalty,
                edc_coefficient,
            };
            let k = estimate_order_penalized(sample, gdl_params.bound, &spec)?;
            Ok((OrderEstimate::Order(k), None))
        }
    }
}

/// Runs the experiment on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    let start = Instant::now();
    let spec = config.generator.resolve()?;
    let tensor = build_tensor(&spec)?;
    let bound = config.validate(spec.m)?;
    let gdl_params = GdlParams { bound, ..config.gdl_params };
    let burn_in = config.burn_in.unwrap_or_else(|| default_burn_in(&tensor));

    let outcomes: Vec<_> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(r, &tensor, config, &gdl_params, burn_in))
        .collect();

    let mut estimators = config.estimators.clone();
    estimators.sort();
    estimators.dedup();
    let mut counts: BTreeMap<EstimatorKind, BTreeMap<OrderEstimate, usize>> =
        estimators.iter().map(|&e| (e, BTreeMap::new())).collect();
    let mut checksums = Vec::with_capacity(outcomes.len());
    let mut errored = 0;
    for (r, (checksum, result)) in outcomes.into_iter().enumerate() {
        checksums.push(checksum);
        match result {
            Ok(verdicts) => {
                for (kind, v) in verdicts {
                    *counts.entry(kind).or_default().entry(v).or_insert(0) += 1;
                }
            }
            Err(e) => {
                log::warn!("replication {r} failed: {e}");
                errored += 1;
            }
        }
    }
    if errored as f64 > MAX_ERROR_FRACTION * config.replications as f64 {
        return Err(Error::TooManyErrors {
            errored,
            replications: config.replications,
        });
    }

    Ok(ResultTable {
        bound,
        estimators,
        counts,
        successful: config.replications - errored,
        errored,
        metadata: RunMetadata {
            generator: config.generator.label(),
            true_order: spec.kappa,
            alphabet_size: spec.m,
            config: config.clone(),
            burn_in,
            rng: RNG_ALGORITHM,
            sample_checksums: checksums,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    })
}

/// Runs the experiment on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: usize) -> Result<ResultTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_experiment(config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            other => Err(Error::invalid(format!("unknown table format {other:?}"))),
        }
    }
}

fn outcome_label(o: OrderEstimate) -> String {
    o.to_string()
}

fn parse_outcome(s: &str) -> Result<OrderEstimate> {
    if let Some(rest) = s.strip_prefix(">=") {
        let k: usize = rest
            .parse()
            .map_err(|_| Error::invalid(format!("bad saturation label {s:?}")))?;
        if k == 0 {
            return Err(Error::invalid(format!("bad saturation label {s:?}")));
        }
        return Ok(OrderEstimate::Saturated { bound: k - 1 });
    }
    s.parse()
        .map(OrderEstimate::Order)
        .map_err(|_| Error::invalid(format!("bad order label {s:?}")))
}

/// Renders percentages with one decimal place. CSV columns are
/// `estimator,k,percent`; Markdown has one row per `k` and one column per estimator.
pub fn render(table: &ResultTable, format: TableFormat) -> String {
    let rows = table.outcomes();
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("estimator,k,percent\n");
            for &e in &table.estimators {
                for &o in &rows {
                    let _ = writeln!(out, "{e},{},{:.1}", outcome_label(o), table.percent(e, o));
                }
            }
        }
        TableFormat::Markdown => {
            let m = &table.metadata;
            let _ = writeln!(
                out,
                "{} (m = {}, true order {}), n = {}, {} replications\n",
                m.generator, m.alphabet_size, m.true_order, m.config.n, m.config.replications
            );
            out.push_str("| k |");
            for e in &table.estimators {
                let _ = write!(out, " {} |", e.heading());
            }
            out.push_str("\n|---|");
            for _ in &table.estimators {
                out.push_str("---|");
            }
            out.push('\n');
            for &o in &rows {
                let _ = write!(out, "| {} |", outcome_label(o));
                for &e in &table.estimators {
                    let _ = write!(out, " {:.1} |", table.percent(e, o));
                }
                out.push('\n');
            }
            if table.errored > 0 {
                let _ = writeln!(out, "\nerrors: {} of {} replications", table.errored, m.config.replications);
            }
        }
    }
    out
}

/// Reads back the CSV produced by [`render`].
pub fn parse_csv(text: &str) -> Result<BTreeMap<EstimatorKind, BTreeMap<OrderEstimate, f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == "estimator,k,percent" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                token: 0,
                message: "missing `estimator,k,percent` header".into(),
            })
        }
    }
    let mut out: BTreeMap<EstimatorKind, BTreeMap<OrderEstimate, f64>> = BTreeMap::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |token: usize, message: String| Error::Parse {
            line: i + 1,
            token,
            message,
        };
        if fields.len() != 3 {
            return Err(bad(0, format!("expected 3 fields, got {}", fields.len())));
        }
        let e: EstimatorKind = fields[0].parse().map_err(|e: Error| bad(1, e.to_string()))?;
        let o = parse_outcome(fields[1]).map_err(|e| bad(2, e.to_string()))?;
        let p: f64 = fields[2].parse().map_err(|_| bad(3, format!("bad percentage {:?}", fields[2])))?;
        out.entry(e).or_default().insert(o, p);
    }
    Ok(out)
}

/// Verdicts of several estimators on one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileReport {
    pub sample_len: usize,
    pub alphabet_size: usize,
    pub bound: usize,
    pub verdicts: Vec<(EstimatorKind, OrderEstimate)>,
    pub gdl: Option<OrderVerdict>,
}

impl fmt::Display for FileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n = {}, m = {}, B = {}", self.sample_len, self.alphabet_size, self.bound)?;
        for (kind, v) in &self.verdicts {
            writeln!(f, "{kind}: {v}")?;
        }
        if let Some(g) = &self.gdl {
            let profile: Vec<String> = g.profile.values().iter().map(|v| format!("{v:.4}")).collect();
            let sigma: Vec<&str> = g.sigma.iter().map(|&s| if s { "1" } else { "0" }).collect();
            writeln!(f, "gdl profile: ({})", profile.join(", "))?;
            writeln!(f, "sigma: ({})", sigma.join(","))?;
        }
        Ok(())
    }
}

pub fn estimate_sample(
    sample: &Sample,
    cfg: &GdlParams,
    estimators: &[EstimatorKind],
    edc_coefficient: f64,
) -> Result<FileReport> {
    if sample.len() < MIN_SAMPLE_LEN {
        return Err(Error::SampleTooShort {
            what: "order estimation",
            required: MIN_SAMPLE_LEN,
            actual: sample.len(),
        });
    }
    let mut verdicts = Vec::new();
    let mut gdl = None;
    for &kind in estimators {
        let (estimate, verdict) = evaluate(sample, kind, cfg, edc_coefficient)?;
        verdicts.push((kind, estimate));
        if verdict.is_some() {
            gdl = verdict;
        }
    }
    Ok(FileReport {
        sample_len: sample.len(),
        alphabet_size: sample.alphabet_size(),
        bound: cfg.bound,
        verdicts,
        gdl,
    })
}

/// Reads a sample file and runs the requested estimators on it.
pub fn estimate_file(
    path: &Path,
    cfg: &GdlParams,
    estimators: &[EstimatorKind],
    edc_coefficient: f64,
) -> Result<FileReport> {
    let sample = Sample::read(path)?;
    estimate_sample(&sample, cfg, estimators, edc_coefficient)
}
