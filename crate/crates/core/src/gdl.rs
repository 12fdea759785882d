//! Local and Global Dependency Levels and the order estimator built on them.
//!
//! For a context `α` of length `η`, the contingency table `O^α(i, j) = N(i α j)`
//! measures how the symbol after `α` depends on the symbol before it. The
//! Local Dependency Level of `α` is `Δ̂₂(O^α) / (2 log log n)`; the Global
//! Dependency Level of `η` maps the weighted sum of LDLs at that length
//! through `x ↦ exp(-λ x)`. Levels where the chain still shows dependence
//! have GDL near 0, levels past the true order sit near 1. The profile is
//! snapped to the nearest corner of `{0,1}^{B+1}` and the order is one past
//! the last dependent level.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::count_words;
use crate::divergence::{delta2_hat, ContingencyTable, Delta2Config, DenominatorMode};
use crate::error::{Error, Result};
use crate::sample::{word_space, Sample, Word};

/// Smallest sample for which `log(log n)` is positive.
pub const MIN_SAMPLE_LEN: usize = 16;

/// Estimator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdlParams {
    /// Rate of the exponential survival function `exp(-λ x)`.
    pub lambda: f64,
    /// Divide the weighted LDL sum by `m^η (m-1)²` before exponentiating.
    pub df_normalize: bool,
    pub denominator: DenominatorMode,
    /// Largest probed context length `B`.
    #[serde(rename = "B", alias = "bound")]
    pub bound: usize,
}

impl Default for GdlParams {
    fn default() -> Self {
        GdlParams {
            lambda: 1.0,
            df_normalize: true,
            denominator: DenominatorMode::Observed,
            bound: 4,
        }
    }
}

impl GdlParams {
    /// Default parameters with `B` chosen from the sample size.
    pub fn for_sample(n: usize, m: usize) -> Self {
        GdlParams {
            bound: default_bound(n, m),
            ..GdlParams::default()
        }
    }

    fn delta2(&self) -> Delta2Config {
        Delta2Config {
            denominator: self.denominator,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// `max(1, ⌊log_m n⌋ - 2)`: a sample of size about `m^{B+2}` is needed to see
/// every context at length `B`.
pub fn default_bound(n: usize, m: usize) -> usize {
    let mut k = 0usize;
    let mut pow = 1usize;
    while let Some(next) = pow.checked_mul(m) {
        if next > n {
            break;
        }
        pow = next;
        k += 1;
    }
    k.saturating_sub(2).max(1)
}

fn lil_scale(n: usize) -> f64 {
    2.0 * (n as f64).ln().ln()
}

fn check_len(sample: &Sample, what: &'static str) -> Result<()> {
    if sample.len() < MIN_SAMPLE_LEN {
        return Err(Error::SampleTooShort {
            what,
            required: MIN_SAMPLE_LEN,
            actual: sample.len(),
        });
    }
    Ok(())
}

fn check_context_len(sample: &Sample, eta: usize) -> Result<()> {
    if eta + 2 > sample.len() {
        return Err(Error::invalid(format!(
            "context length {eta} needs at least {} symbols, sample has {}",
            eta + 2,
            sample.len()
        )));
    }
    word_space(sample.alphabet_size(), eta + 2)?;
    Ok(())
}

/// All contingency tables at context length `eta`, keyed by context code.
/// Contexts that never occur with both a predecessor and a successor are absent.
fn level_tables(sample: &Sample, eta: usize) -> Result<BTreeMap<u64, Vec<u64>>> {
    check_context_len(sample, eta)?;
    let m = sample.alphabet_size() as u64;
    let inner = word_space(sample.alphabet_size(), eta)?;
    let words = count_words(sample, eta + 2)?;
    let mut tables: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for (code, k) in words.iter() {
        let j = code % m;
        let rest = code / m;
        let alpha = rest % inner;
        let i = rest / inner;
        let cells = tables.entry(alpha).or_insert_with(|| vec![0; (m * m) as usize]);
        cells[(i * m + j) as usize] += k;
    }
    Ok(tables)
}

/// The `m × m` table `O(i, j) = N(i α j | X_1^n)`.
pub fn context_table(sample: &Sample, alpha: &Word) -> Result<ContingencyTable> {
    let m = sample.alphabet_size();
    let cells = level_tables(sample, alpha.len)?
        .remove(&alpha.code)
        .unwrap_or_else(|| vec![0; m * m]);
    ContingencyTable::new(m, m, cells)
}

/// LDL of one context. `degenerate` marks a table with fewer than two
/// non-empty rows or columns, which contributes zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ldl {
    pub value: f64,
    pub degenerate: bool,
}

fn ldl_of_table(table: &ContingencyTable, n: usize, cfg: &GdlParams) -> Result<Ldl> {
    let d = delta2_hat(table, n as u64, cfg.delta2())?;
    Ok(Ldl {
        value: d.value / lil_scale(n),
        degenerate: d.degenerate,
    })
}

/// `Δ̂₂(P_{O^α} ‖ P_{E^α}) / (2 log log n)`, with `Δ̂₂` scaled by `n`.
pub fn ldl(sample: &Sample, alpha: &Word, cfg: &GdlParams) -> Result<Ldl> {
    check_len(sample, "local dependency level")?;
    cfg.validate()?;
    let table = context_table(sample, alpha)?;
    ldl_of_table(&table, sample.len(), cfg)
}

/// Per-context diagnostics at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextStat {
    pub context: Word,
    /// `T_α`, the number of windows `i α j`.
    pub table_total: u64,
    /// `T_α / n`.
    pub weight: f64,
    pub ldl: f64,
    pub degenerate: bool,
}

/// One entry `GDL_n(η)` of the profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdlLevel {
    pub eta: usize,
    pub gdl: f64,
    /// `Σ_α (T_α / n) LDL(α)`.
    pub weighted_sum: f64,
    /// The exponent actually used: `weighted_sum`, or `weighted_sum / df(η)`.
    pub exponent: f64,
    /// Set when no context at this level produced a usable table.
    pub all_degenerate: bool,
    pub contexts: Vec<ContextStat>,
}

fn evaluate_level(sample: &Sample, eta: usize, cfg: &GdlParams) -> Result<GdlLevel> {
    let n = sample.len();
    let m = sample.alphabet_size();
    let mut contexts = Vec::new();
    let mut weighted_sum = 0.0;
    for (code, cells) in level_tables(sample, eta)? {
        let table = ContingencyTable::new(m, m, cells)?;
        let l = ldl_of_table(&table, n, cfg)?;
        let weight = table.total() as f64 / n as f64;
        weighted_sum += weight * l.value;
        contexts.push(ContextStat {
            context: Word { code, len: eta },
            table_total: table.total(),
            weight,
            ldl: l.value,
            degenerate: l.degenerate,
        });
    }
    let all_degenerate = contexts.iter().all(|c| c.degenerate);
    if all_degenerate {
        log::warn!("every context table at level {eta} is degenerate; GDL set to 1");
    }
    let exponent = if cfg.df_normalize {
        weighted_sum / degrees_of_freedom(m, eta)
    } else {
        weighted_sum
    };
    Ok(GdlLevel {
        eta,
        gdl: (-cfg.lambda * exponent).exp(),
        weighted_sum,
        exponent,
        all_degenerate,
        contexts,
    })
}

/// `m^η (m-1)²`, the independence degrees of freedom summed over all contexts.
pub fn degrees_of_freedom(m: usize, eta: usize) -> f64 {
    (m as f64).powi(eta as i32) * ((m - 1) * (m - 1)) as f64
}

/// `GDL_n(η) = exp(-λ Σ_α (T_α/n) LDL(α))`, optionally degree-of-freedom normalized.
pub fn gdl(sample: &Sample, eta: usize, cfg: &GdlParams) -> Result<GdlLevel> {
    check_len(sample, "global dependency level")?;
    cfg.validate()?;
    if eta > cfg.bound {
        return Err(Error::invalid(format!(
            "level {eta} exceeds the probe bound B = {}",
            cfg.bound
        )));
    }
    evaluate_level(sample, eta, cfg)
}

/// The vector `(GDL_n(0), .., GDL_n(B))` with per-context detail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependencyProfile {
    pub bound: usize,
    pub sample_len: usize,
    pub alphabet_size: usize,
    pub levels: Vec<GdlLevel>,
}

impl DependencyProfile {
    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.gdl).collect()
    }
}

pub fn gdl_profile(sample: &Sample, cfg: &GdlParams) -> Result<DependencyProfile> {
    check_len(sample, "dependency profile")?;
    cfg.validate()?;
    check_context_len(sample, cfg.bound)?;
    let levels = (0..=cfg.bound)
        .into_par_iter()
        .map(|eta| evaluate_level(sample, eta, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(DependencyProfile {
        bound: cfg.bound,
        sample_len: sample.len(),
        alphabet_size: sample.alphabet_size(),
        levels,
    })
}

/// Nearest corner of `{0,1}^{B+1}` in squared distance. The distance is
/// separable, so each coordinate is thresholded at 1/2; ties go to 1.
pub fn binarize_values(values: &[f64]) -> Vec<bool> {
    values.iter().map(|&g| g >= 0.5).collect()
}

pub fn binarize(profile: &DependencyProfile) -> Vec<bool> {
    binarize_values(&profile.values())
}

/// Index of the last dependent level: `None` (the `-1` case) when every level
/// is independent, otherwise the largest `i` with `σ_i = 0`.
pub fn t_map(sigma: &[bool]) -> Option<usize> {
    sigma.iter().rposition(|&s| !s)
}

/// Estimated order, or saturation when level `B` still shows dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrderEstimate {
    Order(usize),
    /// The order is at least `bound + 1`.
    Saturated { bound: usize },
}

impl OrderEstimate {
    pub fn order(self) -> Option<usize> {
        match self {
            OrderEstimate::Order(k) => Some(k),
            OrderEstimate::Saturated { .. } => None,
        }
    }
}

impl fmt::Display for OrderEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderEstimate::Order(k) => write!(f, "{k}"),
            OrderEstimate::Saturated { bound } => write!(f, ">={}", bound + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderVerdict {
    pub estimate: OrderEstimate,
    pub sigma: Vec<bool>,
    pub profile: DependencyProfile,
}

/// Order estimate from a binarized profile of length `B + 1`.
pub fn order_from_sigma(sigma: &[bool]) -> OrderEstimate {
    let bound = sigma.len().saturating_sub(1);
    match t_map(sigma) {
        None => OrderEstimate::Order(0),
        Some(t) if t == bound => OrderEstimate::Saturated { bound },
        Some(t) => OrderEstimate::Order(t + 1),
    }
}

pub fn estimate_order(sample: &Sample, cfg: &GdlParams) -> Result<OrderVerdict> {
    let profile = gdl_profile(sample, cfg)?;
    let sigma = binarize(&profile);
    Ok(OrderVerdict {
        estimate: order_from_sigma(&sigma),
        sigma,
        profile,
    })
}
