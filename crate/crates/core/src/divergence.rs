//! f-divergences and the contingency-table statistic `Δ̂₂`.
//!
//! Zero conventions for `D_f(P‖Q) = Σ_a Q(a) f(P(a)/Q(a))`:
//! `0·f(0/0) = 0`, `f(0) = lim_{t→0} f(t)` and
//! `0·f(a/0) = a · lim_{u→∞} f(u)/u`. Natural logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over `{0, .., m-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution must have non-empty support"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid(format!("probability {p} is not a finite non-negative value")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(DiscreteDistribution { probs })
    }

    pub fn uniform(m: usize) -> Self {
        DiscreteDistribution {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A convex generator `f` with `f(1) = 0`, together with the two limits the
/// zero conventions need.
pub trait DivergenceGenerator {
    fn eval(&self, t: f64) -> f64;

    /// `lim_{t→0} f(t)`.
    fn at_zero(&self) -> f64;

    /// `lim_{u→∞} f(u)/u`, possibly `+∞`.
    fn growth_at_infinity(&self) -> f64;
}

/// `f(t) = t log t`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelativeEntropy;

impl DivergenceGenerator for RelativeEntropy {
    fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            t * t.ln()
        }
    }

    fn at_zero(&self) -> f64 {
        0.0
    }

    fn growth_at_infinity(&self) -> f64 {
        f64::INFINITY
    }
}

/// `f(t) = (t - 1)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChiSquare;

impl DivergenceGenerator for ChiSquare {
    fn eval(&self, t: f64) -> f64 {
        (t - 1.0) * (t - 1.0)
    }

    fn at_zero(&self) -> f64 {
        1.0
    }

    fn growth_at_infinity(&self) -> f64 {
        f64::INFINITY
    }
}

/// An arbitrary generator given as a closure plus its boundary limits.
#[derive(Debug, Clone, Copy)]
pub struct ConvexGenerator<F> {
    pub f: F,
    pub at_zero: f64,
    pub growth_at_infinity: f64,
}

impl<F: Fn(f64) -> f64> DivergenceGenerator for ConvexGenerator<F> {
    fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn at_zero(&self) -> f64 {
        self.at_zero
    }

    fn growth_at_infinity(&self) -> f64 {
        self.growth_at_infinity
    }
}

/// `D_f(P‖Q)`. Returns `+∞` when a limit term diverges (e.g. relative entropy
/// with `P(a) > 0 = Q(a)`); that is a value, not an error.
pub fn f_divergence<G: DivergenceGenerator + ?Sized>(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    f: &G,
) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "support mismatch: |P| = {}, |Q| = {}",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for (&pa, &qa) in p.probs.iter().zip(&q.probs) {
        total += match (pa > 0.0, qa > 0.0) {
            (_, true) if pa == 0.0 => qa * f.at_zero(),
            (_, true) => qa * f.eval(pa / qa),
            (false, false) => 0.0,
            (true, false) => {
                let g = f.growth_at_infinity();
                if g.is_infinite() {
                    return Ok(f64::INFINITY);
                }
                pa * g
            }
        };
    }
    Ok(total)
}

/// Relative entropy `D(P‖Q)` in nats.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    f_divergence(p, q, &RelativeEntropy)
}

/// `D₂(P‖Q) = Σ (P(a) - Q(a))² / Q(a)`.
pub fn chi2_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    f_divergence(p, q, &ChiSquare)
}

/// An `r × m` table of observed counts `O(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    observed: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// `observed` is row-major, `rows * cols` long.
    pub fn new(rows: usize, cols: usize, observed: Vec<u64>) -> Result<Self> {
        if observed.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {rows}x{cols} = {} cells, got {}",
                rows * cols,
                observed.len()
            )));
        }
        let total = observed.iter().sum();
        Ok(ContingencyTable {
            rows,
            cols,
            observed,
            total,
        })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged contingency table"));
        }
        ContingencyTable::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.observed[i * self.cols + j]
    }

    pub fn observed(&self) -> &[u64] {
        &self.observed
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.observed.chunks(self.cols.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.cols];
        for row in self.observed.chunks(self.cols.max(1)) {
            for (s, &o) in sums.iter_mut().zip(row) {
                *s += o;
            }
        }
        sums
    }
}

/// `E(i, j) = (Σ_l O(i, l))(Σ_l O(l, j)) / T`.
pub fn expected_frequencies(table: &ContingencyTable) -> Result<Vec<Vec<f64>>> {
    if table.total == 0 {
        return Err(Error::DegenerateTable("table total is zero".into()));
    }
    let t = table.total as f64;
    let col_sums = table.col_sums();
    Ok(table
        .row_sums()
        .into_iter()
        .map(|r| col_sums.iter().map(|&c| r as f64 * c as f64 / t).collect())
        .collect())
}

/// Which probability sits in the denominator of `Δ̂₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenominatorMode {
    /// `P_O`, the Neyman-type statistic.
    #[default]
    Observed,
    /// `P_E`, Pearson's statistic.
    Expected,
}

impl std::str::FromStr for DenominatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "observed" => Ok(DenominatorMode::Observed),
            "expected" => Ok(DenominatorMode::Expected),
            other => Err(Error::invalid(format!(
                "unknown denominator mode {other:?} (expected `observed` or `expected`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Delta2Config {
    pub denominator: DenominatorMode,
}

/// Value of `Δ̂₂`; `degenerate` is set when fewer than two non-empty rows or
/// columns remain, in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta2 {
    pub value: f64,
    pub degenerate: bool,
}

/// `Δ̂₂ = scale · Σ_{i,j} (P_O - P_E)² / P_D` with `P_O = O/T`, `P_E = E/T`.
///
/// All-zero rows and columns are dropped first. In observed mode an empty cell
/// falls back to the expected denominator for that cell.
pub fn delta2_hat(table: &ContingencyTable, scale: u64, cfg: Delta2Config) -> Result<Delta2> {
    if scale == 0 {
        return Err(Error::invalid("delta2 scale must be positive"));
    }
    let row_sums = table.row_sums();
    let col_sums = table.col_sums();
    let live_rows = row_sums.iter().filter(|&&r| r > 0).count();
    let live_cols = col_sums.iter().filter(|&&c| c > 0).count();
    if live_rows < 2 || live_cols < 2 {
        return Ok(Delta2 {
            value: 0.0,
            degenerate: true,
        });
    }

    let total = table.total as i128;
    let t = table.total as f64;
    let mut sum = 0.0;
    for (i, &r) in row_sums.iter().enumerate() {
        if r == 0 {
            continue;
        }
        for (j, &c) in col_sums.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let o = table.get(i, j);
            let rc = r as i128 * c as i128;
            // T² (P_O - P_E), exact in integers
            let diff = o as i128 * total - rc;
            if diff == 0 {
                continue;
            }
            let diff = diff as f64;
            // (P_O - P_E)² / P_D with P_D = o/T or rc/T²
            sum += match cfg.denominator {
                DenominatorMode::Observed if o > 0 => diff * diff / (t * t * t * o as f64),
                _ => diff * diff / (t * t * rc as f64),
            };
        }
    }
    Ok(Delta2 {
        value: scale as f64 * sum,
        degenerate: false,
    })
}
