//! Penalized maximum-likelihood order estimators: AIC, BIC and EDC.
//!
//! For a candidate order `k` the chain has `m^k (m-1)` free parameters.
//! Scores are `-2 log L̂_k + pen(k)` and the smallest score wins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::counts::count_words;
use crate::error::{Error, Result};
use crate::gdl::MIN_SAMPLE_LEN;
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Aic,
    Bic,
    Edc,
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyKind::Aic => "aic",
            PenaltyKind::Bic => "bic",
            PenaltyKind::Edc => "edc",
        })
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(PenaltyKind::Aic),
            "bic" => Ok(PenaltyKind::Bic),
            "edc" => Ok(PenaltyKind::Edc),
            other => Err(Error::invalid(format!("unknown penalty {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    /// Multiplier `c` in `c · df · log log n`; only read for EDC.
    pub edc_coefficient: f64,
}

impl PenaltySpec {
    pub const DEFAULT_EDC_COEFFICIENT: f64 = 2.0;

    pub fn new(kind: PenaltyKind) -> Self {
        PenaltySpec {
            kind,
            edc_coefficient: Self::DEFAULT_EDC_COEFFICIENT,
        }
    }

    /// Penalty for `df` free parameters on a sample of length `n`.
    pub fn penalty(&self, df: f64, n: usize) -> Result<f64> {
        let n_f = n as f64;
        Ok(match self.kind {
            PenaltyKind::Aic => 2.0 * df,
            PenaltyKind::Bic => df * n_f.ln(),
            PenaltyKind::Edc => {
                if n < MIN_SAMPLE_LEN {
                    return Err(Error::SampleTooShort {
                        what: "EDC penalty",
                        required: MIN_SAMPLE_LEN,
                        actual: n,
                    });
                }
                if !(self.edc_coefficient.is_finite() && self.edc_coefficient > 0.0) {
                    return Err(Error::invalid(format!(
                        "EDC coefficient must be positive, got {}",
                        self.edc_coefficient
                    )));
                }
                self.edc_coefficient * df * n_f.ln().ln()
            }
        })
    }
}

/// `m^k (m-1)`.
pub fn free_parameters(m: usize, k: usize) -> f64 {
    (m as f64).powi(k as i32) * (m - 1) as f64
}

fn check_order(sample: &Sample, k: usize) -> Result<()> {
    if k + 1 > sample.len() {
        return Err(Error::invalid(format!(
            "candidate order {k} needs at least {} symbols, sample has {}",
            k + 1,
            sample.len()
        )));
    }
    Ok(())
}

/// `Σ_w N(w) log(N(w) / N⁻(prefix(w)))` over words of length `k + 1`,
/// where `N⁻(v) = Σ_a N(v a)`.
pub fn log_max_likelihood(sample: &Sample, k: usize) -> Result<f64> {
    check_order(sample, k)?;
    let m = sample.alphabet_size() as u64;
    let table = count_words(sample, k + 1)?;
    // words sharing a prefix are consecutive in code order
    let mut total = 0.0;
    let mut group: Vec<u64> = Vec::with_capacity(m as usize);
    let mut current: Option<u64> = None;
    let mut flush = |group: &mut Vec<u64>| {
        let prefix_total: u64 = group.iter().sum();
        let pt = prefix_total as f64;
        for &c in group.iter() {
            total += c as f64 * (c as f64 / pt).ln();
        }
        group.clear();
    };
    for (code, count) in table.iter() {
        let prefix = code / m;
        if current != Some(prefix) {
            flush(&mut group);
            current = Some(prefix);
        }
        group.push(count);
    }
    flush(&mut group);
    Ok(total)
}

/// `-2 log L̂_k + pen(k)`.
pub fn penalized_score(sample: &Sample, k: usize, spec: &PenaltySpec) -> Result<f64> {
    let log_l = log_max_likelihood(sample, k)?;
    let pen = spec.penalty(free_parameters(sample.alphabet_size(), k), sample.len())?;
    Ok(-2.0 * log_l + pen)
}

/// Order in `0..=bound` with the smallest score; ties go to the smaller order.
pub fn estimate_order_penalized(sample: &Sample, bound: usize, spec: &PenaltySpec) -> Result<usize> {
    check_order(sample, bound)?;
    let scores = (0..=bound)
        .map(|k| penalized_score(sample, k, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmin_first(&scores))
}

pub(crate) fn argmin_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = k;
        }
    }
    best
}
