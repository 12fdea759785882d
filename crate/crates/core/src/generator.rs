//! Mixture transition distribution (Raftery) kernels, simulation, and
//! stationary distributions of the derived chains.
//!
//! An MTD kernel of order `κ` is built from one column-stochastic matrix `R`
//! and lag weights `λ_1..λ_κ`:
//! `q(a | i_1 .. i_κ) = Σ_t λ_t R(a, i_t)`, with `i_1` the oldest symbol.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::sample::{word_space, Sample, Symbol, Word};

const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Identity of the pseudorandom stream, echoed in experiment metadata.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.3) seeded by seed_from_u64; replication seeds = splitmix64(master, index)";

/// Parameters of an MTD generator. `r[i][j] = R(i, j)`; each column sums to 1.
///
/// With `kappa = 0` the chain is iid: `lags` must be empty and every column of
/// `R` must be the same distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtdSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub m: usize,
    pub kappa: usize,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(default)]
    pub lags: Vec<f64>,
}

impl MtdSpec {
    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m < 2 {
            return Err(Error::InvalidSpec(format!("alphabet size must be at least 2, got {m}")));
        }
        if self.r.len() != m || self.r.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidSpec(format!("R must be {m}x{m}")));
        }
        for (i, row) in self.r.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidSpec(format!("R({}, {}) = {v} is not a probability", i + 1, j + 1)));
                }
            }
        }
        for j in 0..m {
            let col: f64 = (0..m).map(|i| self.r[i][j]).sum();
            if (col - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::InvalidSpec(format!("column {} of R sums to {col}, expected 1", j + 1)));
            }
        }
        if self.kappa == 0 {
            if !self.lags.is_empty() {
                return Err(Error::InvalidSpec("an order-0 spec takes no lag weights".into()));
            }
            for j in 1..m {
                if (0..m).any(|i| (self.r[i][j] - self.r[i][0]).abs() > STOCHASTIC_TOLERANCE) {
                    return Err(Error::InvalidSpec(format!(
                        "an order-0 spec needs identical columns in R; column {} differs from column 1",
                        j + 1
                    )));
                }
            }
            return Ok(());
        }
        if self.lags.len() != self.kappa {
            return Err(Error::InvalidSpec(format!(
                "expected {} lag weights, got {}",
                self.kappa,
                self.lags.len()
            )));
        }
        if let Some((t, w)) = self.lags.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidSpec(format!("lag weight {} = {w} must be positive", t + 1)));
        }
        let sum: f64 = self.lags.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(Error::InvalidSpec(format!("lag weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<MtdSpec> {
        let spec: MtdSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<MtdSpec> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        MtdSpec::from_json(&text)
    }
}

/// The expanded kernel: one next-symbol distribution per context in `E^κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    m: usize,
    kappa: usize,
    /// `m^κ` rows of `m` probabilities, indexed by context code.
    rows: Vec<f64>,
}

impl TransitionTensor {
    /// Builds a tensor directly from per-context rows (row-major, context code order).
    pub fn from_rows(m: usize, kappa: usize, rows: Vec<f64>) -> Result<TransitionTensor> {
        let contexts = word_space(m, kappa)? as usize;
        if rows.len() != contexts * m {
            return Err(Error::InvalidSpec(format!(
                "expected {contexts} rows of {m} probabilities, got {} values",
                rows.len()
            )));
        }
        for (c, row) in rows.chunks(m).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                let ctx = Word { code: c as u64, len: kappa };
                return Err(Error::InvalidSpec(format!(
                    "transition row for context {} sums to {sum}",
                    ctx.display(m)
                )));
            }
        }
        Ok(TransitionTensor { m, kappa, rows })
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.kappa
    }

    pub fn context_count(&self) -> usize {
        self.rows.len() / self.m
    }

    /// Next-symbol probabilities after the context with this code.
    pub fn row(&self, context_code: u64) -> &[f64] {
        let start = context_code as usize * self.m;
        &self.rows[start..start + self.m]
    }

    pub fn distribution(&self, context: &Word) -> Result<DiscreteDistribution> {
        if context.len != self.kappa {
            return Err(Error::invalid(format!(
                "context of length {} for an order-{} kernel",
                context.len, self.kappa
            )));
        }
        DiscreteDistribution::new(self.row(context.code).to_vec())
    }

    pub fn min_entry(&self) -> f64 {
        self.rows.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn build_tensor(spec: &MtdSpec) -> Result<TransitionTensor> {
    spec.validate()?;
    let m = spec.m;
    if spec.kappa == 0 {
        let rows = (0..m).map(|a| spec.r[a][0]).collect();
        return TransitionTensor::from_rows(m, 0, rows);
    }
    let contexts = word_space(m, spec.kappa)?;
    let mut rows = Vec::with_capacity(contexts as usize * m);
    for code in 0..contexts {
        let ctx = Word { code, len: spec.kappa }.symbols(m);
        for a in 0..m {
            let q: f64 = ctx
                .iter()
                .zip(&spec.lags)
                .map(|(s, &lambda)| lambda * spec.r[a][s.index()])
                .sum();
            rows.push(q);
        }
    }
    TransitionTensor::from_rows(m, spec.kappa, rows)
}

/// A named generator from the published simulation tables.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinExample {
    pub name: &'static str,
    /// Matrix as printed: row `j` is the next-symbol law contributed by state `j`.
    pub printed: &'static [&'static [f64]],
    pub spec: MtdSpec,
}

pub const Q1: &[&[f64]] = &[&[0.05, 0.05, 0.90], &[0.05, 0.90, 0.05], &[0.90, 0.05, 0.05]];
pub const Q2: &[&[f64]] = &[&[0.05, 0.05, 0.90], &[0.05, 0.05, 0.90], &[0.05, 0.05, 0.90]];
pub const Q3: &[&[f64]] = &[
    &[0.05, 0.05, 0.05, 0.85],
    &[0.05, 0.05, 0.85, 0.05],
    &[0.05, 0.85, 0.05, 0.05],
    &[0.85, 0.05, 0.05, 0.05],
];
pub const Q4: &[&[f64]] = &[
    &[0.05, 0.05, 0.05, 0.85],
    &[0.05, 0.05, 0.05, 0.85],
    &[0.05, 0.05, 0.05, 0.85],
    &[0.05, 0.05, 0.05, 0.85],
];

fn transpose(printed: &[&[f64]]) -> Vec<Vec<f64>> {
    let m = printed.len();
    (0..m).map(|i| (0..m).map(|j| printed[j][i]).collect()).collect()
}

fn builtin(name: &'static str, printed: &'static [&'static [f64]], kappa: usize) -> BuiltinExample {
    let lags = vec![1.0 / kappa.max(1) as f64; kappa];
    BuiltinExample {
        name,
        printed,
        spec: MtdSpec {
            name: Some(name.to_string()),
            m: printed.len(),
            kappa,
            r: transpose(printed),
            lags,
        },
    }
}

/// `Q1`/`Q2` on three states and `Q3`/`Q4` on four, with the lag
/// configurations used in the tables. `Q2` and `Q4` have identical rows and
/// are iid whatever the lags, so they are expressed with `kappa = 0`.
pub fn builtin_examples() -> Vec<BuiltinExample> {
    vec![
        builtin("q1-lag2", Q1, 2),
        builtin("q1-lag3", Q1, 3),
        builtin("q2-iid", Q2, 0),
        builtin("q3-lag2", Q3, 2),
        builtin("q3-lag3", Q3, 3),
        builtin("q4-iid", Q4, 0),
    ]
}

pub fn builtin_spec(name: &str) -> Option<MtdSpec> {
    builtin_examples()
        .into_iter()
        .find(|b| b.name.eq_ignore_ascii_case(name))
        .map(|b| b.spec)
}

/// A builtin name, or else a path to a JSON spec file.
pub fn resolve_spec(name_or_path: &str) -> Result<MtdSpec> {
    if let Some(spec) = builtin_spec(name_or_path) {
        return Ok(spec);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return MtdSpec::read(path);
    }
    let names: Vec<&str> = builtin_examples().iter().map(|b| b.name).collect();
    Err(Error::InvalidSpec(format!(
        "{name_or_path:?} is neither a builtin ({}) nor an existing spec file",
        names.join(", ")
    )))
}

pub fn default_burn_in(tensor: &TransitionTensor) -> usize {
    10 * tensor.order() * tensor.alphabet_size()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for replication `index`; independent of how many replications run.
pub fn replication_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Draws `n` symbols after a uniform initial context and `burn_in` discarded steps.
pub fn simulate(tensor: &TransitionTensor, n: usize, seed: u64, burn_in: usize) -> Result<Sample> {
    if n == 0 {
        return Err(Error::invalid("sample length must be at least 1"));
    }
    let m = tensor.m;
    let contexts = tensor.context_count() as u64;
    let cumulative: Vec<f64> = tensor
        .rows
        .chunks(m)
        .flat_map(|row| {
            row.iter().scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut context = 0u64;
    for _ in 0..tensor.kappa {
        context = context * m as u64 + rng.gen_range(0..m as u64);
    }

    let mut out = Vec::with_capacity(n);
    for step in 0..burn_in + n {
        let row = &cumulative[context as usize * m..(context as usize + 1) * m];
        let u: f64 = rng.gen();
        let a = row.iter().position(|&c| u < c).unwrap_or(m - 1);
        if step >= burn_in {
            out.push(Symbol(a as u32));
        }
        if contexts > 1 {
            context = (context * m as u64 + a as u64) % contexts;
        }
    }
    Sample::new(out, m)
}

/// A probability for every word of one length, indexed by word code.
#[derive(Debug, Clone, PartialEq)]
pub struct WordDistribution {
    pub m: usize,
    pub len: usize,
    pub probs: Vec<f64>,
}

impl WordDistribution {
    pub fn prob(&self, w: &Word) -> f64 {
        if w.len != self.len {
            return 0.0;
        }
        self.probs.get(w.code as usize).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            tolerance: 1e-12,
            max_iterations: 200_000,
        }
    }
}

/// Stationary law `Π_l` of the derived chain on `E^l`, `l ≥ κ`.
///
/// `Π_κ` comes from power iteration on the first-order chain over `E^κ`; longer
/// words extend it by the kernel, `Π(x_1^l) = Π(x_1^κ) p(x_{κ+1} | x_1^κ) ...`.
pub fn stationary_distribution(
    tensor: &TransitionTensor,
    l: usize,
    opts: StationaryOptions,
) -> Result<WordDistribution> {
    let m = tensor.m;
    let kappa = tensor.kappa;
    if l < kappa {
        return Err(Error::invalid(format!("word length {l} is below the chain order {kappa}")));
    }
    let states = tensor.context_count();

    let mut pi = vec![1.0 / states as f64; states];
    if states > 1 {
        let mut next = vec![0.0; states];
        let mut residual = f64::INFINITY;
        let mut converged = false;
        for _ in 0..opts.max_iterations {
            next.iter_mut().for_each(|x| *x = 0.0);
            for (v, &mass) in pi.iter().enumerate() {
                let row = tensor.row(v as u64);
                let shifted = (v * m) % states;
                for (a, &p) in row.iter().enumerate() {
                    next[shifted + a] += mass * p;
                }
            }
            let norm: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= norm);
            residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut pi, &mut next);
            if residual < opts.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical {
                message: format!("power iteration did not converge in {} iterations", opts.max_iterations),
                residual,
            });
        }
    }

    // extend one symbol at a time
    let mut probs = pi;
    for len in kappa..l {
        let space = word_space(m, len + 1)? as usize;
        let mut longer = vec![0.0; space];
        for (code, &mass) in probs.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let ctx = if kappa == 0 { 0 } else { code as u64 % states as u64 };
            for (a, &p) in tensor.row(ctx).iter().enumerate() {
                longer[code * m + a] = mass * p;
            }
        }
        probs = longer;
        debug_assert_eq!(probs.len(), space);
    }
    Ok(WordDistribution { m, len: l, probs })
}
