//! Sliding-window word counts `N(w | X_1^n)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sample::{word_space, Sample, Word};

/// Dense counting is used while the word space stays below this many cells.
const DENSE_LIMIT: u64 = 1 << 16;

/// Occurrence counts of every length-`l` word in a sample.
///
/// Keys are base-`m` word codes; absent keys have count zero. Iteration is in
/// ascending code order, so anything summed over a table is reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    word_length: usize,
    alphabet_size: usize,
    window_count: u64,
    counts: BTreeMap<u64, u64>,
}

impl CountTable {
    pub fn word_length(&self) -> usize {
        self.word_length
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Number of windows, `n - l + 1` (or `n` for the empty word).
    pub fn window_count(&self) -> u64 {
        self.window_count
    }

    pub fn get(&self, code: u64) -> u64 {
        self.counts.get(&code).copied().unwrap_or(0)
    }

    /// `(code, count)` pairs with positive count, ascending by code.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&c, &n)| (c, n))
    }

    /// Number of distinct words observed.
    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Counts every window of length `l` in the sample.
///
/// For `l = 0` the table holds the single entry `N(.) = n`.
pub fn count_words(sample: &Sample, l: usize) -> Result<CountTable> {
    let n = sample.len();
    if l > n {
        return Err(Error::invalid(format!(
            "word length l = {l} exceeds sample length n = {n}"
        )));
    }
    let m = sample.alphabet_size();
    let space = word_space(m, l)?;

    if l == 0 {
        return Ok(CountTable {
            word_length: 0,
            alphabet_size: m,
            window_count: n as u64,
            counts: BTreeMap::from([(0, n as u64)]),
        });
    }

    let symbols = sample.symbols();
    let windows = n - l + 1;
    let base = m as u64;
    // leading digit weight, m^(l-1)
    let lead = space / base;

    let mut code = symbols[..l - 1].iter().fold(0u64, |c, s| c * base + s.0 as u64);
    let codes = symbols[l - 1..].iter().map(move |s| {
        code = (code % lead) * base + s.0 as u64;
        code
    });

    let counts = if space <= DENSE_LIMIT {
        let mut dense = vec![0u64; space as usize];
        for c in codes {
            dense[c as usize] += 1;
        }
        dense
            .into_iter()
            .enumerate()
            .filter(|&(_, k)| k > 0)
            .map(|(c, k)| (c as u64, k))
            .collect()
    } else {
        let mut all: Vec<u64> = codes.collect();
        all.sort_unstable();
        let mut counts = BTreeMap::new();
        for c in all {
            *counts.entry(c).or_insert(0) += 1;
        }
        counts
    };

    Ok(CountTable {
        word_length: l,
        alphabet_size: m,
        window_count: windows as u64,
        counts,
    })
}

/// `N(w | X_1^n)`, zero when `w` never occurs.
pub fn count_of(table: &CountTable, w: &Word) -> Result<u64> {
    if w.len != table.word_length {
        return Err(Error::invalid(format!(
            "word of length {} queried against a table of length-{} words",
            w.len, table.word_length
        )));
    }
    Ok(table.get(w.code))
}

/// Words with positive count, ascending by code.
pub fn positive_contexts(table: &CountTable) -> Vec<(Word, u64)> {
    table
        .iter()
        .map(|(code, n)| {
            (
                Word {
                    code,
                    len: table.word_length,
                },
                n,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(labels: &[u32], m: usize) -> Sample {
        Sample::from_labels(labels, m).unwrap()
    }

    fn word(labels: &[u32], m: usize) -> Word {
        Word::from_labels(labels, m).unwrap()
    }

    #[test]
    fn alternating_pairs() {
        let t = count_words(&sample(&[1, 2, 1, 2, 1], 2), 2).unwrap();
        assert_eq!(count_of(&t, &word(&[1, 2], 2)).unwrap(), 2);
        assert_eq!(count_of(&t, &word(&[2, 1], 2)).unwrap(), 2);
        assert_eq!(count_of(&t, &word(&[1, 1], 2)).unwrap(), 0);
        assert_eq!(count_of(&t, &word(&[2, 2], 2)).unwrap(), 0);
        assert_eq!(t.window_count(), 4);
    }

    #[test]
    fn constant_sequence() {
        let t = count_words(&sample(&[1, 1, 1, 1], 2), 1).unwrap();
        assert_eq!(count_of(&t, &word(&[1], 2)).unwrap(), 4);
    }

    #[test]
    fn empty_word_counts_n() {
        let t = count_words(&sample(&[1, 2, 2, 1, 1, 2, 1], 2), 0).unwrap();
        assert_eq!(count_of(&t, &Word::EMPTY).unwrap(), 7);
        assert_eq!(t.total(), 7);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let t = count_words(&sample(&[1, 2, 1, 2, 1], 2), 2).unwrap();
        assert!(count_of(&t, &word(&[1], 2)).is_err());
    }

    #[test]
    fn word_longer_than_sample_is_rejected() {
        let err = count_words(&sample(&[1, 2, 1], 2), 4).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("l = 4") && msg.contains("n = 3"), "{msg}");
    }

    #[test]
    fn full_length_word() {
        let t = count_words(&sample(&[1, 2, 1], 2), 3).unwrap();
        assert_eq!(t.window_count(), 1);
        assert_eq!(positive_contexts(&t), vec![(word(&[1, 2, 1], 2), 1)]);
    }

    #[test]
    fn positive_contexts_in_code_order() {
        let t = count_words(&sample(&[1, 2, 1, 2, 1], 2), 2).unwrap();
        assert_eq!(
            positive_contexts(&t),
            vec![(word(&[1, 2], 2), 2), (word(&[2, 1], 2), 2)]
        );
        let t = count_words(&sample(&[1, 1, 1], 2), 3).unwrap();
        assert_eq!(positive_contexts(&t), vec![(word(&[1, 1, 1], 2), 1)]);
    }

    #[test]
    fn sparse_path_matches_dense_path() {
        // m = 20, l = 4 exceeds the dense limit
        let labels: Vec<u32> = (0..3000u32).map(|i| (i * 7 + i / 13) % 20 + 1).collect();
        let s = sample(&labels, 20);
        let t = count_words(&s, 4).unwrap();
        assert_eq!(t.total(), t.window_count());
        for (j, win) in s.symbols().windows(4).enumerate().take(50) {
            let w = Word::from_symbols(win, 20).unwrap();
            assert!(t.get(w.code) >= 1, "window {j} missing");
        }
    }
}
