//! Symbols, words and samples over a finite alphabet `E = {0, .., m-1}`.
//!
//! Symbols are stored 0-based. Everything a user reads or writes (sample
//! files, printed words) is 1-based.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single state of the chain, stored 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct Symbol(pub u32);

impl Symbol {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The 1-based label used in files and reports.
    pub fn label(self) -> u32 {
        self.0 + 1
    }
}

/// `m^len`, or an error when the word space does not fit in a `u64` code.
pub fn word_space(m: usize, len: usize) -> Result<u64> {
    let mut size: u64 = 1;
    for _ in 0..len {
        size = size
            .checked_mul(m as u64)
            .ok_or_else(|| Error::invalid(format!("word space {m}^{len} overflows a u64 code")))?;
    }
    Ok(size)
}

/// A fixed-length word, encoded in base `m` with the first symbol most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word {
    pub code: u64,
    pub len: usize,
}

impl Word {
    pub const EMPTY: Word = Word { code: 0, len: 0 };

    pub fn from_symbols(symbols: &[Symbol], m: usize) -> Result<Word> {
        word_space(m, symbols.len())?;
        let mut code = 0u64;
        for s in symbols {
            if s.index() >= m {
                return Err(Error::invalid(format!(
                    "symbol {} outside alphabet of size {m}",
                    s.label()
                )));
            }
            code = code * m as u64 + s.0 as u64;
        }
        Ok(Word { code, len: symbols.len() })
    }

    /// Builds a word from 1-based labels, the way words are written in tables.
    pub fn from_labels(labels: &[u32], m: usize) -> Result<Word> {
        let symbols = labels
            .iter()
            .map(|&l| {
                if l == 0 {
                    Err(Error::invalid("symbol labels are 1-based"))
                } else {
                    Ok(Symbol(l - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Word::from_symbols(&symbols, m)
    }

    pub fn symbols(&self, m: usize) -> Vec<Symbol> {
        let mut out = vec![Symbol(0); self.len];
        let mut code = self.code;
        for slot in out.iter_mut().rev() {
            *slot = Symbol((code % m as u64) as u32);
            code /= m as u64;
        }
        out
    }

    /// Renders the word with 1-based labels, e.g. `(1,2,3)`.
    pub fn display(&self, m: usize) -> String {
        let labels: Vec<String> = self.symbols(m).iter().map(|s| s.label().to_string()).collect();
        format!("({})", labels.join(","))
    }
}

/// A finite realization `X_1 .. X_n` of the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    symbols: Vec<Symbol>,
    alphabet_size: usize,
}

impl Sample {
    pub fn new(symbols: Vec<Symbol>, alphabet_size: usize) -> Result<Sample> {
        if alphabet_size < 2 {
            return Err(Error::invalid(format!(
                "alphabet size must be at least 2, got {alphabet_size}"
            )));
        }
        if symbols.is_empty() {
            return Err(Error::invalid("sample must contain at least one symbol"));
        }
        if let Some((pos, s)) = symbols
            .iter()
            .enumerate()
            .find(|(_, s)| s.index() >= alphabet_size)
        {
            return Err(Error::invalid(format!(
                "symbol {} at position {} outside alphabet of size {alphabet_size}",
                s.label(),
                pos + 1
            )));
        }
        Ok(Sample { symbols, alphabet_size })
    }

    /// Builds a sample from 1-based labels.
    pub fn from_labels(labels: &[u32], alphabet_size: usize) -> Result<Sample> {
        let symbols = labels
            .iter()
            .map(|&l| {
                if l == 0 {
                    Err(Error::invalid("symbol labels are 1-based"))
                } else {
                    Ok(Symbol(l - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Sample::new(symbols, alphabet_size)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Applies an alphabet relabeling `s -> perm[s]` to every symbol.
    pub fn relabel(&self, perm: &[u32]) -> Result<Sample> {
        let m = self.alphabet_size;
        let mut seen = vec![false; m];
        if perm.len() != m || !perm.iter().all(|&p| (p as usize) < m && !std::mem::replace(&mut seen[p as usize], true)) {
            return Err(Error::invalid("relabeling must be a permutation of the alphabet"));
        }
        let symbols = self.symbols.iter().map(|s| Symbol(perm[s.index()])).collect();
        Ok(Sample { symbols, alphabet_size: m })
    }

    /// FNV-1a over the symbol stream and alphabet size.
    pub fn checksum(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0100_0000_01b3;
        let mut h = OFFSET;
        for b in (self.alphabet_size as u64).to_le_bytes() {
            h = (h ^ b as u64).wrapping_mul(PRIME);
        }
        for s in &self.symbols {
            for b in s.0.to_le_bytes() {
                h = (h ^ b as u64).wrapping_mul(PRIME);
            }
        }
        h
    }

    /// Parses the plain-text sample format: whitespace-separated 1-based
    /// symbols, optionally preceded by an `m=<alphabet_size>` header line.
    /// Without a header the alphabet size is the largest symbol seen (at least 2).
    pub fn parse(text: &str) -> Result<Sample> {
        let mut declared: Option<usize> = None;
        let mut labels: Vec<u32> = Vec::new();
        let mut token_index = 0usize;
        let mut seen_content = false;

        for (line_no, line) in text.lines().enumerate() {
            let line_no = line_no + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !seen_content {
                seen_content = true;
                if let Some(rest) = trimmed.strip_prefix("m=") {
                    let m: usize = rest.trim().parse().map_err(|_| Error::Parse {
                        line: line_no,
                        token: 0,
                        message: format!("malformed alphabet header {trimmed:?}"),
                    })?;
                    if m < 2 {
                        return Err(Error::Parse {
                            line: line_no,
                            token: 0,
                            message: format!("alphabet size must be at least 2, got {m}"),
                        });
                    }
                    declared = Some(m);
                    continue;
                }
            }
            for tok in trimmed.split_whitespace() {
                token_index += 1;
                let value: u32 = tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    token: token_index,
                    message: format!("expected a positive integer symbol, got {tok:?}"),
                })?;
                if value == 0 {
                    return Err(Error::Parse {
                        line: line_no,
                        token: token_index,
                        message: "symbols are 1-based; 0 is not a valid symbol".into(),
                    });
                }
                if let Some(m) = declared {
                    if value as usize > m {
                        return Err(Error::Parse {
                            line: line_no,
                            token: token_index,
                            message: format!("symbol {value} exceeds declared alphabet size m={m}"),
                        });
                    }
                }
                labels.push(value);
            }
        }

        if labels.is_empty() {
            return Err(Error::Parse {
                line: 0,
                token: 0,
                message: "sample file contains no symbols".into(),
            });
        }
        let m = declared.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(2).max(2) as usize);
        Sample::from_labels(&labels, m)
    }

    pub fn read(path: &Path) -> Result<Sample> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Sample::parse(&text)
    }

    /// Serializes in the sample file format, with an explicit `m=` header.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("m={}\n", self.alphabet_size);
        for chunk in self.symbols.chunks(40) {
            let line: Vec<String> = chunk.iter().map(|s| s.label().to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl fmt::Display for Sample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sample(n={}, m={})", self.len(), self.alphabet_size)
    }
}
