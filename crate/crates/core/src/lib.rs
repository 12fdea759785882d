//! Markov chain order estimation.
//!
//! The main estimator compares, for every context `α` up to a probe bound
//! `B`, how strongly the symbol after `α` depends on the symbol before it,
//! using a chi-square divergence statistic normalized on the iterated-logarithm
//! scale. AIC, BIC and EDC are provided as baselines, together with an MTD
//! chain generator and a Monte Carlo harness that compares all of them.

pub mod baseline;
pub mod counts;
pub mod divergence;
pub mod error;
pub mod gdl;
pub mod generator;
pub mod harness;
pub mod sample;

pub use baseline::{estimate_order_penalized, log_max_likelihood, penalized_score, PenaltyKind, PenaltySpec};
pub use counts::{count_of, count_words, positive_contexts, CountTable};
pub use divergence::{
    chi2_divergence, delta2_hat, expected_frequencies, f_divergence, kl_divergence, ContingencyTable,
    Delta2Config, DenominatorMode, DiscreteDistribution,
};
pub use error::{Error, Result};
pub use gdl::{
    binarize, context_table, estimate_order, gdl, gdl_profile, ldl, t_map, DependencyProfile, GdlParams,
    OrderEstimate, OrderVerdict,
};
pub use generator::{
    build_tensor, builtin_examples, simulate, stationary_distribution, MtdSpec, TransitionTensor,
};
pub use sample::{Sample, Symbol, Word};
