//! Shared language-model surface used by the tuner and sweep harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::ReadSet;

/// Average perplexity of a corpus under a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub avg_perplexity: f64,
    /// Number of scored tokens (words or characters).
    pub scored: u64,
    /// Tokens that could not be scored (words with `N`, `N` characters).
    pub skipped: u64,
    /// Reads too short to contribute any token.
    pub skipped_reads: u64,
    /// Sum of negative natural-log probabilities.
    pub sum_neg_log_prob: f64,
    /// The same sum in bits.
    pub sum_neg_log2_prob: f64,
}

impl PerplexityReport {
    /// Builds a report from a sum of `-log2 p`. Accumulating in bits keeps
    /// power-of-two probabilities exact, so a uniform model over four
    /// symbols reports exactly 4.
    pub fn from_bits(sum_neg_log2_prob: f64, scored: u64, skipped: u64, skipped_reads: u64) -> Result<Self> {
        if scored == 0 {
            return Err(Error::UndefinedPerplexity);
        }
        Ok(PerplexityReport {
            avg_perplexity: (sum_neg_log2_prob / scored as f64).exp2(),
            scored,
            skipped,
            skipped_reads,
            sum_neg_log_prob: sum_neg_log2_prob * std::f64::consts::LN_2,
            sum_neg_log2_prob,
        })
    }
}

/// Anything that can assign an average perplexity to a read set.
pub trait LanguageModel: Send + Sync {
    fn score(&self, reads: &ReadSet) -> Result<PerplexityReport>;

    /// Short label used in reports ("ngram", "charrnn").
    fn kind(&self) -> &'static str;
}
