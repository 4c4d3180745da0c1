//! Context-size accounting.
//!
//! Budgets and seed geometry are expressed in estimator tokens, not provider
//! tokens: an estimate is `ceil(chars / chars_per_token)` over the rendered
//! context. This keeps forging deterministic and backend-agnostic; provider
//! tokenizers differ, but positional fractions survive any roughly linear
//! tokenizer. The divisor is configurable and defaults to 4.

use serde::{Deserialize, Serialize};

pub const DEFAULT_CHARS_PER_TOKEN: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEstimator {
    pub chars_per_token: u32,
}

impl Default for TokenEstimator {
    fn default() -> Self {
        Self { chars_per_token: DEFAULT_CHARS_PER_TOKEN }
    }
}

impl TokenEstimator {
    /// Panics if `chars_per_token` is zero; a zero divisor has no meaning.
    pub fn new(chars_per_token: u32) -> Self {
        assert!(chars_per_token > 0, "chars_per_token must be positive");
        Self { chars_per_token }
    }

    /// Token estimate for a text, counting Unicode scalar values as chars.
    pub fn estimate(&self, text: &str) -> u64 {
        self.estimate_chars(text.chars().count() as u64)
    }

    /// Token estimate for a known char count: ceil(chars / chars_per_token).
    pub fn estimate_chars(&self, chars: u64) -> u64 {
        chars.div_ceil(self.chars_per_token as u64)
    }
}

/// Token estimate with the default divisor of 4.
pub fn estimate_tokens(text: &str) -> u64 {
    TokenEstimator::default().estimate(text)
}
