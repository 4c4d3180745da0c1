//! Wire types for dialogue sources and forged trajectories.
//!
//! These structs are serialized into the experiment stores, so field names
//! and enum spellings are frozen. `Trajectory::validate` re-checks the
//! geometry invariants a builder is supposed to guarantee; it is cheap and
//! runs on every forged trajectory before it is stored.

use serde::{Deserialize, Serialize};

use crate::tokens::TokenEstimator;

use super::ForgeError;

/// Tolerance on a seed's realized position fraction, in absolute terms.
pub const SEED_FRACTION_TOLERANCE: f64 = 0.02;
/// Tolerance on the realized token count relative to the budget.
pub const BUDGET_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Shallow,
    HighEntropy,
    Hijack,
    Equidistant,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Shallow, Tier::HighEntropy, Tier::Hijack, Tier::Equidistant];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Shallow => "shallow",
            Tier::HighEntropy => "high_entropy",
            Tier::Hijack => "hijack",
            Tier::Equidistant => "equidistant",
        }
    }
}

impl std::str::FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shallow" => Ok(Tier::Shallow),
            "high_entropy" => Ok(Tier::HighEntropy),
            "hijack" => Ok(Tier::Hijack),
            "equidistant" => Ok(Tier::Equidistant),
            other => Err(format!("unknown tier: {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self { speaker: Speaker::User, text: text.into() }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self { speaker: Speaker::System, text: text.into() }
    }
}

/// A source dialogue from the corpus store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSource {
    pub id: String,
    pub turns: Vec<Turn>,
    #[serde(rename = "domains", default)]
    pub domain_tags: Vec<String>,
}

/// The archived intent (g1) and the superseding update (g2).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentPair {
    pub g1_id: String,
    pub g2_id: String,
    pub g1_text: String,
    pub g2_text: String,
    /// Contradiction class recorded at generation time ("price_cheap" etc. for
    /// templated updates, "dynamic" for backend-generated ones).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contradiction_class: Option<String>,
}

impl IntentPair {
    pub fn validate(&self) -> Result<(), ForgeError> {
        if self.g1_id == self.g2_id || self.g1_text == self.g2_text {
            return Err(ForgeError::InvalidIntentPair {
                detail: "g1 and g2 must differ in both id and text".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub fact_id: String,
    pub statement: String,
    /// Id of the fact that must be known before this one is usable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depends_on: Option<String>,
}

/// An ordered dependency chain of facts; the answer signal is derivable only
/// from the last fact given all of its predecessors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactChain {
    pub facts: Vec<Fact>,
    pub answer_signal: String,
}

impl FactChain {
    /// Checks the linear dependency structure: first fact has no parent, each
    /// later fact depends on its immediate predecessor.
    pub fn validate(&self) -> Result<(), ForgeError> {
        if self.facts.is_empty() {
            return Err(ForgeError::InvalidFactChain { detail: "chain is empty".into() });
        }
        for (i, fact) in self.facts.iter().enumerate() {
            let expected = if i == 0 { None } else { Some(self.facts[i - 1].fact_id.as_str()) };
            if fact.depends_on.as_deref() != expected {
                return Err(ForgeError::InvalidFactChain {
                    detail: format!("fact {} has wrong depends_on", fact.fact_id),
                });
            }
        }
        if self.answer_signal.is_empty() {
            return Err(ForgeError::InvalidFactChain { detail: "empty answer_signal".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Fact,
    Intent,
    Decoy,
}

/// Where a payload was asked to go and where it actually landed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub payload_kind: PayloadKind,
    pub payload_id: String,
    /// Requested position as a fraction of the total context, in [0, 1].
    pub position_fraction: f64,
    /// Token offset of the payload turn's first char in the rendered context.
    pub placed_offset_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub tier: Tier,
    pub assembled_turns: Vec<Turn>,
    pub token_count: u64,
    pub budget_tokens: u64,
    pub seeds: Vec<SeedSpec>,
    pub intent_pair: IntentPair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact_chain: Option<FactChain>,
    pub rng_seed: u64,
    /// Ground-truth verification token a correct final answer must contain.
    pub expected_signal: String,
}

/// Renders turns the way every consumer measures them: each turn's text
/// followed by a newline. Token geometry is defined over this rendering.
pub fn render_turns(turns: &[Turn]) -> String {
    let mut out = String::with_capacity(turns.iter().map(|t| t.text.len() + 1).sum());
    for turn in turns {
        out.push_str(&turn.text);
        out.push('\n');
    }
    out
}

impl Trajectory {
    /// Realized position fraction of a seed.
    pub fn seed_fraction(&self, seed: &SeedSpec) -> f64 {
        seed.placed_offset_tokens as f64 / self.token_count as f64
    }

    pub fn find_seed(&self, kind: PayloadKind, payload_id: &str) -> Option<&SeedSpec> {
        self.seeds.iter().find(|s| s.payload_kind == kind && s.payload_id == payload_id)
    }

    /// Re-checks the geometry invariants against the rendered turns.
    pub fn validate(&self, est: TokenEstimator) -> Result<(), ForgeError> {
        self.intent_pair.validate()?;
        if let Some(chain) = &self.fact_chain {
            chain.validate()?;
        }
        if self.expected_signal.is_empty() {
            return Err(ForgeError::InvalidTrajectory {
                id: self.id.clone(),
                detail: "empty expected_signal".into(),
            });
        }

        let rendered = render_turns(&self.assembled_turns);
        let recount = est.estimate(&rendered);
        if recount != self.token_count {
            return Err(ForgeError::InvalidTrajectory {
                id: self.id.clone(),
                detail: format!("token_count {} but rendering measures {}", self.token_count, recount),
            });
        }
        let budget_err =
            (self.token_count as f64 - self.budget_tokens as f64).abs() / self.budget_tokens as f64;
        if budget_err > BUDGET_TOLERANCE {
            return Err(ForgeError::InvalidTrajectory {
                id: self.id.clone(),
                detail: format!(
                    "token_count {} outside {}% of budget {}",
                    self.token_count,
                    BUDGET_TOLERANCE * 100.0,
                    self.budget_tokens
                ),
            });
        }

        // Every seed must start exactly at a turn boundary and sit within
        // tolerance of its requested fraction.
        let mut boundaries = std::collections::BTreeSet::new();
        let mut prefix_chars = 0u64;
        for turn in &self.assembled_turns {
            boundaries.insert(est.estimate_chars(prefix_chars));
            prefix_chars += turn.text.chars().count() as u64 + 1;
        }
        for seed in &self.seeds {
            if !boundaries.contains(&seed.placed_offset_tokens) {
                return Err(ForgeError::InvalidTrajectory {
                    id: self.id.clone(),
                    detail: format!("seed {} offset is not a turn boundary", seed.payload_id),
                });
            }
            let err = (self.seed_fraction(seed) - seed.position_fraction).abs();
            if err > SEED_FRACTION_TOLERANCE {
                return Err(ForgeError::InvalidTrajectory {
                    id: self.id.clone(),
                    detail: format!(
                        "seed {} landed {:.4} away from requested fraction {:.4}",
                        seed.payload_id, err, seed.position_fraction
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStyle {
    SystemLog,
}

/// A padding block of synthetic system-log noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseBlock {
    pub text: String,
    pub style: NoiseStyle,
    pub rng_seed: u64,
}
