//! Recovery protocol: the artifact the architect synthesizes and the
//! executive executes.
//!
//! Wire format (frozen; the executive prompt embeds it verbatim):
//!
//! ```text
//! PROTOCOL
//! STEP 1: <imperative instruction>
//! STEP 2: ...
//! CHECKPOINT: <verification rule>
//! PURGE intent=<intent_id>: <reason>
//! END PROTOCOL
//! ```
//!
//! Granularity tiers bound the step count: a hyper-compressed protocol is
//! exactly one fused step, optimal is exactly three, verbose is ten or more.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GranularityTier {
    HyperCompressed,
    Optimal,
    Verbose,
}

impl GranularityTier {
    pub const ALL: [GranularityTier; 3] =
        [GranularityTier::HyperCompressed, GranularityTier::Optimal, GranularityTier::Verbose];

    pub fn name(self) -> &'static str {
        match self {
            GranularityTier::HyperCompressed => "hyper_compressed",
            GranularityTier::Optimal => "optimal",
            GranularityTier::Verbose => "verbose",
        }
    }

    /// Inclusive step bounds; `None` means unbounded above.
    pub fn step_bounds(self) -> (u32, Option<u32>) {
        match self {
            GranularityTier::HyperCompressed => (1, Some(1)),
            GranularityTier::Optimal => (3, Some(3)),
            GranularityTier::Verbose => (10, None),
        }
    }

    /// Step count an architect is asked to produce for this tier.
    pub fn step_target(self) -> u32 {
        match self {
            GranularityTier::HyperCompressed => 1,
            GranularityTier::Optimal => 3,
            GranularityTier::Verbose => 12,
        }
    }

    pub fn admits(self, steps: u32) -> bool {
        let (lo, hi) = self.step_bounds();
        steps >= lo && hi.is_none_or(|h| steps <= h)
    }
}

impl std::str::FromStr for GranularityTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hyper_compressed" => Ok(GranularityTier::HyperCompressed),
            "optimal" => Ok(GranularityTier::Optimal),
            "verbose" => Ok(GranularityTier::Verbose),
            other => Err(format!("unknown granularity tier: {other}")),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("malformed protocol: {detail}")]
    Malformed { detail: String },

    #[error("{steps} steps violate the {} tier bounds", tier.name())]
    StepBounds { tier: GranularityTier, steps: u32 },

    #[error("no purge directive names the superseded intent {g1_id}")]
    MissingPurge { g1_id: String },

    #[error("{} protocols require at least one checkpoint", tier.name())]
    MissingCheckpoints { tier: GranularityTier },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurgeDirective {
    pub superseded_intent_id: String,
    pub directive: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    pub protocol_id: String,
    pub steps: Vec<String>,
    pub checkpoints: Vec<String>,
    pub purge_directives: Vec<PurgeDirective>,
    pub tier: GranularityTier,
    pub source_architect: String,
}

impl Protocol {
    /// Renders the frozen wire format. `parse(render(p)) == p` for any valid
    /// protocol (grouping order steps / checkpoints / purges is canonical).
    pub fn render(&self) -> String {
        let mut out = String::from("PROTOCOL\n");
        for (i, step) in self.steps.iter().enumerate() {
            out.push_str(&format!("STEP {}: {step}\n", i + 1));
        }
        for checkpoint in &self.checkpoints {
            out.push_str(&format!("CHECKPOINT: {checkpoint}\n"));
        }
        for purge in &self.purge_directives {
            out.push_str(&format!(
                "PURGE intent={}: {}\n",
                purge.superseded_intent_id, purge.directive
            ));
        }
        out.push_str("END PROTOCOL");
        out
    }

    /// Parses architect output. Tolerates blank lines and markdown fences,
    /// rejects anything else outside the wire grammar. Step numbers must run
    /// 1..n in order.
    pub fn parse(
        text: &str,
        tier: GranularityTier,
        source_architect: &str,
        protocol_id: String,
    ) -> Result<Self, ProtocolError> {
        let malformed =
            |detail: &str| ProtocolError::Malformed { detail: detail.to_string() };
        let mut steps = Vec::new();
        let mut checkpoints = Vec::new();
        let mut purges = Vec::new();
        let mut in_block = false;
        let mut closed = false;

        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("```") {
                continue;
            }
            if !in_block {
                if line == "PROTOCOL" {
                    in_block = true;
                    continue;
                }
                // Prose before the block is tolerated; content after is not.
                if closed {
                    return Err(malformed("content after END PROTOCOL"));
                }
                continue;
            }
            if line == "END PROTOCOL" {
                in_block = false;
                closed = true;
                continue;
            }
            if let Some(rest) = line.strip_prefix("STEP ") {
                let (num, body) = rest
                    .split_once(':')
                    .ok_or_else(|| malformed("STEP line missing colon"))?;
                let n: usize = num
                    .trim()
                    .parse()
                    .map_err(|_| malformed("STEP line has a non-numeric index"))?;
                if n != steps.len() + 1 {
                    return Err(malformed(&format!(
                        "STEP {n} out of order; expected {}",
                        steps.len() + 1
                    )));
                }
                let body = body.trim();
                if body.is_empty() {
                    return Err(malformed(&format!("STEP {n} is empty")));
                }
                steps.push(body.to_string());
            } else if let Some(rest) = line.strip_prefix("CHECKPOINT:") {
                let body = rest.trim();
                if body.is_empty() {
                    return Err(malformed("empty CHECKPOINT"));
                }
                checkpoints.push(body.to_string());
            } else if let Some(rest) = line.strip_prefix("PURGE intent=") {
                let (id, body) = rest
                    .split_once(':')
                    .ok_or_else(|| malformed("PURGE line missing colon"))?;
                let id = id.trim();
                let body = body.trim();
                if id.is_empty() || body.is_empty() {
                    return Err(malformed("PURGE needs an intent id and a directive"));
                }
                purges.push(PurgeDirective {
                    superseded_intent_id: id.to_string(),
                    directive: body.to_string(),
                });
            } else {
                return Err(malformed(&format!("unrecognized line: {line}")));
            }
        }
        if !closed {
            return Err(malformed("missing PROTOCOL/END PROTOCOL block"));
        }
        Ok(Self {
            protocol_id,
            steps,
            checkpoints,
            purge_directives: purges,
            tier,
            source_architect: source_architect.to_string(),
        })
    }

    /// Structural validation against the tier contract and the intent the
    /// protocol is supposed to purge.
    pub fn validate(&self, g1_id: &str) -> Result<(), ProtocolError> {
        let steps = self.steps.len() as u32;
        if !self.tier.admits(steps) {
            return Err(ProtocolError::StepBounds { tier: self.tier, steps });
        }
        if self.tier != GranularityTier::HyperCompressed && self.checkpoints.is_empty() {
            return Err(ProtocolError::MissingCheckpoints { tier: self.tier });
        }
        if !self.purge_directives.iter().any(|p| p.superseded_intent_id == g1_id) {
            return Err(ProtocolError::MissingPurge { g1_id: g1_id.to_string() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Protocol {
        Protocol {
            protocol_id: "sop-1".into(),
            steps: vec!["Restate the requirement.".into(), "Verify it.".into(), "Answer.".into()],
            checkpoints: vec!["Answer names the amended value.".into()],
            purge_directives: vec![PurgeDirective {
                superseded_intent_id: "g1-x".into(),
                directive: "Superseded.".into(),
            }],
            tier: GranularityTier::Optimal,
            source_architect: "synthetic".into(),
        }
    }

    #[test]
    fn render_parse_roundtrip() {
        let p = sample();
        let back =
            Protocol::parse(&p.render(), p.tier, &p.source_architect, p.protocol_id.clone())
                .unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn out_of_order_steps_are_rejected() {
        let text = "PROTOCOL\nSTEP 2: b.\nSTEP 1: a.\nEND PROTOCOL";
        let err = Protocol::parse(text, GranularityTier::Optimal, "a", "p".into()).unwrap_err();
        assert!(matches!(err, ProtocolError::Malformed { .. }));
    }

    #[test]
    fn tier_bounds_are_enforced() {
        let mut p = sample();
        p.steps.push("One too many.".into());
        assert!(matches!(
            p.validate("g1-x"),
            Err(ProtocolError::StepBounds { steps: 4, .. })
        ));
        let mut hyper = sample();
        hyper.tier = GranularityTier::HyperCompressed;
        assert!(matches!(hyper.validate("g1-x"), Err(ProtocolError::StepBounds { .. })));
        hyper.steps.truncate(1);
        hyper.checkpoints.clear();
        assert!(hyper.validate("g1-x").is_ok());
    }

    #[test]
    fn purge_must_name_the_superseded_intent() {
        let p = sample();
        assert!(matches!(
            p.validate("g1-other"),
            Err(ProtocolError::MissingPurge { .. })
        ));
        assert!(p.validate("g1-x").is_ok());
    }

    #[test]
    fn verbose_requires_checkpoints_and_ten_steps() {
        let mut p = sample();
        p.tier = GranularityTier::Verbose;
        p.steps = (0..10).map(|i| format!("Step body {i}.")).collect();
        assert!(p.validate("g1-x").is_ok());
        p.checkpoints.clear();
        assert!(matches!(p.validate("g1-x"), Err(ProtocolError::MissingCheckpoints { .. })));
    }

    #[test]
    fn markdown_fences_are_tolerated() {
        let text = "Here is the protocol:\n```\nPROTOCOL\nSTEP 1: Do it.\nPURGE intent=g1-x: Old.\nEND PROTOCOL\n```";
        let p = Protocol::parse(text, GranularityTier::HyperCompressed, "a", "p".into()).unwrap();
        assert_eq!(p.steps.len(), 1);
    }
}
