//! Frozen prompt text for every strategy pass. Any wording change must bump
//! [`PROMPT_VERSION`]; run records carry the version so stored results are
//! never compared across prompt revisions.

use crate::strategy::protocol::GranularityTier;

pub const PROMPT_VERSION: &str = "pv1";

/// Final-answer instruction appended as the last user turn of a vanilla run
/// and reused as the closing instruction of a reflexion task pass.
pub fn task_instruction(trajectory_id: &str) -> String {
    format!(
        "TASK [{trajectory_id}]: Based on the entire context above, state the single final \
         choice that satisfies the user's most recent confirmed requirement. Answer in one \
         sentence and name the confirmed choice exactly."
    )
}

/// Self-critique instruction for the second reflexion pass.
pub fn critique_instruction() -> &'static str {
    "Review your previous answer against the full context. If any later amendment supersedes \
     the requirement you answered, correct yourself now: re-check every reference fragment \
     the amendment depends on, then restate the final choice in one sentence and name the \
     confirmed choice exactly."
}

fn tier_rule(tier: GranularityTier) -> &'static str {
    match tier {
        GranularityTier::HyperCompressed => {
            "exactly 1 step fusing retrieval, verification, and the answer"
        }
        GranularityTier::Optimal => "exactly 3 steps and at least one CHECKPOINT",
        GranularityTier::Verbose => "at least 10 steps and at least one CHECKPOINT",
    }
}

/// Architect pass: asks for a recovery protocol in the wire format. The
/// trajectory id leads the prompt so scripted fixtures can key on a unique
/// prefix per trajectory.
pub fn architect_prompt(
    trajectory_id: &str,
    g1_id: &str,
    tier: GranularityTier,
    context: &str,
) -> String {
    format!(
        "ARCHITECT DIRECTIVE [{trajectory_id}]: the session below contains a goal \
         contradiction; a later amendment supersedes the earlier intent {g1_id}. Synthesize a \
         recovery protocol in exactly this wire format:\n\
         PROTOCOL\n\
         STEP <n>: <imperative instruction>\n\
         CHECKPOINT: <verification rule>\n\
         PURGE intent=<intent_id>: <reason>\n\
         END PROTOCOL\n\
         Constraints: {rule}; number steps from 1; include at least one PURGE naming the \
         superseded intent id; reply with the protocol block only.\n\
         SESSION CONTEXT:\n{context}",
        rule = tier_rule(tier),
    )
}

/// Executive pass: one user message carrying the rendered protocol verbatim,
/// then the session context, then the execution instruction.
pub fn executive_prompt(rendered_protocol: &str, context: &str, steps: u32) -> String {
    format!(
        "{rendered_protocol}\n\
         ---\n\
         SESSION CONTEXT:\n{context}\n\
         ---\n\
         EXECUTIVE DIRECTIVE: execute the protocol above step by step against the session \
         context. Tag each step's result with [S1] through [S{steps}] in order. Obey every \
         PURGE directive; never reaffirm a purged intent. Finish with one sentence stating \
         the final choice and naming it exactly."
    )
}

/// Corrective re-prompt after an unparseable or invalid architect reply.
pub fn architect_reprompt(error: &str) -> String {
    format!(
        "Your previous reply was not a valid protocol ({error}). Reply again with only the \
         PROTOCOL ... END PROTOCOL block, observing every constraint."
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architect_prompts_differ_by_trajectory_within_the_prefix() {
        let a = architect_prompt("shallow-d1", "g1-d1", GranularityTier::Optimal, "ctx");
        let b = architect_prompt("shallow-d2", "g1-d2", GranularityTier::Optimal, "ctx");
        assert_ne!(&a[..60], &b[..60]);
    }

    #[test]
    fn executive_prompt_embeds_protocol_first() {
        let p = executive_prompt("PROTOCOL\nSTEP 1: x\nEND PROTOCOL", "ctx", 1);
        assert!(p.starts_with("PROTOCOL\n"));
        assert!(p.contains("[S1] through [S1]"));
    }
}
