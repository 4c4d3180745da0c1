//! Strategy runners: how a trajectory is presented to a backend.
//!
//! Three strategies are compared on identical trajectories:
//!
//! * **vanilla**: the assembled turns as a plain chat history plus one task
//!   instruction; a single completion call.
//! * **ssrp**: an architect call synthesizes a recovery protocol, then an
//!   executive call executes that protocol against the context. The executive
//!   sees the rendered protocol verbatim, ahead of the context, in one user
//!   message.
//! * **reflexion**: the vanilla call followed by a self-critique call that
//!   carries the first answer back with a correction instruction.
//!
//! Runners never panic on backend failure; errors are recorded on the run
//! record so scoring can count them as failures and the ledger stays
//! append-only.

pub mod prompts;
pub mod protocol;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{
    ChatMessage, CompletionBackend, CompletionParams, CompletionRequest, PassKind, RunBinding,
};
use crate::forge::{render_turns, Speaker, Trajectory};
use crate::tokens::TokenEstimator;
use protocol::{GranularityTier, Protocol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Vanilla,
    Ssrp,
    Reflexion,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] =
        [StrategyKind::Vanilla, StrategyKind::Ssrp, StrategyKind::Reflexion];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Vanilla => "vanilla",
            StrategyKind::Ssrp => "ssrp",
            StrategyKind::Reflexion => "reflexion",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(StrategyKind::Vanilla),
            "ssrp" => Ok(StrategyKind::Ssrp),
            "reflexion" => Ok(StrategyKind::Reflexion),
            other => Err(format!("unknown strategy: {other}")),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Failure captured on a run record instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunError {
    /// Which pass failed: `task`, `critique`, `architect`, or `executive`.
    pub stage: String,
    pub detail: String,
}

/// Everything one strategy execution produced. Serialized to the run store;
/// wall time is measured but deliberately kept out of the serialized form so
/// stored runs stay byte-identical across machines and parallelism levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRunRecord {
    pub trajectory_id: String,
    pub strategy: StrategyKind,
    /// Backend id per call, in call order.
    pub backend_ids: Vec<String>,
    /// Full message list per call, in call order.
    pub prompts: Vec<Vec<ChatMessage>>,
    /// Raw response per call, in call order.
    pub responses: Vec<String>,
    /// Response the judge scores; empty when `error` is set.
    pub final_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    /// True completion calls made, including corrective re-prompts.
    pub call_count: u32,
    #[serde(skip)]
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RunError>,
    pub prompt_version: String,
}

impl AgentRunRecord {
    fn new(trajectory_id: &str, strategy: StrategyKind) -> Self {
        Self {
            trajectory_id: trajectory_id.to_string(),
            strategy,
            backend_ids: Vec::new(),
            prompts: Vec::new(),
            responses: Vec::new(),
            final_response: String::new(),
            protocol: None,
            call_count: 0,
            wall_time_ms: 0,
            error: None,
            prompt_version: prompts::PROMPT_VERSION.to_string(),
        }
    }
}

/// Per-run knobs shared by all strategies.
#[derive(Debug, Clone)]
pub struct StrategyContext {
    pub params: CompletionParams,
    /// Seed threaded through every backend binding of this run.
    pub run_seed: u64,
    /// When set, the executive sees only the trailing window of the context,
    /// measured in estimated tokens. `None` means the full history.
    pub executive_window_tokens: Option<u64>,
    pub estimator: TokenEstimator,
}

impl StrategyContext {
    pub fn new(params: CompletionParams, run_seed: u64) -> Self {
        Self { params, run_seed, executive_window_tokens: None, estimator: TokenEstimator::default() }
    }
}

/// Chat-history form of a trajectory: user turns stay user turns, forged
/// system turns are presented as assistant turns, and the task instruction
/// closes the list.
fn dialogue_messages(trajectory: &Trajectory) -> Vec<ChatMessage> {
    let mut messages: Vec<ChatMessage> = trajectory
        .assembled_turns
        .iter()
        .map(|turn| match turn.speaker {
            Speaker::User => ChatMessage::user(&turn.text),
            Speaker::System => ChatMessage::assistant(&turn.text),
        })
        .collect();
    messages.push(ChatMessage::user(prompts::task_instruction(&trajectory.id)));
    messages
}

/// Trailing slice of `text` holding at most `max_tokens` estimated tokens,
/// cut on a char boundary.
fn tail_window(text: &str, max_tokens: u64, estimator: &TokenEstimator) -> String {
    let max_chars = (max_tokens * estimator.chars_per_token as u64) as usize;
    let total = text.chars().count();
    if total <= max_chars {
        return text.to_string();
    }
    text.chars().skip(total - max_chars).collect()
}

fn call(
    backend: &dyn CompletionBackend,
    trajectory: &Trajectory,
    messages: &[ChatMessage],
    ctx: &StrategyContext,
    pass: PassKind,
    step_target: Option<u32>,
) -> Result<String, String> {
    let request = CompletionRequest {
        messages,
        params: &ctx.params,
        binding: Some(RunBinding { trajectory, seed: ctx.run_seed, pass, step_target }),
    };
    backend.complete(&request).map(|c| c.text).map_err(|e| e.to_string())
}

/// Single-call baseline.
pub fn run_vanilla(
    trajectory: &Trajectory,
    backend: &dyn CompletionBackend,
    ctx: &StrategyContext,
) -> AgentRunRecord {
    let started = Instant::now();
    let mut record = AgentRunRecord::new(&trajectory.id, StrategyKind::Vanilla);
    let messages = dialogue_messages(trajectory);
    record.prompts.push(messages.clone());
    record.backend_ids.push(backend.id().to_string());
    record.call_count = 1;
    match call(backend, trajectory, &messages, ctx, PassKind::Task, None) {
        Ok(text) => {
            record.final_response = text.clone();
            record.responses.push(text);
        }
        Err(detail) => record.error = Some(RunError { stage: "task".into(), detail }),
    }
    record.wall_time_ms = started.elapsed().as_millis() as u64;
    record
}

/// Task pass plus one self-critique pass. Both passes bind the same run seed
/// so a simulated backend resolves them against the same latched state.
pub fn run_reflexion(
    trajectory: &Trajectory,
    backend: &dyn CompletionBackend,
    ctx: &StrategyContext,
) -> AgentRunRecord {
    let started = Instant::now();
    let mut record = AgentRunRecord::new(&trajectory.id, StrategyKind::Reflexion);
    let task_messages = dialogue_messages(trajectory);
    record.prompts.push(task_messages.clone());
    record.backend_ids.push(backend.id().to_string());
    record.call_count = 1;
    let first = match call(backend, trajectory, &task_messages, ctx, PassKind::Task, None) {
        Ok(text) => text,
        Err(detail) => {
            record.error = Some(RunError { stage: "task".into(), detail });
            record.wall_time_ms = started.elapsed().as_millis() as u64;
            return record;
        }
    };
    record.responses.push(first.clone());

    let mut critique_messages = task_messages;
    critique_messages.push(ChatMessage::assistant(&first));
    critique_messages.push(ChatMessage::user(prompts::critique_instruction()));
    record.prompts.push(critique_messages.clone());
    record.backend_ids.push(backend.id().to_string());
    record.call_count = 2;
    match call(backend, trajectory, &critique_messages, ctx, PassKind::Critique, None) {
        Ok(text) => {
            record.final_response = text.clone();
            record.responses.push(text);
        }
        Err(detail) => record.error = Some(RunError { stage: "critique".into(), detail }),
    }
    record.wall_time_ms = started.elapsed().as_millis() as u64;
    record
}

/// What the architect phase produced, including the transcript of the calls
/// it took to get there.
pub struct SynthesisOutcome {
    pub protocol: Protocol,
    pub prompts: Vec<Vec<ChatMessage>>,
    pub responses: Vec<String>,
    pub backend_ids: Vec<String>,
    pub calls: u32,
}

/// Asks the architect for a protocol; on a parse or validation failure sends
/// one corrective re-prompt before giving up.
// The error intentionally carries the full call transcript so failed runs
// still produce complete records; boxing it would buy nothing on this path.
#[allow(clippy::result_large_err)]
pub fn synthesize_protocol(
    trajectory: &Trajectory,
    architect: &dyn CompletionBackend,
    tier: GranularityTier,
    ctx: &StrategyContext,
) -> Result<SynthesisOutcome, (RunError, SynthesisTranscript)> {
    let context_text = render_turns(&trajectory.assembled_turns);
    let g1_id = &trajectory.intent_pair.g1_id;
    let protocol_id = format!("sop-{}-{}", trajectory.id, tier.name());
    let first_prompt = vec![ChatMessage::user(prompts::architect_prompt(
        &trajectory.id,
        g1_id,
        tier,
        &context_text,
    ))];

    let mut transcript = SynthesisTranscript::default();
    transcript.prompts.push(first_prompt.clone());
    transcript.backend_ids.push(architect.id().to_string());
    transcript.calls = 1;
    let step_target = Some(tier.step_target());
    let first = match call(architect, trajectory, &first_prompt, ctx, PassKind::Architect, step_target)
    {
        Ok(text) => text,
        Err(detail) => {
            return Err((RunError { stage: "architect".into(), detail }, transcript));
        }
    };
    transcript.responses.push(first.clone());

    let first_err = match parse_and_validate(&first, tier, architect.id(), &protocol_id, g1_id) {
        Ok(protocol) => return Ok(transcript.into_outcome(protocol)),
        Err(e) => e,
    };

    let mut retry_prompt = first_prompt;
    retry_prompt.push(ChatMessage::assistant(&first));
    retry_prompt.push(ChatMessage::user(prompts::architect_reprompt(&first_err)));
    transcript.prompts.push(retry_prompt.clone());
    transcript.backend_ids.push(architect.id().to_string());
    transcript.calls = 2;
    let second = match call(architect, trajectory, &retry_prompt, ctx, PassKind::Architect, step_target)
    {
        Ok(text) => text,
        Err(detail) => {
            return Err((RunError { stage: "architect".into(), detail }, transcript));
        }
    };
    transcript.responses.push(second.clone());

    match parse_and_validate(&second, tier, architect.id(), &protocol_id, g1_id) {
        Ok(protocol) => Ok(transcript.into_outcome(protocol)),
        Err(detail) => Err((
            RunError { stage: "architect".into(), detail: format!("invalid after retry: {detail}") },
            transcript,
        )),
    }
}

fn parse_and_validate(
    text: &str,
    tier: GranularityTier,
    architect_id: &str,
    protocol_id: &str,
    g1_id: &str,
) -> Result<Protocol, String> {
    let protocol = Protocol::parse(text, tier, architect_id, protocol_id.to_string())
        .map_err(|e| e.to_string())?;
    protocol.validate(g1_id).map_err(|e| e.to_string())?;
    Ok(protocol)
}

/// Call transcript accumulated during synthesis; folded into the run record
/// on both the success and failure paths.
#[derive(Default)]
pub struct SynthesisTranscript {
    pub prompts: Vec<Vec<ChatMessage>>,
    pub responses: Vec<String>,
    pub backend_ids: Vec<String>,
    pub calls: u32,
}

impl SynthesisTranscript {
    fn into_outcome(self, protocol: Protocol) -> SynthesisOutcome {
        SynthesisOutcome {
            protocol,
            prompts: self.prompts,
            responses: self.responses,
            backend_ids: self.backend_ids,
            calls: self.calls,
        }
    }
}

/// Runs the executive against a synthesized protocol. Returns the one prompt
/// and the raw response.
pub fn execute_protocol(
    trajectory: &Trajectory,
    protocol: &Protocol,
    executive: &dyn CompletionBackend,
    ctx: &StrategyContext,
) -> (Vec<ChatMessage>, Result<String, String>) {
    let full_context = render_turns(&trajectory.assembled_turns);
    let context = match ctx.executive_window_tokens {
        Some(window) => tail_window(&full_context, window, &ctx.estimator),
        None => full_context,
    };
    let prompt = vec![ChatMessage::user(prompts::executive_prompt(
        &protocol.render(),
        &context,
        protocol.steps.len() as u32,
    ))];
    let result = call(
        executive,
        trajectory,
        &prompt,
        ctx,
        PassKind::Executive,
        Some(protocol.steps.len() as u32),
    );
    (prompt, result)
}

/// Architect/executive split. The protocol survives on the record even when
/// the executive call fails, so procedural audits can still inspect it.
pub fn run_ssrp(
    trajectory: &Trajectory,
    architect: &dyn CompletionBackend,
    executive: &dyn CompletionBackend,
    tier: GranularityTier,
    ctx: &StrategyContext,
) -> AgentRunRecord {
    let started = Instant::now();
    let mut record = AgentRunRecord::new(&trajectory.id, StrategyKind::Ssrp);
    let outcome = match synthesize_protocol(trajectory, architect, tier, ctx) {
        Ok(outcome) => outcome,
        Err((error, transcript)) => {
            record.prompts = transcript.prompts;
            record.responses = transcript.responses;
            record.backend_ids = transcript.backend_ids;
            record.call_count = transcript.calls;
            record.error = Some(error);
            record.wall_time_ms = started.elapsed().as_millis() as u64;
            return record;
        }
    };
    record.prompts = outcome.prompts;
    record.responses = outcome.responses;
    record.backend_ids = outcome.backend_ids;
    record.call_count = outcome.calls;
    record.protocol = Some(outcome.protocol.clone());

    let (prompt, result) = execute_protocol(trajectory, &outcome.protocol, executive, ctx);
    record.prompts.push(prompt);
    record.backend_ids.push(executive.id().to_string());
    record.call_count += 1;
    match result {
        Ok(text) => {
            record.final_response = text.clone();
            record.responses.push(text);
        }
        Err(detail) => record.error = Some(RunError { stage: "executive".into(), detail }),
    }
    record.wall_time_ms = started.elapsed().as_millis() as u64;
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CompletionParams, SyntheticBackend};
    use crate::corpus::synthetic_corpus;
    use crate::forge::{generate_update, Forge, ForgeConfig, Tier, UpdateMode};
    use crate::sim::SimParams;

    fn forge_one(seed: u64) -> Trajectory {
        let dialogues = synthetic_corpus(seed, 1);
        let forge = Forge::new(ForgeConfig::default(), seed);
        let pair = generate_update(
            &dialogues[0],
            UpdateMode::Templated,
            None,
            &CompletionParams::default(),
        )
        .unwrap();
        forge.build(Tier::Shallow, &dialogues[0], &pair).unwrap()
    }

    fn ctx(seed: u64) -> StrategyContext {
        StrategyContext::new(CompletionParams::default(), seed)
    }

    #[test]
    fn vanilla_runs_one_call_with_task_instruction_last() {
        let t = forge_one(11);
        let backend = SyntheticBackend::new(SimParams::default());
        let record = run_vanilla(&t, &backend, &ctx(7));
        assert_eq!(record.call_count, 1);
        assert!(record.error.is_none());
        let last = record.prompts[0].last().unwrap();
        assert!(last.content.starts_with("TASK ["));
        assert_eq!(record.responses.len(), 1);
        assert_eq!(record.final_response, record.responses[0]);
    }

    #[test]
    fn ssrp_records_protocol_and_two_calls() {
        let t = forge_one(12);
        let backend = SyntheticBackend::new(SimParams::default());
        let record = run_ssrp(&t, &backend, &backend, GranularityTier::Optimal, &ctx(7));
        assert!(record.error.is_none(), "{:?}", record.error);
        assert_eq!(record.call_count, 2);
        let protocol = record.protocol.as_ref().unwrap();
        assert_eq!(protocol.steps.len(), 3);
        assert!(protocol
            .purge_directives
            .iter()
            .any(|p| p.superseded_intent_id == t.intent_pair.g1_id));
        // Executive prompt opens with the rendered protocol verbatim.
        let exec_prompt = &record.prompts.last().unwrap()[0].content;
        assert!(exec_prompt.starts_with(&protocol.render()));
    }

    #[test]
    fn reflexion_binds_same_seed_on_both_passes() {
        let t = forge_one(13);
        let backend = SyntheticBackend::new(SimParams::default());
        let record = run_reflexion(&t, &backend, &ctx(9));
        assert_eq!(record.call_count, 2);
        assert!(record.error.is_none());
        assert_eq!(record.responses.len(), 2);
        // Critique prompt carries the first answer back.
        let critique = record.prompts[1].iter().rev().nth(1).unwrap();
        assert_eq!(critique.content, record.responses[0]);
    }

    #[test]
    fn wall_time_is_not_serialized() {
        let t = forge_one(14);
        let backend = SyntheticBackend::new(SimParams::default());
        let mut record = run_vanilla(&t, &backend, &ctx(7));
        record.wall_time_ms = 12345;
        let json = serde_json::to_string(&record).unwrap();
        assert!(!json.contains("wall_time_ms"));
        let back: AgentRunRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.wall_time_ms, 0);
    }

    #[test]
    fn executive_window_truncates_context_tail() {
        let t = forge_one(15);
        let backend = SyntheticBackend::new(SimParams::default());
        let mut c = ctx(7);
        c.executive_window_tokens = Some(100);
        let record = run_ssrp(&t, &backend, &backend, GranularityTier::Optimal, &c);
        let exec_prompt = &record.prompts.last().unwrap()[0].content;
        let full = render_turns(&t.assembled_turns);
        assert!(!exec_prompt.contains(&full));
    }
}
