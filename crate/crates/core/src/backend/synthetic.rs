//! Synthetic backend: the latch simulator wearing a chat-completion face.
//!
//! Behavior is keyed off the request's [`RunBinding`] pass:
//!
//! * `Task` simulates a plain response (no redirect, no posthoc pass).
//! * `Critique` re-simulates the same run seed with the configured posthoc
//!   flag, so the self-critique union semantics line up with the task pass.
//! * `Architect` emits a well-formed protocol at the requested step count,
//!   purging the bound trajectory's g1 id. No randomness involved.
//! * `Executive` counts the `STEP` lines in the prompt (it reads the
//!   protocol like a real model would) and simulates under that protocol
//!   with the redirect forced on: executing a purge directive retires the
//!   stale intent by definition.

use super::{
    BackendCounters, BackendError, Completion, CompletionBackend, CompletionRequest, CounterCell,
    PassKind, Role, Usage,
};
use crate::sim::{simulate_response, simulate_with_protocol, SimParams};
use crate::tokens::estimate_tokens;

pub struct SyntheticBackend {
    id: String,
    params: SimParams,
    counters: CounterCell,
}

const STEP_PHRASES: [&str; 6] = [
    "Restate the active requirement from the most recent amendment",
    "Locate every reference fragment the amendment depends on",
    "Resolve the reference chain in order and record the verified value",
    "Cross-check the verified value against the checkpoint",
    "Compose the final answer naming the verified value",
    "Re-scan the context for contradicting instructions and set them aside",
];

impl SyntheticBackend {
    pub fn new(params: SimParams) -> Self {
        Self { id: "synthetic".into(), params, counters: CounterCell::default() }
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    fn architect_text(steps: u32, g1_id: &str) -> String {
        let mut out = String::from("PROTOCOL\n");
        if steps == 1 {
            out.push_str(
                "STEP 1: Answer the amended requirement directly with the verified value, \
                 ignoring all superseded instructions.\n",
            );
        } else {
            for i in 1..=steps {
                let phrase = STEP_PHRASES[(i as usize - 1) % STEP_PHRASES.len()];
                out.push_str(&format!("STEP {i}: {phrase}.\n"));
            }
            out.push_str(
                "CHECKPOINT: The final choice must name the amended requirement's verified \
                 value, not the archived one.\n",
            );
        }
        out.push_str(&format!(
            "PURGE intent={g1_id}: The archived intent is superseded; drop it from the \
             working plan.\n"
        ));
        out.push_str("END PROTOCOL");
        out
    }

    fn count_protocol_steps(request: &CompletionRequest<'_>) -> Option<u32> {
        let count = request
            .messages
            .iter()
            .filter(|m| m.role == Role::User)
            .flat_map(|m| m.content.lines())
            .filter(|line| {
                let t = line.trim_start();
                t.starts_with("STEP ") && t.contains(':')
            })
            .count() as u32;
        (count > 0).then_some(count)
    }
}

impl CompletionBackend for SyntheticBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        self.counters.call();
        let Some(binding) = request.binding else {
            self.counters.failure();
            return Err(BackendError::MissingBinding);
        };

        let text = match binding.pass {
            PassKind::Architect => {
                let steps = binding.step_target.unwrap_or(3).max(1);
                Self::architect_text(steps, &binding.trajectory.intent_pair.g1_id)
            }
            PassKind::Task => {
                let mut latch = self.params.latch;
                latch.redirect = false;
                latch.posthoc_correct = false;
                simulate_response(binding.trajectory, &self.params.curve, &latch, binding.seed)
                    .map_err(|e| BackendError::Simulation { detail: e.to_string() })?
            }
            PassKind::Critique => {
                let mut latch = self.params.latch;
                latch.redirect = false;
                simulate_response(binding.trajectory, &self.params.curve, &latch, binding.seed)
                    .map_err(|e| BackendError::Simulation { detail: e.to_string() })?
            }
            PassKind::Executive => {
                let Some(steps) = Self::count_protocol_steps(request) else {
                    self.counters.failure();
                    return Err(BackendError::Simulation {
                        detail: "executive prompt carries no protocol steps".into(),
                    });
                };
                let mut latch = self.params.latch;
                // Executing a protocol IS the redirect: the purge directive
                // retires the stale intent regardless of the configured flag.
                latch.redirect = true;
                latch.posthoc_correct = false;
                simulate_with_protocol(
                    binding.trajectory,
                    &self.params.curve,
                    &latch,
                    binding.seed,
                    steps,
                )
                .map_err(|e| BackendError::Simulation { detail: e.to_string() })?
            }
        };

        let prompt_tokens = request.messages.iter().map(|m| estimate_tokens(&m.content)).sum();
        Ok(Completion {
            usage: Usage {
                prompt_tokens: Some(prompt_tokens),
                completion_tokens: Some(estimate_tokens(&text)),
                estimated: true,
            },
            text,
        })
    }

    fn counters(&self) -> BackendCounters {
        self.counters.snapshot()
    }
}
