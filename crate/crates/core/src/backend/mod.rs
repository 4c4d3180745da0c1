//! Completion backend abstraction.
//!
//! Strategy runners talk to a [`CompletionBackend`]; the three
//! implementations behind it are a remote HTTP provider, a scripted fixture
//! for offline tests, and a synthetic backend driven by the latch simulator.
//! Requests optionally carry a [`RunBinding`] so backends that simulate (or
//! replay) runs know which trajectory, pass, and seed a prompt belongs to;
//! remote and scripted backends ignore it.

mod remote;
mod scripted;
mod synthetic;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use remote::RemoteBackend;
pub use scripted::{write_fixture, ScriptedBackend, ScriptedEntry};
pub use synthetic::SyntheticBackend;

use crate::forge::Trajectory;
use crate::sim::SimParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Provider-side model identifier; unused by offline backends.
    pub model_id: String,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self { temperature: 0.0, max_output_tokens: 1024, model_id: String::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    /// True when the numbers come from the char estimator, not the provider.
    pub estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

/// Which strategy pass issued a request. The synthetic backend keys its
/// behavior off this; real providers never see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassKind {
    /// Plain single task call.
    Task,
    /// Second self-critique call.
    Critique,
    /// Protocol synthesis call.
    Architect,
    /// Protocol execution call.
    Executive,
}

#[derive(Debug, Clone, Copy)]
pub struct RunBinding<'a> {
    pub trajectory: &'a Trajectory,
    pub seed: u64,
    pub pass: PassKind,
    /// Step count an architect pass should target; `None` elsewhere.
    pub step_target: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub messages: &'a [ChatMessage],
    pub params: &'a CompletionParams,
    pub binding: Option<RunBinding<'a>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCounters {
    pub calls: u64,
    pub retries: u64,
    pub failures: u64,
}

/// Shared atomic counters; every backend embeds one.
#[derive(Debug, Default)]
pub(crate) struct CounterCell {
    calls: AtomicU64,
    retries: AtomicU64,
    failures: AtomicU64,
}

impl CounterCell {
    pub fn call(&self) {
        self.calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn retry(&self) {
        self.retries.fetch_add(1, Ordering::Relaxed);
    }

    pub fn failure(&self) {
        self.failures.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> BackendCounters {
        BackendCounters {
            calls: self.calls.load(Ordering::Relaxed),
            retries: self.retries.load(Ordering::Relaxed),
            failures: self.failures.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("credential environment variable {var} is not set")]
    MissingCredential { var: String },

    #[error("authentication rejected with HTTP status {status}")]
    Auth { status: u16 },

    #[error("non-retryable HTTP status {status}: {detail}")]
    Http { status: u16, detail: String },

    #[error("retries exhausted after {attempts} attempts; last error: {last}")]
    Exhausted { attempts: u32, last: String },

    #[error("malformed provider response: {detail}")]
    MalformedResponse { detail: String },

    #[error("no scripted pattern matches prompt (hash {prompt_hash})")]
    PatternMiss { prompt_hash: String },

    #[error("synthetic backend needs a run binding to simulate")]
    MissingBinding,

    #[error("invalid backend configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("simulation failed: {detail}")]
    Simulation { detail: String },
}

pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError>;

    /// Running call/retry/failure totals since construction.
    fn counters(&self) -> BackendCounters;
}

/// Retry schedule for transient remote failures: jittered exponential
/// backoff, honoring Retry-After when the provider sends one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
    pub max_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay_ms: 1_000, factor: 2.0, max_delay_ms: 30_000, jitter: true }
    }
}

/// Optional per-backend overrides of the experiment-wide simulator params.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOverrides {
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub refusal_rate: Option<f64>,
    pub redirect: Option<bool>,
    pub posthoc_correct: Option<bool>,
    pub chain_delta: Option<f64>,
    pub redirect_fact_strength: Option<f64>,
    pub hyper_compressed_strength: Option<f64>,
    pub optimal_strength: Option<f64>,
    pub verbose_strength: Option<f64>,
    pub pi_adherence: Option<f64>,
}

impl SimOverrides {
    pub fn apply(&self, mut base: SimParams) -> SimParams {
        macro_rules! set {
            ($field:expr, $opt:expr) => {
                if let Some(v) = $opt {
                    $field = v;
                }
            };
        }
        set!(base.curve.alpha, self.alpha);
        set!(base.curve.gamma, self.gamma);
        set!(base.latch.w1, self.w1);
        set!(base.latch.w2, self.w2);
        set!(base.latch.refusal_rate, self.refusal_rate);
        set!(base.latch.redirect, self.redirect);
        set!(base.latch.posthoc_correct, self.posthoc_correct);
        set!(base.latch.chain_delta, self.chain_delta);
        set!(base.latch.redirect_fact_strength, self.redirect_fact_strength);
        set!(base.latch.tier_strengths.hyper_compressed, self.hyper_compressed_strength);
        set!(base.latch.tier_strengths.optimal, self.optimal_strength);
        set!(base.latch.tier_strengths.verbose, self.verbose_strength);
        set!(base.latch.pi_adherence, self.pi_adherence);
        base
    }
}

/// Declarative backend selection, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendDescriptor {
    Remote {
        endpoint: String,
        model: String,
        /// Environment variable holding the bearer token.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        credential_env: Option<String>,
        #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
        headers: std::collections::BTreeMap<String, String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        requests_per_second: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_concurrency: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<u64>,
    },
    Scripted {
        fixture: PathBuf,
    },
    Synthetic {
        #[serde(flatten)]
        overrides: SimOverrides,
    },
}

impl BackendDescriptor {
    /// Stable identifier used in run records and report labels.
    pub fn label(&self) -> String {
        match self {
            BackendDescriptor::Remote { model, .. } => format!("remote:{model}"),
            BackendDescriptor::Scripted { fixture } => {
                let stem =
                    fixture.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                format!("scripted:{stem}")
            }
            BackendDescriptor::Synthetic { .. } => "synthetic".to_string(),
        }
    }
}

/// Instantiates a backend from its descriptor. `sim_defaults` seeds the
/// synthetic backend before per-descriptor overrides are applied.
pub fn build_backend(
    descriptor: &BackendDescriptor,
    retry: RetryPolicy,
    sim_defaults: SimParams,
) -> Result<Box<dyn CompletionBackend>, BackendError> {
    match descriptor {
        BackendDescriptor::Remote {
            endpoint,
            model,
            credential_env,
            headers,
            requests_per_second,
            max_concurrency,
            timeout_secs,
        } => Ok(Box::new(RemoteBackend::new(remote::RemoteOptions {
            endpoint: endpoint.clone(),
            model: model.clone(),
            credential_env: credential_env.clone(),
            headers: headers.clone(),
            requests_per_second: *requests_per_second,
            max_concurrency: *max_concurrency,
            timeout_secs: timeout_secs.unwrap_or(60),
            retry,
        })?)),
        BackendDescriptor::Scripted { fixture } => {
            Ok(Box::new(ScriptedBackend::from_fixture(fixture)?))
        }
        BackendDescriptor::Synthetic { overrides } => {
            let params = overrides.apply(sim_defaults);
            Ok(Box::new(SyntheticBackend::new(params)))
        }
    }
}
