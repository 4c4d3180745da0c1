//! Scoring: semantic judge, verbatim audit, refusal detection, and the
//! procedural-integrity audit for protocol-driven runs.
//!
//! Success is dual-route by construction: a response passes only when the
//! semantic judge accepts it *and* the expected signal appears verbatim
//! (after punctuation-insensitive normalization). Neither route may be
//! collapsed into the other; the verbatim audit catches judges that accept
//! paraphrases of the wrong value, the judge catches responses that quote the
//! signal while refusing or hedging.
//!
//! Judge outages are recorded on the verdict as `judge_error` and excluded
//! from accuracy denominators downstream. Run failures are not excluded; a
//! strategy that errors has failed the trajectory.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::backend::{ChatMessage, CompletionBackend, CompletionParams, CompletionRequest};
use crate::forge::Trajectory;
use crate::strategy::{AgentRunRecord, StrategyKind};

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("judge backend failure: {0}")]
    Backend(String),

    #[error("judge reply unparseable after one re-ask: {raw:?}")]
    Unparseable { raw: String },

    #[error("procedural audit applies only to ssrp runs")]
    NotSsrp,

    #[error("ssrp record carries no protocol")]
    MissingProtocol,

    #[error("refusal pattern file: {0}")]
    Patterns(String),
}

/// Exact judge wording. Frozen; semantic scores are only comparable while
/// this text is stable.
pub fn judge_prompt(response: &str, update: &str) -> String {
    format!(
        "Does this agent response: {response} correctly follow this user update: {update}? \
         Return ONLY '1' for YES or '0' for NO."
    )
}

/// Lowercases, maps ASCII punctuation to spaces, collapses whitespace runs,
/// and trims. Both audit needles and haystacks pass through this before the
/// substring check.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.to_lowercase().chars() {
        let mapped = if c.is_ascii_punctuation() || c.is_whitespace() { None } else { Some(c) };
        match mapped {
            Some(c) => {
                if pending_space && !out.is_empty() {
                    out.push(' ');
                }
                pending_space = false;
                out.push(c);
            }
            None => pending_space = true,
        }
    }
    out
}

/// True when the expected signal appears verbatim in the response, modulo
/// case, punctuation, and whitespace.
pub fn verbatim_audit(response: &str, expected_signal: &str) -> bool {
    let needle = normalize(expected_signal);
    if needle.is_empty() {
        return false;
    }
    normalize(response).contains(&needle)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefusalPatterns {
    pub version: u32,
    pub patterns: Vec<String>,
}

impl RefusalPatterns {
    /// Patterns bundled with the crate, pre-normalized.
    pub fn bundled() -> &'static RefusalPatterns {
        static CELL: OnceLock<RefusalPatterns> = OnceLock::new();
        CELL.get_or_init(|| {
            let raw = include_str!("../../fixtures/refusal_patterns.json");
            Self::from_json(raw).expect("bundled refusal patterns must parse")
        })
    }

    pub fn from_json(raw: &str) -> Result<Self, JudgeError> {
        let mut parsed: RefusalPatterns =
            serde_json::from_str(raw).map_err(|e| JudgeError::Patterns(e.to_string()))?;
        if parsed.version != 1 {
            return Err(JudgeError::Patterns(format!(
                "unsupported version {}",
                parsed.version
            )));
        }
        parsed.patterns = parsed.patterns.iter().map(|p| normalize(p)).collect();
        parsed.patterns.retain(|p| !p.is_empty());
        if parsed.patterns.is_empty() {
            return Err(JudgeError::Patterns("no usable patterns".into()));
        }
        Ok(parsed)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, JudgeError> {
        let raw = std::fs::read_to_string(path).map_err(|e| JudgeError::Patterns(e.to_string()))?;
        Self::from_json(&raw)
    }
}

pub fn detect_refusal(response: &str, patterns: &RefusalPatterns) -> bool {
    let norm = normalize(response);
    patterns.patterns.iter().any(|p| norm.contains(p))
}

/// Phrases that reaffirm a superseded intent. Checked on normalized text by
/// both the rule judge and the procedural audit.
const REAFFIRM_PHRASES: [&str; 4] = [
    "keeping the original plan",
    "proceeding with the original",
    "the original instruction remains",
    "per the pinned instruction",
];

fn reaffirms_original(normalized_response: &str) -> bool {
    REAFFIRM_PHRASES.iter().any(|p| normalized_response.contains(p))
}

/// Deterministic fallback judge: accepts a response that contains the update
/// text (normalized) and does not reaffirm the superseded intent.
fn rule_judge_bit(response: &str, update: &str) -> u8 {
    let needle = normalize(update);
    if needle.is_empty() {
        return 0;
    }
    let norm = normalize(response);
    u8::from(norm.contains(&needle) && !reaffirms_original(&norm))
}

pub struct SemanticVerdict {
    pub bit: u8,
    /// True when the first judge reply was unparseable and the corrective
    /// re-ask recovered it.
    pub reasked: bool,
}

/// Semantic judge: either the deterministic rule judge or a completion
/// backend queried with the frozen prompt.
pub enum Judge {
    Rule,
    Backend { backend: Box<dyn CompletionBackend>, params: CompletionParams },
}

impl Judge {
    pub fn id(&self) -> String {
        match self {
            Judge::Rule => "rule-v1".to_string(),
            Judge::Backend { backend, .. } => backend.id().to_string(),
        }
    }

    pub fn judge(&self, response: &str, update: &str) -> Result<SemanticVerdict, JudgeError> {
        match self {
            Judge::Rule => Ok(SemanticVerdict { bit: rule_judge_bit(response, update), reasked: false }),
            Judge::Backend { backend, params } => {
                judge_via_backend(backend.as_ref(), params, response, update)
            }
        }
    }
}

fn parse_bit(text: &str) -> Option<u8> {
    let trimmed = text
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '.')
        .trim();
    match trimmed {
        "1" => Some(1),
        "0" => Some(0),
        _ => None,
    }
}

fn judge_via_backend(
    backend: &dyn CompletionBackend,
    params: &CompletionParams,
    response: &str,
    update: &str,
) -> Result<SemanticVerdict, JudgeError> {
    let ask = |messages: &[ChatMessage]| -> Result<String, JudgeError> {
        let request = CompletionRequest { messages, params, binding: None };
        backend
            .complete(&request)
            .map(|c| c.text)
            .map_err(|e| JudgeError::Backend(e.to_string()))
    };

    let first_messages = vec![ChatMessage::user(judge_prompt(response, update))];
    let first = ask(&first_messages)?;
    if let Some(bit) = parse_bit(&first) {
        return Ok(SemanticVerdict { bit, reasked: false });
    }

    let mut retry = first_messages;
    retry.push(ChatMessage::assistant(&first));
    retry.push(ChatMessage::user("Return ONLY the single character 1 or 0."));
    let second = ask(&retry)?;
    match parse_bit(&second) {
        Some(bit) => Ok(SemanticVerdict { bit, reasked: true }),
        None => Err(JudgeError::Unparseable { raw: second }),
    }
}

/// Checks an ssrp response against its protocol: every step tag `[S1]` ..
/// `[Sn]` must appear in ascending order and no purged intent may be
/// reaffirmed. Errored runs are non-adherent by definition.
pub fn audit_procedural_integrity(record: &AgentRunRecord) -> Result<bool, JudgeError> {
    if record.strategy != StrategyKind::Ssrp {
        return Err(JudgeError::NotSsrp);
    }
    let protocol = record.protocol.as_ref().ok_or(JudgeError::MissingProtocol)?;
    if record.error.is_some() {
        return Ok(false);
    }
    let response = &record.final_response;
    let mut pos = 0usize;
    for i in 1..=protocol.steps.len() {
        let tag = format!("[S{i}]");
        match response[pos..].find(&tag) {
            Some(offset) => pos += offset + tag.len(),
            None => return Ok(false),
        }
    }
    let norm = normalize(response);
    for purge in &protocol.purge_directives {
        let id = normalize(&purge.superseded_intent_id);
        if !id.is_empty() && norm.contains(&id) {
            return Ok(false);
        }
    }
    Ok(!reaffirms_original(&norm))
}

/// Scored outcome for one (trajectory, strategy) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub trajectory_id: String,
    pub strategy: StrategyKind,
    /// 1 when the semantic judge accepted the response.
    pub judge_bit: u8,
    pub verbatim_hit: bool,
    pub refusal: bool,
    /// Procedural-integrity outcome; present only for ssrp runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_adherent: Option<bool>,
    /// Judge acceptance AND verbatim hit AND not a refusal AND no run error.
    pub final_success: bool,
    pub judge_id: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub judge_reasked: bool,
    /// Judge outage; verdicts carrying this are excluded from accuracy
    /// denominators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_error: Option<String>,
    /// Strategy-side failure; counts as an ordinary failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_error: Option<String>,
}

/// Applies every scoring route to one run record.
pub fn score_record(
    record: &AgentRunRecord,
    trajectory: &Trajectory,
    judge: &Judge,
    patterns: &RefusalPatterns,
) -> Verdict {
    let response = &record.final_response;
    let refusal = detect_refusal(response, patterns);
    let verbatim_hit = verbatim_audit(response, &trajectory.expected_signal);
    let pi_adherent = (record.strategy == StrategyKind::Ssrp)
        .then(|| audit_procedural_integrity(record).unwrap_or(false));
    let run_error = record.error.as_ref().map(|e| format!("{}: {}", e.stage, e.detail));

    let (judge_bit, judge_reasked, judge_error) = if run_error.is_some() {
        (0, false, None)
    } else {
        match judge.judge(response, &trajectory.intent_pair.g2_text) {
            Ok(v) => (v.bit, v.reasked, None),
            Err(e) => (0, false, Some(e.to_string())),
        }
    };

    let final_success = run_error.is_none()
        && judge_error.is_none()
        && judge_bit == 1
        && verbatim_hit
        && !refusal;

    Verdict {
        trajectory_id: trajectory.id.clone(),
        strategy: record.strategy,
        judge_bit,
        verbatim_hit,
        refusal,
        pi_adherent,
        final_success,
        judge_id: judge.id(),
        judge_reasked,
        judge_error,
        run_error,
    }
}
