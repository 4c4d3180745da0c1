//! Experiment configuration: one TOML file drives forging, execution,
//! judging, and scoring. Validation failures are surfaced as
//! [`ConfigError`]; the command line maps them to exit code 2.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{BackendDescriptor, CompletionParams, RetryPolicy};
use crate::forge::{Tier, UpdateMode};
use crate::sim::SimParams;
use crate::strategy::protocol::GranularityTier;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {detail}")]
    Io { path: PathBuf, detail: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_seed() -> u64 {
    42
}

fn default_model_pair() -> String {
    "synthetic/synthetic".to_string()
}

fn default_parallelism() -> usize {
    1
}

fn default_tiers() -> Vec<Tier> {
    vec![Tier::Shallow, Tier::HighEntropy, Tier::Hijack]
}

fn default_synthetic_dialogues() -> usize {
    20
}

fn default_granularity() -> GranularityTier {
    GranularityTier::Optimal
}

/// Corpus and trajectory-building options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForgeSection {
    pub tiers: Vec<Tier>,
    pub update_mode: UpdateMode,
    /// Dialogue corpus (JSONL). When absent a seeded synthetic corpus of
    /// `synthetic_dialogues` entries is used.
    pub corpus: Option<PathBuf>,
    pub dialogue_limit: Option<usize>,
    pub synthetic_dialogues: usize,
    /// Backend for dynamic update generation; required when `update_mode`
    /// is `dynamic`.
    pub updater: Option<BackendDescriptor>,
}

impl Default for ForgeSection {
    fn default() -> Self {
        Self {
            tiers: default_tiers(),
            update_mode: UpdateMode::Templated,
            corpus: None,
            dialogue_limit: None,
            synthetic_dialogues: default_synthetic_dialogues(),
            updater: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsrpSection {
    pub architect: BackendDescriptor,
    pub executive: BackendDescriptor,
    #[serde(default = "default_granularity")]
    pub granularity: GranularityTier,
    /// Trailing context window for the executive, in estimated tokens.
    #[serde(default)]
    pub executive_window_tokens: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategiesSection {
    #[serde(default)]
    pub vanilla: Option<BackendDescriptor>,
    #[serde(default)]
    pub ssrp: Option<SsrpSection>,
    #[serde(default)]
    pub reflexion: Option<BackendDescriptor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedJudge {
    Rule,
}

/// Either the deterministic rule judge or any completion backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JudgeDescriptor {
    Named { kind: NamedJudge },
    Backend(BackendDescriptor),
}

impl Default for JudgeDescriptor {
    fn default() -> Self {
        JudgeDescriptor::Named { kind: NamedJudge::Rule }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment_id: String,
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub global_seed: u64,
    /// Label carried into reports, e.g. `"gpt-4o/gpt-4o-mini"`.
    #[serde(default = "default_model_pair")]
    pub model_pair: String,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub forge: ForgeSection,
    pub strategies: StrategiesSection,
    #[serde(default)]
    pub judge: JudgeDescriptor,
    /// Defaults for every synthetic backend in this experiment; individual
    /// descriptors may override single fields.
    #[serde(default)]
    pub simulator: SimParams,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub completion: CompletionParams,
    /// Override for the refusal-pattern fixture bundled with the crate.
    #[serde(default)]
    pub refusal_patterns: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), detail: e.to_string() })?;
        let config: RunConfig = toml::from_str(&raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |detail: String| Err(ConfigError::Invalid(detail));
        if self.experiment_id.is_empty() {
            return invalid("experiment_id must be non-empty".into());
        }
        if self.experiment_id.contains(['/', '\\']) {
            return invalid("experiment_id must not contain path separators".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            return invalid("output_dir must be non-empty".into());
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1".into());
        }
        if self.forge.tiers.is_empty() {
            return invalid("forge.tiers must name at least one tier".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for tier in &self.forge.tiers {
            if !seen.insert(tier.name()) {
                return invalid(format!("forge.tiers repeats {}", tier.name()));
            }
        }
        if self.forge.update_mode == UpdateMode::Dynamic && self.forge.updater.is_none() {
            return invalid("dynamic update generation requires [forge.updater]".into());
        }
        if self.forge.corpus.is_none() && self.forge.synthetic_dialogues == 0 {
            return invalid("synthetic_dialogues must be at least 1 without a corpus".into());
        }
        let s = &self.strategies;
        if s.vanilla.is_none() && s.ssrp.is_none() && s.reflexion.is_none() {
            return invalid("at least one strategy must be configured".into());
        }
        self.simulator
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("simulator: {e}")))?;
        if self.retry.max_attempts == 0 {
            return invalid("retry.max_attempts must be at least 1".into());
        }
        Ok(())
    }

    /// Strategies this config enables, in canonical execution order.
    pub fn enabled_strategies(&self) -> Vec<crate::strategy::StrategyKind> {
        use crate::strategy::StrategyKind;
        let mut out = Vec::new();
        if self.strategies.vanilla.is_some() {
            out.push(StrategyKind::Vanilla);
        }
        if self.strategies.ssrp.is_some() {
            out.push(StrategyKind::Ssrp);
        }
        if self.strategies.reflexion.is_some() {
            out.push(StrategyKind::Reflexion);
        }
        out
    }

    /// Stable description of the backends driving each strategy; part of the
    /// resume input hash.
    pub fn backend_labels(&self) -> BTreeMap<String, String> {
        let mut labels = BTreeMap::new();
        if let Some(d) = &self.strategies.vanilla {
            labels.insert("vanilla".into(), d.label());
        }
        if let Some(s) = &self.strategies.ssrp {
            labels.insert(
                "ssrp".into(),
                format!("{}+{}@{}", s.architect.label(), s.executive.label(), s.granularity.name()),
            );
        }
        if let Some(d) = &self.strategies.reflexion {
            labels.insert("reflexion".into(), d.label());
        }
        labels
    }
}
