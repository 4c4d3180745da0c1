//! Scripted backend: canned responses selected by longest-prefix match on
//! the last user message. Fully deterministic, used for offline end-to-end
//! runs and judge fixtures.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hashing::sha256_hex;

use super::{
    BackendError, ChatMessage, Completion, CompletionBackend, CompletionRequest, CounterCell,
    Role, Usage,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedEntry {
    pub match_prefix: String,
    pub response: String,
}

#[derive(Debug, Deserialize)]
struct Fixture {
    version: u32,
    entries: Vec<ScriptedEntry>,
}

pub struct ScriptedBackend {
    id: String,
    entries: Vec<ScriptedEntry>,
    counters: CounterCell,
}

impl ScriptedBackend {
    pub fn from_entries(id: impl Into<String>, mut entries: Vec<ScriptedEntry>) -> Self {
        // Longest prefix first, so the first hit wins the specificity contest.
        entries.sort_by(|a, b| {
            b.match_prefix.len().cmp(&a.match_prefix.len()).then(a.match_prefix.cmp(&b.match_prefix))
        });
        Self { id: id.into(), entries, counters: CounterCell::default() }
    }

    pub fn from_fixture(path: &Path) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path).map_err(|e| BackendError::InvalidConfig {
            detail: format!("cannot read scripted fixture {}: {e}", path.display()),
        })?;
        let fixture: Fixture =
            serde_json::from_str(&raw).map_err(|e| BackendError::InvalidConfig {
                detail: format!("malformed scripted fixture {}: {e}", path.display()),
            })?;
        if fixture.version != 1 {
            return Err(BackendError::InvalidConfig {
                detail: format!("unsupported scripted fixture version {}", fixture.version),
            });
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self::from_entries(format!("scripted:{stem}"), fixture.entries))
    }

    fn last_user_message(messages: &[ChatMessage]) -> Option<&str> {
        messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }
}

impl CompletionBackend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        self.counters.call();
        let prompt = Self::last_user_message(request.messages).unwrap_or("");
        let hit = self.entries.iter().find(|e| prompt.starts_with(&e.match_prefix));
        match hit {
            Some(entry) => Ok(Completion {
                text: entry.response.clone(),
                usage: Usage {
                    prompt_tokens: Some(crate::tokens::estimate_tokens(prompt)),
                    completion_tokens: Some(crate::tokens::estimate_tokens(&entry.response)),
                    estimated: true,
                },
            }),
            None => {
                self.counters.failure();
                Err(BackendError::PatternMiss {
                    prompt_hash: sha256_hex(prompt.as_bytes())[..16].to_string(),
                })
            }
        }
    }

    fn counters(&self) -> super::BackendCounters {
        self.counters.snapshot()
    }
}

/// Serializes entries into the on-disk fixture format (version 1).
pub fn write_fixture(path: &Path, entries: &[ScriptedEntry]) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Out<'a> {
        version: u32,
        entries: &'a [ScriptedEntry],
    }
    let body = serde_json::to_string_pretty(&Out { version: 1, entries })
        .expect("fixture serializes");
    std::fs::write(path, body)
}
