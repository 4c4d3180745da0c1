//! Intent-pair generation: pairing a dialogue's archived intent (g1) with a
//! superseding update (g2).
//!
//! Templated mode matches the dialogue against a versioned keyword table and
//! emits a canned contradiction, which keeps offline runs free of any model
//! dependency. Dynamic mode asks a completion backend to write the update and
//! enforces the single-sentence contract with one retry.

use serde::Deserialize;

use crate::backend::{ChatMessage, CompletionBackend, CompletionParams, CompletionRequest};

use super::types::{DialogueSource, IntentPair, Speaker};
use super::ForgeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Templated,
    Dynamic,
}

#[derive(Debug, Deserialize)]
struct TemplateEntry {
    id: String,
    keywords: Vec<String>,
    g2: String,
}

#[derive(Debug, Deserialize)]
struct TemplateTable {
    version: u32,
    entries: Vec<TemplateEntry>,
    fallback: FallbackEntry,
}

#[derive(Debug, Deserialize)]
struct FallbackEntry {
    id: String,
    g2: String,
}

fn template_table() -> &'static TemplateTable {
    use std::sync::OnceLock;
    static TABLE: OnceLock<TemplateTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let raw = include_str!("../../fixtures/update_templates.json");
        let table: TemplateTable =
            serde_json::from_str(raw).expect("bundled update template table parses");
        assert_eq!(table.version, 1, "unexpected template table version");
        table
    })
}

/// Counts sentences by terminator runs (`.`, `!`, `?` followed by whitespace
/// or end of text). Crude on abbreviations, which the prompt instructions and
/// templates avoid; non-empty text without a terminator counts as one.
pub fn sentence_count(text: &str) -> usize {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return 0;
    }
    let chars: Vec<char> = trimmed.chars().collect();
    let mut count = 0;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            while i < chars.len() && matches!(chars[i], '.' | '!' | '?') {
                i += 1;
            }
            if i >= chars.len() || chars[i].is_whitespace() {
                count += 1;
            }
        } else {
            i += 1;
        }
    }
    count.max(1)
}

fn last_user_turn(dialogue: &DialogueSource) -> Result<&str, ForgeError> {
    dialogue
        .turns
        .iter()
        .rev()
        .find(|t| t.speaker == Speaker::User)
        .map(|t| t.text.as_str())
        .ok_or_else(|| ForgeError::UpdateGeneration {
            dialogue_id: dialogue.id.clone(),
            detail: "dialogue has no user turns".into(),
        })
}

fn templated_pair(dialogue: &DialogueSource) -> Result<IntentPair, ForgeError> {
    let table = template_table();
    let mut matched: Option<(&TemplateEntry, &str)> = None;
    'outer: for turn in dialogue.turns.iter().rev() {
        if turn.speaker != Speaker::User {
            continue;
        }
        let lowered = turn.text.to_lowercase();
        for entry in &table.entries {
            if entry.keywords.iter().any(|k| lowered.contains(k.as_str())) {
                matched = Some((entry, turn.text.as_str()));
                break 'outer;
            }
        }
    }
    let (class, g1_text, g2_text) = match matched {
        Some((entry, g1)) => (entry.id.clone(), g1.to_string(), entry.g2.clone()),
        None => (
            table.fallback.id.clone(),
            last_user_turn(dialogue)?.to_string(),
            table.fallback.g2.clone(),
        ),
    };
    let pair = IntentPair {
        g1_id: format!("g1-{}", dialogue.id),
        g2_id: format!("g2-{}", dialogue.id),
        g1_text,
        g2_text,
        contradiction_class: Some(class),
    };
    pair.validate().map_err(|e| ForgeError::UpdateGeneration {
        dialogue_id: dialogue.id.clone(),
        detail: e.to_string(),
    })?;
    Ok(pair)
}

const DYNAMIC_SYSTEM: &str =
    "You write single-sentence preference updates for dialogue replay studies.";

fn dynamic_instruction(dialogue: &DialogueSource) -> String {
    let mut rendered = String::new();
    for turn in &dialogue.turns {
        let who = match turn.speaker {
            Speaker::User => "USER",
            Speaker::System => "SYSTEM",
        };
        rendered.push_str(&format!("{who}: {}\n", turn.text));
    }
    format!(
        "{rendered}\nWrite ONE sentence, in the user's voice, that sincerely corrects or \
         reverses one concrete preference the user stated above. The sentence must directly \
         contradict that original preference. Reply with the sentence only."
    )
}

fn dynamic_pair(
    dialogue: &DialogueSource,
    backend: &dyn CompletionBackend,
    params: &CompletionParams,
) -> Result<IntentPair, ForgeError> {
    let g1_text = last_user_turn(dialogue)?.to_string();
    let mut messages = vec![
        ChatMessage::system(DYNAMIC_SYSTEM),
        ChatMessage::user(dynamic_instruction(dialogue)),
    ];
    let mut last_err = String::new();
    for _attempt in 0..2 {
        let completion = backend
            .complete(&CompletionRequest { messages: &messages, params, binding: None })
            .map_err(|e| ForgeError::UpdateGeneration {
                dialogue_id: dialogue.id.clone(),
                detail: e.to_string(),
            })?;
        let candidate = completion.text.trim().to_string();
        if !candidate.is_empty() && sentence_count(&candidate) == 1 && candidate != g1_text {
            let pair = IntentPair {
                g1_id: format!("g1-{}", dialogue.id),
                g2_id: format!("g2-{}", dialogue.id),
                g1_text,
                g2_text: candidate,
                contradiction_class: Some("dynamic".into()),
            };
            pair.validate().map_err(|e| ForgeError::UpdateGeneration {
                dialogue_id: dialogue.id.clone(),
                detail: e.to_string(),
            })?;
            return Ok(pair);
        }
        last_err = format!("backend returned {} sentences", sentence_count(&candidate));
        messages.push(ChatMessage::assistant(candidate));
        messages.push(ChatMessage::user(
            "That was not a single sentence. Reply again with exactly one sentence.",
        ));
    }
    Err(ForgeError::UpdateGeneration { dialogue_id: dialogue.id.clone(), detail: last_err })
}

/// Generates the intent pair for a dialogue. `backend` is only consulted in
/// dynamic mode.
pub fn generate_update(
    dialogue: &DialogueSource,
    mode: UpdateMode,
    backend: Option<&dyn CompletionBackend>,
    params: &CompletionParams,
) -> Result<IntentPair, ForgeError> {
    match mode {
        UpdateMode::Templated => templated_pair(dialogue),
        UpdateMode::Dynamic => {
            let backend = backend.ok_or_else(|| ForgeError::UpdateGeneration {
                dialogue_id: dialogue.id.clone(),
                detail: "dynamic mode requires a backend".into(),
            })?;
            dynamic_pair(dialogue, backend, params)
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::forge::types::Turn;

    use super::*;

    fn dialogue(texts: &[(&str, Speaker)]) -> DialogueSource {
        DialogueSource {
            id: "dlg-test".into(),
            turns: texts
                .iter()
                .map(|(t, s)| Turn { speaker: *s, text: t.to_string() })
                .collect(),
            domain_tags: vec!["restaurant".into()],
        }
    }

    #[test]
    fn templated_update_contradicts_matched_constraint() {
        let d = dialogue(&[
            ("I want a cheap restaurant in the west.", Speaker::User),
            ("There are several cheap options.", Speaker::System),
        ]);
        let pair = generate_update(&d, UpdateMode::Templated, None, &Default::default()).unwrap();
        assert_eq!(pair.contradiction_class.as_deref(), Some("price_cheap"));
        assert_eq!(pair.g1_text, "I want a cheap restaurant in the west.");
        assert!(pair.g2_text.contains("premium"));
        assert_eq!(sentence_count(&pair.g2_text), 1);
    }

    #[test]
    fn unmatched_dialogue_falls_back_to_generic_reversal() {
        let d = dialogue(&[("Tell me about the museum.", Speaker::User)]);
        let pair = generate_update(&d, UpdateMode::Templated, None, &Default::default()).unwrap();
        assert_eq!(pair.contradiction_class.as_deref(), Some("generic_reversal"));
    }

    #[test]
    fn all_template_g2_texts_are_single_sentences() {
        let table = template_table();
        for entry in &table.entries {
            assert_eq!(sentence_count(&entry.g2), 1, "entry {}", entry.id);
        }
        assert_eq!(sentence_count(&table.fallback.g2), 1);
    }

    #[test]
    fn sentence_count_handles_terminator_runs() {
        assert_eq!(sentence_count("One sentence only"), 1);
        assert_eq!(sentence_count("Two here. And another!"), 2);
        assert_eq!(sentence_count("Really?! Yes."), 2);
        assert_eq!(sentence_count(""), 0);
    }
}
