//! Dialogue corpus loading and conversion.
//!
//! The native corpus format is JSONL, one dialogue per line:
//!
//! ```text
//! {"id": "...", "turns": [{"speaker": "user"|"system", "text": "..."}], "domains": ["..."]}
//! ```
//!
//! [`import_multiwoz`] converts the public MultiWOZ 2.2 test split into this
//! format, and [`synthetic_corpus`] generates small task-oriented dialogues
//! from a seed so the whole pipeline runs without any external data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::forge::{DialogueSource, Speaker, Turn};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line} of {path}: {detail}")]
    Malformed { path: String, line: usize, detail: String },

    #[error("duplicate dialogue id {id} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("corpus {path} contains no valid dialogues")]
    Empty { path: String },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), source }
}

/// Loads up to `limit` dialogues from a corpus JSONL file, preserving file
/// order. Blank lines are skipped; any other malformed line is an error, as
/// is a duplicate id. `limit = Some(0)` returns an empty list.
pub fn load_dialogues(
    path: &Path,
    limit: Option<usize>,
) -> Result<Vec<DialogueSource>, CorpusError> {
    if limit == Some(0) {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let dialogue: DialogueSource =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                path: path.display().to_string(),
                line: i + 1,
                detail: e.to_string(),
            })?;
        if dialogue.id.is_empty() || dialogue.turns.is_empty() {
            return Err(CorpusError::Malformed {
                path: path.display().to_string(),
                line: i + 1,
                detail: "dialogue needs a non-empty id and at least one turn".into(),
            });
        }
        if !seen.insert(dialogue.id.clone()) {
            return Err(CorpusError::DuplicateId { id: dialogue.id, line: i + 1 });
        }
        out.push(dialogue);
        if limit.is_some_and(|l| out.len() >= l) {
            break;
        }
    }
    if out.is_empty() {
        return Err(CorpusError::Empty { path: path.display().to_string() });
    }
    Ok(out)
}

// MultiWOZ 2.2 ships in two shapes we accept: the columnar per-dialogue rows
// produced by dataset hub exports, and plain nested turn arrays.

#[derive(Deserialize)]
struct MwozColumnarRow {
    dialogue_id: String,
    #[serde(default)]
    services: Vec<String>,
    turns: MwozColumnarTurns,
}

#[derive(Deserialize)]
struct MwozColumnarTurns {
    speaker: Vec<u8>,
    utterance: Vec<String>,
}

#[derive(Deserialize)]
struct MwozNestedRow {
    dialogue_id: String,
    #[serde(default)]
    services: Vec<String>,
    turns: Vec<MwozNestedTurn>,
}

#[derive(Deserialize)]
struct MwozNestedTurn {
    speaker: serde_json::Value,
    #[serde(alias = "text")]
    utterance: String,
}

fn speaker_from_value(v: &serde_json::Value) -> Option<Speaker> {
    match v {
        serde_json::Value::Number(n) => match n.as_u64()? {
            0 => Some(Speaker::User),
            1 => Some(Speaker::System),
            _ => None,
        },
        serde_json::Value::String(s) => match s.to_uppercase().as_str() {
            "USER" | "0" => Some(Speaker::User),
            "SYSTEM" | "1" => Some(Speaker::System),
            _ => None,
        },
        _ => None,
    }
}

fn convert_row(raw: &str, path: &Path, line: usize) -> Result<DialogueSource, CorpusError> {
    let malformed = |detail: String| CorpusError::Malformed {
        path: path.display().to_string(),
        line,
        detail,
    };
    if let Ok(row) = serde_json::from_str::<MwozColumnarRow>(raw) {
        if row.turns.speaker.len() != row.turns.utterance.len() {
            return Err(malformed("speaker and utterance columns differ in length".into()));
        }
        let turns = row
            .turns
            .speaker
            .iter()
            .zip(row.turns.utterance)
            .map(|(s, text)| Turn {
                speaker: if *s == 0 { Speaker::User } else { Speaker::System },
                text,
            })
            .collect();
        return Ok(DialogueSource { id: row.dialogue_id, turns, domain_tags: row.services });
    }
    let row: MwozNestedRow =
        serde_json::from_str(raw).map_err(|e| malformed(format!("unrecognized row: {e}")))?;
    let mut turns = Vec::with_capacity(row.turns.len());
    for t in row.turns {
        let speaker = speaker_from_value(&t.speaker)
            .ok_or_else(|| malformed(format!("unrecognized speaker label {}", t.speaker)))?;
        turns.push(Turn { speaker, text: t.utterance });
    }
    Ok(DialogueSource { id: row.dialogue_id, turns, domain_tags: row.services })
}

/// Converts a MultiWOZ 2.2 export (JSONL rows or one top-level JSON array)
/// into the corpus format. Returns the number of dialogues written.
pub fn import_multiwoz(
    input: &Path,
    output: &Path,
    limit: Option<usize>,
) -> Result<usize, CorpusError> {
    let raw = std::fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let rows: Vec<String> = if raw.trim_start().starts_with('[') {
        let values: Vec<serde_json::Value> =
            serde_json::from_str(&raw).map_err(|e| CorpusError::Malformed {
                path: input.display().to_string(),
                line: 1,
                detail: e.to_string(),
            })?;
        values.iter().map(|v| v.to_string()).collect()
    } else {
        raw.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
    };

    let file = File::create(output).map_err(|e| io_err(output, e))?;
    let mut writer = BufWriter::new(file);
    let mut written = 0usize;
    for (i, row) in rows.iter().enumerate() {
        if limit.is_some_and(|l| written >= l) {
            break;
        }
        let dialogue = convert_row(row, input, i + 1)?;
        if dialogue.turns.is_empty() {
            continue;
        }
        let line = serde_json::to_string(&dialogue).expect("dialogue serializes");
        writeln!(writer, "{line}").map_err(|e| io_err(output, e))?;
        written += 1;
    }
    writer.flush().map_err(|e| io_err(output, e))?;
    if written == 0 {
        return Err(CorpusError::Empty { path: input.display().to_string() });
    }
    Ok(written)
}

const VENUES: [&str; 8] = [
    "guesthouse", "restaurant", "hotel", "cafe", "bistro", "hostel", "inn", "brasserie",
];
const AREAS: [&str; 4] = ["in the north", "in the south", "in the centre", "in the east"];
const PRICES: [&str; 2] = ["cheap", "expensive"];
const DAYS: [&str; 4] = ["on Saturday", "on Sunday", "on Monday", "on Friday"];

/// Generates `n` small task-oriented dialogues from a seed. Each dialogue
/// states at least one constraint the update templates know how to reverse,
/// so templated intent pairs always resolve to a concrete contradiction.
pub fn synthetic_corpus(seed: u64, n: usize) -> Vec<DialogueSource> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(
            crate::hashing::stable_hash64(&[&seed.to_string(), "dialogue", &i.to_string()]),
        );
        let venue = VENUES[rng.gen_range(0..VENUES.len())];
        let area = AREAS[rng.gen_range(0..AREAS.len())];
        let price = PRICES[rng.gen_range(0..PRICES.len())];
        let day = DAYS[rng.gen_range(0..DAYS.len())];
        let people = rng.gen_range(2..=8u32);
        let ref_code: u32 = rng.gen();
        let turns = vec![
            Turn::user(format!("I am looking for a {price} {venue} {area}.")),
            Turn::system(format!(
                "There are a few {price} options {area}. Would you like me to book one?"
            )),
            Turn::user(format!("Yes, please book it for {people} people {day}.")),
            Turn::system(format!(
                "Booking confirmed {day} for {people}. Your reference is R{ref_code:07}."
            )),
            Turn::user("Great, and could you also check the travel options for that day?"),
            Turn::system("Certainly, there are regular connections all day."),
        ];
        out.push(DialogueSource {
            id: format!("syn{i:04}"),
            turns,
            domain_tags: vec![venue.to_string()],
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(dir: &Path, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    #[test]
    fn load_respects_limit_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let corpus: Vec<String> = synthetic_corpus(3, 5)
            .iter()
            .map(|d| serde_json::to_string(d).unwrap())
            .collect();
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        let path = write_lines(dir.path(), "c.jsonl", &refs);
        let loaded = load_dialogues(&path, Some(2)).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].id, "syn0000");
        assert_eq!(loaded[1].id, "syn0001");
        assert!(load_dialogues(&path, Some(0)).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_is_an_error_not_a_skip() {
        let dir = tempfile::tempdir().unwrap();
        let good = serde_json::to_string(&synthetic_corpus(3, 1)[0]).unwrap();
        let path = write_lines(dir.path(), "c.jsonl", &[&good, "{not json"]);
        let err = load_dialogues(&path, None).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let good = serde_json::to_string(&synthetic_corpus(3, 1)[0]).unwrap();
        let path = write_lines(dir.path(), "c.jsonl", &[&good, &good]);
        let err = load_dialogues(&path, None).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn multiwoz_columnar_rows_convert() {
        let dir = tempfile::tempdir().unwrap();
        let row = r#"{"dialogue_id": "PMUL0001.json", "services": ["hotel"], "turns": {"turn_id": ["0", "1"], "speaker": [0, 1], "utterance": ["I need a cheap hotel.", "Sure, there are 3 options."]}}"#;
        let input = write_lines(dir.path(), "mwoz.jsonl", &[row]);
        let output = dir.path().join("corpus.jsonl");
        assert_eq!(import_multiwoz(&input, &output, None).unwrap(), 1);
        let loaded = load_dialogues(&output, None).unwrap();
        assert_eq!(loaded[0].id, "PMUL0001.json");
        assert_eq!(loaded[0].turns[0].speaker, Speaker::User);
        assert_eq!(loaded[0].turns[1].speaker, Speaker::System);
        assert_eq!(loaded[0].domain_tags, vec!["hotel".to_string()]);
    }

    #[test]
    fn multiwoz_nested_array_converts() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"[{"dialogue_id": "SNG0002.json", "services": ["train"], "turns": [{"speaker": "USER", "text": "I want a train on Sunday."}, {"speaker": "SYSTEM", "text": "Where to?"}]}]"#;
        let input = write_lines(dir.path(), "mwoz.json", &[body]);
        let output = dir.path().join("corpus.jsonl");
        assert_eq!(import_multiwoz(&input, &output, None).unwrap(), 1);
        let loaded = load_dialogues(&output, None).unwrap();
        assert_eq!(loaded[0].turns.len(), 2);
    }

    #[test]
    fn synthetic_corpus_is_deterministic() {
        assert_eq!(synthetic_corpus(9, 4), synthetic_corpus(9, 4));
        assert_ne!(synthetic_corpus(9, 4), synthetic_corpus(10, 4));
    }
}
