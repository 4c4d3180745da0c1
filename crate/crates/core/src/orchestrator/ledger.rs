//! Append-only completion ledger. One line per finished work item keyed
//! `"<trajectory_id>::<strategy>"`, carrying the input hash that produced it
//! and the hash of what it produced.
//!
//! The ledger is the resume authority: a later invocation skips items whose
//! key and input hash match, and hard-errors when a key matches but the
//! input hash does not (the config or seed changed under the experiment
//! directory, so skipping or re-running would silently mix regimes).
//!
//! Wall-clock measurements live here and only here; the run store must stay
//! byte-identical across machines and parallelism levels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::orchestrator::store::{append_jsonl, read_jsonl, StoreError};
use crate::strategy::StrategyKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub key: String,
    /// Hash of everything that determines the record: trajectory id and
    /// seed, strategy, backend labels, prompt version, completion params.
    pub input_hash: String,
    /// Hash of the stored record line.
    pub output_hash: String,
    pub wall_time_ms: u64,
    pub completed_unix_ms: u64,
}

pub fn work_key(trajectory_id: &str, strategy: StrategyKind) -> String {
    format!("{trajectory_id}::{}", strategy.name())
}

/// In-memory view of the ledger file. Later lines for the same key win,
/// though the writer never appends duplicates on the happy path.
#[derive(Debug, Default)]
pub struct Ledger {
    entries: BTreeMap<String, LedgerEntry>,
}

impl Ledger {
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let lines: Vec<LedgerEntry> = read_jsonl(path)?;
        let mut entries = BTreeMap::new();
        for entry in lines {
            entries.insert(entry.key.clone(), entry);
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, key: &str) -> Option<&LedgerEntry> {
        self.entries.get(key)
    }

    /// Appends to the file and updates the in-memory view.
    pub fn append(&mut self, path: &Path, entry: LedgerEntry) -> Result<(), StoreError> {
        append_jsonl(path, &entry)?;
        self.entries.insert(entry.key.clone(), entry);
        Ok(())
    }
}

pub fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
