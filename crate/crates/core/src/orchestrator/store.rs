//! Durable experiment state: JSONL stores, a content-addressed blob store
//! for oversized prompts, and atomic whole-file rewrites.
//!
//! Run records are stored with their prompts inline unless the serialized
//! prompt list exceeds [`PROMPT_BLOB_THRESHOLD`]; such prompts move to
//! `blobs/<sha256>.json` and the record keeps only the hash. Rehydration is
//! lossless, so byte-identity checks on `runs.jsonl` stay meaningful while
//! the line store stays scannable.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::hashing::sha256_hex;
use crate::strategy::AgentRunRecord;

/// Serialized prompt lists above this many bytes move to the blob store.
pub const PROMPT_BLOB_THRESHOLD: usize = 64 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io on {path}: {detail}")]
    Io { path: PathBuf, detail: String },

    #[error("{path} line {line}: {detail}")]
    Malformed { path: PathBuf, line: usize, detail: String },

    #[error("blob {hash} referenced but missing")]
    MissingBlob { hash: String },
}

fn io_err(path: &Path, e: std::io::Error) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), detail: e.to_string() }
}

/// Serializes each item to one JSON line and atomically replaces `path`
/// (write to sibling temp file, fsync, rename).
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    let tmp = path.with_extension("tmp");
    {
        let mut out = std::fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        for item in items {
            let line = serde_json::to_string(item)
                .map_err(|e| io_err(path, std::io::Error::other(e)))?;
            writeln!(out, "{line}").map_err(|e| io_err(&tmp, e))?;
        }
        out.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Appends one JSON line, creating the file and parents as needed.
pub fn append_jsonl<T: Serialize>(path: &Path, item: &T) -> Result<(), StoreError> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    let mut out = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let line =
        serde_json::to_string(item).map_err(|e| io_err(path, std::io::Error::other(e)))?;
    writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads a JSONL file, skipping blank lines. A missing file is an error;
/// callers that tolerate absence check first.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| StoreError::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Content-addressed store: `dir/<sha256>.json`.
#[derive(Debug, Clone)]
pub struct BlobStore {
    dir: PathBuf,
}

impl BlobStore {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    /// Writes the bytes under their hash; idempotent for identical content.
    pub fn put(&self, bytes: &[u8]) -> Result<String, StoreError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let hash = sha256_hex(bytes);
        let path = self.path_for(&hash);
        if !path.exists() {
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        }
        Ok(hash)
    }

    pub fn get(&self, hash: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.path_for(hash);
        std::fs::read(&path).map_err(|_| StoreError::MissingBlob { hash: hash.to_string() })
    }
}

/// Run record as persisted: prompts inline or externalized by hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRunRecord {
    #[serde(flatten)]
    pub record: AgentRunRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts_blob: Option<String>,
}

/// Externalizes oversized prompts before storage.
pub fn store_run_record(
    record: &AgentRunRecord,
    blobs: &BlobStore,
) -> Result<StoredRunRecord, StoreError> {
    let prompts_json = serde_json::to_vec(&record.prompts)
        .map_err(|e| io_err(&blobs.dir, std::io::Error::other(e)))?;
    if prompts_json.len() <= PROMPT_BLOB_THRESHOLD {
        return Ok(StoredRunRecord { record: record.clone(), prompts_blob: None });
    }
    let hash = blobs.put(&prompts_json)?;
    let mut slim = record.clone();
    slim.prompts = Vec::new();
    Ok(StoredRunRecord { record: slim, prompts_blob: Some(hash) })
}

/// Restores the full record, reading externalized prompts back in.
pub fn load_run_record(
    stored: StoredRunRecord,
    blobs: &BlobStore,
) -> Result<AgentRunRecord, StoreError> {
    let mut record = stored.record;
    if let Some(hash) = stored.prompts_blob {
        let bytes = blobs.get(&hash)?;
        record.prompts = serde_json::from_slice(&bytes).map_err(|e| StoreError::Malformed {
            path: blobs.path_for(&hash),
            line: 1,
            detail: e.to_string(),
        })?;
    }
    Ok(record)
}
