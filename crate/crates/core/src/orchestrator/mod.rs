//! Experiment orchestration: configuration, durable stores, the completion
//! ledger, and the phase runners that chain forge, run, judge, and score
//! into a resumable, deterministic pipeline.

pub mod config;
pub mod experiment;
pub mod ledger;
pub mod store;

pub use config::{ConfigError, JudgeDescriptor, NamedJudge, RunConfig, SsrpSection};
pub use experiment::{
    ablate_equidistant, ablate_granularity, forge_phase, judge_phase, load_corpus,
    load_trajectories, run_phase, score_phase, EquidistantRow, ExperimentPaths, GranularityRow,
    PipelineError, RunSummary,
};
pub use ledger::{work_key, Ledger, LedgerEntry};
pub use store::{
    load_run_record, store_run_record, BlobStore, StoreError, StoredRunRecord,
    PROMPT_BLOB_THRESHOLD,
};
