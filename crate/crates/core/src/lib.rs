//! Benchmark harness for multi-turn goal-pivot reliability.
//!
//! The crate forges adversarial long-context trajectories out of task-oriented
//! dialogues, runs agent strategies against pluggable completion backends,
//! scores the transcripts with a judge pipeline, and aggregates reliability
//! metrics. The pieces fit together like this:
//!
//! * [`corpus`] loads dialogue sources and generates intent updates (the
//!   "goal pivot" a trajectory is built around).
//! * [`forge`] assembles trajectories: seeded payloads at controlled context
//!   depths, padded to a token budget with synthetic system-log noise.
//! * [`strategy`] runs a trajectory through one of three execution strategies:
//!   a single vanilla call, a two-stage architect/executive protocol pipeline,
//!   or a two-call self-critique baseline.
//! * [`backend`] abstracts completion providers: remote HTTP, scripted
//!   fixtures for offline tests, and a synthetic backend driven by [`sim`].
//! * [`sim`] is a closed-form latch simulator with a quadratic positional
//!   attention curve, so the whole pipeline verifies without network access.
//! * [`judge`] turns responses into verdicts: semantic alignment, verbatim
//!   signal audit, refusal detection, and procedural-integrity audit.
//! * [`metrics`] computes aggregate pivot accuracy, resilience lift, paired
//!   significance, and the attention-curve fit.
//! * [`orchestrator`] wires the stages into resumable, deterministic
//!   experiment runs behind the `pivotbench` CLI.
//!
//! Every stage is a deterministic function of explicit seeds: re-running an
//! experiment with the same config and seed reproduces the stored artifacts
//! byte for byte, at any worker parallelism.

pub mod backend;
pub mod cli;
pub mod corpus;
pub mod forge;
pub mod judge;
pub mod metrics;
pub mod orchestrator;
pub mod sim;
pub mod strategy;
pub mod tokens;

pub(crate) mod hashing;
pub(crate) mod names;
