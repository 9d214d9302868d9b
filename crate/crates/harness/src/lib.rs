//! Experiment harness for length-controlled generation: model endpoints
//! and the deterministic mock, document ingestion, plan files, the grid
//! runner with its JSONL record store, judge-based quality scoring, and
//! report generation. The pure algorithms (prompting, parsing, counting,
//! metrics) live in `lenfid-core`.

pub mod cli;
pub mod client;
pub mod ingest;
pub mod judge;
pub mod mock;
pub mod plan;
pub mod report;
pub mod runner;
pub mod store;
