//! Append-only JSONL record store.
//!
//! Line 1 is a header carrying the plan fingerprint and the word-counting
//! rules version; every following line is one generation record. Records
//! are flushed and synced as they are appended, so a crash loses at most
//! the line being written — the reader tolerates a truncated final line.
//!
//! Retried cells append a fresh record rather than rewriting history, so a
//! key can appear once as a failure and again as a success; readers use
//! [`effective_records`] (last record per key wins). At most one
//! *successful* record may exist per key, which [`audit`] enforces.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lenfid_core::metrics::{length_metrics, LengthMetrics};
use lenfid_core::parse::ParseMethod;
use lenfid_core::prompt::{PromptFamily, VariantId};
use lenfid_core::wordcount;

pub const STORE_SCHEMA: &str = "lenfid-store/1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store not found: {0}")]
    NotFound(PathBuf),
    #[error("store already exists: {0} (resume, or remove it first)")]
    AlreadyExists(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("store {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("store header schema is {found}, expected {STORE_SCHEMA}")]
    SchemaMismatch { found: String },
    #[error("store was written for a different plan (fingerprint {found}, plan has {expected})")]
    PlanMismatch { expected: String, found: String },
    #[error("store is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub schema: String,
    pub plan_fingerprint: String,
    pub rules_version: String,
    pub created_unix_ms: u64,
}

impl StoreHeader {
    pub fn new(plan_fingerprint: impl Into<String>) -> Self {
        Self {
            schema: STORE_SCHEMA.to_string(),
            plan_fingerprint: plan_fingerprint.into(),
            rules_version: wordcount::RULES_VERSION.to_string(),
            created_unix_ms: now_unix_ms(),
        }
    }
}

pub fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Error,
}

/// One grid cell: the unique identity of a generation attempt.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub endpoint_id: String,
    pub variant_id: String,
    pub target_words: u32,
    pub attempt: u32,
}

impl CellKey {
    pub fn record_id(&self) -> String {
        format!(
            "{}/{}/t{}/a{}",
            self.endpoint_id, self.variant_id, self.target_words, self.attempt
        )
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.record_id())
    }
}

/// One generation attempt, successful or failed. Failed records keep the
/// cell identity and the error class; successful records carry the full
/// parse/count/metrics pipeline output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub record_id: String,
    pub endpoint_id: String,
    pub variant_id: VariantId,
    pub family: PromptFamily,
    pub target_words: u32,
    pub attempt: u32,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinking_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_method: Option<ParseMethod>,
    #[serde(default)]
    pub unclosed_tag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<LengthMetrics>,
    pub latency_ms: f64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(default)]
    pub tokens_estimated: bool,
    pub rules_version: String,
    pub timestamp_unix_ms: u64,
}

impl GenerationRecord {
    pub fn key(&self) -> CellKey {
        CellKey {
            endpoint_id: self.endpoint_id.clone(),
            variant_id: self.variant_id.as_str().to_string(),
            target_words: self.target_words,
            attempt: self.attempt,
        }
    }

    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Ok
    }
}

pub struct StoreWriter {
    file: File,
    path: PathBuf,
}

impl StoreWriter {
    /// Create a fresh store and write the header line. Refuses to clobber
    /// an existing file.
    pub fn create(path: impl AsRef<Path>, header: &StoreHeader) -> Result<Self, StoreError> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|source| StoreError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
            }
        }
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(|source| match source.kind() {
                std::io::ErrorKind::AlreadyExists => StoreError::AlreadyExists(path.to_path_buf()),
                _ => StoreError::Io {
                    path: path.to_path_buf(),
                    source,
                },
            })?;
        let mut writer = Self {
            file,
            path: path.to_path_buf(),
        };
        writer.write_line(&serde_json::to_string(header).expect("header serializes"))?;
        Ok(writer)
    }

    /// Open an existing store for appending after verifying its header
    /// against the plan fingerprint. A torn final line (crash during a
    /// previous append) is truncated away so new records start on a fresh
    /// line; the reader skipped it anyway, so the cell it belonged to is
    /// still pending and will be reissued.
    pub fn open_append(
        path: impl AsRef<Path>,
        expected_fingerprint: &str,
    ) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let loaded = load_store(path)?;
        if loaded.header.plan_fingerprint != expected_fingerprint {
            return Err(StoreError::PlanMismatch {
                expected: expected_fingerprint.to_string(),
                found: loaded.header.plan_fingerprint,
            });
        }

        let io_err = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let bytes = std::fs::read(path).map_err(io_err)?;
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            let keep = bytes
                .iter()
                .rposition(|&b| b == b'\n')
                .map(|i| i + 1)
                .unwrap_or(0);
            let file = OpenOptions::new().write(true).open(path).map_err(io_err)?;
            file.set_len(keep as u64).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }

        let file = OpenOptions::new().append(true).open(path).map_err(io_err)?;
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    /// Append one record, flushed and synced before returning.
    pub fn append(&mut self, record: &GenerationRecord) -> Result<(), StoreError> {
        self.write_line(&serde_json::to_string(record).expect("record serializes"))
    }

    fn write_line(&mut self, line: &str) -> Result<(), StoreError> {
        let io_err = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io_err)?;
        self.file.write_all(b"\n").map_err(io_err)?;
        self.file.sync_data().map_err(io_err)
    }
}

#[derive(Debug)]
pub struct LoadedStore {
    pub path: PathBuf,
    pub header: StoreHeader,
    pub records: Vec<GenerationRecord>,
    pub warnings: Vec<String>,
}

impl LoadedStore {
    /// Last record per cell key. A retried failure is superseded by the
    /// success appended after it.
    pub fn effective(&self) -> BTreeMap<CellKey, &GenerationRecord> {
        effective_records(&self.records)
    }

    pub fn successful_keys(&self) -> std::collections::BTreeSet<CellKey> {
        self.effective()
            .into_iter()
            .filter(|(_, r)| r.is_success())
            .map(|(k, _)| k)
            .collect()
    }
}

pub fn effective_records(records: &[GenerationRecord]) -> BTreeMap<CellKey, &GenerationRecord> {
    let mut map = BTreeMap::new();
    for record in records {
        map.insert(record.key(), record);
    }
    map
}

/// Read a store. A torn final line (crash during append) is skipped with a
/// warning; damage anywhere else is an error.
pub fn load_store(path: impl AsRef<Path>) -> Result<LoadedStore, StoreError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => StoreError::NotFound(path.to_path_buf()),
        _ => StoreError::Io {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for line in reader.split(b'\n') {
        let line = line.map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        lines.push(line);
    }
    // A trailing newline yields one empty trailing chunk; drop it.
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(StoreError::Empty);
    }

    let header: StoreHeader =
        serde_json::from_slice(&lines[0]).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            line: 1,
            message: format!("bad header: {e}"),
        })?;
    if header.schema != STORE_SCHEMA {
        return Err(StoreError::SchemaMismatch {
            found: header.schema,
        });
    }

    let mut records = Vec::with_capacity(lines.len() - 1);
    let mut warnings = Vec::new();
    let last_index = lines.len() - 1;
    for (i, line) in lines.iter().enumerate().skip(1) {
        match serde_json::from_slice::<GenerationRecord>(line) {
            Ok(record) => records.push(record),
            Err(e) if i == last_index => {
                warnings.push(format!(
                    "skipped truncated final line {} ({e})",
                    last_index + 1
                ));
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                });
            }
        }
    }

    Ok(LoadedStore {
        path: path.to_path_buf(),
        header,
        records,
        warnings,
    })
}

#[derive(Debug, Default)]
pub struct AuditReport {
    pub records_checked: usize,
    pub mismatches: Vec<String>,
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recompute the word count and metrics of every effective successful
/// record and compare with what was stored. Records written under a
/// different rules version are recounted and reported as warnings, not
/// mismatches. Duplicate successful keys are integrity violations.
pub fn audit(store: &LoadedStore) -> AuditReport {
    let mut report = AuditReport {
        warnings: store.warnings.clone(),
        ..Default::default()
    };

    let mut successful_seen: BTreeMap<CellKey, usize> = BTreeMap::new();
    for record in &store.records {
        if record.is_success() {
            *successful_seen.entry(record.key()).or_default() += 1;
        }
    }
    for (key, count) in successful_seen {
        if count > 1 {
            report
                .mismatches
                .push(format!("{key}: {count} successful records for one cell"));
        }
    }

    for (key, record) in store.effective() {
        if !record.is_success() {
            continue;
        }
        report.records_checked += 1;
        let Some(final_text) = record.final_text.as_deref() else {
            report
                .mismatches
                .push(format!("{key}: successful record has no final_text"));
            continue;
        };
        let recount = wordcount::count_words(final_text) as u64;
        if record.rules_version != wordcount::RULES_VERSION {
            report.warnings.push(format!(
                "{key}: stored under rules {} (current {}); recount under current rules = {recount}, stored = {}",
                record.rules_version,
                wordcount::RULES_VERSION,
                record.word_count.unwrap_or(0),
            ));
            continue;
        }
        if record.word_count != Some(recount) {
            report.mismatches.push(format!(
                "{key}: stored word_count {:?} but recount gives {recount}",
                record.word_count
            ));
            continue;
        }
        match (
            record.metrics,
            length_metrics(recount, u64::from(record.target_words)),
        ) {
            (Some(stored), Ok(fresh)) => {
                if stored != fresh {
                    report.mismatches.push(format!(
                        "{key}: stored metrics {stored:?} != recomputed {fresh:?}"
                    ));
                }
            }
            (None, _) => report
                .mismatches
                .push(format!("{key}: successful record has no metrics")),
            (_, Err(e)) => report
                .mismatches
                .push(format!("{key}: metrics not recomputable: {e}")),
        }
    }

    report
}
