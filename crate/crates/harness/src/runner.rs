//! Grid orchestration: expand a plan into cells, execute each cell through
//! render -> generate -> parse -> strip -> count -> metrics, and persist
//! every record durably before the worker moves on.
//!
//! Each endpoint gets one worker thread, which makes the per-endpoint
//! pacing delay and in-order attempts trivial (per-endpoint concurrency is
//! one by construction); a global semaphore bounds total in-flight requests
//! at `concurrency_limit`. Cell failures are recorded and the run carries
//! on — a dead endpoint costs only its own cells.

use std::collections::BTreeSet;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use lenfid_core::metrics::length_metrics;
use lenfid_core::parse::{extract_final, strip_scaffold, ParseError};
use lenfid_core::prompt::{PromptVariant, TaskKind, TaskSpec};
use lenfid_core::wordcount;

use crate::client::{build_client, DocumentPayload, GenerationRequest, ModelClient};
use crate::ingest;
use crate::plan::{ExperimentPlan, PlanError};
use crate::store::{
    load_store, now_unix_ms, CellKey, GenerationRecord, Outcome, StoreError, StoreHeader,
    StoreWriter,
};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
}

/// Deterministic cell order: endpoints, then variants, then targets, then
/// attempts, each in plan order.
pub fn expand(plan: &ExperimentPlan) -> Result<Vec<CellKey>, RunnerError> {
    plan.validate()?;
    let mut cells = Vec::with_capacity(plan.cell_count());
    for endpoint in &plan.endpoints {
        for variant in &plan.variants {
            for &target in &plan.targets {
                for attempt in 0..plan.attempts {
                    cells.push(CellKey {
                        endpoint_id: endpoint.id.clone(),
                        variant_id: variant.clone(),
                        target_words: target,
                        attempt,
                    });
                }
            }
        }
    }
    Ok(cells)
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub completed: usize,
    pub failed: usize,
    pub skipped: usize,
}

/// Execute a plan. With `resume` the existing store is verified against the
/// plan fingerprint and only cells without a successful record are issued;
/// otherwise a fresh store is created.
pub fn run(plan: &ExperimentPlan, resume: bool) -> Result<RunSummary, RunnerError> {
    plan.validate()?;
    let variants = plan.resolve_variants()?;

    let (writer, done) = if resume {
        let loaded = load_store(&plan.output_path)?;
        let writer = StoreWriter::open_append(&plan.output_path, &plan.fingerprint())?;
        (writer, loaded.successful_keys())
    } else {
        let writer = StoreWriter::create(&plan.output_path, &StoreHeader::new(plan.fingerprint()))?;
        (writer, BTreeSet::new())
    };

    run_with_writer(plan, &variants, writer, &done)
}

fn run_with_writer(
    plan: &ExperimentPlan,
    variants: &[PromptVariant],
    writer: StoreWriter,
    done: &BTreeSet<CellKey>,
) -> Result<RunSummary, RunnerError> {
    let documents = prepare_documents(plan)?;
    let writer = Arc::new(Mutex::new(writer));
    let semaphore = Arc::new(Semaphore::new(plan.concurrency_limit.max(1)));

    let totals = Mutex::new(RunSummary::default());
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for endpoint in &plan.endpoints {
            let writer = Arc::clone(&writer);
            let semaphore = Arc::clone(&semaphore);
            let documents = &documents;
            let totals = &totals;
            handles.push(scope.spawn(move || {
                let summary = endpoint_worker(
                    plan, variants, endpoint, documents, done, &writer, &semaphore,
                );
                let mut t = totals.lock().expect("summary lock");
                t.completed += summary.completed;
                t.failed += summary.failed;
                t.skipped += summary.skipped;
            }));
        }
        for handle in handles {
            handle.join().expect("worker thread panicked");
        }
    });

    Ok(totals.into_inner().expect("summary lock"))
}

/// Per-attachment-mode document payloads, loaded once.
struct Documents {
    text: Option<Arc<DocumentPayload>>,
    file: Option<Arc<DocumentPayload>>,
    /// Document string used for TaskSpec validation (the prompt text never
    /// embeds it; clients attach the payload separately).
    task_document: Option<String>,
}

fn prepare_documents(plan: &ExperimentPlan) -> Result<Documents, RunnerError> {
    if plan.task.kind != TaskKind::Summarize {
        return Ok(Documents {
            text: None,
            file: None,
            task_document: None,
        });
    }
    let path = plan
        .task
        .document
        .as_ref()
        .ok_or(PlanError::MissingDocument)?;

    let needs_text = plan
        .endpoints
        .iter()
        .any(|e| e.attachment_mode == crate::client::AttachmentMode::InlineText);
    let needs_file = plan
        .endpoints
        .iter()
        .any(|e| e.attachment_mode == crate::client::AttachmentMode::FilePart);

    let mut text = None;
    let mut task_document = None;
    if needs_text {
        let doc = ingest::load_document(path)?;
        task_document = Some(doc.text.clone());
        text = Some(Arc::new(DocumentPayload::Text(doc.text)));
    }
    let mut file = None;
    if needs_file {
        let (filename, bytes) = ingest::load_opaque(path)?;
        if task_document.is_none() {
            // Opaque-only runs cannot pre-read the document; the stand-in
            // satisfies the summarize-task invariant without being sent.
            task_document = Some(filename.clone());
        }
        file = Some(Arc::new(DocumentPayload::File { filename, bytes }));
    }
    Ok(Documents {
        text,
        file,
        task_document,
    })
}

#[allow(clippy::too_many_arguments)]
fn endpoint_worker(
    plan: &ExperimentPlan,
    variants: &[PromptVariant],
    endpoint: &crate::client::ModelEndpoint,
    documents: &Documents,
    done: &BTreeSet<CellKey>,
    writer: &Mutex<StoreWriter>,
    semaphore: &Semaphore,
) -> RunSummary {
    let mut summary = RunSummary::default();
    let client = build_client(endpoint, plan.seed);
    let payload = match endpoint.attachment_mode {
        crate::client::AttachmentMode::InlineText => documents.text.as_deref(),
        crate::client::AttachmentMode::FilePart => documents.file.as_deref(),
    };

    let mut issued_any = false;
    for variant in variants {
        for &target in &plan.targets {
            for attempt in 0..plan.attempts {
                let key = CellKey {
                    endpoint_id: endpoint.id.clone(),
                    variant_id: variant.id.as_str().to_string(),
                    target_words: target,
                    attempt,
                };
                if done.contains(&key) {
                    summary.skipped += 1;
                    continue;
                }

                let record = match &client {
                    Err(e) => failed_record(&key, variant, e.class(), &e.to_string()),
                    Ok(client) => {
                        if issued_any && plan.inter_attempt_delay_ms > 0 {
                            std::thread::sleep(Duration::from_millis(plan.inter_attempt_delay_ms));
                        }
                        issued_any = true;
                        let _permit = semaphore.acquire();
                        execute_cell(&key, variant, target, client.as_ref(), payload, documents)
                    }
                };

                if record.is_success() {
                    summary.completed += 1;
                } else {
                    summary.failed += 1;
                }
                writer
                    .lock()
                    .expect("store writer lock")
                    .append(&record)
                    .expect("store append failed");
            }
        }
    }
    summary
}

/// The full per-cell pipeline. Every failure mode collapses into a failed
/// record; the run never aborts because one cell went wrong.
fn execute_cell(
    key: &CellKey,
    variant: &PromptVariant,
    target: u32,
    client: &dyn ModelClient,
    payload: Option<&DocumentPayload>,
    documents: &Documents,
) -> GenerationRecord {
    let task = match variant.task_kind() {
        Some(TaskKind::Story) => TaskSpec::story(target),
        _ => match &documents.task_document {
            Some(doc) => TaskSpec::summarize(doc.clone(), target),
            None => TaskSpec::story(target),
        },
    };

    let rendered = match variant.render(&task) {
        Ok(r) => r,
        Err(e) => return failed_record(key, variant, "render", &e.to_string()),
    };

    let response = match client.generate(&GenerationRequest {
        prompt_text: &rendered.text,
        document: payload,
        target_words: Some(target),
    }) {
        Ok(r) => r,
        Err(e) => return failed_record(key, variant, e.class(), &e.to_string()),
    };

    let parsed = match extract_final(&response.text, variant.family) {
        Ok(p) => p,
        Err(e) => {
            let mut record = failed_record(key, variant, parse_error_class(&e), &e.to_string());
            record.raw_response = Some(response.text);
            record.latency_ms = response.latency_ms;
            record.input_tokens = response.input_tokens;
            record.output_tokens = response.output_tokens;
            record.tokens_estimated = response.tokens_estimated;
            return record;
        }
    };

    let final_text = strip_scaffold(&parsed.final_text);
    if final_text.is_empty() {
        let mut record = failed_record(
            key,
            variant,
            parse_error_class(&ParseError::ThinkingOnly),
            "final answer was empty after scaffold stripping",
        );
        record.raw_response = Some(response.text);
        return record;
    }

    let word_count = wordcount::count_words(&final_text) as u64;
    let metrics =
        length_metrics(word_count, u64::from(target)).expect("target >= 1 by plan validation");

    GenerationRecord {
        record_id: key.record_id(),
        endpoint_id: key.endpoint_id.clone(),
        variant_id: variant.id.clone(),
        family: variant.family,
        target_words: target,
        attempt: key.attempt,
        outcome: Outcome::Ok,
        error_class: None,
        error_message: None,
        raw_response: Some(response.text),
        final_text: Some(final_text),
        thinking_text: parsed.thinking_text,
        parse_method: Some(parsed.method),
        unclosed_tag: parsed.unclosed_tag,
        word_count: Some(word_count),
        metrics: Some(metrics),
        latency_ms: response.latency_ms,
        input_tokens: response.input_tokens,
        output_tokens: response.output_tokens,
        tokens_estimated: response.tokens_estimated,
        rules_version: wordcount::RULES_VERSION.to_string(),
        timestamp_unix_ms: now_unix_ms(),
    }
}

fn parse_error_class(error: &ParseError) -> &'static str {
    match error {
        ParseError::EmptyResponse => "parse_empty",
        ParseError::ThinkingOnly => "parse_thinking_only",
    }
}

fn failed_record(
    key: &CellKey,
    variant: &PromptVariant,
    class: &str,
    message: &str,
) -> GenerationRecord {
    GenerationRecord {
        record_id: key.record_id(),
        endpoint_id: key.endpoint_id.clone(),
        variant_id: variant.id.clone(),
        family: variant.family,
        target_words: key.target_words,
        attempt: key.attempt,
        outcome: Outcome::Error,
        error_class: Some(class.to_string()),
        error_message: Some(message.to_string()),
        raw_response: None,
        final_text: None,
        thinking_text: None,
        parse_method: None,
        unclosed_tag: false,
        word_count: None,
        metrics: None,
        latency_ms: 0.0,
        input_tokens: 0,
        output_tokens: 0,
        tokens_estimated: false,
        rules_version: wordcount::RULES_VERSION.to_string(),
        timestamp_unix_ms: now_unix_ms(),
    }
}

/// Counting semaphore. `acquire` blocks while no permits are available and
/// returns a guard that releases on drop.
pub struct Semaphore {
    permits: Mutex<usize>,
    condvar: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            condvar: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.condvar.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.condvar.notify_one();
    }
}
