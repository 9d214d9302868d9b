//! Quality scoring with a judge model, one call per dimension.
//!
//! Each dimension gets its own prompt carrying the dimension's definition,
//! the source document, the summary, and a strict output contract (a single
//! JSON object with a score in [0, 1]). Per-dimension failures are recorded
//! and do not abort the remaining dimensions, so a flaky judge still yields
//! partial results. Out-of-range scores are rejected rather than clamped —
//! a misbehaving judge should be visible in the data, not laundered.

use serde::{Deserialize, Serialize};

use crate::client::{ClientError, GenerationRequest, ModelClient};

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("document must be non-empty")]
    EmptyDocument,
    #[error("summary must be non-empty")]
    EmptySummary,
    #[error("no JSON object with a numeric score found in the judge response")]
    NoScoreFound,
    #[error("judge score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Correctness,
    Completeness,
    Faithfulness,
    Relevance,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Correctness,
        Dimension::Completeness,
        Dimension::Faithfulness,
        Dimension::Relevance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Correctness => "Correctness",
            Dimension::Completeness => "Completeness",
            Dimension::Faithfulness => "Faithfulness",
            Dimension::Relevance => "Relevance",
        }
    }

    /// The rubric sentence embedded verbatim in the judge prompt.
    pub fn definition(self) -> &'static str {
        match self {
            Dimension::Correctness => {
                "Measures the factual accuracy of information presented in the summary relative \
                 to the source document, evaluating whether statements accurately reflect \
                 information from the original text."
            }
            Dimension::Completeness => {
                "Assesses whether the summary captures all essential information from the \
                 original document proportionate to its length target, including key points, \
                 arguments, and conclusions."
            }
            Dimension::Faithfulness => {
                "Evaluates whether the summary contains information that is consistent with the \
                 source document without introducing facts or claims not present in the original."
            }
            Dimension::Relevance => {
                "Measures how well the summary focuses on information that matters to the core \
                 message of the document, avoiding tangential details while highlighting central \
                 themes."
            }
        }
    }
}

/// Build the single-dimension judge prompt.
pub fn build_judge_prompt(
    dimension: Dimension,
    document: &str,
    summary: &str,
) -> Result<String, JudgeError> {
    if document.trim().is_empty() {
        return Err(JudgeError::EmptyDocument);
    }
    if summary.trim().is_empty() {
        return Err(JudgeError::EmptySummary);
    }
    Ok(format!(
        "You are evaluating the quality of a document summary on a single dimension.\n\n\
         Dimension: {name}\n\
         Definition: {definition}\n\n\
         Source document:\n{document}\n\n\
         Summary under evaluation:\n{summary}\n\n\
         Score the summary on this dimension only. Respond with exactly one JSON object and \
         nothing else: {{\"score\": <number in [0,1]>, \"rationale\": <text>}}",
        name = dimension.name(),
        definition = dimension.definition(),
    ))
}

#[derive(Deserialize)]
struct JudgeVerdict {
    score: f64,
}

/// Extract the first JSON object from the judge's response and validate its
/// score. Text around the object is ignored; an object without a numeric
/// `score`, or no parseable object at all, is `NoScoreFound`.
pub fn parse_judge_response(raw: &str) -> Result<f64, JudgeError> {
    let object = first_json_object(raw).ok_or(JudgeError::NoScoreFound)?;
    let verdict: JudgeVerdict =
        serde_json::from_str(object).map_err(|_| JudgeError::NoScoreFound)?;
    if !(0.0..=1.0).contains(&verdict.score) {
        return Err(JudgeError::ScoreOutOfRange(verdict.score));
    }
    Ok(verdict.score)
}

/// The first balanced `{...}` span that parses as JSON.
fn first_json_object(raw: &str) -> Option<&str> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(offset) = raw[start..].find('{') {
        let open = start + offset;
        if let Some(end) = balanced_end(bytes, open) {
            let candidate = &raw[open..end];
            if serde_json::from_str::<serde_json::Value>(candidate).is_ok() {
                return Some(candidate);
            }
        }
        start = open + 1;
    }
    None
}

/// Byte index one past the brace that closes the object opening at `open`,
/// respecting strings and escapes.
fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Result of judging one dimension. `score` is absent when the call or the
/// parse failed; the raw judge text is retained either way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Four-dimension quality verdict for one generation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub record_id: String,
    pub judge_model_id: String,
    pub correctness: DimensionResult,
    pub completeness: DimensionResult,
    pub faithfulness: DimensionResult,
    pub relevance: DimensionResult,
}

impl QualityScores {
    pub fn dimension(&self, dimension: Dimension) -> &DimensionResult {
        match dimension {
            Dimension::Correctness => &self.correctness,
            Dimension::Completeness => &self.completeness,
            Dimension::Faithfulness => &self.faithfulness,
            Dimension::Relevance => &self.relevance,
        }
    }

    pub fn all_scored(&self) -> bool {
        Dimension::ALL
            .iter()
            .all(|d| self.dimension(*d).score.is_some())
    }
}

/// Judge one summary on all four dimensions: exactly one judge call per
/// dimension, failures preserved per dimension.
pub fn evaluate_quality(
    record_id: &str,
    summary: &str,
    document: &str,
    judge: &dyn ModelClient,
    judge_model_id: &str,
) -> QualityScores {
    let mut results = Vec::with_capacity(4);
    for dimension in Dimension::ALL {
        results.push(judge_dimension(dimension, summary, document, judge));
    }
    let mut iter = results.into_iter();
    QualityScores {
        record_id: record_id.to_string(),
        judge_model_id: judge_model_id.to_string(),
        correctness: iter.next().unwrap(),
        completeness: iter.next().unwrap(),
        faithfulness: iter.next().unwrap(),
        relevance: iter.next().unwrap(),
    }
}

fn judge_dimension(
    dimension: Dimension,
    summary: &str,
    document: &str,
    judge: &dyn ModelClient,
) -> DimensionResult {
    let prompt = match build_judge_prompt(dimension, document, summary) {
        Ok(p) => p,
        Err(e) => {
            return DimensionResult {
                score: None,
                raw_response: None,
                error: Some(e.to_string()),
            }
        }
    };
    let response = match judge.generate(&GenerationRequest {
        prompt_text: &prompt,
        document: None,
        target_words: None,
    }) {
        Ok(r) => r,
        Err(e) => {
            return DimensionResult {
                score: None,
                raw_response: None,
                error: Some(e.to_string()),
            }
        }
    };
    match parse_judge_response(&response.text) {
        Ok(score) => DimensionResult {
            score: Some(score),
            raw_response: Some(response.text),
            error: None,
        },
        Err(e) => DimensionResult {
            score: None,
            raw_response: Some(response.text),
            error: Some(e.to_string()),
        },
    }
}
