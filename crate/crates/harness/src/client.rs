//! Provider-agnostic model invocation over a chat-completions style HTTP
//! API, with latency and token accounting. Real endpoints and the
//! deterministic mock both implement [`ModelClient`], so everything above
//! this module is oblivious to where text comes from.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::mock::MockConfig;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("credential environment variable {0} is not set")]
    Auth(String),
    #[error("endpoint misconfigured: {0}")]
    Config(String),
    #[error("rate limited after {retries} retries: {message}")]
    RateLimited { retries: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("request timed out (after {attempts} attempts)")]
    Timeout { attempts: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider response contained no message text")]
    EmptyChoice,
}

impl ClientError {
    /// Stable class name recorded in failed generation records.
    pub fn class(&self) -> &'static str {
        match self {
            ClientError::Auth(_) => "auth",
            ClientError::Config(_) => "config",
            ClientError::RateLimited { .. } => "rate_limited",
            ClientError::Provider { .. } => "provider",
            ClientError::Timeout { .. } => "timeout",
            ClientError::Transport(_) => "transport",
            ClientError::EmptyChoice => "empty_choice",
        }
    }
}

/// How the source document travels to the provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttachmentMode {
    /// Document text is concatenated with the instruction in one message.
    #[default]
    InlineText,
    /// Document bytes are sent as a file content part (for providers with
    /// document understanding).
    FilePart,
}

/// Whether the instruction or the document comes first in the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocumentOrder {
    #[default]
    InstructionFirst,
    DocumentFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestStyle {
    #[default]
    ChatCompletions,
    Mock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

/// One model endpoint as declared in a plan file. `api_key_env` names the
/// environment variable holding the credential; the secret itself never
/// appears in config or records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub id: String,
    #[serde(default)]
    pub style: RequestStyle,
    /// Model name sent in the request body; defaults to `id`.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Sampling temperature; unset means 1.0 for generation. The judge
    /// subcommand pins unset judge endpoints to 0.0 for repeatability.
    #[serde(default)]
    pub temperature: Option<f64>,
    /// Cap on generated tokens. When unset, each request gets
    /// 4 * target_words + 512 as headroom for thinking scaffolds.
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    #[serde(default)]
    pub attachment_mode: AttachmentMode,
    #[serde(default)]
    pub document_order: DocumentOrder,
    /// Extra headers merged into every request (values sent verbatim).
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryConfig,
    /// Mock behavior; required when `style = "mock"`.
    #[serde(default)]
    pub mock: Option<MockConfig>,
}

/// Temperature sent when an endpoint leaves it unset.
pub const DEFAULT_TEMPERATURE: f64 = 1.0;

fn default_timeout_ms() -> u64 {
    120_000
}

impl ModelEndpoint {
    pub fn mock(id: impl Into<String>, config: MockConfig) -> Self {
        Self {
            id: id.into(),
            style: RequestStyle::Mock,
            model: None,
            base_url: None,
            api_key_env: None,
            temperature: None,
            max_output_tokens: None,
            attachment_mode: AttachmentMode::default(),
            document_order: DocumentOrder::default(),
            headers: BTreeMap::new(),
            timeout_ms: default_timeout_ms(),
            retry: RetryConfig::default(),
            mock: Some(config),
        }
    }
}

/// The document as handed to a client: extracted text for inline use, or
/// opaque bytes for providers that accept file parts.
#[derive(Debug, Clone)]
pub enum DocumentPayload {
    Text(String),
    File { filename: String, bytes: Vec<u8> },
}

/// One model invocation.
#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub prompt_text: &'a str,
    pub document: Option<&'a DocumentPayload>,
    /// Target word count of the prompt, used to size the output-token cap.
    pub target_words: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: f64,
    /// Provider did not report usage; token counts are ceil(chars / 4).
    pub tokens_estimated: bool,
}

pub trait ModelClient: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<ModelResponse, ClientError>;
}

/// Instantiate the client for an endpoint. Credentials are resolved here so
/// a missing variable fails before any cell executes.
pub fn build_client(
    endpoint: &ModelEndpoint,
    fallback_seed: u64,
) -> Result<Box<dyn ModelClient>, ClientError> {
    match endpoint.style {
        RequestStyle::Mock => {
            let config = endpoint.mock.clone().ok_or_else(|| {
                ClientError::Config(format!(
                    "endpoint {} has style=mock but no [mock] table",
                    endpoint.id
                ))
            })?;
            Ok(Box::new(crate::mock::MockModel::new(config, fallback_seed)))
        }
        RequestStyle::ChatCompletions => Ok(Box::new(HttpChatClient::new(endpoint)?)),
    }
}

/// Rough token estimate for providers that omit usage: one token per four
/// characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: ModelEndpoint,
    api_key: String,
    url: String,
}

impl HttpChatClient {
    pub fn new(endpoint: &ModelEndpoint) -> Result<Self, ClientError> {
        let env_name = endpoint.api_key_env.clone().ok_or_else(|| {
            ClientError::Config(format!("endpoint {} is missing api_key_env", endpoint.id))
        })?;
        let api_key = std::env::var(&env_name).map_err(|_| ClientError::Auth(env_name))?;
        let base = endpoint.base_url.clone().ok_or_else(|| {
            ClientError::Config(format!("endpoint {} is missing base_url", endpoint.id))
        })?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .build()
            .new_agent();
        Ok(Self {
            agent,
            endpoint: endpoint.clone(),
            api_key,
            url: format!("{}/chat/completions", base.trim_end_matches('/')),
        })
    }

    /// The request body, with the rendered prompt text passed through
    /// byte-identically as one content part.
    fn build_body(&self, request: &GenerationRequest) -> Result<serde_json::Value, ClientError> {
        let max_tokens = self
            .endpoint
            .max_output_tokens
            .unwrap_or_else(|| request.target_words.unwrap_or(0).saturating_mul(4) + 512);
        let content = self.build_content(request)?;
        Ok(serde_json::json!({
            "model": self.endpoint.model.clone().unwrap_or_else(|| self.endpoint.id.clone()),
            "messages": [{"role": "user", "content": content}],
            "temperature": self.endpoint.temperature.unwrap_or(DEFAULT_TEMPERATURE),
            "max_tokens": max_tokens,
        }))
    }

    fn build_content(&self, request: &GenerationRequest) -> Result<serde_json::Value, ClientError> {
        let prompt = request.prompt_text;
        match (request.document, self.endpoint.attachment_mode) {
            (None, _) => Ok(serde_json::Value::String(prompt.to_string())),
            (Some(DocumentPayload::Text(doc)), AttachmentMode::InlineText) => {
                let text = match self.endpoint.document_order {
                    DocumentOrder::InstructionFirst => format!("{prompt}\n\n{doc}"),
                    DocumentOrder::DocumentFirst => format!("{doc}\n\n{prompt}"),
                };
                Ok(serde_json::Value::String(text))
            }
            (Some(DocumentPayload::File { .. }), AttachmentMode::InlineText) => {
                Err(ClientError::Config(format!(
                    "endpoint {} uses attachment_mode=inline-text but the document is an opaque file",
                    self.endpoint.id
                )))
            }
            (Some(payload), AttachmentMode::FilePart) => {
                let prompt_part = serde_json::json!({"type": "text", "text": prompt});
                let doc_part = match payload {
                    DocumentPayload::Text(doc) => serde_json::json!({"type": "text", "text": doc}),
                    DocumentPayload::File { filename, bytes } => {
                        let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
                        serde_json::json!({
                            "type": "file",
                            "file": {
                                "filename": filename,
                                "file_data": format!("data:application/octet-stream;base64,{encoded}"),
                            }
                        })
                    }
                };
                let parts = match self.endpoint.document_order {
                    DocumentOrder::InstructionFirst => vec![prompt_part, doc_part],
                    DocumentOrder::DocumentFirst => vec![doc_part, prompt_part],
                };
                Ok(serde_json::Value::Array(parts))
            }
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 400;
    if body.len() <= LIMIT {
        return body.to_string();
    }
    let mut end = LIMIT;
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}…", &body[..end])
}

impl ModelClient for HttpChatClient {
    fn generate(&self, request: &GenerationRequest) -> Result<ModelResponse, ClientError> {
        let body = self.build_body(request)?;
        let retry = &self.endpoint.retry;
        let mut last_error: Option<ClientError> = None;

        for attempt in 0..=retry.max_retries {
            if attempt > 0 {
                let backoff = retry
                    .initial_backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(16))
                    .min(retry.max_backoff_ms);
                std::thread::sleep(Duration::from_millis(backoff));
            }

            let started = Instant::now();
            let mut req = self
                .agent
                .post(&self.url)
                .header("authorization", format!("Bearer {}", self.api_key));
            for (name, value) in &self.endpoint.headers {
                req = req.header(name.as_str(), value.as_str());
            }
            log::debug!("POST {} attempt {attempt}", self.url);
            let result = req.send_json(&body);

            match result {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    if (200..300).contains(&status) {
                        let parsed: ChatResponse =
                            response.body_mut().read_json().map_err(|e| {
                                ClientError::Transport(format!("bad response body: {e}"))
                            })?;
                        // Wall clock around the request, body transfer
                        // included; our own parsing happens after the stop.
                        let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
                        let text = parsed
                            .choices
                            .into_iter()
                            .next()
                            .and_then(|c| c.message.content)
                            .ok_or(ClientError::EmptyChoice)?;
                        let (input_tokens, output_tokens, estimated) = match parsed.usage {
                            Some(u) => (
                                u.prompt_tokens.unwrap_or(0),
                                u.completion_tokens.unwrap_or(0),
                                false,
                            ),
                            None => (
                                estimate_tokens(request.prompt_text),
                                estimate_tokens(&text),
                                true,
                            ),
                        };
                        return Ok(ModelResponse {
                            text,
                            input_tokens,
                            output_tokens,
                            latency_ms,
                            tokens_estimated: estimated,
                        });
                    }

                    let body_text = response.body_mut().read_to_string().unwrap_or_default();
                    log::debug!(
                        "endpoint {} HTTP {status}: {}",
                        self.endpoint.id,
                        excerpt(&body_text)
                    );
                    let error = if status == 429 {
                        ClientError::RateLimited {
                            retries: attempt,
                            message: excerpt(&body_text),
                        }
                    } else {
                        ClientError::Provider {
                            status,
                            body: excerpt(&body_text),
                        }
                    };
                    if retryable_status(status) {
                        last_error = Some(error);
                        continue;
                    }
                    return Err(error);
                }
                Err(ureq::Error::Timeout(_)) => {
                    last_error = Some(ClientError::Timeout {
                        attempts: attempt + 1,
                    });
                    continue;
                }
                Err(other) => {
                    last_error = Some(ClientError::Transport(other.to_string()));
                    continue;
                }
            }
        }

        Err(last_error.unwrap_or(ClientError::Timeout {
            attempts: retry.max_retries + 1,
        }))
    }
}
