//! Experiment plans: the cartesian grid of endpoints, prompt variants,
//! targets, and attempts, plus pacing and persistence settings. Plans load
//! from TOML (see the README for the schema) and carry a fingerprint so
//! resumed runs can verify they are appending to a store written by the
//! same grid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lenfid_core::prompt::{PromptError, PromptFamily, PromptVariant, TaskKind};

use crate::client::ModelEndpoint;

pub const DEFAULT_TARGETS: [u32; 8] = [20, 50, 100, 200, 500, 1000, 2000, 5000];

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid plan file: {0}")]
    Toml(String),
    #[error("plan has an empty {0} axis")]
    EmptyAxis(&'static str),
    #[error("duplicate target word count {0}")]
    DuplicateTarget(u32),
    #[error("target word counts must be positive")]
    ZeroTarget,
    #[error("duplicate endpoint id {0}")]
    DuplicateEndpoint(String),
    #[error("unknown variant {0} (not a built-in and not declared in [[custom_variants]])")]
    UnknownVariant(String),
    #[error("variant {variant} is for {expected} tasks but the plan task is {actual}")]
    TaskKindMismatch {
        variant: String,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("custom variant {name}: {source}")]
    CustomVariant { name: String, source: PromptError },
    #[error("summarize plans must set task.document")]
    MissingDocument,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Path to the source document (plain UTF-8 text, or an opaque file for
    /// endpoints with attachment_mode = "file-part"). Required for
    /// summarize tasks.
    #[serde(default)]
    pub document: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomVariantConfig {
    pub name: String,
    pub family: PromptFamily,
    pub template_file: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub endpoints: Vec<ModelEndpoint>,
    /// Variant names: built-ins ("vanilla-v1", ...) or custom names
    /// declared in `custom_variants`.
    pub variants: Vec<String>,
    #[serde(default = "default_targets")]
    pub targets: Vec<u32>,
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    #[serde(default = "default_delay_ms")]
    pub inter_attempt_delay_ms: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    pub task: TaskConfig,
    pub output_path: PathBuf,
    /// Fallback seed for mock endpoints that do not set their own.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub custom_variants: Vec<CustomVariantConfig>,
}

fn default_targets() -> Vec<u32> {
    DEFAULT_TARGETS.to_vec()
}

fn default_attempts() -> u32 {
    5
}

fn default_delay_ms() -> u64 {
    1_000
}

fn default_concurrency() -> usize {
    4
}

fn kind_name(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Summarize => "summarize",
        TaskKind::Story => "story",
    }
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str) -> Result<Self, PlanError> {
        toml::from_str(text).map_err(|e| PlanError::Toml(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlanError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PlanError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.endpoints.is_empty() {
            return Err(PlanError::EmptyAxis("endpoints"));
        }
        if self.variants.is_empty() {
            return Err(PlanError::EmptyAxis("variants"));
        }
        if self.targets.is_empty() {
            return Err(PlanError::EmptyAxis("targets"));
        }
        if self.attempts == 0 {
            return Err(PlanError::EmptyAxis("attempts"));
        }
        let mut seen_targets = std::collections::BTreeSet::new();
        for &t in &self.targets {
            if t == 0 {
                return Err(PlanError::ZeroTarget);
            }
            if !seen_targets.insert(t) {
                return Err(PlanError::DuplicateTarget(t));
            }
        }
        let mut seen_ids = std::collections::BTreeSet::new();
        for e in &self.endpoints {
            if !seen_ids.insert(e.id.as_str()) {
                return Err(PlanError::DuplicateEndpoint(e.id.clone()));
            }
        }
        if self.task.kind == TaskKind::Summarize && self.task.document.is_none() {
            return Err(PlanError::MissingDocument);
        }
        self.resolve_variants().map(|_| ())
    }

    /// Resolve variant names to prompt variants, loading custom templates
    /// from disk, and check each against the plan's task kind.
    pub fn resolve_variants(&self) -> Result<Vec<PromptVariant>, PlanError> {
        self.variants
            .iter()
            .map(|name| {
                let variant = match PromptVariant::builtin(name) {
                    Some(v) => v,
                    None => self.load_custom(name)?,
                };
                if let Some(expected) = variant.task_kind() {
                    if expected != self.task.kind {
                        return Err(PlanError::TaskKindMismatch {
                            variant: name.clone(),
                            expected: kind_name(expected),
                            actual: kind_name(self.task.kind),
                        });
                    }
                }
                Ok(variant)
            })
            .collect()
    }

    fn load_custom(&self, name: &str) -> Result<PromptVariant, PlanError> {
        let config = self
            .custom_variants
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| PlanError::UnknownVariant(name.to_string()))?;
        let template =
            std::fs::read_to_string(&config.template_file).map_err(|source| PlanError::Io {
                path: config.template_file.clone(),
                source,
            })?;
        PromptVariant::custom(name, config.family, template).map_err(|source| {
            PlanError::CustomVariant {
                name: name.to_string(),
                source,
            }
        })
    }

    pub fn cell_count(&self) -> usize {
        self.endpoints.len() * self.variants.len() * self.targets.len() * self.attempts as usize
    }

    /// Hash of the grid axes (endpoints, variants, targets, attempts, task
    /// kind). Pacing and concurrency settings deliberately do not
    /// participate, so a resume may adjust them.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.endpoints {
            hasher.update(e.id.as_bytes());
            hasher.update([0]);
        }
        hasher.update([1]);
        for v in &self.variants {
            hasher.update(v.as_bytes());
            hasher.update([0]);
        }
        hasher.update([1]);
        for t in &self.targets {
            hasher.update(t.to_le_bytes());
        }
        hasher.update([1]);
        hasher.update(self.attempts.to_le_bytes());
        hasher.update(kind_name(self.task.kind).as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{MockBehavior, MockConfig};

    fn mock_plan() -> ExperimentPlan {
        ExperimentPlan {
            endpoints: vec![
                ModelEndpoint::mock("m1", MockConfig::new(MockBehavior::ExactN)),
                ModelEndpoint::mock("m2", MockConfig::new(MockBehavior::Verbose)),
            ],
            variants: vec!["vanilla-v1".into(), "thinking-v1".into()],
            targets: vec![20, 50],
            attempts: 2,
            inter_attempt_delay_ms: 0,
            concurrency_limit: 2,
            task: TaskConfig {
                kind: TaskKind::Summarize,
                document: Some("doc.txt".into()),
            },
            output_path: "store.jsonl".into(),
            seed: 0,
            custom_variants: vec![],
        }
    }

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = r#"
            variants = ["vanilla-v1", "thinking-v2"]
            output_path = "out/run.jsonl"

            [task]
            kind = "summarize"
            document = "letter.txt"

            [[endpoints]]
            id = "mock-exact"
            style = "mock"
            mock = { mode = "exact-n", seed = 7 }

            [[endpoints]]
            id = "real"
            style = "chat-completions"
            base_url = "https://api.example.com/v1"
            api_key_env = "EXAMPLE_KEY"
            model = "example-large"
        "#;
        let plan = ExperimentPlan::from_toml_str(text).unwrap();
        assert_eq!(plan.targets, DEFAULT_TARGETS.to_vec());
        assert_eq!(plan.attempts, 5);
        assert_eq!(plan.inter_attempt_delay_ms, 1000);
        assert_eq!(plan.endpoints.len(), 2);
        assert_eq!(plan.endpoints[0].mock.as_ref().unwrap().seed, Some(7));
        plan.validate().unwrap();
        assert_eq!(plan.cell_count(), 2 * 2 * 8 * 5);
    }

    #[test]
    fn validation_catches_bad_axes() {
        let mut p = mock_plan();
        p.targets = vec![];
        assert!(matches!(p.validate(), Err(PlanError::EmptyAxis("targets"))));

        let mut p = mock_plan();
        p.targets = vec![20, 20];
        assert!(matches!(p.validate(), Err(PlanError::DuplicateTarget(20))));

        let mut p = mock_plan();
        p.targets = vec![0];
        assert!(matches!(p.validate(), Err(PlanError::ZeroTarget)));

        let mut p = mock_plan();
        p.endpoints[1].id = "m1".into();
        assert!(matches!(p.validate(), Err(PlanError::DuplicateEndpoint(_))));

        let mut p = mock_plan();
        p.variants = vec!["nope".into()];
        assert!(matches!(p.validate(), Err(PlanError::UnknownVariant(_))));

        let mut p = mock_plan();
        p.variants = vec!["story-vanilla".into()];
        assert!(matches!(
            p.validate(),
            Err(PlanError::TaskKindMismatch { .. })
        ));
    }

    #[test]
    fn fingerprint_tracks_axes_not_pacing() {
        let a = mock_plan();
        let mut b = mock_plan();
        b.inter_attempt_delay_ms = 99;
        b.concurrency_limit = 1;
        assert_eq!(a.fingerprint(), b.fingerprint());

        let mut c = mock_plan();
        c.targets = vec![20, 100];
        assert_ne!(a.fingerprint(), c.fingerprint());

        let mut d = mock_plan();
        d.attempts = 3;
        assert_ne!(a.fingerprint(), d.fingerprint());
    }
}
