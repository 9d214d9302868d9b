//! Prompt variants and rendering.
//!
//! Six built-in variants ship as verbatim text resources (see
//! `templates/`): two plain length instructions, two planning scaffolds
//! that count words inside a `<thinking>` block, and a vanilla/thinking
//! pair for story generation. Templates carry a `{target_words}`
//! placeholder that [`PromptVariant::render`] substitutes with the decimal
//! target; the source document is never interpolated into the prompt text —
//! it travels to the model client as a separate attachment.

use alloc::borrow::Cow;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text;

/// Placeholder substituted by [`PromptVariant::render`].
pub const TARGET_PLACEHOLDER: &str = "{target_words}";

const VANILLA_V1: &str = include_str!("../templates/vanilla_v1.txt");
const VANILLA_V2: &str = include_str!("../templates/vanilla_v2.txt");
const THINKING_V1: &str = include_str!("../templates/thinking_v1.txt");
const THINKING_V2: &str = include_str!("../templates/thinking_v2.txt");
const STORY_VANILLA: &str = include_str!("../templates/story_vanilla.txt");
const STORY_THINKING: &str = include_str!("../templates/story_thinking.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("target word count must be at least 1")]
    ZeroTarget,
    #[error("summarize tasks require a non-empty document")]
    MissingDocument,
    #[error("story tasks do not take a document")]
    UnexpectedDocument,
    #[error("template does not contain the {TARGET_PLACEHOLDER} placeholder")]
    MissingPlaceholder,
    #[error("thinking-family template has no <thinking> scaffold or final-answer marker")]
    MissingScaffold,
    #[error("variant {variant} expects a {expected} task")]
    KindMismatch {
        variant: String,
        expected: &'static str,
    },
}

/// What to generate: a summary of a document or a story.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Summarize,
    Story,
}

/// One generation task: the kind, the source document for summarization,
/// and the target word count.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub document: Option<String>,
    pub target_words: u32,
}

impl TaskSpec {
    pub fn summarize(document: impl Into<String>, target_words: u32) -> Self {
        Self {
            kind: TaskKind::Summarize,
            document: Some(document.into()),
            target_words,
        }
    }

    pub fn story(target_words: u32) -> Self {
        Self {
            kind: TaskKind::Story,
            document: None,
            target_words,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.target_words == 0 {
            return Err(PromptError::ZeroTarget);
        }
        match (self.kind, &self.document) {
            (TaskKind::Summarize, Some(doc)) if !doc.trim().is_empty() => Ok(()),
            (TaskKind::Summarize, _) => Err(PromptError::MissingDocument),
            (TaskKind::Story, None) => Ok(()),
            (TaskKind::Story, Some(_)) => Err(PromptError::UnexpectedDocument),
        }
    }
}

/// Whether a variant is a plain instruction or a planning scaffold. The
/// family decides how responses are parsed and how cost tables group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptFamily {
    Vanilla,
    Thinking,
}

/// Identifier for a prompt variant. Built-in names are kebab-case
/// ("vanilla-v1"); anything else parses as a custom variant name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariantId {
    VanillaV1,
    VanillaV2,
    ThinkingV1,
    ThinkingV2,
    StoryVanilla,
    StoryThinking,
    Custom(String),
}

impl VariantId {
    pub fn as_str(&self) -> &str {
        match self {
            VariantId::VanillaV1 => "vanilla-v1",
            VariantId::VanillaV2 => "vanilla-v2",
            VariantId::ThinkingV1 => "thinking-v1",
            VariantId::ThinkingV2 => "thinking-v2",
            VariantId::StoryVanilla => "story-vanilla",
            VariantId::StoryThinking => "story-thinking",
            VariantId::Custom(name) => name,
        }
    }

    pub fn from_name(name: &str) -> Self {
        match name {
            "vanilla-v1" => VariantId::VanillaV1,
            "vanilla-v2" => VariantId::VanillaV2,
            "thinking-v1" => VariantId::ThinkingV1,
            "thinking-v2" => VariantId::ThinkingV2,
            "story-vanilla" => VariantId::StoryVanilla,
            "story-thinking" => VariantId::StoryThinking,
            other => VariantId::Custom(other.to_string()),
        }
    }
}

impl core::fmt::Display for VariantId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for VariantId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for VariantId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        Ok(VariantId::from_name(&name))
    }
}

/// A prompt template plus the metadata needed to render and parse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub id: VariantId,
    pub family: PromptFamily,
    pub template: Cow<'static, str>,
}

/// A fully substituted prompt ready for a model call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub variant_id: VariantId,
    pub family: PromptFamily,
    pub target_words: u32,
    pub text: String,
}

impl PromptVariant {
    /// The six built-in variants, in a fixed order.
    pub fn builtins() -> Vec<PromptVariant> {
        [
            (VariantId::VanillaV1, PromptFamily::Vanilla, VANILLA_V1),
            (VariantId::VanillaV2, PromptFamily::Vanilla, VANILLA_V2),
            (VariantId::ThinkingV1, PromptFamily::Thinking, THINKING_V1),
            (VariantId::ThinkingV2, PromptFamily::Thinking, THINKING_V2),
            (
                VariantId::StoryVanilla,
                PromptFamily::Vanilla,
                STORY_VANILLA,
            ),
            (
                VariantId::StoryThinking,
                PromptFamily::Thinking,
                STORY_THINKING,
            ),
        ]
        .into_iter()
        .map(|(id, family, template)| PromptVariant {
            id,
            family,
            template: Cow::Borrowed(template),
        })
        .collect()
    }

    /// Look up a built-in variant by its kebab-case name.
    pub fn builtin(name: &str) -> Option<PromptVariant> {
        Self::builtins().into_iter().find(|v| v.id.as_str() == name)
    }

    /// Register a custom template. The template must contain the
    /// `{target_words}` placeholder; thinking-family templates must also
    /// carry a `<thinking>` scaffold or a final-answer marker so responses
    /// stay parseable.
    pub fn custom(
        name: impl Into<String>,
        family: PromptFamily,
        template: impl Into<String>,
    ) -> Result<PromptVariant, PromptError> {
        let template = template.into();
        if !template.contains(TARGET_PLACEHOLDER) {
            return Err(PromptError::MissingPlaceholder);
        }
        if family == PromptFamily::Thinking && !has_extraction_scaffold(&template) {
            return Err(PromptError::MissingScaffold);
        }
        Ok(PromptVariant {
            id: VariantId::Custom(name.into()),
            family,
            template: Cow::Owned(template),
        })
    }

    /// The task kind this variant is written for; custom variants work with
    /// either kind.
    pub fn task_kind(&self) -> Option<TaskKind> {
        match self.id {
            VariantId::StoryVanilla | VariantId::StoryThinking => Some(TaskKind::Story),
            VariantId::Custom(_) => None,
            _ => Some(TaskKind::Summarize),
        }
    }

    /// Substitute every `{target_words}` occurrence with the task's target.
    /// The template text is otherwise passed through byte for byte.
    pub fn render(&self, task: &TaskSpec) -> Result<RenderedPrompt, PromptError> {
        task.validate()?;
        if let Some(expected) = self.task_kind() {
            if expected != task.kind {
                return Err(PromptError::KindMismatch {
                    variant: self.id.to_string(),
                    expected: match expected {
                        TaskKind::Summarize => "summarize",
                        TaskKind::Story => "story",
                    },
                });
            }
        }
        if !self.template.contains(TARGET_PLACEHOLDER) {
            return Err(PromptError::MissingPlaceholder);
        }
        let text = self
            .template
            .replace(TARGET_PLACEHOLDER, &format!("{}", task.target_words));
        Ok(RenderedPrompt {
            variant_id: self.id.clone(),
            family: self.family,
            target_words: task.target_words,
            text,
        })
    }
}

fn has_extraction_scaffold(template: &str) -> bool {
    text::find_ci(template, "<thinking>", 0).is_some()
        || text::find_ci(template, "<final_answer>", 0).is_some()
        || text::find_ci(template, "-word document:", 0).is_some()
}

/// Recover the target word count from a rendered prompt: the first integer
/// after "exactly" (any case). This is what the deterministic mock model
/// uses to decide how many words to emit.
pub fn target_from_prompt(prompt_text: &str) -> Option<u64> {
    text::first_int_after(prompt_text, "exactly")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_count_and_order() {
        let variants = PromptVariant::builtins();
        assert_eq!(variants.len(), 6);
        assert_eq!(variants[0].id, VariantId::VanillaV1);
        assert!(variants
            .iter()
            .all(|v| v.template.contains(TARGET_PLACEHOLDER)));
    }

    #[test]
    fn vanilla_v1_renders_byte_exact() {
        let v = PromptVariant::builtin("vanilla-v1").unwrap();
        let p = v.render(&TaskSpec::summarize("doc", 100)).unwrap();
        assert_eq!(p.text, "Summarize this document into exactly 100 words.");
    }

    #[test]
    fn kind_mismatch_rejected() {
        let v = PromptVariant::builtin("story-vanilla").unwrap();
        let err = v.render(&TaskSpec::summarize("doc", 10)).unwrap_err();
        assert!(matches!(err, PromptError::KindMismatch { .. }));
    }

    #[test]
    fn custom_requires_placeholder() {
        let err = PromptVariant::custom("c", PromptFamily::Vanilla, "no placeholder").unwrap_err();
        assert_eq!(err, PromptError::MissingPlaceholder);

        // render re-checks, so a hand-built variant cannot slip through
        let variant = PromptVariant {
            id: VariantId::Custom("c".into()),
            family: PromptFamily::Vanilla,
            template: Cow::Owned("no placeholder".into()),
        };
        let err = variant.render(&TaskSpec::summarize("doc", 50)).unwrap_err();
        assert_eq!(err, PromptError::MissingPlaceholder);
    }

    #[test]
    fn custom_thinking_requires_scaffold() {
        let err = PromptVariant::custom("c", PromptFamily::Thinking, "write {target_words} words")
            .unwrap_err();
        assert_eq!(err, PromptError::MissingScaffold);

        let ok = PromptVariant::custom(
            "c",
            PromptFamily::Thinking,
            "plan in <thinking> then write {target_words} words",
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn variant_id_round_trips_names() {
        for v in PromptVariant::builtins() {
            assert_eq!(VariantId::from_name(v.id.as_str()), v.id);
        }
        assert_eq!(
            VariantId::from_name("my-style"),
            VariantId::Custom("my-style".into())
        );
    }

    #[test]
    fn target_recovery() {
        let v = PromptVariant::builtin("thinking-v1").unwrap();
        let p = v.render(&TaskSpec::summarize("doc", 20)).unwrap();
        assert_eq!(target_from_prompt(&p.text), Some(20));
    }
}
