//! Deterministic mock model for offline runs and tests.
//!
//! The mock reads the target word count out of the prompt (first integer
//! after "exactly", any case) and emits a configurable number of countable
//! words. When the prompt carries a planning scaffold, the reply is wrapped
//! the way a cooperative model would wrap it: a numbered `<thinking>` block,
//! then either a `<final_answer>` pair or a `Final <n>-word document:`
//! marker depending on which the prompt asks for.
//!
//! Identical (behavior, seed, prompt) always produce identical text: word
//! choice comes from a ChaCha8 stream keyed by the seed and a hash of the
//! prompt.

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lenfid_core::prompt::target_from_prompt;

use crate::client::{estimate_tokens, ClientError, GenerationRequest, ModelClient, ModelResponse};

/// What the mock emits relative to the requested target `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MockBehavior {
    /// Exactly t countable words.
    ExactN,
    /// t + offset words (floored at zero).
    OffsetWords { offset: i64 },
    /// round(t * (1 + percent)) words, e.g. percent = 0.30 gives 1.3x.
    OffsetPercent { percent: f64 },
    /// 3t words.
    Verbose,
    /// A judge-style verdict: {"score": <score>, "rationale": ...}.
    Judge { score: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    #[serde(flatten)]
    pub behavior: MockBehavior,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl MockConfig {
    pub fn new(behavior: MockBehavior) -> Self {
        Self {
            behavior,
            seed: None,
        }
    }

    pub fn with_seed(behavior: MockBehavior, seed: u64) -> Self {
        Self {
            behavior,
            seed: Some(seed),
        }
    }
}

/// Vocabulary for generated filler text. Every entry is a single countable
/// token (pure ASCII letters, no clitics or hyphens), and the length is a
/// power of two so index selection from the RNG stream is bias-free.
const WORDS: [&str; 32] = [
    "river", "stone", "amber", "cloud", "meadow", "signal", "harbor", "lantern", "copper",
    "forest", "quiet", "marble", "breeze", "summit", "velvet", "orchard", "ember", "willow",
    "canyon", "drift", "falcon", "garnet", "hollow", "island", "juniper", "kestrel", "lagoon",
    "mosaic", "needle", "opal", "prairie", "quartz",
];

pub struct MockModel {
    behavior: MockBehavior,
    seed: u64,
}

impl MockModel {
    pub fn new(config: MockConfig, fallback_seed: u64) -> Self {
        Self {
            behavior: config.behavior,
            seed: config.seed.unwrap_or(fallback_seed),
        }
    }

    fn word_budget(&self, target: u64) -> u64 {
        match &self.behavior {
            MockBehavior::ExactN => target,
            MockBehavior::OffsetWords { offset } => {
                let n = target as i64 + offset;
                n.max(0) as u64
            }
            MockBehavior::OffsetPercent { percent } => {
                let n = (target as f64 * (1.0 + percent)).round();
                if n.is_sign_negative() {
                    0
                } else {
                    n as u64
                }
            }
            MockBehavior::Verbose => target.saturating_mul(3),
            MockBehavior::Judge { .. } => 0,
        }
    }

    fn pick_words(&self, prompt: &str, n: u64) -> Vec<&'static str> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed ^ hash64(prompt));
        (0..n)
            .map(|_| WORDS[(rng.next_u64() % WORDS.len() as u64) as usize])
            .collect()
    }
}

fn hash64(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

impl ModelClient for MockModel {
    fn generate(&self, request: &GenerationRequest) -> Result<ModelResponse, ClientError> {
        let prompt = request.prompt_text;

        if let MockBehavior::Judge { score } = self.behavior {
            let text = format!("{{\"score\": {score}, \"rationale\": \"scripted mock verdict\"}}");
            return Ok(ModelResponse {
                input_tokens: estimate_tokens(prompt),
                output_tokens: estimate_tokens(&text),
                text,
                latency_ms: 0.0,
                tokens_estimated: true,
            });
        }

        let target = target_from_prompt(prompt).ok_or_else(|| {
            ClientError::Config("mock model found no target word count in the prompt".into())
        })?;
        let words = self.pick_words(prompt, self.word_budget(target));
        let body = format!("{}.", words.join(" "));

        let text = if prompt.contains("<thinking>") {
            let numbered: Vec<String> = words
                .iter()
                .enumerate()
                .map(|(i, w)| format!("{} {w}", i + 1))
                .collect();
            let thinking = numbered.join("\n");
            if prompt.contains("-word document:") {
                format!(
                    "<thinking>\n{thinking}\n</thinking>\n\nFinal {target}-word document:\n{body}"
                )
            } else {
                format!(
                    "<thinking>\n{thinking}\n</thinking>\n<final_answer>\n{body}\n</final_answer>"
                )
            }
        } else {
            body
        };

        Ok(ModelResponse {
            input_tokens: estimate_tokens(prompt),
            output_tokens: estimate_tokens(&text),
            text,
            latency_ms: 0.0,
            tokens_estimated: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lenfid_core::parse::{extract_final, ParseMethod};
    use lenfid_core::prompt::{PromptVariant, TaskSpec};
    use lenfid_core::wordcount::count_words;

    fn generate(mock: &MockModel, prompt: &str) -> ModelResponse {
        mock.generate(&GenerationRequest {
            prompt_text: prompt,
            document: None,
            target_words: None,
        })
        .unwrap()
    }

    fn rendered(variant: &str, target: u32) -> String {
        let v = PromptVariant::builtin(variant).unwrap();
        let task = match v.task_kind() {
            Some(lenfid_core::prompt::TaskKind::Story) => TaskSpec::story(target),
            _ => TaskSpec::summarize("doc", target),
        };
        v.render(&task).unwrap().text
    }

    #[test]
    fn exact_n_hits_target_for_vanilla() {
        let mock = MockModel::new(MockConfig::new(MockBehavior::ExactN), 1);
        let response = generate(&mock, &rendered("vanilla-v1", 50));
        assert_eq!(count_words(&response.text), 50);
    }

    #[test]
    fn thinking_prompt_gets_tag_wrapped_answer() {
        let mock = MockModel::new(MockConfig::new(MockBehavior::ExactN), 1);
        let response = generate(&mock, &rendered("thinking-v1", 20));
        let parsed =
            extract_final(&response.text, lenfid_core::prompt::PromptFamily::Thinking).unwrap();
        assert_eq!(parsed.method, ParseMethod::TagPair);
        assert_eq!(count_words(&parsed.final_text), 20);
    }

    #[test]
    fn marker_prompt_gets_marker_answer() {
        let mock = MockModel::new(MockConfig::new(MockBehavior::ExactN), 1);
        let response = generate(&mock, &rendered("thinking-v2", 30));
        let parsed =
            extract_final(&response.text, lenfid_core::prompt::PromptFamily::Thinking).unwrap();
        assert_eq!(parsed.method, ParseMethod::Marker);
        assert_eq!(count_words(&parsed.final_text), 30);
    }

    #[test]
    fn offset_words_shifts_count() {
        let mock = MockModel::new(MockConfig::new(MockBehavior::OffsetWords { offset: 6 }), 1);
        let response = generate(&mock, &rendered("vanilla-v1", 20));
        assert_eq!(count_words(&response.text), 26);
    }

    #[test]
    fn offset_percent_rounds() {
        let mock = MockModel::new(
            MockConfig::new(MockBehavior::OffsetPercent { percent: 0.30 }),
            1,
        );
        let response = generate(&mock, &rendered("vanilla-v1", 100));
        assert_eq!(count_words(&response.text), 130);
    }

    #[test]
    fn verbose_triples() {
        let mock = MockModel::new(MockConfig::new(MockBehavior::Verbose), 1);
        let response = generate(&mock, &rendered("vanilla-v1", 20));
        assert_eq!(count_words(&response.text), 60);
    }

    #[test]
    fn deterministic_per_seed_and_prompt() {
        let prompt = rendered("vanilla-v1", 40);
        let a = generate(
            &MockModel::new(MockConfig::with_seed(MockBehavior::ExactN, 9), 0),
            &prompt,
        );
        let b = generate(
            &MockModel::new(MockConfig::with_seed(MockBehavior::ExactN, 9), 0),
            &prompt,
        );
        assert_eq!(a.text, b.text);

        let c = generate(
            &MockModel::new(MockConfig::with_seed(MockBehavior::ExactN, 10), 0),
            &prompt,
        );
        assert_ne!(a.text, c.text);

        let other_prompt = rendered("vanilla-v2", 40);
        let d = generate(
            &MockModel::new(MockConfig::with_seed(MockBehavior::ExactN, 9), 0),
            &other_prompt,
        );
        assert_ne!(a.text, d.text);
    }

    #[test]
    fn judge_mode_emits_score() {
        let mock = MockModel::new(MockConfig::new(MockBehavior::Judge { score: 0.9 }), 1);
        let response = generate(&mock, "grade this");
        assert!(response.text.contains("\"score\": 0.9"));
    }

    #[test]
    fn prompt_without_target_is_config_error() {
        let mock = MockModel::new(MockConfig::new(MockBehavior::ExactN), 1);
        let err = mock
            .generate(&GenerationRequest {
                prompt_text: "no target here",
                document: None,
                target_words: None,
            })
            .unwrap_err();
        assert!(matches!(err, ClientError::Config(_)));
    }
}
