//! Provider-agnostic text generation and embeddings.
//!
//! All LLM traffic flows through [`Gateway::complete`]: render a registered
//! template, call the provider, validate the reply against the template's
//! schema, and re-prompt exactly once on a schema violation.

pub mod embed;
pub mod http;
pub mod schema;
pub mod scripted;
pub mod templates;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
pub use embed::{cosine, CachedEmbedder, EmbeddingVector, HashEmbedder};
pub use schema::{FieldKind, FieldSpec, ParsedResponse, ResponseSchema};
pub use scripted::{ScriptRule, ScriptedProvider};
pub use templates::{default_registry, PromptTemplate, TemplateRegistry};

/// Appended verbatim to the prompt when the first reply violates the schema.
pub const RETRY_INSTRUCTION: &str = "You have one more chance to provide the correct answer";

/// Placeholder values plus routing metadata (agent_id, item_id, ...) made
/// available both to template rendering and to scripted match rules.
pub type Bindings = BTreeMap<String, String>;

/// Convenience constructor for bindings.
pub fn bindings(pairs: &[(&str, &str)]) -> Bindings {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// A text-generation provider.
pub trait TextProvider: Send + Sync {
    fn id(&self) -> &str;
    /// Produce raw text for a rendered prompt. `tag` and `bindings` are
    /// routing metadata only; the prompt already contains all content.
    fn generate(&self, tag: &str, prompt: &str, bindings: &Bindings) -> Result<String>;
}

/// A text-embedding provider. Must be a pure function of the input text.
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// A validated provider reply.
#[derive(Debug, Clone)]
pub struct LlmResponse {
    pub raw_text: String,
    pub parsed: ParsedResponse,
    pub backend_id: String,
    /// 1 when the first reply validated, 2 when the retry did.
    pub attempt: u8,
}

/// Bundles the template registry, the text provider, and the embedder.
pub struct Gateway {
    registry: TemplateRegistry,
    provider: Arc<dyn TextProvider>,
    embedder: Arc<dyn Embedder>,
}

impl Gateway {
    pub fn new(
        registry: TemplateRegistry,
        provider: Arc<dyn TextProvider>,
        embedder: Arc<dyn Embedder>,
    ) -> Self {
        Self {
            registry,
            provider,
            embedder,
        }
    }

    pub fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    pub fn embedder(&self) -> Arc<dyn Embedder> {
        Arc::clone(&self.embedder)
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.embedder.embed(text)
    }

    /// Render `tag` with `bindings`, query the provider, and validate.
    ///
    /// On a schema violation the provider is queried once more with the retry
    /// instruction appended to the prompt; a second violation is an
    /// [`Error::LlmFormat`]. Total provider calls are therefore 1 or 2.
    pub fn complete(&self, tag: &str, bindings: &Bindings) -> Result<LlmResponse> {
        let template = self.registry.get(tag)?;
        let prompt = template.render(bindings)?;

        let first = self.provider.generate(tag, &prompt, bindings)?;
        match template.schema.parse(&first) {
            Ok(parsed) => Ok(LlmResponse {
                raw_text: first,
                parsed,
                backend_id: self.provider.id().to_string(),
                attempt: 1,
            }),
            Err(first_failure) => {
                log::debug!("template {tag}: reply rejected ({first_failure}), re-prompting");
                let retry_prompt = format!("{prompt}\n{RETRY_INSTRUCTION}");
                let second = self.provider.generate(tag, &retry_prompt, bindings)?;
                match template.schema.parse(&second) {
                    Ok(parsed) => Ok(LlmResponse {
                        raw_text: second,
                        parsed,
                        backend_id: self.provider.id().to_string(),
                        attempt: 2,
                    }),
                    Err(second_failure) => Err(Error::LlmFormat {
                        tag: tag.to_string(),
                        detail: format!(
                            "first attempt: {first_failure}; retry: {second_failure}; \
                             last reply: {second:?}"
                        ),
                    }),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted_gateway(rules: Vec<ScriptRule>) -> (Gateway, Arc<ScriptedProvider>) {
        let provider = Arc::new(ScriptedProvider::from_rules(rules));
        let gw = Gateway::new(
            default_registry(5),
            provider.clone() as Arc<dyn TextProvider>,
            Arc::new(HashEmbedder::default()),
        );
        (gw, provider)
    }

    fn rule(tag: &str, responses: &[&str]) -> ScriptRule {
        ScriptRule {
            tag: tag.to_string(),
            r#match: BTreeMap::new(),
            responses: responses.iter().map(|s| s.to_string()).collect(),
            repeat: false,
        }
    }

    #[test]
    fn valid_reply_parses_on_first_attempt() {
        let (gw, provider) = scripted_gateway(vec![rule("subset_rating", &["RATING: 4"])]);
        let b = bindings(&[
            ("persona", "p"),
            ("subset", "s"),
            ("item_type", "movie"),
        ]);
        let resp = gw.complete("subset_rating", &b).unwrap();
        assert_eq!(resp.attempt, 1);
        assert_eq!(resp.parsed.int("RATING"), Some(4));
        assert_eq!(provider.call_count(), 1);
    }

    #[test]
    fn malformed_then_valid_consumes_two_calls_and_appends_retry_text() {
        let (gw, provider) =
            scripted_gateway(vec![rule("subset_rating", &["garbage", "RATING: 2"])]);
        let b = bindings(&[
            ("persona", "p"),
            ("subset", "s"),
            ("item_type", "movie"),
        ]);
        let resp = gw.complete("subset_rating", &b).unwrap();
        assert_eq!(resp.attempt, 2);
        assert_eq!(resp.parsed.int("RATING"), Some(2));
        let log = provider.call_log();
        assert_eq!(log.len(), 2);
        assert!(!log[0].prompt.contains(RETRY_INSTRUCTION));
        assert!(log[1].prompt.ends_with(RETRY_INSTRUCTION));
    }

    #[test]
    fn two_malformed_replies_are_a_format_error() {
        let (gw, provider) = scripted_gateway(vec![rule("subset_rating", &["bad", "worse"])]);
        let b = bindings(&[
            ("persona", "p"),
            ("subset", "s"),
            ("item_type", "movie"),
        ]);
        let err = gw.complete("subset_rating", &b).unwrap_err();
        assert!(matches!(err, Error::LlmFormat { .. }));
        assert_eq!(provider.call_count(), 2);
    }
}
