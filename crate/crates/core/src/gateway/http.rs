//! Live HTTP backends speaking a chat-completion-style JSON protocol.
//!
//! Configured through environment variables: `LLM_ENDPOINT`, `LLM_MODEL`,
//! `LLM_API_KEY` for text; `EMBED_ENDPOINT`, `EMBED_MODEL` for embeddings.
//! Not exercised in CI; the scripted provider and hash embedder cover tests.

use serde::Deserialize;
use serde_json::json;

use super::{Bindings, Embedder, EmbeddingVector, TextProvider};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
}

pub struct HttpProvider {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::LlmTransport(e.to_string()))?;
        Ok(Self { config, client })
    }

    /// Build from `LLM_ENDPOINT` / `LLM_MODEL` / `LLM_API_KEY`.
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var("LLM_ENDPOINT")
            .map_err(|_| Error::validation("LLM_ENDPOINT not set"))?;
        let model =
            std::env::var("LLM_MODEL").map_err(|_| Error::validation("LLM_MODEL not set"))?;
        let api_key = std::env::var("LLM_API_KEY").ok();
        let temperature = std::env::var("LLM_TEMPERATURE")
            .ok()
            .and_then(|t| t.parse().ok());
        Self::new(HttpConfig {
            endpoint,
            model,
            api_key,
            temperature,
            timeout_secs: 120,
        })
    }
}

impl TextProvider for HttpProvider {
    fn id(&self) -> &str {
        "http"
    }

    fn generate(&self, _tag: &str, prompt: &str, _bindings: &Bindings) -> Result<String> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::LlmTransport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(Error::LlmTransport(format!(
                "endpoint returned {}",
                resp.status()
            )));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| Error::LlmTransport(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::LlmTransport("response had no choices".to_string()))
    }
}

pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: std::sync::OnceLock<usize>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var("EMBED_ENDPOINT")
            .map_err(|_| Error::validation("EMBED_ENDPOINT not set"))?;
        let model =
            std::env::var("EMBED_MODEL").map_err(|_| Error::validation("EMBED_MODEL not set"))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| Error::LlmTransport(e.to_string()))?;
        Ok(Self {
            endpoint,
            model,
            api_key: std::env::var("LLM_API_KEY").ok(),
            dim: std::sync::OnceLock::new(),
            client,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        "http-embed"
    }

    fn dim(&self) -> usize {
        *self.dim.get().unwrap_or(&0)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.is_empty() {
            return Err(Error::validation("cannot embed empty text"));
        }
        let body = json!({"model": self.model, "input": [text]});
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::LlmTransport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(Error::LlmTransport(format!(
                "embed endpoint returned {}",
                resp.status()
            )));
        }
        let parsed: EmbedResponse = resp
            .json()
            .map_err(|e| Error::LlmTransport(format!("bad embed body: {e}")))?;
        let values = parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| Error::LlmTransport("embed response had no data".to_string()))?;
        let _ = self.dim.set(values.len());
        Ok(EmbeddingVector { values })
    }
}
