//! Run and session configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::brain::BrainParams;
use crate::error::{Error, Result};
use crate::memory::RetrievalParams;

/// Knobs for one simulated browsing session.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Items per page (n).
    pub items_per_page: usize,
    pub page_cap: u32,
    /// Episodic retrieval budget.
    pub k1: usize,
    /// Graph retrieval budget.
    pub k2: usize,
    /// Item-item vs user-item blend weight.
    pub alpha: f64,
    /// Node-embedding weight in the final retrieval score.
    pub embed_weight: f64,
    /// Retrieval expansion per elicitation round.
    pub delta_k: usize,
    /// Elicitation round cap.
    pub r_max: usize,
    /// Follow-up questions per self-ask retrieval.
    pub n_followups: usize,
    pub seed: u64,
    /// Parallel agent workers.
    pub worker_cap: usize,
    /// Recommendation strategy id: random | pop | mf.
    pub recommender: String,
    /// Caption cache to read; None runs caption-free.
    pub captions: Option<PathBuf>,
    pub item_type: String,
    /// Reflect after every page instead of only at session end.
    pub reflect_every_page: bool,
    pub max_path_length: usize,
    pub max_paths_per_result: usize,
    pub causal_threshold: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            items_per_page: 4,
            page_cap: 20,
            k1: 5,
            k2: 3,
            alpha: 0.8,
            embed_weight: 0.25,
            delta_k: 2,
            r_max: 3,
            n_followups: 2,
            seed: 7,
            worker_cap: 4,
            recommender: "pop".to_string(),
            captions: None,
            item_type: "movie".to_string(),
            reflect_every_page: true,
            max_path_length: 3,
            max_paths_per_result: 3,
            causal_threshold: 0.5,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.items_per_page == 0 {
            return Err(Error::validation("items_per_page must be at least 1"));
        }
        if self.page_cap == 0 {
            return Err(Error::validation("page_cap must be at least 1"));
        }
        for (name, v) in [("alpha", self.alpha), ("embed_weight", self.embed_weight)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.worker_cap == 0 {
            return Err(Error::validation("worker_cap must be at least 1"));
        }
        Ok(())
    }

    pub fn retrieval_params(&self) -> RetrievalParams {
        RetrievalParams {
            alpha: self.alpha,
            embed_weight: self.embed_weight,
            max_path_length: self.max_path_length,
            max_paths_per_result: self.max_paths_per_result,
        }
    }

    pub fn brain_params(&self) -> BrainParams {
        BrainParams {
            item_type: self.item_type.clone(),
            k1: self.k1,
            k2: self.k2,
            delta_k: self.delta_k,
            r_max: self.r_max,
            n_followups: self.n_followups,
            page_cap: self.page_cap,
            causal_threshold: self.causal_threshold,
            retrieval: self.retrieval_params(),
        }
    }
}

/// How agent personas are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaMode {
    /// Deterministic profile from dataset statistics; no LLM calls.
    Derived,
    /// Full LLM pipeline: summary, candidates, self-consistency matching.
    Matched,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonaConfig {
    pub mode: PersonaMode,
    /// Candidate personas per user.
    pub m: usize,
    /// Consistency subsets per candidate.
    pub j: usize,
    /// Interactions per consistency subset.
    pub rho: usize,
    /// History sample for the taste summary.
    pub summary_sample: usize,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        Self {
            mode: PersonaMode::Derived,
            m: 5,
            j: 3,
            rho: 10,
            summary_sample: 50,
        }
    }
}

/// Matrix-factorization hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MfConfig {
    pub rank: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            rank: 16,
            epochs: 30,
            learning_rate: 0.01,
            regularization: 0.05,
        }
    }
}

/// Per-task settings.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TaskConfig {
    pub believability: BelievabilityConfig,
    pub coherence: CoherenceConfig,
    pub exposure: ExposureConfig,
    pub reviews: ReviewInfluenceConfig,
    pub offline: OfflineCompareConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BelievabilityConfig {
    /// Distractor ratio 1:m.
    pub m: usize,
    pub items_per_agent: usize,
    /// Sample distractors by popularity instead of uniformly.
    pub popularity_matched: bool,
}

impl Default for BelievabilityConfig {
    fn default() -> Self {
        Self {
            m: 1,
            items_per_agent: 20,
            popularity_matched: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CoherenceConfig {
    /// JSONL of `{query, positive, negative}` records.
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExposureConfig {
    /// Exactly two genres the biased recommender is limited to.
    pub genres: Vec<String>,
    pub checkpoints: Vec<u32>,
    pub probes_per_genre: usize,
    pub page_cap: u32,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            genres: vec!["Action".to_string(), "Horror".to_string()],
            checkpoints: vec![5, 20, 50],
            probes_per_genre: 5,
            page_cap: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReviewInfluenceConfig {
    /// Display modes to compare.
    pub modes: Vec<String>,
    /// JSONL of `{item_id, positive, negative}` comments.
    pub reviews: Option<PathBuf>,
}

impl Default for ReviewInfluenceConfig {
    fn default() -> Self {
        Self {
            modes: vec![
                "origin".to_string(),
                "with_count".to_string(),
                "with_negative".to_string(),
                "with_positive".to_string(),
            ],
            reviews: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OfflineCompareConfig {
    pub recommenders: Vec<String>,
    pub k: usize,
}

impl Default for OfflineCompareConfig {
    fn default() -> Self {
        Self {
            recommenders: vec!["random".to_string(), "pop".to_string(), "mf".to_string()],
            k: 10,
        }
    }
}

/// Top-level run configuration (the CLI `--config` document).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub ratings: PathBuf,
    pub items: PathBuf,
    /// Single-character field delimiter.
    pub delimiter: String,
    /// Scripted-provider script; None uses the live HTTP backend.
    pub script: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Number of agents (the first N train users, sorted by id).
    pub agents: usize,
    /// Explicit user ids; overrides `agents` when set.
    pub users: Option<Vec<String>>,
    pub fractions: (f64, f64, f64),
    pub embed_dim: usize,
    pub embed_seed: u64,
    pub persona: PersonaConfig,
    pub mf: MfConfig,
    pub session: SessionConfig,
    pub tasks: TaskConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ratings: PathBuf::from("ratings.tsv"),
            items: PathBuf::from("items.tsv"),
            delimiter: "\t".to_string(),
            script: None,
            out_dir: PathBuf::from("run_out"),
            agents: 100,
            users: None,
            fractions: (0.8, 0.1, 0.1),
            embed_dim: 64,
            embed_seed: 0x5eed,
            persona: PersonaConfig::default(),
            mf: MfConfig::default(),
            session: SessionConfig::default(),
            tasks: TaskConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        config.session.validate()?;
        Ok(config)
    }

    pub fn delimiter_byte(&self) -> Result<u8> {
        let bytes = self.delimiter.as_bytes();
        if bytes.len() != 1 {
            return Err(Error::validation("delimiter must be a single byte"));
        }
        Ok(bytes[0])
    }
}
