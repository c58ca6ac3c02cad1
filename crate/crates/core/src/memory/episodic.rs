//! Per-agent episodic memory with self-ask multi-query retrieval.
//!
//! Entries are natural-language records embedded at insert time. Retrieval
//! expands the query with LLM-generated follow-up questions, runs cosine
//! top-k per query, and merges by the maximum similarity any query achieved.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, Interaction};
use crate::error::{Error, Result};
use crate::gateway::{bindings, cosine, Embedder, EmbeddingVector, Gateway};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    SeedRating,
    PageInteraction,
    Feeling,
    Reflection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub text: String,
    pub kind: MemoryKind,
    #[serde(skip)]
    pub embedding: EmbeddingVector,
    pub sequence: u64,
}

/// Ranked retrieval output plus the queries that produced it.
#[derive(Debug, Clone)]
pub struct RetrievalResult {
    pub entries: Vec<(MemoryEntry, f64)>,
    pub queries_used: Vec<String>,
}

pub struct EpisodicMemory {
    entries: Vec<MemoryEntry>,
    embedder: Arc<dyn Embedder>,
}

/// Seed entry for a historical rating, following the fixed templates:
/// scores above 4 are "liked", 2 or below "disliked", the rest neutral.
pub fn seed_entry_text(item_name: &str, rating: u8) -> String {
    if rating > 4 {
        format!("I liked {item_name} based on my review score of {rating}")
    } else if rating <= 2 {
        format!("I disliked {item_name} based on my review score of {rating}")
    } else {
        format!("I felt neutral about {item_name} based on my review score of {rating}")
    }
}

/// Page-interaction entry, following the fixed template.
pub fn page_interaction_text(
    item_type: &str,
    page_number: u32,
    all_items: &[String],
    watched: &[String],
    ratings: &[u8],
    disliked: &[String],
) -> String {
    let fmt_list = |items: &[String]| -> String {
        if items.is_empty() {
            "none".to_string()
        } else {
            items.join(", ")
        }
    };
    let ratings_text = if ratings.is_empty() {
        "none".to_string()
    } else {
        ratings
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "The recommender system recommended the following {item_type} to me on page \
         {page_number}: {}, among them, I selected {} and rate them {} respectively. \
         I dislike the rest {item_type} items: {}",
        fmt_list(all_items),
        fmt_list(watched),
        ratings_text,
        fmt_list(disliked),
    )
}

impl EpisodicMemory {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            entries: Vec::new(),
            embedder,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    /// Populate from the user's rating history. Must be called on an empty
    /// memory so seed entries occupy the lowest sequence numbers.
    pub fn seed_from_history(
        &mut self,
        history: &[&Interaction],
        dataset: &InteractionDataset,
    ) -> Result<()> {
        if !self.entries.is_empty() {
            return Err(Error::validation(
                "seed_from_history requires an empty memory",
            ));
        }
        for it in history {
            let text = seed_entry_text(dataset.title_of(&it.item_id), it.rating);
            self.record(&text, MemoryKind::SeedRating)?;
        }
        Ok(())
    }

    /// Append a record; returns its sequence index.
    pub fn record(&mut self, text: &str, kind: MemoryKind) -> Result<u64> {
        if text.trim().is_empty() {
            return Err(Error::validation("memory entry text must be non-empty"));
        }
        let sequence = self.entries.len() as u64;
        let embedding = self.embedder.embed(text)?;
        self.entries.push(MemoryEntry {
            text: text.to_string(),
            kind,
            embedding,
            sequence,
        });
        Ok(sequence)
    }

    /// Single-query cosine top-k, ties broken by insertion order.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<(MemoryEntry, f64)>> {
        if self.entries.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        let qv = self.embedder.embed(query)?;
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, cosine(&qv, &e.embedding)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.entries[i].clone(), s))
            .collect())
    }

    /// Self-ask retrieval: the query plus LLM follow-up questions each run
    /// cosine top-k1; the union is deduplicated per entry keeping the best
    /// similarity, re-ranked, and truncated to k1.
    ///
    /// A follow-up generation failure degrades to single-query retrieval.
    pub fn self_ask_retrieve(
        &self,
        gateway: &Gateway,
        query: &str,
        k1: usize,
        n_followups: usize,
    ) -> Result<RetrievalResult> {
        let mut queries = vec![query.to_string()];
        if n_followups > 0 {
            let b = bindings(&[("query", query), ("n", &n_followups.to_string())]);
            match gateway.complete("followup_questions", &b) {
                Ok(resp) => {
                    queries.extend(resp.parsed.list("QUESTION").into_iter().take(n_followups));
                }
                Err(e) => {
                    log::warn!("follow-up generation failed ({e}); single-query retrieval");
                }
            }
        }

        if self.entries.is_empty() {
            return Ok(RetrievalResult {
                entries: Vec::new(),
                queries_used: queries,
            });
        }

        // Best similarity per entry across all queries.
        let mut best: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
        for q in &queries {
            for (entry, score) in self.retrieve(q, k1)? {
                let slot = best.entry(entry.sequence).or_insert(f64::NEG_INFINITY);
                if score > *slot {
                    *slot = score;
                }
            }
        }
        let mut merged: Vec<(u64, f64)> = best.into_iter().collect();
        merged.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        let entries = merged
            .into_iter()
            .take(k1)
            .map(|(seq, score)| (self.entries[seq as usize].clone(), score))
            .collect();
        Ok(RetrievalResult {
            entries,
            queries_used: queries,
        })
    }

    /// Export as JSONL of `{text, kind, sequence}`.
    pub fn export_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for entry in &self.entries {
            let line = serde_json::to_string(entry)
                .map_err(|e| Error::validation(format!("serialize memory entry: {e}")))?;
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Import from JSONL; embeddings are recomputed with this memory's
    /// embedder.
    pub fn import_jsonl(path: impl AsRef<Path>, embedder: Arc<dyn Embedder>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut memory = Self::new(embedder);
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: MemoryEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno as u64 + 1,
                message: e.to_string(),
            })?;
            memory.record(&parsed.text, parsed.kind)?;
        }
        Ok(memory)
    }
}
