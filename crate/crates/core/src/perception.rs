//! Fact-checked thumbnail captions.
//!
//! Pipeline: draft a caption from the thumbnail, decompose it into atomic
//! claims, score each claim with the multimodal provider, and assemble a
//! refined caption that drops contradicted claims. Captions are precomputed
//! in a batch pass and cached; agents never call the provider mid-turn.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dataset::Item;
use crate::error::{Error, Result};
use crate::gateway::{bindings, Gateway};

/// A single factual statement with agree/disagree confidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomicClaim {
    pub text: String,
    pub p_yes: f64,
    pub p_no: f64,
}

/// A finished caption record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Caption {
    pub item_id: String,
    pub draft: String,
    pub claims: Vec<AtomicClaim>,
    #[serde(rename = "final")]
    pub final_text: String,
}

/// Claims scoring below this agreement probability are marked for removal.
pub const DEFAULT_REMOVAL_THRESHOLD: f64 = 0.5;
/// Prompt-side ceiling on extracted claims.
pub const MAX_CLAIMS: usize = 6;

/// Ask the provider for a caption draft from the item's thumbnail.
pub fn draft_caption(gateway: &Gateway, item: &Item, item_type: &str) -> Result<String> {
    let thumbnail = item
        .thumbnail_ref
        .as_deref()
        .ok_or_else(|| Error::NoThumbnail(item.item_id.clone()))?;
    let b = bindings(&[
        ("item_title", &item.title),
        ("item_id", &item.item_id),
        ("thumbnail_ref", thumbnail),
        ("item_type", item_type),
    ]);
    let resp = gateway.complete("caption_draft", &b)?;
    Ok(resp.parsed.free_text().unwrap_or_default().to_string())
}

/// Decompose a draft into unscored atomic claims.
pub fn decompose_claims(gateway: &Gateway, item_id: &str, draft: &str) -> Result<Vec<String>> {
    if draft.trim().is_empty() {
        return Err(Error::validation("cannot decompose an empty draft"));
    }
    let b = bindings(&[
        ("draft", draft),
        ("item_id", item_id),
        ("max_claims", &MAX_CLAIMS.to_string()),
    ]);
    let resp = gateway.complete("caption_claims", &b)?;
    Ok(resp.parsed.list("CLAIM"))
}

/// Score one claim against the thumbnail; probabilities are clamped to [0,1]
/// and a missing disagreement probability falls back to the complement.
pub fn score_claim(
    gateway: &Gateway,
    item_id: &str,
    claim: &str,
    thumbnail_ref: &str,
) -> Result<(f64, f64)> {
    let b = bindings(&[
        ("claim", claim),
        ("item_id", item_id),
        ("thumbnail_ref", thumbnail_ref),
    ]);
    let resp = gateway.complete("claim_score", &b)?;
    let raw_yes = resp.parsed.float("YES").ok_or_else(|| Error::LlmFormat {
        tag: "claim_score".to_string(),
        detail: "missing YES probability".to_string(),
    })?;
    let p_yes = raw_yes.clamp(0.0, 1.0);
    if raw_yes != p_yes {
        log::warn!("claim score yes={raw_yes} clamped to {p_yes}");
    }
    let p_no = match resp.parsed.float("NO") {
        Some(raw_no) => {
            let clamped = raw_no.clamp(0.0, 1.0);
            if clamped + p_yes > 1.0 + 1e-9 {
                log::warn!("claim probabilities sum above 1; using complement");
                1.0 - p_yes
            } else {
                clamped
            }
        }
        None => {
            log::warn!("claim score missing NO; using complement of yes");
            1.0 - p_yes
        }
    };
    Ok((p_yes, p_no))
}

/// Assemble the final caption. Zero claims passes the draft through
/// unchanged; otherwise the provider sees every claim with its score and a
/// KEEP/REMOVE directive at `threshold`.
pub fn combine_caption(
    gateway: &Gateway,
    item_id: &str,
    draft: &str,
    claims: &[AtomicClaim],
    threshold: f64,
) -> Result<String> {
    if claims.is_empty() {
        return Ok(draft.to_string());
    }
    let claim_lines: Vec<String> = claims
        .iter()
        .map(|c| {
            let directive = if c.p_yes < threshold { "REMOVE" } else { "KEEP" };
            format!("- [{directive}] {} (yes={:.2}, no={:.2})", c.text, c.p_yes, c.p_no)
        })
        .collect();
    let b = bindings(&[
        ("draft", draft),
        ("item_id", item_id),
        ("claims_with_scores", &claim_lines.join("\n")),
    ]);
    let resp = gateway.complete("caption_combine", &b)?;
    Ok(resp.parsed.free_text().unwrap_or_default().to_string())
}

/// Run the full pipeline for one item.
pub fn caption_item(
    gateway: &Gateway,
    item: &Item,
    item_type: &str,
    threshold: f64,
) -> Result<Caption> {
    let draft = draft_caption(gateway, item, item_type)?;
    let thumbnail = item.thumbnail_ref.as_deref().unwrap_or_default();
    let claim_texts = decompose_claims(gateway, &item.item_id, &draft)?;
    let mut claims = Vec::with_capacity(claim_texts.len());
    for text in claim_texts {
        let (p_yes, p_no) = score_claim(gateway, &item.item_id, &text, thumbnail)?;
        claims.push(AtomicClaim { text, p_yes, p_no });
    }
    let final_text = combine_caption(gateway, &item.item_id, &draft, &claims, threshold)?;
    Ok(Caption {
        item_id: item.item_id.clone(),
        draft,
        claims,
        final_text,
    })
}

/// In-memory caption cache keyed by (item, thumbnail, backend); one provider
/// pass per key per run.
pub struct CaptionStore {
    entries: Mutex<BTreeMap<String, Caption>>,
    /// (thumbnail_ref, backend_id) recorded at insert, validated on lookup.
    keys: Mutex<BTreeMap<String, (String, String)>>,
}

impl Default for CaptionStore {
    fn default() -> Self {
        Self::new()
    }
}

impl CaptionStore {
    pub fn new() -> Self {
        Self {
            entries: Mutex::new(BTreeMap::new()),
            keys: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, item_id: &str) -> Option<Caption> {
        self.entries.lock().unwrap().get(item_id).cloned()
    }

    /// Fetch or compute the caption for an item.
    pub fn get_or_caption(
        &self,
        gateway: &Gateway,
        item: &Item,
        item_type: &str,
        threshold: f64,
    ) -> Result<Caption> {
        let thumbnail = item.thumbnail_ref.clone().unwrap_or_default();
        let backend = gateway.provider_id().to_string();
        if let Some(hit) = self.entries.lock().unwrap().get(&item.item_id) {
            let keys = self.keys.lock().unwrap();
            if keys.get(&item.item_id) == Some(&(thumbnail.clone(), backend.clone())) {
                return Ok(hit.clone());
            }
        }
        let caption = caption_item(gateway, item, item_type, threshold)?;
        self.entries
            .lock()
            .unwrap()
            .insert(item.item_id.clone(), caption.clone());
        self.keys
            .lock()
            .unwrap()
            .insert(item.item_id.clone(), (thumbnail, backend));
        Ok(caption)
    }

    pub fn insert(&self, caption: Caption) {
        self.keys
            .lock()
            .unwrap()
            .insert(caption.item_id.clone(), (String::new(), "import".to_string()));
        self.entries
            .lock()
            .unwrap()
            .insert(caption.item_id.clone(), caption);
    }

    /// Persist as JSONL of `{item_id, draft, claims, final}`.
    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for caption in self.entries.lock().unwrap().values() {
            let line = serde_json::to_string(caption)
                .map_err(|e| Error::validation(format!("serialize caption: {e}")))?;
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let store = Self::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let caption: Caption = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno as u64 + 1,
                message: e.to_string(),
            })?;
            store.insert(caption);
        }
        Ok(store)
    }
}

/// Batch pass over every item that carries a thumbnail. Items without one
/// are skipped (agents fall back to text-only prompts).
pub fn caption_items<'a>(
    gateway: &Gateway,
    items: impl Iterator<Item = &'a Item>,
    item_type: &str,
    threshold: f64,
    store: &CaptionStore,
) -> Result<usize> {
    let mut captioned = 0;
    for item in items {
        if item.thumbnail_ref.is_none() {
            continue;
        }
        store.get_or_caption(gateway, item, item_type, threshold)?;
        captioned += 1;
    }
    Ok(captioned)
}
