//! The agent decision loop.
//!
//! Each page turn runs five steps in order: perceive the page, retrieve
//! evidence, decide what to watch (multi-round elicitation with expanding
//! retrieval budgets), rate watched items with path-grounded prompts, then
//! pick the next action through satisfaction/fatigue/emotion estimation and
//! causal refinement. Reflection closes the turn.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionDataset, ItemId};
use crate::error::{Error, Result};
use crate::gateway::{Bindings, Gateway};
use crate::memory::kg::rating_relation;
use crate::memory::{
    retrieve_similar, Entity, EpisodicMemory, GraphOverlay, KnowledgeGraph, MemoryKind,
    RetrievalParams, SimilarItem,
};
use crate::persona::Persona;

/// Ordinal fatigue level; never decreases within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fatigue {
    Low,
    Medium,
    High,
}

impl Fatigue {
    fn parse(s: &str) -> Fatigue {
        match s {
            "medium" => Fatigue::Medium,
            "high" => Fatigue::High,
            _ => Fatigue::Low,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Fatigue::Low => "low",
            Fatigue::Medium => "medium",
            Fatigue::High => "high",
        }
    }

    /// Page-count hint included in the fatigue prompt: low through page 3,
    /// medium through page 7, high beyond.
    pub fn hint_for_pages(pages: u32) -> Fatigue {
        if pages <= 3 {
            Fatigue::Low
        } else if pages <= 7 {
            Fatigue::Medium
        } else {
            Fatigue::High
        }
    }
}

/// Navigation alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Exit,
    Next,
    Previous,
    Click(ItemId),
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Exit => write!(f, "EXIT"),
            Action::Next => write!(f, "NEXT"),
            Action::Previous => write!(f, "PREVIOUS"),
            Action::Click(item) => write!(f, "CLICK {item}"),
        }
    }
}

/// An item as shown on a page: metadata plus optional caption and display
/// augmentation (review counts or comments).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageItem {
    pub item_id: ItemId,
    pub title: String,
    pub caption: Option<String>,
    pub extra: Option<String>,
}

impl PageItem {
    fn render(&self) -> String {
        let mut line = format!("- {} (id {})", self.title, self.item_id);
        if let Some(caption) = &self.caption {
            line.push_str(&format!(" — {caption}"));
        }
        if let Some(extra) = &self.extra {
            line.push_str(&format!(" — {extra}"));
        }
        line
    }
}

/// Mutable per-agent session state.
pub struct AgentState {
    pub agent_id: String,
    pub user_id: String,
    pub persona: Persona,
    pub episodic: EpisodicMemory,
    pub overlay: GraphOverlay,
    pub page: u32,
    pub satisfaction: String,
    pub fatigue: Fatigue,
    pub emotion: String,
    pub exit_reason: Option<String>,
}

impl AgentState {
    pub fn new(
        agent_id: impl Into<String>,
        user_id: impl Into<String>,
        persona: Persona,
        episodic: EpisodicMemory,
    ) -> Self {
        Self {
            agent_id: agent_id.into(),
            user_id: user_id.into(),
            persona,
            episodic,
            overlay: GraphOverlay::new(),
            page: 1,
            satisfaction: "unknown".to_string(),
            fatigue: Fatigue::Low,
            emotion: "neutral".to_string(),
            exit_reason: None,
        }
    }
}

/// One elicitation round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRound {
    pub watch: Vec<ItemId>,
    pub skip: Vec<ItemId>,
    pub contradiction: bool,
    pub reason: String,
    pub k1: usize,
    pub k2: usize,
}

/// Outcome of multi-round preference elicitation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WatchDecision {
    pub rounds: Vec<DecisionRound>,
    pub final_watch: Vec<ItemId>,
    pub k1_used: usize,
    pub k2_used: usize,
}

/// Rating plus feeling for one watched item.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemVerdict {
    pub item_id: ItemId,
    pub rating: u8,
    pub feeling: String,
    pub cited_paths: Vec<String>,
}

/// One causal validation probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalProbe {
    pub question: String,
    pub score: f64,
    pub verdict: String,
}

/// Tentative action, probes, and the committed action.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionPlan {
    pub tentative: Action,
    pub probes: Vec<CausalProbe>,
    pub final_action: Action,
}

/// Decision-loop knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BrainParams {
    pub item_type: String,
    /// Episodic retrieval budget at round 0.
    pub k1: usize,
    /// Graph retrieval budget at round 0.
    pub k2: usize,
    /// Budget expansion per elicitation round.
    pub delta_k: usize,
    /// Maximum elicitation rounds.
    pub r_max: usize,
    /// Follow-up questions per self-ask retrieval.
    pub n_followups: usize,
    pub page_cap: u32,
    /// Mean causal-probe score below this re-queries the action.
    pub causal_threshold: f64,
    pub retrieval: RetrievalParams,
}

impl Default for BrainParams {
    fn default() -> Self {
        Self {
            item_type: "movie".to_string(),
            k1: 5,
            k2: 3,
            delta_k: 2,
            r_max: 3,
            n_followups: 2,
            page_cap: 20,
            causal_threshold: 0.5,
            retrieval: RetrievalParams::default(),
        }
    }
}

/// Read-only context shared by all brain operations of one agent.
pub struct Brain<'a> {
    pub gateway: &'a Gateway,
    pub graph: &'a KnowledgeGraph,
    pub dataset: &'a InteractionDataset,
    pub aggregated: &'a BTreeMap<ItemId, f64>,
    pub params: &'a BrainParams,
}

fn render_similar(items: &[SimilarItem]) -> String {
    if items.is_empty() {
        return "(none)".to_string();
    }
    items
        .iter()
        .map(|s| {
            let rating = s
                .aggregated_rating
                .map(|r| format!("{r:.2}"))
                .unwrap_or_else(|| "unrated".to_string());
            format!("- {} (aggregate rating {rating})", s.title)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl<'a> Brain<'a> {
    fn base_bindings(&self, state: &AgentState) -> Bindings {
        let mut b = Bindings::new();
        b.insert("agent_id".to_string(), state.agent_id.clone());
        b.insert("user_id".to_string(), state.user_id.clone());
        b.insert("item_type".to_string(), self.params.item_type.clone());
        b.insert(
            "persona".to_string(),
            state.persona.prompt_block(&self.params.item_type),
        );
        b.insert("page".to_string(), state.page.to_string());
        b.insert("page_cap".to_string(), self.params.page_cap.to_string());
        b
    }

    fn entity_name(&self, entity: &Entity) -> String {
        match entity.kind {
            crate::memory::EntityKind::Item => self.dataset.title_of(&entity.key).to_string(),
            _ => entity.key.clone(),
        }
    }

    fn kg_evidence_for_items(
        &self,
        state: &AgentState,
        items: &[PageItem],
        k2: usize,
    ) -> Result<String> {
        let mut lines = Vec::new();
        for item in items {
            let similar = retrieve_similar(
                self.graph,
                Some(&state.overlay),
                &state.user_id,
                &item.item_id,
                k2,
                &self.params.retrieval,
                self.gateway.embedder().as_ref(),
                self.dataset,
                self.aggregated,
            )?;
            lines.push(format!("{}:\n{}", item.title, render_similar(&similar)));
        }
        Ok(lines.join("\n"))
    }

    /// Multi-round watch/skip elicitation with expanding retrieval budgets.
    pub fn elicit_watch(&self, state: &AgentState, items: &[PageItem]) -> Result<WatchDecision> {
        let query: String = items
            .iter()
            .map(|i| i.title.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        let page_ids: Vec<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
        let page_text = items.iter().map(|i| i.render()).collect::<Vec<_>>().join("\n");

        let mut rounds: Vec<DecisionRound> = Vec::new();
        let mut k1 = self.params.k1;
        let mut k2 = self.params.k2;
        for round in 0..self.params.r_max.max(1) {
            if round > 0 {
                k1 += self.params.delta_k;
                k2 += self.params.delta_k;
            }
            let episodic = state.episodic.self_ask_retrieve(
                self.gateway,
                &query,
                k1,
                self.params.n_followups,
            )?;
            let episodic_text = if episodic.entries.is_empty() {
                "(none)".to_string()
            } else {
                episodic
                    .entries
                    .iter()
                    .map(|(e, s)| format!("- {} (similarity {s:.2})", e.text))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            let kg_text = self.kg_evidence_for_items(state, items, k2)?;

            let mut b = self.base_bindings(state);
            b.insert("pickiness".to_string(), state.persona.pickiness.to_string());
            b.insert("page_items".to_string(), page_text.clone());
            b.insert("episodic_evidence".to_string(), episodic_text);
            b.insert("kg_evidence".to_string(), kg_text);
            b.insert("round".to_string(), round.to_string());
            b.insert(
                "previous_decision".to_string(),
                match rounds.last() {
                    Some(prev) => format!(
                        "Your previous decision was WATCH: {} / SKIP: {} and you found a \
                         contradiction: {}. Reconsider it against the expanded evidence.\n",
                        if prev.watch.is_empty() { "none".to_string() } else { prev.watch.join(", ") },
                        if prev.skip.is_empty() { "none".to_string() } else { prev.skip.join(", ") },
                        prev.reason,
                    ),
                    None => String::new(),
                },
            );

            let resp = self.gateway.complete("watch_decision", &b)?;
            let resolve = |raw: Vec<String>| -> Vec<ItemId> {
                raw.iter()
                    .filter_map(|token| {
                        let token = token.trim();
                        if page_ids.contains(&token) {
                            return Some(token.to_string());
                        }
                        items
                            .iter()
                            .find(|i| i.title.eq_ignore_ascii_case(token))
                            .map(|i| i.item_id.clone())
                    })
                    .collect()
            };
            let watch = resolve(resp.parsed.list("WATCH"));
            let skip = resolve(resp.parsed.list("SKIP"));
            let contradiction = resp.parsed.text("CONTRADICTION") == Some("yes");
            let reason = resp.parsed.text("REASON").unwrap_or_default().to_string();
            rounds.push(DecisionRound {
                watch,
                skip,
                contradiction,
                reason,
                k1,
                k2,
            });
            if !contradiction {
                break;
            }
        }

        let last = rounds.last().expect("at least one elicitation round");
        Ok(WatchDecision {
            final_watch: last.watch.clone(),
            k1_used: last.k1,
            k2_used: last.k2,
            rounds,
        })
    }

    /// Path-grounded rating of one item without memory side effects.
    pub fn rate_item(
        &self,
        state: &AgentState,
        item_id: &str,
        caption: Option<&str>,
    ) -> Result<ItemVerdict> {
        let title = self.dataset.title_of(item_id).to_string();
        let similar = retrieve_similar(
            self.graph,
            Some(&state.overlay),
            &state.user_id,
            item_id,
            self.params.k2,
            &self.params.retrieval,
            self.gateway.embedder().as_ref(),
            self.dataset,
            self.aggregated,
        )?;
        let mut cited_paths = Vec::new();
        let mut evidence_lines = Vec::new();
        for s in &similar {
            let rating = s
                .aggregated_rating
                .map(|r| format!("{r:.2}"))
                .unwrap_or_else(|| "unrated".to_string());
            if s.breakdown.supporting_paths.is_empty() {
                evidence_lines.push(format!("- {} (aggregate rating {rating})", s.title));
            }
            for path in &s.breakdown.supporting_paths {
                let rendered = path.render(&|e| self.entity_name(e));
                evidence_lines.push(format!(
                    "- {} (aggregate rating {rating}): {rendered}",
                    s.title
                ));
                cited_paths.push(rendered);
            }
        }
        let evidence = if evidence_lines.is_empty() {
            "(none)".to_string()
        } else {
            evidence_lines.join("\n")
        };

        let mut b = self.base_bindings(state);
        b.insert("item_id".to_string(), item_id.to_string());
        b.insert("item_title".to_string(), title.clone());
        b.insert(
            "caption".to_string(),
            caption
                .map(|c| format!("Caption: {c}\n"))
                .unwrap_or_default(),
        );
        b.insert("kg_evidence".to_string(), evidence);

        let resp = self.gateway.complete("item_rating", &b)?;
        let rating = resp.parsed.int("RATING").ok_or_else(|| Error::LlmFormat {
            tag: "item_rating".to_string(),
            detail: "missing RATING".to_string(),
        })? as u8;
        let feeling = resp.parsed.text("FEELING").unwrap_or_default().to_string();

        Ok(ItemVerdict {
            item_id: item_id.to_string(),
            rating,
            feeling,
            cited_paths,
        })
    }

    /// Rate one item and fold the verdict back into the agent: a feeling
    /// entry in episodic memory and a liked/disliked/rated overlay edge.
    pub fn evaluate_item(
        &self,
        state: &mut AgentState,
        item_id: &str,
        caption: Option<&str>,
    ) -> Result<ItemVerdict> {
        let verdict = self.rate_item(state, item_id, caption)?;
        let title = self.dataset.title_of(item_id);
        state.episodic.record(
            &format!(
                "I watched {title} and rated it {}. {}",
                verdict.rating, verdict.feeling
            ),
            MemoryKind::Feeling,
        )?;
        crate::memory::kg::grow(
            self.graph,
            &mut state.overlay,
            &Entity::user(&state.user_id),
            rating_relation(verdict.rating),
            &Entity::item(item_id),
        )?;
        Ok(verdict)
    }

    /// Rate every watched item in order.
    pub fn evaluate_items(
        &self,
        state: &mut AgentState,
        items: &[PageItem],
        watched: &[ItemId],
    ) -> Result<Vec<ItemVerdict>> {
        let mut verdicts = Vec::with_capacity(watched.len());
        for item_id in watched {
            let caption = items
                .iter()
                .find(|i| &i.item_id == item_id)
                .and_then(|i| i.caption.as_deref());
            verdicts.push(self.evaluate_item(state, item_id, caption)?);
        }
        Ok(verdicts)
    }

    fn legal_actions(
        &self,
        state: &AgentState,
        items: &[PageItem],
        clicked: &[ItemId],
    ) -> Vec<&'static str> {
        let mut legal = vec!["EXIT"];
        if state.page < self.params.page_cap {
            legal.push("NEXT");
        }
        if state.page > 1 {
            legal.push("PREVIOUS");
        }
        if items.iter().any(|i| !clicked.contains(&i.item_id)) {
            legal.push("CLICK");
        }
        legal
    }

    fn parse_action(
        resp: &crate::gateway::LlmResponse,
        legal: &[&str],
        items: &[PageItem],
        clicked: &[ItemId],
    ) -> std::result::Result<Action, String> {
        let action = resp.parsed.text("ACTION").unwrap_or_default().to_string();
        if !legal.contains(&action.as_str()) {
            return Err(format!("action {action} is illegal here (legal: {legal:?})"));
        }
        match action.as_str() {
            "EXIT" => Ok(Action::Exit),
            "NEXT" => Ok(Action::Next),
            "PREVIOUS" => Ok(Action::Previous),
            "CLICK" => {
                let raw = resp.parsed.text("ITEM").unwrap_or_default().trim().to_string();
                let resolved = items
                    .iter()
                    .find(|i| i.item_id == raw || i.title.eq_ignore_ascii_case(&raw))
                    .map(|i| i.item_id.clone());
                match resolved {
                    Some(id) if clicked.contains(&id) => {
                        Err(format!("item {id} was already clicked on this page"))
                    }
                    Some(id) => Ok(Action::Click(id)),
                    None => Err(format!("CLICK names unknown item `{raw}`")),
                }
            }
            other => Err(format!("unexpected action {other}")),
        }
    }

    /// Emotion-driven action selection: satisfaction, fatigue, emotion, then
    /// the tentative action. An illegal action is re-prompted once.
    pub fn select_action(
        &self,
        state: &mut AgentState,
        items: &[PageItem],
        clicked: &[ItemId],
        history: &str,
    ) -> Result<Action> {
        let mut b = self.base_bindings(state);
        b.insert("history".to_string(), history.to_string());

        let sat = self.gateway.complete("satisfaction_estimate", &b)?;
        state.satisfaction = sat
            .parsed
            .text("SATISFACTION")
            .unwrap_or("medium")
            .to_string();

        let hint = Fatigue::hint_for_pages(state.page);
        b.insert("pages_visited".to_string(), state.page.to_string());
        b.insert(
            "fatigue_hint".to_string(),
            format!(
                "After this many pages a typical user's fatigue is {}.",
                hint.label()
            ),
        );
        let fat = self.gateway.complete("fatigue_estimate", &b)?;
        let parsed_fatigue = Fatigue::parse(fat.parsed.text("FATIGUE").unwrap_or("low"));
        // Fatigue never decreases within a session.
        state.fatigue = state.fatigue.max(parsed_fatigue);

        b.insert("satisfaction".to_string(), state.satisfaction.clone());
        b.insert("fatigue".to_string(), state.fatigue.label().to_string());
        let emo = self.gateway.complete("emotion_inference", &b)?;
        state.emotion = emo.parsed.text("EMOTION").unwrap_or("neutral").to_string();

        let legal = self.legal_actions(state, items, clicked);
        b.insert("emotion".to_string(), state.emotion.clone());
        b.insert("legal_actions".to_string(), legal.join(", "));
        b.insert("note".to_string(), String::new());

        let first = self.gateway.complete("action_choice", &b)?;
        match Self::parse_action(&first, &legal, items, clicked) {
            Ok(action) => Ok(action),
            Err(why) => {
                log::debug!("agent {}: illegal action ({why}); re-prompting", state.agent_id);
                b.insert(
                    "note".to_string(),
                    format!("Your previous choice was invalid: {why}. Pick a legal action.\n"),
                );
                let second = self.gateway.complete("action_choice", &b)?;
                Self::parse_action(&second, &legal, items, clicked).map_err(|why| {
                    Error::LlmFormat {
                        tag: "action_choice".to_string(),
                        detail: why,
                    }
                })
            }
        }
    }

    /// Causal refinement of a tentative action. Any sub-step failure
    /// degrades to the tentative action rather than erroring.
    pub fn refine_action(
        &self,
        state: &AgentState,
        tentative: Action,
        items: &[PageItem],
        clicked: &[ItemId],
        history: &str,
    ) -> Result<ActionPlan> {
        let mut b = self.base_bindings(state);
        b.insert("history".to_string(), history.to_string());
        b.insert("tentative".to_string(), tentative.to_string());

        let questions = match self.gateway.complete("causal_questions", &b) {
            Ok(resp) => resp.parsed.list("QUESTION"),
            Err(e) => {
                log::warn!("causal question generation failed ({e}); keeping tentative");
                return Ok(ActionPlan {
                    final_action: tentative.clone(),
                    tentative,
                    probes: Vec::new(),
                });
            }
        };

        let mut probes = Vec::new();
        for question in questions {
            let mut qb = b.clone();
            qb.insert("question".to_string(), question.clone());
            match self.gateway.complete("causal_outcome", &qb) {
                Ok(resp) => {
                    let raw = resp.parsed.float("SCORE").unwrap_or(1.0);
                    probes.push(CausalProbe {
                        question,
                        score: raw.clamp(0.0, 1.0),
                        verdict: resp.parsed.text("VERDICT").unwrap_or_default().to_string(),
                    });
                }
                Err(e) => {
                    log::warn!("causal outcome failed ({e}); keeping tentative");
                    return Ok(ActionPlan {
                        final_action: tentative.clone(),
                        tentative,
                        probes,
                    });
                }
            }
        }

        if probes.is_empty() {
            return Ok(ActionPlan {
                final_action: tentative.clone(),
                tentative,
                probes,
            });
        }

        let mean: f64 = probes.iter().map(|p| p.score).sum::<f64>() / probes.len() as f64;
        if mean >= self.params.causal_threshold {
            return Ok(ActionPlan {
                final_action: tentative.clone(),
                tentative,
                probes,
            });
        }

        let probe_text: String = probes
            .iter()
            .map(|p| format!("- {} (score {:.2}): {}", p.question, p.score, p.verdict))
            .collect::<Vec<_>>()
            .join("\n");
        let legal = self.legal_actions(state, items, clicked);
        b.insert("probes".to_string(), probe_text);
        b.insert("legal_actions".to_string(), legal.join(", "));
        let final_action = match self.gateway.complete("action_refine", &b) {
            Ok(resp) => match Self::parse_action(&resp, &legal, items, clicked) {
                Ok(action) => action,
                Err(why) => {
                    log::warn!("refined action invalid ({why}); keeping tentative");
                    tentative.clone()
                }
            },
            Err(e) => {
                log::warn!("action refinement failed ({e}); keeping tentative");
                tentative.clone()
            }
        };
        Ok(ActionPlan {
            tentative,
            probes,
            final_action,
        })
    }

    /// Extended-description sub-turn after a CLICK: the agent sees the full
    /// description and decides whether to engage (which rates the item).
    pub fn click_subturn(
        &self,
        state: &mut AgentState,
        item_id: &str,
        caption: Option<&str>,
    ) -> Result<Option<ItemVerdict>> {
        let item = self
            .dataset
            .item(item_id)
            .ok_or_else(|| Error::validation(format!("clicked unknown item {item_id}")))?;
        let description = item
            .description
            .clone()
            .unwrap_or_else(|| format!("{} ({})", item.title, {
                let genres: Vec<&str> = item.genres.iter().map(|g| g.as_str()).collect();
                genres.join(", ")
            }));
        let mut b = self.base_bindings(state);
        b.insert("item_id".to_string(), item_id.to_string());
        b.insert("item_title".to_string(), item.title.clone());
        b.insert("extended_description".to_string(), description);
        let resp = self.gateway.complete("click_engage", &b)?;
        if resp.parsed.text("ENGAGE") == Some("yes") {
            Ok(Some(self.evaluate_item(state, item_id, caption)?))
        } else {
            Ok(None)
        }
    }

    /// Post-interaction reflection over numbered session records; insights
    /// land in the episodic memory.
    pub fn reflect(&self, state: &mut AgentState, session_records: &[String]) -> Result<Vec<u64>> {
        if session_records.is_empty() {
            return Ok(Vec::new());
        }
        let numbered: String = session_records
            .iter()
            .enumerate()
            .map(|(i, r)| format!("[{i}] {r}"))
            .collect::<Vec<_>>()
            .join("\n");
        let mut b = self.base_bindings(state);
        b.insert("session_records".to_string(), numbered);
        let resp = self.gateway.complete("reflection", &b)?;
        let mut sequences = Vec::new();
        for insight in resp.parsed.list("INSIGHT") {
            sequences.push(state.episodic.record(&insight, MemoryKind::Reflection)?);
        }
        Ok(sequences)
    }

    /// Satisfaction interview on exit (or at the page cap).
    pub fn exit_interview(&self, state: &AgentState, history: &str) -> Result<(u8, String)> {
        let mut b = self.base_bindings(state);
        b.insert("history".to_string(), history.to_string());
        let resp = self.gateway.complete("exit_interview", &b)?;
        let rating = resp.parsed.int("RATING").ok_or_else(|| Error::LlmFormat {
            tag: "exit_interview".to_string(),
            detail: "missing RATING".to_string(),
        })? as u8;
        let reason = resp.parsed.text("REASON").unwrap_or_default().to_string();
        Ok((rating, reason))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{aggregated_ratings_table, InteractionDataset, Interaction, Item};
    use crate::gateway::{default_registry, HashEmbedder, ScriptRule, ScriptedProvider};
    use crate::memory::{build_graph, RelationSchema};
    use crate::persona::{BigFive, HabitTraits, Pickiness};
    use std::sync::Arc;

    fn dataset() -> InteractionDataset {
        let items: Vec<Item> = (1..=4)
            .map(|k| Item {
                item_id: format!("i{k}"),
                title: format!("Movie {k}"),
                genres: ["Action".to_string()].into_iter().collect(),
                description: Some(format!("Long description of movie {k}")),
                thumbnail_ref: None,
                review_count: None,
            })
            .collect();
        let interactions = vec![
            Interaction { user_id: "u1".into(), item_id: "i1".into(), rating: 5, timestamp: 1 },
            Interaction { user_id: "u1".into(), item_id: "i2".into(), rating: 2, timestamp: 2 },
        ];
        InteractionDataset::new(interactions, items).unwrap()
    }

    fn persona() -> Persona {
        Persona {
            age: 30,
            occupation: "engineer".to_string(),
            big_five: BigFive::new([2, 2, 2, 2, 2]).unwrap(),
            pickiness: Pickiness::ModeratelyPicky,
            taste_summary: "likes action".to_string(),
            habits: HabitTraits { engagement: 2, conformity: 0.0, variety: 1 },
        }
    }

    fn rule(tag: &str, responses: &[&str], repeat: bool) -> ScriptRule {
        ScriptRule {
            tag: tag.to_string(),
            r#match: Default::default(),
            responses: responses.iter().map(|s| s.to_string()).collect(),
            repeat,
        }
    }

    struct Fixture {
        gateway: Gateway,
        provider: Arc<ScriptedProvider>,
        graph: KnowledgeGraph,
        dataset: InteractionDataset,
        aggregated: BTreeMap<ItemId, f64>,
        params: BrainParams,
    }

    impl Fixture {
        fn new(rules: Vec<ScriptRule>) -> Self {
            let dataset = dataset();
            let graph = build_graph(dataset.interactions(), &dataset, RelationSchema::default())
                .unwrap();
            let aggregated = aggregated_ratings_table(dataset.interactions());
            let provider = Arc::new(ScriptedProvider::from_rules(rules));
            let gateway = Gateway::new(
                default_registry(5),
                provider.clone(),
                Arc::new(HashEmbedder::default()),
            );
            Self {
                gateway,
                provider,
                graph,
                dataset,
                aggregated,
                params: BrainParams::default(),
            }
        }

        fn brain(&self) -> Brain<'_> {
            Brain {
                gateway: &self.gateway,
                graph: &self.graph,
                dataset: &self.dataset,
                aggregated: &self.aggregated,
                params: &self.params,
            }
        }

        fn state(&self) -> AgentState {
            AgentState::new(
                "agent_1",
                "u1",
                persona(),
                EpisodicMemory::new(Arc::new(HashEmbedder::default())),
            )
        }
    }

    fn page_items() -> Vec<PageItem> {
        vec![
            PageItem { item_id: "i1".into(), title: "Movie 1".into(), caption: None, extra: None },
            PageItem { item_id: "i2".into(), title: "Movie 2".into(), caption: None, extra: None },
        ]
    }

    #[test]
    fn two_round_elicitation_flips_decision() {
        let fx = Fixture::new(vec![
            rule("followup_questions", &["QUESTION: none"], true),
            rule(
                "watch_decision",
                &[
                    "WATCH: i1\nSKIP: i2\nCONTRADICTION: yes\nREASON: persona dislikes horror",
                    "WATCH: none\nSKIP: i1, i2\nCONTRADICTION: no\nREASON: consistent",
                ],
                false,
            ),
        ]);
        let brain = fx.brain();
        let state = fx.state();
        let decision = brain.elicit_watch(&state, &page_items()).unwrap();
        assert_eq!(decision.rounds.len(), 2);
        assert!(decision.final_watch.is_empty());
        assert!(decision.rounds[0].contradiction);
        assert!(!decision.rounds[1].contradiction);
        // Budgets expanded once: 5 -> 7, 3 -> 5.
        assert_eq!(decision.k1_used, 7);
        assert_eq!(decision.k2_used, 5);
    }

    #[test]
    fn immediate_consistency_stops_after_one_round() {
        let fx = Fixture::new(vec![
            rule("followup_questions", &["QUESTION: none"], true),
            rule(
                "watch_decision",
                &["WATCH: i1\nSKIP: i2\nCONTRADICTION: no\nREASON: fine"],
                false,
            ),
        ]);
        let decision = fx.brain().elicit_watch(&fx.state(), &page_items()).unwrap();
        assert_eq!(decision.rounds.len(), 1);
        assert_eq!(decision.final_watch, vec!["i1".to_string()]);
        assert_eq!(decision.k1_used, 5);
        assert_eq!(decision.k2_used, 3);
    }

    #[test]
    fn k_expansion_is_monotone_across_rounds() {
        let fx = Fixture::new(vec![
            rule("followup_questions", &["QUESTION: none"], true),
            rule(
                "watch_decision",
                &[
                    "WATCH: i1\nCONTRADICTION: yes\nREASON: r0",
                    "WATCH: i1\nCONTRADICTION: yes\nREASON: r1",
                    "WATCH: i1\nCONTRADICTION: no\nREASON: done",
                ],
                false,
            ),
        ]);
        let decision = fx.brain().elicit_watch(&fx.state(), &page_items()).unwrap();
        assert_eq!(decision.rounds.len(), 3);
        let k1s: Vec<usize> = decision.rounds.iter().map(|r| r.k1).collect();
        assert_eq!(k1s, vec![5, 7, 9]);
        assert_eq!(decision.k1_used, 9);
    }

    #[test]
    fn evaluate_item_records_feeling_and_grows_overlay() {
        let fx = Fixture::new(vec![rule(
            "item_rating",
            &["RATING: 5\nFEELING: loved the pacing"],
            false,
        )]);
        let brain = fx.brain();
        let mut state = fx.state();
        let verdict = brain.evaluate_item(&mut state, "i3", None).unwrap();
        assert_eq!(verdict.rating, 5);
        assert_eq!(verdict.feeling, "loved the pacing");
        assert!(fx.graph.contains_triple(
            &Entity::user("u1"),
            "liked",
            &Entity::item("i1")
        ));
        // Overlay gained liked(u1, i3); the base graph did not.
        assert_eq!(state.overlay.triple_count(), 1);
        assert!(!fx.graph.contains_triple(&Entity::user("u1"), "liked", &Entity::item("i3")));
        assert_eq!(state.episodic.len(), 1);
        assert!(state.episodic.entries()[0].text.contains("rated it 5"));
    }

    #[test]
    fn low_rating_grows_disliked_edge() {
        let fx = Fixture::new(vec![rule("item_rating", &["RATING: 2\nFEELING: dull"], false)]);
        let mut state = fx.state();
        fx.brain().evaluate_item(&mut state, "i4", None).unwrap();
        assert_eq!(state.overlay.triple_count(), 1);
        // Growing again with the same rating is a no-op.
        fx.brain();
    }

    #[test]
    fn rating_prompt_contains_rendered_paths() {
        let fx = Fixture::new(vec![rule(
            "item_rating",
            &["RATING: 4\nFEELING: good"],
            false,
        )]);
        let mut state = fx.state();
        // i2 is connected to u1 (disliked edge) so user paths exist.
        let verdict = fx.brain().evaluate_item(&mut state, "i2", None).unwrap();
        assert!(!verdict.cited_paths.is_empty());
        let prompt = &fx.provider.call_log()[0].prompt;
        assert!(prompt.contains("\u{2192}"), "prompt missing path arrows: {prompt}");
        for path in &verdict.cited_paths {
            assert!(path.starts_with("u1 "), "path should start from the user: {path}");
        }
    }

    fn action_rules(action: &str) -> Vec<ScriptRule> {
        vec![
            rule("satisfaction_estimate", &["SATISFACTION: high"], true),
            rule("fatigue_estimate", &["FATIGUE: low"], true),
            rule("emotion_inference", &["EMOTION: EXCITED"], true),
            rule("action_choice", &[action], false),
        ]
    }

    #[test]
    fn action_selection_runs_four_steps() {
        let fx = Fixture::new(action_rules("ACTION: NEXT"));
        let mut state = fx.state();
        let action = fx
            .brain()
            .select_action(&mut state, &page_items(), &[], "no history")
            .unwrap();
        assert_eq!(action, Action::Next);
        assert_eq!(state.satisfaction, "high");
        assert_eq!(state.fatigue, Fatigue::Low);
        assert_eq!(state.emotion, "EXCITED");
        assert_eq!(
            fx.provider.tag_sequence(),
            vec![
                "satisfaction_estimate",
                "fatigue_estimate",
                "emotion_inference",
                "action_choice"
            ]
        );
    }

    #[test]
    fn previous_on_page_one_reprompts_then_errors() {
        let mut rules = action_rules("ACTION: PREVIOUS");
        rules[3] = rule("action_choice", &["ACTION: PREVIOUS", "ACTION: PREVIOUS"], false);
        let fx = Fixture::new(rules);
        let mut state = fx.state();
        let err = fx
            .brain()
            .select_action(&mut state, &page_items(), &[], "h")
            .unwrap_err();
        assert!(matches!(err, Error::LlmFormat { .. }));
        // Two action_choice calls: the original and one re-prompt.
        let actions = fx
            .provider
            .tag_sequence()
            .iter()
            .filter(|t| *t == "action_choice")
            .count();
        assert_eq!(actions, 2);
    }

    #[test]
    fn next_at_page_cap_is_illegal() {
        let mut rules = action_rules("ACTION: NEXT");
        rules[3] = rule("action_choice", &["ACTION: NEXT", "ACTION: EXIT"], false);
        let mut fx = Fixture::new(rules);
        fx.params.page_cap = 1;
        let mut state = fx.state();
        let action = fx
            .brain()
            .select_action(&mut state, &page_items(), &[], "h")
            .unwrap();
        // Re-prompt accepted the legal EXIT.
        assert_eq!(action, Action::Exit);
    }

    #[test]
    fn fatigue_never_decreases() {
        let mut rules = action_rules("ACTION: NEXT");
        rules[1] = rule("fatigue_estimate", &["FATIGUE: high", "FATIGUE: low"], false);
        rules[3] = rule("action_choice", &["ACTION: NEXT", "ACTION: NEXT"], false);
        let fx = Fixture::new(rules);
        let mut state = fx.state();
        fx.brain().select_action(&mut state, &page_items(), &[], "h").unwrap();
        assert_eq!(state.fatigue, Fatigue::High);
        fx.brain().select_action(&mut state, &page_items(), &[], "h").unwrap();
        assert_eq!(state.fatigue, Fatigue::High);
    }

    #[test]
    fn high_consistency_probes_keep_tentative() {
        let fx = Fixture::new(vec![
            rule("causal_questions", &["QUESTION: does this help?"], false),
            rule("causal_outcome", &["SCORE: 0.9\nVERDICT: supports"], false),
        ]);
        let state = fx.state();
        let plan = fx
            .brain()
            .refine_action(&state, Action::Next, &page_items(), &[], "h")
            .unwrap();
        assert_eq!(plan.final_action, Action::Next);
        assert_eq!(plan.probes.len(), 1);
    }

    #[test]
    fn low_consistency_requeries_the_action() {
        let fx = Fixture::new(vec![
            rule(
                "causal_questions",
                &["QUESTION: What would happen if you exited the system now?"],
                false,
            ),
            rule(
                "causal_outcome",
                &["SCORE: 0.1\nVERDICT: exiting now loses a promising page"],
                false,
            ),
            rule("action_refine", &["ACTION: NEXT"], false),
        ]);
        let state = fx.state();
        let plan = fx
            .brain()
            .refine_action(&state, Action::Exit, &page_items(), &[], "h")
            .unwrap();
        assert_eq!(plan.tentative, Action::Exit);
        assert_eq!(plan.final_action, Action::Next);
    }

    #[test]
    fn zero_questions_keep_tentative_with_empty_probes() {
        let fx = Fixture::new(vec![rule("causal_questions", &["QUESTION: none"], false)]);
        let plan = fx
            .brain()
            .refine_action(&fx.state(), Action::Exit, &page_items(), &[], "h")
            .unwrap();
        assert_eq!(plan.final_action, Action::Exit);
        assert!(plan.probes.is_empty());
    }

    #[test]
    fn refine_degrades_to_tentative_when_script_has_no_rules() {
        let fx = Fixture::new(vec![]);
        let plan = fx
            .brain()
            .refine_action(&fx.state(), Action::Next, &page_items(), &[], "h")
            .unwrap();
        assert_eq!(plan.final_action, Action::Next);
    }

    #[test]
    fn reflection_stores_insights_with_citations() {
        let fx = Fixture::new(vec![rule(
            "reflection",
            &["INSIGHT: I gravitate to action (records: 0, 2)"],
            false,
        )]);
        let mut state = fx.state();
        let records = vec!["r0".to_string(), "r1".to_string(), "r2".to_string()];
        let seqs = fx.brain().reflect(&mut state, &records).unwrap();
        assert_eq!(seqs.len(), 1);
        let entry = &state.episodic.entries()[0];
        assert_eq!(entry.kind, MemoryKind::Reflection);
        assert!(entry.text.contains("records: 0"));
    }

    #[test]
    fn empty_session_reflection_is_a_no_op() {
        let fx = Fixture::new(vec![]);
        let mut state = fx.state();
        let seqs = fx.brain().reflect(&mut state, &[]).unwrap();
        assert!(seqs.is_empty());
        assert_eq!(state.episodic.len(), 0);
    }

    #[test]
    fn two_insights_append_in_sequence() {
        let fx = Fixture::new(vec![rule(
            "reflection",
            &["INSIGHT: first\nINSIGHT: second"],
            false,
        )]);
        let mut state = fx.state();
        let seqs = fx.brain().reflect(&mut state, &["r".to_string()]).unwrap();
        assert_eq!(seqs, vec![0, 1]);
    }

    #[test]
    fn exit_interview_parses_score_and_reason() {
        let fx = Fixture::new(vec![rule(
            "exit_interview",
            &["Rating: 7\nReason: solid picks but too mainstream"],
            false,
        )]);
        let (score, reason) = fx.brain().exit_interview(&fx.state(), "h").unwrap();
        assert_eq!(score, 7);
        assert!(reason.contains("mainstream"));
    }

    #[test]
    fn out_of_range_interview_score_errors_after_retry() {
        let fx = Fixture::new(vec![rule(
            "exit_interview",
            &["Rating: 0\nReason: bad", "Rating: 0\nReason: still bad"],
            false,
        )]);
        let err = fx.brain().exit_interview(&fx.state(), "h").unwrap_err();
        assert!(matches!(err, Error::LlmFormat { .. }));
        assert_eq!(fx.provider.call_count(), 2);
    }

    #[test]
    fn click_subturn_rates_item_on_engage() {
        let fx = Fixture::new(vec![
            rule("click_engage", &["ENGAGE: yes"], false),
            rule("item_rating", &["RATING: 4\nFEELING: nice"], false),
        ]);
        let mut state = fx.state();
        let verdict = fx.brain().click_subturn(&mut state, "i3", None).unwrap();
        assert_eq!(verdict.unwrap().rating, 4);

        let fx2 = Fixture::new(vec![rule("click_engage", &["ENGAGE: no"], false)]);
        let mut state2 = fx2.state();
        let verdict2 = fx2.brain().click_subturn(&mut state2, "i3", None).unwrap();
        assert!(verdict2.is_none());
    }
}
