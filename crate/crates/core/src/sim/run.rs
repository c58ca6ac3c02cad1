//! Agent initialization, the per-agent session loop, and run orchestration.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::brain::{
    Action, ActionPlan, AgentState, Brain, BrainParams, DecisionRound, ItemVerdict, PageItem,
};
use crate::dataset::{
    aggregated_ratings_table, user_average_rating, DatasetSplit, InteractionDataset, Interaction,
    ItemId,
};
use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::memory::{build_graph, EpisodicMemory, KnowledgeGraph, MemoryKind, RelationSchema};
use crate::perception::CaptionStore;
use crate::persona::{
    assemble_persona, derive_habits, generate_candidates, match_persona, pickiness_level,
    summarize_tastes, BigFive, Persona, PersonaVocab,
};

use super::config::{PersonaConfig, PersonaMode, SessionConfig};
use super::metrics::{compute_engagement, AgentEngagement, EngagementMetrics, LIKE_THRESHOLD};
use super::recommender::Recommender;

/// Item-display augmentation for the review-influence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayMode {
    Origin,
    WithCount,
    WithNegative,
    WithPositive,
}

impl DisplayMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "origin" => Ok(DisplayMode::Origin),
            "with_count" => Ok(DisplayMode::WithCount),
            "with_negative" => Ok(DisplayMode::WithNegative),
            "with_positive" => Ok(DisplayMode::WithPositive),
            other => Err(Error::validation(format!("unknown display mode `{other}`"))),
        }
    }
}

/// Review comments per item for the with_negative/with_positive modes.
pub type ReviewTable = BTreeMap<ItemId, (String, String)>;

/// Load reviews from JSONL of `{item_id, positive, negative}`.
pub fn load_reviews(path: impl AsRef<Path>) -> Result<ReviewTable> {
    #[derive(Deserialize)]
    struct Row {
        item_id: String,
        positive: String,
        negative: String,
    }
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = ReviewTable::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno as u64 + 1,
            message: e.to_string(),
        })?;
        out.insert(row.item_id, (row.positive, row.negative));
    }
    Ok(out)
}

/// An initialized agent, ready to run sessions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSeed {
    pub agent_id: String,
    pub user_id: String,
    pub persona: Persona,
}

fn stable_hash(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0x1f]);
    }
    u64::from_le_bytes(hasher.finalize()[0..8].try_into().unwrap())
}

/// Deterministic persona from dataset statistics alone (no LLM calls): the
/// vocabulary slot is picked by a stable hash of the user id, the taste
/// summary lists top liked/disliked genres, and pickiness/habits follow the
/// usual formulas.
pub fn derived_persona(
    user_id: &str,
    history: &[&Interaction],
    dataset: &InteractionDataset,
    aggregated: &BTreeMap<ItemId, f64>,
    vocab: &PersonaVocab,
) -> Result<Persona> {
    let r_bar = user_average_rating(history)?;
    let habits = derive_habits(history, dataset, aggregated)?;

    let mut liked_genres: BTreeMap<&str, u32> = BTreeMap::new();
    let mut disliked_genres: BTreeMap<&str, u32> = BTreeMap::new();
    for it in history {
        if let Some(item) = dataset.item(&it.item_id) {
            for g in &item.genres {
                if it.rating >= 4 {
                    *liked_genres.entry(g.as_str()).or_insert(0) += 1;
                } else if it.rating <= 2 {
                    *disliked_genres.entry(g.as_str()).or_insert(0) += 1;
                }
            }
        }
    }
    let top = |m: &BTreeMap<&str, u32>| -> String {
        let mut pairs: Vec<(&str, u32)> = m.iter().map(|(k, v)| (*k, *v)).collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let names: Vec<&str> = pairs.iter().take(3).map(|(k, _)| *k).collect();
        if names.is_empty() {
            "nothing in particular".to_string()
        } else {
            names.join(", ")
        }
    };
    let taste_summary = format!(
        "Mostly watches {}; avoids {}.",
        top(&liked_genres),
        top(&disliked_genres)
    );

    let h = stable_hash(&[user_id]);
    let age = vocab.ages[(h % vocab.ages.len() as u64) as usize];
    let occupation = vocab.occupations[((h >> 8) % vocab.occupations.len() as u64) as usize].clone();
    let facet = |shift: u64| -> i64 { (((h >> shift) % 3) + 1) as i64 };
    let big_five = BigFive::new([
        facet(16),
        facet(20),
        facet(24),
        facet(28),
        facet(32),
    ])?;

    Ok(Persona {
        age,
        occupation,
        big_five,
        pickiness: pickiness_level(r_bar)?,
        taste_summary,
        habits,
    })
}

/// Full Phase 1 persona pipeline for one user.
#[allow(clippy::too_many_arguments)]
pub fn matched_persona(
    gateway: &Gateway,
    user_id: &str,
    history: &[&Interaction],
    others_pool: &[&Interaction],
    dataset: &InteractionDataset,
    aggregated: &BTreeMap<ItemId, f64>,
    vocab: &PersonaVocab,
    item_type: &str,
    config: &PersonaConfig,
    seed: u64,
) -> Result<Persona> {
    let user_seed = seed ^ stable_hash(&[user_id]);
    let summary = summarize_tastes(
        gateway,
        history,
        dataset,
        item_type,
        config.summary_sample,
        user_seed,
    )?;
    let candidates = generate_candidates(
        gateway,
        &summary,
        history,
        dataset,
        item_type,
        config.m,
        vocab,
    )?;
    let (best, _scores) = match_persona(
        gateway,
        &candidates,
        history,
        others_pool,
        dataset,
        item_type,
        config.j,
        config.rho.min(history.len()).max(1),
        user_seed,
    )?;
    assemble_persona(&candidates[best], &summary, history, dataset, aggregated)
}

/// Initialize agents for the selected users from the train split.
pub fn init_agents(
    gateway: &Gateway,
    dataset: &InteractionDataset,
    split: &DatasetSplit,
    persona_config: &PersonaConfig,
    users: &[String],
    seed: u64,
) -> Result<Vec<AgentSeed>> {
    let aggregated = aggregated_ratings_table(&split.train);
    let vocab = PersonaVocab::default();
    let mut seeds = Vec::with_capacity(users.len());
    for (idx, user_id) in users.iter().enumerate() {
        let history: Vec<&Interaction> = split
            .train
            .iter()
            .filter(|i| &i.user_id == user_id)
            .collect();
        if history.is_empty() {
            log::warn!("user {user_id} has no train history; skipping agent");
            continue;
        }
        let persona = match persona_config.mode {
            PersonaMode::Derived => {
                derived_persona(user_id, &history, dataset, &aggregated, &vocab)?
            }
            PersonaMode::Matched => {
                let others: Vec<&Interaction> = split
                    .train
                    .iter()
                    .filter(|i| &i.user_id != user_id)
                    .collect();
                matched_persona(
                    gateway,
                    user_id,
                    &history,
                    &others,
                    dataset,
                    &aggregated,
                    &vocab,
                    "movie",
                    persona_config,
                    seed,
                )?
            }
        };
        seeds.push(AgentSeed {
            agent_id: format!("agent_{idx}"),
            user_id: user_id.clone(),
            persona,
        });
    }
    Ok(seeds)
}

/// Pick the first `n` users of the train split, sorted by id.
pub fn select_users(split: &DatasetSplit, n: usize) -> Vec<String> {
    let set: BTreeSet<&str> = split.train.iter().map(|i| i.user_id.as_str()).collect();
    set.into_iter().take(n).map(|s| s.to_string()).collect()
}

/// One page of an agent trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PageTrace {
    pub page: u32,
    pub shown: Vec<ItemId>,
    pub rounds: Vec<DecisionRound>,
    pub watched: Vec<ItemId>,
    pub verdicts: Vec<ItemVerdict>,
    pub clicked: Vec<ItemId>,
    pub click_verdicts: Vec<ItemVerdict>,
    pub satisfaction: String,
    pub fatigue: String,
    pub emotion: String,
    pub plan: ActionPlan,
    pub reflections: Vec<String>,
    pub k1_used: usize,
    pub k2_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Interview {
    pub agent_id: String,
    pub score: u8,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentTrace {
    pub agent_id: String,
    pub user_id: String,
    pub pages: Vec<PageTrace>,
    pub exit_page: u32,
    pub exit_reason: String,
    pub interview: Interview,
}

impl AgentTrace {
    /// Engagement tallies; only the final watch set counts as viewed, and a
    /// liked item is a watched verdict scoring above [`LIKE_THRESHOLD`].
    pub fn engagement(&self) -> AgentEngagement {
        let shown: u64 = self.pages.iter().map(|p| p.shown.len() as u64).sum();
        let watched: u64 = self.pages.iter().map(|p| p.watched.len() as u64).sum();
        let liked: u64 = self
            .pages
            .iter()
            .flat_map(|p| p.verdicts.iter())
            .filter(|v| v.rating > LIKE_THRESHOLD)
            .count() as u64;
        AgentEngagement {
            shown,
            watched,
            liked,
            exit_page: self.exit_page,
            satisfaction: self.interview.score,
        }
    }

    /// Simulated liked/disliked item labels from the session verdicts.
    pub fn liked_items(&self) -> BTreeSet<ItemId> {
        self.pages
            .iter()
            .flat_map(|p| p.verdicts.iter().chain(p.click_verdicts.iter()))
            .filter(|v| v.rating >= 4)
            .map(|v| v.item_id.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentFailure {
    pub agent_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub traces: Vec<AgentTrace>,
    pub interviews: Vec<Interview>,
    pub metrics: Option<EngagementMetrics>,
    pub failures: Vec<AgentFailure>,
}

/// Everything a session needs besides the agent itself.
pub struct SessionEnv<'a> {
    pub gateway: &'a Gateway,
    pub graph: &'a KnowledgeGraph,
    pub dataset: &'a InteractionDataset,
    pub split: &'a DatasetSplit,
    pub aggregated: &'a BTreeMap<ItemId, f64>,
    pub recommender: &'a dyn Recommender,
    pub captions: Option<&'a CaptionStore>,
    pub session: &'a SessionConfig,
    pub display: DisplayMode,
    pub reviews: Option<&'a ReviewTable>,
}

impl<'a> SessionEnv<'a> {
    fn page_item(&self, item_id: &ItemId) -> Result<PageItem> {
        let item = self
            .dataset
            .item(item_id)
            .ok_or_else(|| Error::validation(format!("recommended unknown item {item_id}")))?;
        let caption = self
            .captions
            .and_then(|store| store.get(item_id))
            .map(|c| c.final_text);
        let extra = match self.display {
            DisplayMode::Origin => None,
            DisplayMode::WithCount => {
                let count = item.review_count.ok_or_else(|| {
                    Error::validation(format!("item {item_id} has no review_count"))
                })?;
                Some(format!("{count} reviews"))
            }
            DisplayMode::WithNegative | DisplayMode::WithPositive => {
                let table = self.reviews.ok_or_else(|| {
                    Error::validation("display mode requires a reviews table".to_string())
                })?;
                let (positive, negative) = table.get(item_id).ok_or_else(|| {
                    Error::validation(format!("no reviews for item {item_id}"))
                })?;
                Some(if self.display == DisplayMode::WithNegative {
                    format!("one review: \"{negative}\"")
                } else {
                    format!("one review: \"{positive}\"")
                })
            }
        };
        Ok(PageItem {
            item_id: item_id.clone(),
            title: item.title.clone(),
            caption,
            extra,
        })
    }
}

/// Run one full browsing session for an agent.
///
/// Follows the five-step turn order: perceive, retrieve + decide, rate,
/// select action (with causal refinement), reflect, then update memory;
/// EXIT breaks the loop and every session ends with one interview.
pub fn run_agent_session(env: &SessionEnv<'_>, seed: &AgentSeed) -> Result<AgentTrace> {
    let params: BrainParams = env.session.brain_params();
    let brain = Brain {
        gateway: env.gateway,
        graph: env.graph,
        dataset: env.dataset,
        aggregated: env.aggregated,
        params: &params,
    };

    let mut state = AgentState::new(
        seed.agent_id.clone(),
        seed.user_id.clone(),
        seed.persona.clone(),
        EpisodicMemory::new(env.gateway.embedder()),
    );
    let history: Vec<&Interaction> = env
        .split
        .train
        .iter()
        .filter(|i| i.user_id == seed.user_id)
        .collect();
    state.episodic.seed_from_history(&history, env.dataset)?;

    // The recommender never re-shows rated history or previously shown items.
    let mut exclude: BTreeSet<ItemId> = history.iter().map(|i| i.item_id.clone()).collect();
    let mut pages: Vec<PageTrace> = Vec::new();
    let mut history_lines: Vec<String> = Vec::new();
    let mut session_records: Vec<String> = Vec::new();
    let exit_reason;
    let exit_page;

    // CLICK and PREVIOUS do not advance the page, so a turn guard keeps
    // adversarial scripts from looping forever.
    let max_turns = env.session.page_cap as usize * 4;
    let mut turns = 0;

    loop {
        turns += 1;
        if turns > max_turns {
            exit_reason = "turn_cap".to_string();
            exit_page = state.page;
            break;
        }

        // 1. Perceive the page.
        let item_ids = env.recommender.recommend(
            &seed.user_id,
            state.page,
            &exclude,
            env.session.items_per_page,
        );
        if item_ids.is_empty() {
            log::debug!("agent {}: catalog exhausted on page {}", seed.agent_id, state.page);
            exit_reason = "catalog_exhausted".to_string();
            exit_page = state.page;
            break;
        }
        if item_ids.len() < env.session.items_per_page {
            log::debug!(
                "agent {}: short page {} ({} items)",
                seed.agent_id,
                state.page,
                item_ids.len()
            );
        }
        let items: Vec<PageItem> = item_ids
            .iter()
            .map(|id| env.page_item(id))
            .collect::<Result<_>>()?;
        exclude.extend(item_ids.iter().cloned());

        // 2+3. Retrieve evidence and decide what to watch.
        let decision = brain.elicit_watch(&state, &items)?;

        // 4. Rate watched items and express feelings.
        let verdicts = brain.evaluate_items(&mut state, &items, &decision.final_watch)?;

        // 5. Emotion-driven action selection plus causal refinement. CLICKs
        // resolve within the step (extended-description sub-turn, possibly a
        // rating), then the agent picks again until it navigates; each page
        // item is clickable once, so this terminates.
        let history_text = if history_lines.is_empty() {
            "(first page)".to_string()
        } else {
            history_lines.join("\n")
        };
        let mut clicked: Vec<ItemId> = Vec::new();
        let mut click_verdicts = Vec::new();
        let (plan, nav_action) = loop {
            let tentative =
                brain.select_action(&mut state, &items, &clicked, &history_text)?;
            let plan =
                brain.refine_action(&state, tentative, &items, &clicked, &history_text)?;
            match plan.final_action.clone() {
                Action::Click(item_id) => {
                    let caption = items
                        .iter()
                        .find(|i| i.item_id == item_id)
                        .and_then(|i| i.caption.clone());
                    if let Some(verdict) =
                        brain.click_subturn(&mut state, &item_id, caption.as_deref())?
                    {
                        session_records.push(format!(
                            "I clicked {} and rated it {}. {}",
                            env.dataset.title_of(&verdict.item_id),
                            verdict.rating,
                            verdict.feeling
                        ));
                        click_verdicts.push(verdict);
                    }
                    clicked.push(item_id);
                }
                nav => break (plan, nav),
            }
        };

        // Record the page into the running session log.
        let titles: Vec<String> = items.iter().map(|i| i.title.clone()).collect();
        let watched_titles: Vec<String> = decision
            .final_watch
            .iter()
            .map(|id| env.dataset.title_of(id).to_string())
            .collect();
        let ratings: Vec<u8> = verdicts.iter().map(|v| v.rating).collect();
        let disliked_titles: Vec<String> = items
            .iter()
            .filter(|i| !decision.final_watch.contains(&i.item_id))
            .map(|i| i.title.clone())
            .collect();
        let page_record = crate::memory::episodic::page_interaction_text(
            &env.session.item_type,
            state.page,
            &titles,
            &watched_titles,
            &ratings,
            &disliked_titles,
        );
        session_records.push(page_record.clone());
        for v in &verdicts {
            session_records.push(format!(
                "I watched {} and rated it {}. {}",
                env.dataset.title_of(&v.item_id),
                v.rating,
                v.feeling
            ));
        }
        history_lines.push(format!(
            "Page {}: shown {}; watched {}; ratings {:?}; action {}",
            state.page,
            titles.join(", "),
            if watched_titles.is_empty() { "nothing".to_string() } else { watched_titles.join(", ") },
            ratings,
            nav_action,
        ));

        // 6. Post-interaction reflection.
        let reflections = if env.session.reflect_every_page {
            let texts = brain.reflect(&mut state, &session_records)?;
            texts
                .iter()
                .map(|&seq| state.episodic.entries()[seq as usize].text.clone())
                .collect()
        } else {
            Vec::new()
        };

        // 7. Memory update: the page-interaction record.
        state
            .episodic
            .record(&page_record, MemoryKind::PageInteraction)?;

        let page_now = state.page;
        pages.push(PageTrace {
            page: page_now,
            shown: item_ids.clone(),
            rounds: decision.rounds.clone(),
            watched: decision.final_watch.clone(),
            verdicts,
            clicked,
            click_verdicts,
            satisfaction: state.satisfaction.clone(),
            fatigue: state.fatigue.label().to_string(),
            emotion: state.emotion.clone(),
            plan,
            reflections,
            k1_used: decision.k1_used,
            k2_used: decision.k2_used,
        });

        match nav_action {
            Action::Exit => {
                exit_reason = "exit".to_string();
                exit_page = page_now;
                break;
            }
            Action::Next => {
                state.page += 1;
            }
            Action::Previous => {
                state.page -= 1;
            }
            Action::Click(_) => unreachable!("clicks resolve within the page"),
        }
    }

    if !env.session.reflect_every_page && !session_records.is_empty() {
        brain.reflect(&mut state, &session_records)?;
    }

    let history_text = if history_lines.is_empty() {
        "(no pages browsed)".to_string()
    } else {
        history_lines.join("\n")
    };
    let (score, reason) = brain.exit_interview(&state, &history_text)?;
    state.exit_reason = Some(exit_reason.clone());

    Ok(AgentTrace {
        agent_id: seed.agent_id.clone(),
        user_id: seed.user_id.clone(),
        pages,
        exit_page,
        exit_reason,
        interview: Interview {
            agent_id: seed.agent_id.clone(),
            score,
            reason,
        },
    })
}

/// Run every agent on a bounded worker pool and assemble the report.
///
/// Results are sorted by agent id before reduction, so aggregates do not
/// depend on completion order; failed agents are excluded from metrics and
/// reported in the failure list.
pub fn run_simulation(env: &SessionEnv<'_>, agents: &[AgentSeed]) -> Result<SimulationReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(env.session.worker_cap)
        .build()
        .map_err(|e| Error::validation(format!("worker pool: {e}")))?;

    let outcomes: Vec<(String, Result<AgentTrace>)> = pool.install(|| {
        use rayon::prelude::*;
        agents
            .par_iter()
            .map(|seed| (seed.agent_id.clone(), run_agent_session(env, seed)))
            .collect()
    });

    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (agent_id, outcome) in outcomes {
        match outcome {
            Ok(trace) => traces.push(trace),
            Err(e) => failures.push(AgentFailure {
                agent_id,
                error: e.to_string(),
            }),
        }
    }
    traces.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));
    failures.sort_by(|a, b| a.agent_id.cmp(&b.agent_id));

    let interviews: Vec<Interview> = traces.iter().map(|t| t.interview.clone()).collect();
    let per_agent: Vec<AgentEngagement> = traces.iter().map(|t| t.engagement()).collect();
    let metrics = if per_agent.is_empty() {
        None
    } else {
        Some(compute_engagement(&per_agent)?)
    };
    Ok(SimulationReport {
        traces,
        interviews,
        metrics,
        failures,
    })
}

/// Build the base graph plus aggregate table for a split.
pub fn build_environment(
    dataset: &InteractionDataset,
    split: &DatasetSplit,
) -> Result<(KnowledgeGraph, BTreeMap<ItemId, f64>)> {
    let graph = build_graph(&split.train, dataset, RelationSchema::default())?;
    let aggregated = aggregated_ratings_table(&split.train);
    Ok((graph, aggregated))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for row in rows {
        let line = serde_json::to_string(row)
            .map_err(|e| Error::validation(format!("serialize row: {e}")))?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Persist a run: config snapshot, traces.jsonl, interviews.jsonl,
/// metrics.json.
pub fn write_run_dir(
    dir: impl AsRef<Path>,
    config_snapshot: &serde_json::Value,
    report: &SimulationReport,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("config.json");
    std::fs::write(
        &config_path,
        serde_json::to_string_pretty(config_snapshot)
            .map_err(|e| Error::validation(format!("serialize config: {e}")))?,
    )
    .map_err(|e| Error::io(&config_path, e))?;
    write_jsonl(&dir.join("traces.jsonl"), &report.traces)?;
    write_jsonl(&dir.join("interviews.jsonl"), &report.interviews)?;

    let metrics_path = dir.join("metrics.json");
    let body = serde_json::json!({
        "metrics": report.metrics,
        "failures": report.failures.len(),
        "completed_agents": report.traces.len(),
    });
    std::fs::write(
        &metrics_path,
        serde_json::to_string_pretty(&body)
            .map_err(|e| Error::validation(format!("serialize metrics: {e}")))?,
    )
    .map_err(|e| Error::io(&metrics_path, e))?;
    Ok(())
}

/// Read traces back from a run directory.
pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<AgentTrace>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let trace: AgentTrace = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(trace);
    }
    Ok(out)
}

/// Scan for leakage: validation/test (user, item) pairs must not appear in
/// the base graph or in the agents' seeded episodic memories. Returns the
/// violations found (empty means clean).
pub fn leakage_violations(
    dataset: &InteractionDataset,
    split: &DatasetSplit,
    graph: &KnowledgeGraph,
) -> Vec<String> {
    use crate::memory::Entity;
    let mut violations = Vec::new();
    let held_out: Vec<&Interaction> = split.validation.iter().chain(split.test.iter()).collect();
    let train_pairs: BTreeSet<(&str, &str)> = split
        .train
        .iter()
        .map(|i| (i.user_id.as_str(), i.item_id.as_str()))
        .collect();
    for it in held_out {
        // A pair can legitimately appear in train at an earlier timestamp.
        if train_pairs.contains(&(it.user_id.as_str(), it.item_id.as_str())) {
            continue;
        }
        let user = Entity::user(it.user_id.clone());
        let item = Entity::item(it.item_id.clone());
        for rel in ["rated", "liked", "disliked"] {
            if graph.contains_triple(&user, rel, &item) {
                violations.push(format!(
                    "graph edge {rel}({}, {}) comes from a held-out interaction",
                    it.user_id, it.item_id
                ));
            }
        }
        // Seeded episodic memories quote item titles; reconstruct the three
        // possible seed texts for this held-out rating and flag any match.
        let title = dataset.title_of(&it.item_id);
        let seed_text = crate::memory::episodic::seed_entry_text(title, it.rating);
        let history: Vec<&Interaction> = split
            .train
            .iter()
            .filter(|t| t.user_id == it.user_id)
            .collect();
        for train_it in history {
            let train_text =
                crate::memory::episodic::seed_entry_text(dataset.title_of(&train_it.item_id), train_it.rating);
            if train_text == seed_text && train_it.item_id == it.item_id {
                violations.push(format!(
                    "seeded memory `{seed_text}` duplicates held-out pair ({}, {})",
                    it.user_id, it.item_id
                ));
            }
        }
    }
    violations
}
