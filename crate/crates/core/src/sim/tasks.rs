//! The evaluation task suite: believability classification, rating
//! prediction, preference coherence, exposure effect, review influence, and
//! offline-vs-simulated ranking metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::brain::{AgentState, Brain};
use crate::dataset::{DatasetSplit, InteractionDataset, Interaction, ItemId};
use crate::error::{Error, Result};
use crate::gateway::{Bindings, Gateway};
use crate::memory::{EpisodicMemory, KnowledgeGraph, MemoryKind};

use super::config::{
    BelievabilityConfig, ExposureConfig, MfConfig, OfflineCompareConfig, SessionConfig,
};
use super::metrics::{f1_at_k, mae, ndcg_at_k, rmse, ClassificationStats};
use super::recommender::{build_recommender, RandomRecommender, Recommender};
use super::run::{run_simulation, AgentSeed, DisplayMode, ReviewTable, SessionEnv, SimulationReport};

/// Generic task output: per-unit records plus recomputable aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: String,
    pub records: Vec<serde_json::Value>,
    pub aggregates: BTreeMap<String, f64>,
}

fn seed_for(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0x1f]);
    }
    u64::from_le_bytes(hasher.finalize()[0..8].try_into().unwrap())
}

fn genres_text(dataset: &InteractionDataset, item_id: &str) -> String {
    dataset
        .item(item_id)
        .map(|i| {
            let g: Vec<&str> = i.genres.iter().map(|s| s.as_str()).collect();
            g.join(", ")
        })
        .unwrap_or_default()
}

/// Binary classification of interacted vs non-interacted items at ratio 1:m.
///
/// Positives come from the user's held-out (validation + test) interactions;
/// distractors are items the user never touched, sampled uniformly or
/// popularity-matched. Agents with too few held-out items are skipped.
#[allow(clippy::too_many_arguments)]
pub fn task_believability(
    gateway: &Gateway,
    dataset: &InteractionDataset,
    split: &DatasetSplit,
    agents: &[AgentSeed],
    config: &BelievabilityConfig,
    item_type: &str,
    seed: u64,
) -> Result<TaskResult> {
    if config.m == 0 {
        return Err(Error::validation("believability ratio m must be positive"));
    }
    let pos_needed = config.items_per_agent / (1 + config.m);
    if pos_needed == 0 {
        return Err(Error::validation(
            "items_per_agent too small for the 1:m ratio",
        ));
    }
    let neg_needed = pos_needed * config.m;

    let mut popularity: BTreeMap<&str, u64> = BTreeMap::new();
    for it in &split.train {
        *popularity.entry(it.item_id.as_str()).or_insert(0) += 1;
    }

    let mut global = ClassificationStats::default();
    let mut records = Vec::new();
    let mut skipped = 0u64;
    for agent in agents {
        let interacted: BTreeSet<&str> = dataset
            .interactions()
            .iter()
            .filter(|i| i.user_id == agent.user_id)
            .map(|i| i.item_id.as_str())
            .collect();
        let mut held_out: Vec<&str> = split
            .validation
            .iter()
            .chain(split.test.iter())
            .filter(|i| i.user_id == agent.user_id)
            .map(|i| i.item_id.as_str())
            .collect();
        held_out.sort();
        held_out.dedup();
        if held_out.len() < pos_needed {
            log::debug!(
                "agent {} has {} held-out items (< {pos_needed}); skipped",
                agent.agent_id,
                held_out.len()
            );
            skipped += 1;
            continue;
        }
        let positives: Vec<&str> = held_out.into_iter().take(pos_needed).collect();

        let pool: Vec<&str> = dataset
            .items()
            .map(|i| i.item_id.as_str())
            .filter(|id| !interacted.contains(id))
            .collect();
        if pool.len() < neg_needed {
            log::debug!("agent {}: not enough distractors; skipped", agent.agent_id);
            skipped += 1;
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, &["believability", &agent.user_id]));
        let negatives: Vec<&str> = if config.popularity_matched {
            // Weighted sample without replacement by train popularity.
            let mut remaining: Vec<(&str, f64)> = pool
                .iter()
                .map(|id| (*id, (popularity.get(id).copied().unwrap_or(0) + 1) as f64))
                .collect();
            let mut picked = Vec::with_capacity(neg_needed);
            use rand::Rng;
            for _ in 0..neg_needed {
                let total: f64 = remaining.iter().map(|(_, w)| w).sum();
                let mut roll = rng.random::<f64>() * total;
                let mut chosen = remaining.len() - 1;
                for (idx, (_, w)) in remaining.iter().enumerate() {
                    roll -= w;
                    if roll <= 0.0 {
                        chosen = idx;
                        break;
                    }
                }
                picked.push(remaining.remove(chosen).0);
            }
            picked
        } else {
            index_sample(&mut rng, pool.len(), neg_needed)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        };

        let mut agent_stats = ClassificationStats::default();
        let mut probe = |item_id: &str, truth: bool| -> Result<()> {
            let mut b = Bindings::new();
            b.insert("agent_id".to_string(), agent.agent_id.clone());
            b.insert("item_id".to_string(), item_id.to_string());
            b.insert("item_title".to_string(), dataset.title_of(item_id).to_string());
            b.insert("item_genres".to_string(), genres_text(dataset, item_id));
            b.insert("item_type".to_string(), item_type.to_string());
            b.insert("persona".to_string(), agent.persona.prompt_block(item_type));
            let resp = gateway.complete("believability_classify", &b)?;
            let predicted = resp.parsed.text("ANSWER") == Some("yes");
            agent_stats.observe(truth, predicted);
            Ok(())
        };
        for item_id in &positives {
            probe(item_id, true)?;
        }
        for item_id in &negatives {
            probe(item_id, false)?;
        }
        global.merge(&agent_stats);
        records.push(json!({
            "agent_id": agent.agent_id,
            "tp": agent_stats.tp,
            "fp": agent_stats.fp,
            "tn": agent_stats.tn,
            "fn": agent_stats.fn_,
        }));
    }

    if global.total() == 0 {
        return Err(Error::EmptyReport(
            "no agents had enough held-out items".to_string(),
        ));
    }
    let mut aggregates = BTreeMap::new();
    aggregates.insert("accuracy".to_string(), global.accuracy());
    aggregates.insert("precision".to_string(), global.precision());
    aggregates.insert("recall".to_string(), global.recall());
    aggregates.insert("f1".to_string(), global.f1());
    aggregates.insert("skipped_agents".to_string(), skipped as f64);
    Ok(TaskResult {
        task: format!("believability_1_to_{}", config.m),
        records,
        aggregates,
    })
}

/// Predict ratings for held-out test interactions through the evaluate path
/// (persona + path-grounded KG evidence), reporting RMSE and MAE.
#[allow(clippy::too_many_arguments)]
pub fn task_rating(
    gateway: &Gateway,
    graph: &KnowledgeGraph,
    dataset: &InteractionDataset,
    split: &DatasetSplit,
    aggregated: &BTreeMap<ItemId, f64>,
    agents: &[AgentSeed],
    session: &SessionConfig,
    limit_per_agent: Option<usize>,
) -> Result<TaskResult> {
    let params = session.brain_params();
    let brain = Brain {
        gateway,
        graph,
        dataset,
        aggregated,
        params: &params,
    };
    let mut pairs = Vec::new();
    let mut records = Vec::new();
    for agent in agents {
        let history: Vec<&Interaction> = split
            .train
            .iter()
            .filter(|i| i.user_id == agent.user_id)
            .collect();
        let mut state = AgentState::new(
            agent.agent_id.clone(),
            agent.user_id.clone(),
            agent.persona.clone(),
            EpisodicMemory::new(gateway.embedder()),
        );
        state.episodic.seed_from_history(&history, dataset)?;

        let mut test: Vec<&Interaction> = split
            .test
            .iter()
            .filter(|i| i.user_id == agent.user_id)
            .collect();
        test.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        if let Some(limit) = limit_per_agent {
            test.truncate(limit);
        }
        for it in test {
            let verdict = brain.rate_item(&state, &it.item_id, None)?;
            pairs.push((verdict.rating as f64, it.rating as f64));
            records.push(json!({
                "agent_id": agent.agent_id,
                "item_id": it.item_id,
                "predicted": verdict.rating,
                "truth": it.rating,
            }));
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyReport(
            "no test interactions for the selected agents".to_string(),
        ));
    }
    let mut aggregates = BTreeMap::new();
    aggregates.insert("rmse".to_string(), rmse(&pairs)?);
    aggregates.insert("mae".to_string(), mae(&pairs)?);
    aggregates.insert("predictions".to_string(), pairs.len() as f64);
    Ok(TaskResult {
        task: "rating".to_string(),
        records,
        aggregates,
    })
}

/// A positive/negative recommendation pair for one query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherencePair {
    pub query: String,
    pub positive: String,
    pub negative: String,
}

/// Load coherence pairs from JSONL; incomplete rows are rejected.
pub fn load_coherence_pairs(path: impl AsRef<Path>) -> Result<Vec<CoherencePair>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: CoherencePair = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno as u64 + 1,
            message: e.to_string(),
        })?;
        if pair.query.trim().is_empty()
            || pair.positive.trim().is_empty()
            || pair.negative.trim().is_empty()
        {
            return Err(Error::validation(format!(
                "coherence pair at line {} is unpaired",
                lineno + 1
            )));
        }
        out.push(pair);
    }
    Ok(out)
}

/// Accept/reject task over paired positive and negative recommendations.
/// Incoherent behavior = accepting a negative or rejecting a positive.
pub fn task_coherence(
    gateway: &Gateway,
    agents: &[AgentSeed],
    pairs: &[CoherencePair],
    item_type: &str,
) -> Result<TaskResult> {
    if agents.is_empty() {
        return Err(Error::validation("coherence task needs at least one agent"));
    }
    if pairs.is_empty() {
        return Err(Error::validation("coherence task needs at least one pair"));
    }
    let mut incoherent = 0u64;
    let mut total = 0u64;
    let mut records = Vec::new();
    for (idx, pair) in pairs.iter().enumerate() {
        let agent = &agents[idx % agents.len()];
        let judge = |candidate: &str, kind: &str| -> Result<bool> {
            let mut b = Bindings::new();
            b.insert("agent_id".to_string(), agent.agent_id.clone());
            b.insert("persona".to_string(), agent.persona.prompt_block(item_type));
            b.insert("query".to_string(), pair.query.clone());
            b.insert("candidate".to_string(), candidate.to_string());
            b.insert("candidate_kind".to_string(), kind.to_string());
            let resp = gateway.complete("coherence_decide", &b)?;
            Ok(resp.parsed.text("WATCH") == Some("yes"))
        };
        let accepted_positive = judge(&pair.positive, "positive")?;
        let accepted_negative = judge(&pair.negative, "negative")?;
        total += 2;
        let mut pair_incoherent = 0;
        if !accepted_positive {
            pair_incoherent += 1;
        }
        if accepted_negative {
            pair_incoherent += 1;
        }
        incoherent += pair_incoherent;
        records.push(json!({
            "agent_id": agent.agent_id,
            "query": pair.query,
            "accepted_positive": accepted_positive,
            "accepted_negative": accepted_negative,
        }));
    }
    let mut aggregates = BTreeMap::new();
    aggregates.insert(
        "incoherent_fraction".to_string(),
        incoherent as f64 / total as f64,
    );
    aggregates.insert(
        "coherent_fraction".to_string(),
        (total - incoherent) as f64 / total as f64,
    );
    aggregates.insert("judgments".to_string(), total as f64);
    Ok(TaskResult {
        task: "coherence".to_string(),
        records,
        aggregates,
    })
}

/// Exposure-effect study: a recommender restricted to two genres, with
/// rating probes of sampled items at page checkpoints.
///
/// Pages advance linearly (no action selection) so checkpoints land at fixed
/// page counts; watching and rating still run, which is what fills memory
/// with the over-represented genres.
#[allow(clippy::too_many_arguments)]
pub fn task_exposure(
    gateway: &Gateway,
    graph: &KnowledgeGraph,
    dataset: &InteractionDataset,
    split: &DatasetSplit,
    aggregated: &BTreeMap<ItemId, f64>,
    agents: &[AgentSeed],
    config: &ExposureConfig,
    session: &SessionConfig,
) -> Result<TaskResult> {
    if config.genres.len() != 2 {
        return Err(Error::validation(
            "exposure task expects exactly two genres",
        ));
    }
    let max_checkpoint = config.checkpoints.iter().copied().max().unwrap_or(0);
    if config.page_cap < max_checkpoint {
        return Err(Error::validation(format!(
            "page_cap {} below the last checkpoint {max_checkpoint}",
            config.page_cap
        )));
    }
    let mut genre_items: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for genre in &config.genres {
        let items: Vec<&str> = dataset
            .items()
            .filter(|i| i.genres.contains(genre))
            .map(|i| i.item_id.as_str())
            .collect();
        if items.is_empty() {
            return Err(Error::validation(format!(
                "no items carry genre `{genre}`"
            )));
        }
        genre_items.insert(genre.as_str(), items);
    }
    let biased_pool: Vec<ItemId> = dataset
        .items()
        .filter(|i| config.genres.iter().any(|g| i.genres.contains(g)))
        .map(|i| i.item_id.clone())
        .collect();
    let recommender = RandomRecommender::with_items(biased_pool, session.seed);

    let params = session.brain_params();
    let brain = Brain {
        gateway,
        graph,
        dataset,
        aggregated,
        params: &params,
    };

    // genre -> checkpoint -> per-agent means
    let mut curves: BTreeMap<(String, u32), Vec<f64>> = BTreeMap::new();
    let mut records = Vec::new();
    for agent in agents {
        let history: Vec<&Interaction> = split
            .train
            .iter()
            .filter(|i| i.user_id == agent.user_id)
            .collect();
        let mut state = AgentState::new(
            agent.agent_id.clone(),
            agent.user_id.clone(),
            agent.persona.clone(),
            EpisodicMemory::new(gateway.embedder()),
        );
        state.episodic.seed_from_history(&history, dataset)?;
        let mut exclude: BTreeSet<ItemId> = history.iter().map(|i| i.item_id.clone()).collect();

        for page in 1..=config.page_cap {
            state.page = page;
            let shown = recommender.recommend(
                &agent.user_id,
                page,
                &exclude,
                session.items_per_page,
            );
            if shown.is_empty() {
                break;
            }
            exclude.extend(shown.iter().cloned());
            let items: Vec<crate::brain::PageItem> = shown
                .iter()
                .map(|id| crate::brain::PageItem {
                    item_id: id.clone(),
                    title: dataset.title_of(id).to_string(),
                    caption: None,
                    extra: None,
                })
                .collect();
            let decision = brain.elicit_watch(&state, &items)?;
            let verdicts = brain.evaluate_items(&mut state, &items, &decision.final_watch)?;
            let titles: Vec<String> = items.iter().map(|i| i.title.clone()).collect();
            let watched: Vec<String> = decision
                .final_watch
                .iter()
                .map(|id| dataset.title_of(id).to_string())
                .collect();
            let ratings: Vec<u8> = verdicts.iter().map(|v| v.rating).collect();
            let rest: Vec<String> = items
                .iter()
                .filter(|i| !decision.final_watch.contains(&i.item_id))
                .map(|i| i.title.clone())
                .collect();
            let record_text = crate::memory::episodic::page_interaction_text(
                &session.item_type,
                page,
                &titles,
                &watched,
                &ratings,
                &rest,
            );
            state
                .episodic
                .record(&record_text, MemoryKind::PageInteraction)?;

            if config.checkpoints.contains(&page) {
                for genre in &config.genres {
                    let pool = &genre_items[genre.as_str()];
                    let take = config.probes_per_genre.min(pool.len());
                    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(
                        session.seed,
                        &["exposure", &agent.user_id, genre, &page.to_string()],
                    ));
                    let probe_ids: Vec<&str> = index_sample(&mut rng, pool.len(), take)
                        .into_iter()
                        .map(|i| pool[i])
                        .collect();
                    let mut sum = 0.0;
                    for item_id in &probe_ids {
                        let mut b = Bindings::new();
                        b.insert("agent_id".to_string(), agent.agent_id.clone());
                        b.insert(
                            "persona".to_string(),
                            agent.persona.prompt_block(&session.item_type),
                        );
                        b.insert("item_type".to_string(), session.item_type.clone());
                        b.insert("item_id".to_string(), item_id.to_string());
                        b.insert(
                            "item_title".to_string(),
                            dataset.title_of(item_id).to_string(),
                        );
                        b.insert("item_genres".to_string(), genres_text(dataset, item_id));
                        b.insert("genre".to_string(), genre.clone());
                        b.insert("checkpoint".to_string(), page.to_string());
                        let resp = gateway.complete("rating_probe", &b)?;
                        sum += resp.parsed.int("RATING").unwrap_or(3) as f64;
                    }
                    let mean = sum / probe_ids.len() as f64;
                    curves
                        .entry((genre.clone(), page))
                        .or_default()
                        .push(mean);
                    records.push(json!({
                        "agent_id": agent.agent_id,
                        "genre": genre,
                        "checkpoint": page,
                        "mean_rating": mean,
                    }));
                }
            }
        }
    }

    let mut aggregates = BTreeMap::new();
    for ((genre, checkpoint), means) in &curves {
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        aggregates.insert(format!("{genre}@{checkpoint}"), mean);
    }
    aggregates.insert(
        "checkpoints".to_string(),
        config.checkpoints.len() as f64,
    );
    Ok(TaskResult {
        task: "exposure".to_string(),
        records,
        aggregates,
    })
}

/// Review-influence study: run the same simulation under each display mode
/// and report engagement per mode.
#[allow(clippy::too_many_arguments)]
pub fn task_review_influence(
    gateway: &Gateway,
    graph: &KnowledgeGraph,
    dataset: &InteractionDataset,
    split: &DatasetSplit,
    aggregated: &BTreeMap<ItemId, f64>,
    agents: &[AgentSeed],
    recommender: &dyn Recommender,
    session: &SessionConfig,
    modes: &[String],
    reviews: Option<&ReviewTable>,
) -> Result<TaskResult> {
    let mut records = Vec::new();
    let mut aggregates = BTreeMap::new();
    for mode_name in modes {
        let display = DisplayMode::parse(mode_name)?;
        match display {
            DisplayMode::WithCount => {
                if let Some(missing) = dataset.items().find(|i| i.review_count.is_none()) {
                    return Err(Error::validation(format!(
                        "with_count mode: item {} has no review_count",
                        missing.item_id
                    )));
                }
            }
            DisplayMode::WithNegative | DisplayMode::WithPositive => {
                let table = reviews.ok_or_else(|| {
                    Error::validation(format!("{mode_name} mode requires a reviews file"))
                })?;
                if let Some(missing) = dataset.items().find(|i| !table.contains_key(&i.item_id)) {
                    return Err(Error::validation(format!(
                        "{mode_name} mode: no review comments for item {}",
                        missing.item_id
                    )));
                }
            }
            DisplayMode::Origin => {}
        }
        let env = SessionEnv {
            gateway,
            graph,
            dataset,
            split,
            aggregated,
            recommender,
            captions: None,
            session,
            display,
            reviews,
        };
        let report = run_simulation(&env, agents)?;
        let metrics = report.metrics.as_ref().ok_or_else(|| {
            Error::EmptyReport(format!("no completed agents under mode {mode_name}"))
        })?;
        aggregates.insert(format!("{mode_name}.p_view"), metrics.p_view);
        aggregates.insert(format!("{mode_name}.p_like"), metrics.p_like);
        records.push(json!({
            "mode": mode_name,
            "p_view": metrics.p_view,
            "n_like": metrics.n_like,
            "p_like": metrics.p_like,
            "n_exit": metrics.n_exit,
            "s_sat": metrics.s_sat,
            "failures": report.failures.len(),
        }));
    }
    Ok(TaskResult {
        task: "review_influence".to_string(),
        records,
        aggregates,
    })
}

/// nDCG@k and F1@k for each recommender under two relevance sources: the
/// held-out test split (offline) and simulated liked items from a prior run.
pub fn task_offline_compare(
    dataset: &InteractionDataset,
    split: &DatasetSplit,
    simulated: &SimulationReport,
    config: &OfflineCompareConfig,
    mf: &MfConfig,
    seed: u64,
) -> Result<TaskResult> {
    let k = config.k;
    // Relevance sources per user.
    let mut offline_relevant: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for it in &split.test {
        if it.rating >= 4 {
            offline_relevant
                .entry(it.user_id.as_str())
                .or_default()
                .insert(it.item_id.clone());
        }
    }
    let mut simulated_relevant: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for trace in &simulated.traces {
        simulated_relevant
            .entry(trace.user_id.as_str())
            .or_default()
            .extend(trace.liked_items());
    }
    let users: Vec<&str> = simulated.traces.iter().map(|t| t.user_id.as_str()).collect();
    if users.is_empty() {
        return Err(Error::EmptyReport(
            "offline comparison needs simulated traces".to_string(),
        ));
    }

    let train_seen: BTreeMap<&str, BTreeSet<&str>> = {
        let mut m: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for it in &split.train {
            m.entry(it.user_id.as_str())
                .or_default()
                .insert(it.item_id.as_str());
        }
        m
    };

    let mut records = Vec::new();
    let mut aggregates = BTreeMap::new();
    for rec_name in &config.recommenders {
        let recommender = build_recommender(rec_name, dataset, &split.train, seed, mf)?;
        let mut sums: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new(); // source -> (ndcg, f1, n)
        for user in &users {
            let exclude: BTreeSet<ItemId> = train_seen
                .get(user)
                .map(|s| s.iter().map(|i| i.to_string()).collect())
                .unwrap_or_default();
            let ranked = recommender.recommend(user, 1, &exclude, k);
            let short = ranked.len() < k;
            for (source, relevant_map) in [
                ("offline", &offline_relevant),
                ("simulated", &simulated_relevant),
            ] {
                let Some(relevant) = relevant_map.get(user) else {
                    continue;
                };
                if relevant.is_empty() {
                    continue;
                }
                let ndcg = ndcg_at_k(&ranked, relevant, k);
                let f1 = f1_at_k(&ranked, relevant, k);
                let slot = sums.entry(source).or_insert((0.0, 0.0, 0));
                slot.0 += ndcg;
                slot.1 += f1;
                slot.2 += 1;
                records.push(json!({
                    "recommender": rec_name,
                    "source": source,
                    "user_id": user,
                    "ndcg": ndcg,
                    "f1": f1,
                    "short_ranking": short,
                }));
            }
        }
        for (source, (ndcg_sum, f1_sum, n)) in sums {
            if n > 0 {
                aggregates.insert(
                    format!("ndcg@{k}.{source}.{rec_name}"),
                    ndcg_sum / n as f64,
                );
                aggregates.insert(format!("f1@{k}.{source}.{rec_name}"), f1_sum / n as f64);
            }
        }
    }
    Ok(TaskResult {
        task: "offline_compare".to_string(),
        records,
        aggregates,
    })
}

/// Write a task result into a run directory, merging with existing results.
pub fn append_task_result(dir: impl AsRef<Path>, result: &TaskResult) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("task_results.json");
    let mut all: BTreeMap<String, TaskResult> = if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).unwrap_or_default()
    } else {
        BTreeMap::new()
    };
    all.insert(result.task.clone(), result.clone());
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&all)
            .map_err(|e| Error::validation(format!("serialize task results: {e}")))?,
    )
    .map_err(|e| Error::io(&path, e))?;
    Ok(())
}
