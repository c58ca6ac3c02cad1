//! Baseline recommendation strategies: Random, Pop, and MF.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::dataset::{latest_ratings, InteractionDataset, Interaction, ItemId, UserId};
use crate::error::{Error, Result};

use super::config::MfConfig;

/// A page-oriented recommendation strategy.
pub trait Recommender: Send + Sync {
    fn name(&self) -> &str;

    /// Up to `n` distinct items the user has not seen. A short page signals
    /// catalog exhaustion.
    fn recommend(&self, user_id: &str, page: u32, exclude: &BTreeSet<ItemId>, n: usize)
        -> Vec<ItemId>;
}

fn derived_seed(seed: u64, user_id: &str, page: u32) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(user_id.as_bytes());
    hasher.update(page.to_le_bytes());
    u64::from_le_bytes(hasher.finalize()[0..8].try_into().unwrap())
}

/// Seeded uniform sampling over the catalog. Deterministic per
/// (seed, user, page) regardless of call order across agents.
pub struct RandomRecommender {
    items: Vec<ItemId>,
    seed: u64,
}

impl RandomRecommender {
    pub fn new(dataset: &InteractionDataset, seed: u64) -> Self {
        Self::with_items(dataset.items().map(|i| i.item_id.clone()).collect(), seed)
    }

    /// Restrict the catalog, e.g. to two genres for exposure studies.
    pub fn with_items(mut items: Vec<ItemId>, seed: u64) -> Self {
        items.sort();
        items.dedup();
        Self { items, seed }
    }
}

impl Recommender for RandomRecommender {
    fn name(&self) -> &str {
        "random"
    }

    fn recommend(
        &self,
        user_id: &str,
        page: u32,
        exclude: &BTreeSet<ItemId>,
        n: usize,
    ) -> Vec<ItemId> {
        let pool: Vec<&ItemId> = self.items.iter().filter(|i| !exclude.contains(*i)).collect();
        if pool.is_empty() {
            return Vec::new();
        }
        let take = n.min(pool.len());
        let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(self.seed, user_id, page));
        let mut picked: Vec<ItemId> = index_sample(&mut rng, pool.len(), take)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect();
        if picked.len() < n {
            log::debug!("random catalog short page: {} of {n}", picked.len());
        }
        picked.sort();
        picked
    }
}

/// Most-popular ordering by train-split interaction count.
pub struct PopRecommender {
    ranked: Vec<ItemId>,
}

impl PopRecommender {
    pub fn new(train: &[Interaction], dataset: &InteractionDataset) -> Self {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for it in train {
            *counts.entry(it.item_id.as_str()).or_insert(0) += 1;
        }
        let mut ranked: Vec<ItemId> = dataset.items().map(|i| i.item_id.clone()).collect();
        ranked.sort_by(|a, b| {
            let ca = counts.get(a.as_str()).copied().unwrap_or(0);
            let cb = counts.get(b.as_str()).copied().unwrap_or(0);
            cb.cmp(&ca).then_with(|| a.cmp(b))
        });
        Self { ranked }
    }
}

impl Recommender for PopRecommender {
    fn name(&self) -> &str {
        "pop"
    }

    fn recommend(
        &self,
        _user_id: &str,
        page: u32,
        exclude: &BTreeSet<ItemId>,
        n: usize,
    ) -> Vec<ItemId> {
        // Page p serves ranks [p*n, p*n + n) of the unseen list. Exclusions
        // accumulate as the session advances, so recompute from the top.
        let unseen: Vec<&ItemId> = self.ranked.iter().filter(|i| !exclude.contains(*i)).collect();
        let _ = page;
        unseen.into_iter().take(n).cloned().collect()
    }
}

/// Learned user/item factors.
#[derive(Debug, Clone)]
pub struct MfModel {
    pub rank: usize,
    pub user_index: BTreeMap<UserId, usize>,
    pub item_index: BTreeMap<ItemId, usize>,
    pub user_factors: Vec<Vec<f64>>,
    pub item_factors: Vec<Vec<f64>>,
    pub global_mean: f64,
    /// Epoch-end train MSE, one entry per epoch.
    pub losses: Vec<f64>,
}

impl MfModel {
    /// Raw score; falls back to the global mean for unknown entities.
    pub fn predict(&self, user_id: &str, item_id: &str) -> f64 {
        match (self.user_index.get(user_id), self.item_index.get(item_id)) {
            (Some(&u), Some(&i)) => {
                let pu = &self.user_factors[u];
                let qi = &self.item_factors[i];
                pu.iter().zip(qi).map(|(a, b)| a * b).sum()
            }
            _ => self.global_mean,
        }
    }

    /// Score clamped to the rating scale.
    pub fn predict_rating(&self, user_id: &str, item_id: &str) -> f64 {
        self.predict(user_id, item_id).clamp(1.0, 5.0)
    }
}

/// Train factors by stochastic gradient descent on squared error with L2
/// regularization. Duplicate (user, item) pairs collapse to the most recent
/// rating first.
pub fn train_mf(train: &[Interaction], config: &MfConfig, seed: u64) -> Result<MfModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty train split".to_string()));
    }
    let examples: Vec<Interaction> = latest_ratings(train).into_values().collect();

    let mut user_index = BTreeMap::new();
    let mut item_index = BTreeMap::new();
    for it in &examples {
        let next = user_index.len();
        user_index.entry(it.user_id.clone()).or_insert(next);
        let next = item_index.len();
        item_index.entry(it.item_id.clone()).or_insert(next);
    }
    let global_mean =
        examples.iter().map(|e| e.rating as f64).sum::<f64>() / examples.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (1.0 / config.rank as f64).sqrt();
    let mut init = |n: usize| -> Vec<Vec<f64>> {
        use rand::Rng;
        (0..n)
            .map(|_| {
                (0..config.rank)
                    .map(|_| (rng.random::<f64>() - 0.5) * 2.0 * scale)
                    .collect()
            })
            .collect()
    };
    let mut user_factors = init(user_index.len());
    let mut item_factors = init(item_index.len());

    let mse = |uf: &[Vec<f64>], itf: &[Vec<f64>]| -> f64 {
        let se: f64 = examples
            .iter()
            .map(|e| {
                let u = user_index[&e.user_id];
                let i = item_index[&e.item_id];
                let pred: f64 = uf[u].iter().zip(&itf[i]).map(|(a, b)| a * b).sum();
                let d = e.rating as f64 - pred;
                d * d
            })
            .sum();
        se / examples.len() as f64
    };

    let initial_loss = mse(&user_factors, &item_factors);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        for &idx in &order {
            let e = &examples[idx];
            let u = user_index[&e.user_id];
            let i = item_index[&e.item_id];
            let pred: f64 = user_factors[u]
                .iter()
                .zip(&item_factors[i])
                .map(|(a, b)| a * b)
                .sum();
            let err = e.rating as f64 - pred;
            for f in 0..config.rank {
                let pu = user_factors[u][f];
                let qi = item_factors[i][f];
                user_factors[u][f] += config.learning_rate * (err * qi - config.regularization * pu);
                item_factors[i][f] += config.learning_rate * (err * pu - config.regularization * qi);
            }
        }
        let loss = mse(&user_factors, &item_factors);
        if !loss.is_finite() || loss > initial_loss * 10.0 {
            return Err(Error::TrainingDiverged(format!(
                "epoch loss {loss} exceeds 10x the initial {initial_loss}"
            )));
        }
        losses.push(loss);
    }

    Ok(MfModel {
        rank: config.rank,
        user_index,
        item_index,
        user_factors,
        item_factors,
        global_mean,
        losses,
    })
}

/// Recommender over a trained factor model: descending dot product over
/// unseen items, ties by item id.
pub struct MfRecommender {
    model: MfModel,
    items: Vec<ItemId>,
}

impl MfRecommender {
    pub fn new(model: MfModel, dataset: &InteractionDataset) -> Self {
        let mut items: Vec<ItemId> = dataset.items().map(|i| i.item_id.clone()).collect();
        items.sort();
        Self { model, items }
    }

    pub fn model(&self) -> &MfModel {
        &self.model
    }
}

impl Recommender for MfRecommender {
    fn name(&self) -> &str {
        "mf"
    }

    fn recommend(
        &self,
        user_id: &str,
        _page: u32,
        exclude: &BTreeSet<ItemId>,
        n: usize,
    ) -> Vec<ItemId> {
        let mut scored: Vec<(&ItemId, f64)> = self
            .items
            .iter()
            .filter(|i| !exclude.contains(*i))
            .map(|i| (i, self.model.predict(user_id, i)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(b.0))
        });
        scored.into_iter().take(n).map(|(i, _)| i.clone()).collect()
    }
}

/// Build a strategy by id.
pub fn build_recommender(
    id: &str,
    dataset: &InteractionDataset,
    train: &[Interaction],
    seed: u64,
    mf: &MfConfig,
) -> Result<Box<dyn Recommender>> {
    match id {
        "random" => Ok(Box::new(RandomRecommender::new(dataset, seed))),
        "pop" => Ok(Box::new(PopRecommender::new(train, dataset))),
        "mf" => {
            let model = train_mf(train, mf, seed)?;
            Ok(Box::new(MfRecommender::new(model, dataset)))
        }
        other => Err(Error::validation(format!(
            "unknown recommender `{other}` (expected random | pop | mf)"
        ))),
    }
}
