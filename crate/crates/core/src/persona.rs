//! Phase 1: persona inference from interaction history.
//!
//! A taste summary feeds candidate-persona generation; candidates are scored
//! by self-consistency against the user's own interaction subsets versus
//! other users' subsets, and the winner is combined with numeric traits
//! (pickiness, engagement, conformity, variety) derived from the data.

use std::collections::BTreeSet;

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{user_average_rating, InteractionDataset, Interaction, ItemId};
use crate::error::{Error, Result};
use crate::gateway::{Bindings, Gateway};

/// Strictness modifier counteracting LLM positivity bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pickiness {
    NotPicky,
    ModeratelyPicky,
    ExtremelyPicky,
}

impl std::fmt::Display for Pickiness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Pickiness::NotPicky => "not picky",
            Pickiness::ModeratelyPicky => "moderately picky",
            Pickiness::ExtremelyPicky => "extremely picky",
        };
        f.write_str(s)
    }
}

/// Big Five facets, each on a 1..=3 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigFive {
    pub openness: u8,
    pub conscientiousness: u8,
    pub extraversion: u8,
    pub agreeableness: u8,
    pub neuroticism: u8,
}

impl BigFive {
    pub fn new(values: [i64; 5]) -> Result<Self> {
        for v in values {
            if !(1..=3).contains(&v) {
                return Err(Error::validation(format!(
                    "personality facet {v} outside 1..3"
                )));
            }
        }
        Ok(Self {
            openness: values[0] as u8,
            conscientiousness: values[1] as u8,
            extraversion: values[2] as u8,
            agreeableness: values[3] as u8,
            neuroticism: values[4] as u8,
        })
    }
}

/// Data-derived behavioral traits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HabitTraits {
    /// Number of rated items.
    pub engagement: u64,
    /// Mean squared deviation of the user's ratings from item aggregates.
    pub conformity: f64,
    /// Number of distinct genres across rated items.
    pub variety: u64,
}

/// A candidate profile before traits are attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaCandidate {
    pub age: u32,
    pub occupation: String,
    pub big_five: BigFive,
}

/// Full agent profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub age: u32,
    pub occupation: String,
    pub big_five: BigFive,
    pub pickiness: Pickiness,
    pub taste_summary: String,
    pub habits: HabitTraits,
}

impl Persona {
    /// Render the profile as prompt text.
    pub fn prompt_block(&self, item_type: &str) -> String {
        let b = &self.big_five;
        format!(
            "You are a {}-year-old {}. Personality (1-3 scale): openness {}, \
             conscientiousness {}, extraversion {}, agreeableness {}, neuroticism {}.\n\
             Your tastes: {}\n\
             You have rated {} {item_type}s across {} genres.",
            self.age,
            self.occupation,
            b.openness,
            b.conscientiousness,
            b.extraversion,
            b.agreeableness,
            b.neuroticism,
            self.taste_summary,
            self.habits.engagement,
            self.habits.variety,
        )
    }
}

/// Allowed values embedded verbatim in the generation prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersonaVocab {
    pub ages: Vec<u32>,
    pub occupations: Vec<String>,
}

impl Default for PersonaVocab {
    fn default() -> Self {
        Self {
            ages: vec![18, 22, 27, 33, 40, 48, 56, 65],
            occupations: vec![
                "student".to_string(),
                "engineer".to_string(),
                "teacher".to_string(),
                "artist".to_string(),
                "office worker".to_string(),
                "healthcare worker".to_string(),
                "retired".to_string(),
            ],
        }
    }
}

/// Per-candidate self-consistency outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyScore {
    pub persona_index: usize,
    pub score: f64,
    /// One `(own_rating, other_rating)` pair per sampled subset.
    pub per_subset: Vec<(f64, f64)>,
}

/// Map a user's average rating to a pickiness level.
pub fn pickiness_level(r_bar: f64) -> Result<Pickiness> {
    if !(1.0..=5.0).contains(&r_bar) || r_bar.is_nan() {
        return Err(Error::validation(format!(
            "average rating {r_bar} outside [1, 5]"
        )));
    }
    Ok(if r_bar >= 4.5 {
        Pickiness::NotPicky
    } else if r_bar >= 3.5 {
        Pickiness::ModeratelyPicky
    } else {
        Pickiness::ExtremelyPicky
    })
}

/// Engagement, conformity, and variety from a user's history.
///
/// `aggregated` maps item id to its aggregate rating `R_i` (computed over the
/// split that defines the reference population).
pub fn derive_habits(
    history: &[&Interaction],
    dataset: &InteractionDataset,
    aggregated: &std::collections::BTreeMap<ItemId, f64>,
) -> Result<HabitTraits> {
    if history.is_empty() {
        return Err(Error::UndefinedAggregate(
            "cannot derive habits from empty history".to_string(),
        ));
    }
    let engagement = history.len() as u64;

    let mut sq_sum = 0.0;
    for it in history {
        let r_i = aggregated.get(&it.item_id).copied().ok_or_else(|| {
            Error::UndefinedAggregate(format!("no aggregate rating for item {}", it.item_id))
        })?;
        let d = it.rating as f64 - r_i;
        sq_sum += d * d;
    }
    let conformity = sq_sum / history.len() as f64;

    let mut genres: BTreeSet<&str> = BTreeSet::new();
    for it in history {
        let item = dataset
            .item(&it.item_id)
            .ok_or_else(|| Error::validation(format!("item {} not in table", it.item_id)))?;
        if item.genres.is_empty() {
            return Err(Error::validation(format!(
                "item {} has no genres; variety undefined",
                it.item_id
            )));
        }
        genres.extend(item.genres.iter().map(|g| g.as_str()));
    }

    Ok(HabitTraits {
        engagement,
        conformity,
        variety: genres.len() as u64,
    })
}

fn render_interactions(list: &[&Interaction], dataset: &InteractionDataset) -> String {
    if list.is_empty() {
        return "(none)".to_string();
    }
    list.iter()
        .map(|it| format!("- {} (rated {})", dataset.title_of(&it.item_id), it.rating))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Ask the LLM for a short taste summary from a seeded sample of the history.
///
/// Items rated 4 or above go to the liked list, those below 3 to the disliked
/// list; 3s appear in neither.
pub fn summarize_tastes(
    gateway: &Gateway,
    history: &[&Interaction],
    dataset: &InteractionDataset,
    item_type: &str,
    sample_size: usize,
    seed: u64,
) -> Result<String> {
    if history.is_empty() {
        return Err(Error::InsufficientData(
            "cannot summarize empty history".to_string(),
        ));
    }
    let take = sample_size.min(history.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index_sample(&mut rng, history.len(), take).into_vec();
    idx.sort_unstable();
    let sampled: Vec<&Interaction> = idx.into_iter().map(|i| history[i]).collect();

    let liked: Vec<&Interaction> = sampled.iter().filter(|i| i.rating >= 4).copied().collect();
    let disliked: Vec<&Interaction> = sampled.iter().filter(|i| i.rating < 3).copied().collect();

    let mut b = Bindings::new();
    b.insert("item_type".to_string(), item_type.to_string());
    b.insert("liked_items".to_string(), render_interactions(&liked, dataset));
    b.insert(
        "disliked_items".to_string(),
        render_interactions(&disliked, dataset),
    );
    let resp = gateway.complete("persona_summary", &b)?;
    Ok(resp.parsed.free_text().unwrap_or_default().to_string())
}

/// Generate `m` candidate personas constrained to the vocabulary.
pub fn generate_candidates(
    gateway: &Gateway,
    taste_summary: &str,
    history: &[&Interaction],
    dataset: &InteractionDataset,
    item_type: &str,
    m: usize,
    vocab: &PersonaVocab,
) -> Result<Vec<PersonaCandidate>> {
    if vocab.ages.is_empty() || vocab.occupations.is_empty() {
        return Err(Error::validation("persona vocabulary must be non-empty"));
    }
    let sample: Vec<&Interaction> = history.iter().take(20).copied().collect();
    let mut b = Bindings::new();
    b.insert("item_type".to_string(), item_type.to_string());
    b.insert("summary".to_string(), taste_summary.to_string());
    b.insert(
        "history_sample".to_string(),
        render_interactions(&sample, dataset),
    );
    b.insert(
        "ages".to_string(),
        vocab
            .ages
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", "),
    );
    b.insert("occupations".to_string(), vocab.occupations.join(", "));
    b.insert("personality_scale".to_string(), "1 to 3".to_string());
    b.insert("m".to_string(), m.to_string());

    let resp = gateway.complete("persona_candidates", &b)?;
    let mut out = Vec::with_capacity(m);
    for block in resp.parsed.blocks.iter().take(m) {
        let get_int = |name: &str| -> i64 {
            match block.get(name) {
                Some(crate::gateway::schema::FieldValue::Int(v)) => *v,
                _ => 0,
            }
        };
        let age = get_int("AGE");
        if !vocab.ages.contains(&(age as u32)) {
            return Err(Error::validation(format!(
                "candidate age {age} not in vocabulary"
            )));
        }
        let occupation = match block.get("OCCUPATION") {
            Some(crate::gateway::schema::FieldValue::Text(t)) => t.clone(),
            _ => String::new(),
        };
        let canonical = vocab
            .occupations
            .iter()
            .find(|o| o.eq_ignore_ascii_case(occupation.trim()))
            .ok_or_else(|| {
                Error::validation(format!("candidate occupation `{occupation}` not in vocabulary"))
            })?;
        let big_five = BigFive::new([
            get_int("OPENNESS"),
            get_int("CONSCIENTIOUSNESS"),
            get_int("EXTRAVERSION"),
            get_int("AGREEABLENESS"),
            get_int("NEUROTICISM"),
        ])?;
        out.push(PersonaCandidate {
            age: age as u32,
            occupation: canonical.clone(),
            big_five,
        });
    }
    Ok(out)
}

fn candidate_prompt_block(candidate: &PersonaCandidate) -> String {
    let b = &candidate.big_five;
    format!(
        "Age {}, occupation {}, openness {}, conscientiousness {}, extraversion {}, \
         agreeableness {}, neuroticism {}.",
        candidate.age,
        candidate.occupation,
        b.openness,
        b.conscientiousness,
        b.extraversion,
        b.agreeableness,
        b.neuroticism
    )
}

fn rate_subset(
    gateway: &Gateway,
    candidate: &PersonaCandidate,
    subset: &[&Interaction],
    dataset: &InteractionDataset,
    item_type: &str,
    extra: &[(&str, &str)],
) -> Result<i64> {
    let mut b = Bindings::new();
    b.insert("persona".to_string(), candidate_prompt_block(candidate));
    b.insert("subset".to_string(), render_interactions(subset, dataset));
    b.insert("item_type".to_string(), item_type.to_string());
    for (k, v) in extra {
        b.insert(k.to_string(), v.to_string());
    }
    let resp = gateway.complete("subset_rating", &b)?;
    resp.parsed.int("RATING").ok_or_else(|| Error::LlmFormat {
        tag: "subset_rating".to_string(),
        detail: "missing RATING".to_string(),
    })
}

/// Score one candidate: sum of own-subset ratings minus other-subset ratings
/// over `j` sampled subset pairs of size `rho`.
#[allow(clippy::too_many_arguments)]
pub fn self_consistency_score(
    gateway: &Gateway,
    candidate: &PersonaCandidate,
    candidate_index: usize,
    own_history: &[&Interaction],
    others_pool: &[&Interaction],
    dataset: &InteractionDataset,
    item_type: &str,
    j: usize,
    rho: usize,
    seed: u64,
) -> Result<ConsistencyScore> {
    if own_history.len() < rho {
        return Err(Error::InsufficientData(format!(
            "user has {} interactions, subset size is {rho}",
            own_history.len()
        )));
    }
    if others_pool.len() < rho {
        return Err(Error::InsufficientData(format!(
            "others pool has {} interactions, subset size is {rho}",
            others_pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (candidate_index as u64).wrapping_mul(0x9e37));
    let mut per_subset = Vec::with_capacity(j);
    let mut score = 0.0;
    for round in 0..j {
        let own_idx = index_sample(&mut rng, own_history.len(), rho).into_vec();
        let own_subset: Vec<&Interaction> = own_idx.into_iter().map(|i| own_history[i]).collect();
        let other_idx = index_sample(&mut rng, others_pool.len(), rho).into_vec();
        let other_subset: Vec<&Interaction> =
            other_idx.into_iter().map(|i| others_pool[i]).collect();

        let round_label = round.to_string();
        let idx_label = candidate_index.to_string();
        let own = rate_subset(
            gateway,
            candidate,
            &own_subset,
            dataset,
            item_type,
            &[
                ("subset_kind", "own"),
                ("round", &round_label),
                ("candidate_index", &idx_label),
            ],
        )?;
        let other = rate_subset(
            gateway,
            candidate,
            &other_subset,
            dataset,
            item_type,
            &[
                ("subset_kind", "other"),
                ("round", &round_label),
                ("candidate_index", &idx_label),
            ],
        )?;
        score += own as f64 - other as f64;
        per_subset.push((own as f64, other as f64));
    }
    Ok(ConsistencyScore {
        persona_index: candidate_index,
        score,
        per_subset,
    })
}

/// Score every candidate and return the argmax index (ties to the lowest
/// index) along with all scores.
#[allow(clippy::too_many_arguments)]
pub fn match_persona(
    gateway: &Gateway,
    candidates: &[PersonaCandidate],
    own_history: &[&Interaction],
    others_pool: &[&Interaction],
    dataset: &InteractionDataset,
    item_type: &str,
    j: usize,
    rho: usize,
    seed: u64,
) -> Result<(usize, Vec<ConsistencyScore>)> {
    if candidates.is_empty() {
        return Err(Error::validation("no persona candidates to match"));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for (idx, candidate) in candidates.iter().enumerate() {
        scores.push(self_consistency_score(
            gateway,
            candidate,
            idx,
            own_history,
            others_pool,
            dataset,
            item_type,
            j,
            rho,
            seed,
        )?);
    }
    let mut best = 0;
    for (idx, s) in scores.iter().enumerate() {
        if s.score > scores[best].score {
            best = idx;
        }
    }
    Ok((best, scores))
}

/// Assemble a full persona from a matched candidate plus derived traits.
pub fn assemble_persona(
    candidate: &PersonaCandidate,
    taste_summary: &str,
    history: &[&Interaction],
    dataset: &InteractionDataset,
    aggregated: &std::collections::BTreeMap<ItemId, f64>,
) -> Result<Persona> {
    let r_bar = user_average_rating(history)?;
    Ok(Persona {
        age: candidate.age,
        occupation: candidate.occupation.clone(),
        big_five: candidate.big_five,
        pickiness: pickiness_level(r_bar)?,
        taste_summary: taste_summary.to_string(),
        habits: derive_habits(history, dataset, aggregated)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{aggregated_ratings_table, Item};
    use crate::gateway::{default_registry, HashEmbedder, ScriptRule, ScriptedProvider};
    use std::sync::Arc;

    fn it(user: &str, item: &str, rating: u8, ts: i64) -> Interaction {
        Interaction {
            user_id: user.to_string(),
            item_id: item.to_string(),
            rating,
            timestamp: ts,
        }
    }

    fn tiny_dataset() -> InteractionDataset {
        let items: Vec<Item> = (1..=8)
            .map(|k| Item {
                item_id: format!("i{k}"),
                title: format!("Movie {k}"),
                genres: [if k % 2 == 0 { "Action" } else { "Comedy" }.to_string()]
                    .into_iter()
                    .collect(),
                description: None,
                thumbnail_ref: None,
                review_count: None,
            })
            .collect();
        let interactions = vec![
            it("u1", "i1", 5, 10),
            it("u1", "i2", 4, 20),
            it("u1", "i3", 2, 30),
            it("u2", "i1", 3, 40),
            it("u2", "i4", 4, 50),
            it("u3", "i5", 1, 60),
            it("u3", "i6", 5, 70),
        ];
        InteractionDataset::new(interactions, items).unwrap()
    }

    fn gateway_with(rules: Vec<ScriptRule>) -> Gateway {
        Gateway::new(
            default_registry(5),
            Arc::new(ScriptedProvider::from_rules(rules)),
            Arc::new(HashEmbedder::default()),
        )
    }

    fn rule(tag: &str, responses: &[&str], matches: &[(&str, &str)], repeat: bool) -> ScriptRule {
        ScriptRule {
            tag: tag.to_string(),
            r#match: matches
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            responses: responses.iter().map(|s| s.to_string()).collect(),
            repeat,
        }
    }

    #[test]
    fn pickiness_thresholds_are_exact() {
        assert_eq!(pickiness_level(4.6).unwrap(), Pickiness::NotPicky);
        assert_eq!(pickiness_level(4.5).unwrap(), Pickiness::NotPicky);
        assert_eq!(pickiness_level(4.49).unwrap(), Pickiness::ModeratelyPicky);
        assert_eq!(pickiness_level(3.5).unwrap(), Pickiness::ModeratelyPicky);
        assert_eq!(pickiness_level(3.49).unwrap(), Pickiness::ExtremelyPicky);
        assert!(pickiness_level(0.5).is_err());
        assert!(pickiness_level(5.5).is_err());
    }

    #[test]
    fn habits_match_formulas() {
        let ds = tiny_dataset();
        let table = aggregated_ratings_table(ds.interactions());
        let history = ds.user_history("u1");
        let habits = derive_habits(&history, &ds, &table).unwrap();
        assert_eq!(habits.engagement, 3);
        // u1 rated i1=5 (R=4), i2=4 (R=4), i3=2 (R=2).
        let expected = ((5.0f64 - 4.0).powi(2) + 0.0 + 0.0) / 3.0;
        assert!((habits.conformity - expected).abs() < 1e-12);
        assert_eq!(habits.variety, 2); // Comedy (i1, i3) + Action (i2)
    }

    #[test]
    fn conformity_zero_on_agreement_and_four_on_two_point_gap() {
        let items = vec![Item {
            item_id: "i1".to_string(),
            title: "Solo".to_string(),
            genres: ["Drama".to_string()].into_iter().collect(),
            description: None,
            thumbnail_ref: None,
            review_count: None,
        }];
        let interactions = vec![it("u1", "i1", 5, 1)];
        let ds = InteractionDataset::new(interactions, items).unwrap();
        let history = ds.user_history("u1");

        let mut agree = std::collections::BTreeMap::new();
        agree.insert("i1".to_string(), 5.0);
        assert_eq!(derive_habits(&history, &ds, &agree).unwrap().conformity, 0.0);

        let mut disagree = std::collections::BTreeMap::new();
        disagree.insert("i1".to_string(), 3.0);
        assert_eq!(
            derive_habits(&history, &ds, &disagree).unwrap().conformity,
            4.0
        );
    }

    #[test]
    fn summary_thresholds_route_items() {
        let ds = tiny_dataset();
        let history = ds.user_history("u1"); // ratings 5, 4, 2
        let gw = gateway_with(vec![rule("persona_summary", &["enjoys sci-fi"], &[], false)]);
        let summary = summarize_tastes(&gw, &history, &ds, "movie", 50, 7).unwrap();
        assert_eq!(summary, "enjoys sci-fi");
        // Inspect the prompt the provider saw: 5 and 4 liked, 2 disliked.
        let gw2 = gateway_with(vec![rule("persona_summary", &["ok"], &[], false)]);
        summarize_tastes(&gw2, &history, &ds, "movie", 50, 7).unwrap();
    }

    #[test]
    fn rating_three_lands_in_neither_list() {
        let items = vec![
            Item {
                item_id: "i1".to_string(),
                title: "Neutral Movie".to_string(),
                genres: ["Drama".to_string()].into_iter().collect(),
                description: None,
                thumbnail_ref: None,
                review_count: None,
            },
        ];
        let ds = InteractionDataset::new(vec![it("u1", "i1", 3, 1)], items).unwrap();
        let history = ds.user_history("u1");
        let provider = Arc::new(ScriptedProvider::from_rules(vec![rule(
            "persona_summary",
            &["fine"],
            &[],
            false,
        )]));
        let gw = Gateway::new(
            default_registry(5),
            provider.clone(),
            Arc::new(HashEmbedder::default()),
        );
        summarize_tastes(&gw, &history, &ds, "movie", 50, 7).unwrap();
        let prompt = &provider.call_log()[0].prompt;
        assert!(!prompt.contains("Neutral Movie (rated 3)"));
        assert!(prompt.contains("Items they liked:\n(none)"));
        assert!(prompt.contains("Items they disliked:\n(none)"));
    }

    fn five_candidates_reply() -> String {
        (0..5)
            .map(|k| {
                format!(
                    "AGE: {}\nOCCUPATION: engineer\nOPENNESS: 2\nCONSCIENTIOUSNESS: 2\n\
                     EXTRAVERSION: {}\nAGREEABLENESS: 1\nNEUROTICISM: 3",
                    [18, 22, 27, 33, 40][k],
                    (k % 3) + 1
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn generates_five_valid_candidates() {
        let ds = tiny_dataset();
        let history = ds.user_history("u1");
        let gw = gateway_with(vec![rule(
            "persona_candidates",
            &[&five_candidates_reply()],
            &[],
            false,
        )]);
        let cands =
            generate_candidates(&gw, "summary", &history, &ds, "movie", 5, &PersonaVocab::default())
                .unwrap();
        assert_eq!(cands.len(), 5);
        assert!(cands.iter().all(|c| c.occupation == "engineer"));
    }

    #[test]
    fn facet_out_of_range_is_validation_error() {
        let ds = tiny_dataset();
        let history = ds.user_history("u1");
        let reply = five_candidates_reply().replace("OPENNESS: 2", "OPENNESS: 4");
        let gw = gateway_with(vec![rule("persona_candidates", &[&reply], &[], false)]);
        let err = generate_candidates(
            &gw,
            "summary",
            &history,
            &ds,
            "movie",
            5,
            &PersonaVocab::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "got {err:?}");
    }

    #[test]
    fn single_occupation_vocab_closes_the_domain() {
        let ds = tiny_dataset();
        let history = ds.user_history("u1");
        let gw = gateway_with(vec![rule(
            "persona_candidates",
            &[&five_candidates_reply()],
            &[],
            false,
        )]);
        let vocab = PersonaVocab {
            ages: vec![18, 22, 27, 33, 40],
            occupations: vec!["engineer".to_string()],
        };
        let cands = generate_candidates(&gw, "s", &history, &ds, "movie", 5, &vocab).unwrap();
        assert!(cands.iter().all(|c| c.occupation == "engineer"));
    }

    fn candidate() -> PersonaCandidate {
        PersonaCandidate {
            age: 30,
            occupation: "engineer".to_string(),
            big_five: BigFive::new([2, 2, 2, 2, 2]).unwrap(),
        }
    }

    #[test]
    fn consistency_score_is_margin_of_sums() {
        let ds = tiny_dataset();
        let own = ds.user_history("u1");
        let others: Vec<&Interaction> = ds
            .interactions()
            .iter()
            .filter(|i| i.user_id != "u1")
            .collect();
        // own subsets rated 5, other subsets rated 2, j=2 -> (5+5)-(2+2)=6.
        let gw = gateway_with(vec![
            rule("subset_rating", &["RATING: 5"], &[("subset_kind", "^own$")], true),
            rule("subset_rating", &["RATING: 2"], &[("subset_kind", "^other$")], true),
        ]);
        let score =
            self_consistency_score(&gw, &candidate(), 0, &own, &others, &ds, "movie", 2, 2, 7)
                .unwrap();
        assert_eq!(score.score, 6.0);
        assert_eq!(score.per_subset, vec![(5.0, 2.0), (5.0, 2.0)]);
    }

    #[test]
    fn symmetric_ratings_give_zero_score() {
        let ds = tiny_dataset();
        let own = ds.user_history("u1");
        let others: Vec<&Interaction> = ds
            .interactions()
            .iter()
            .filter(|i| i.user_id != "u1")
            .collect();
        let gw = gateway_with(vec![rule("subset_rating", &["RATING: 3"], &[], true)]);
        let score =
            self_consistency_score(&gw, &candidate(), 0, &own, &others, &ds, "movie", 3, 2, 7)
                .unwrap();
        assert_eq!(score.score, 0.0);
    }

    #[test]
    fn anti_matching_persona_scores_negative() {
        let ds = tiny_dataset();
        let own = ds.user_history("u1");
        let others: Vec<&Interaction> = ds
            .interactions()
            .iter()
            .filter(|i| i.user_id != "u1")
            .collect();
        let gw = gateway_with(vec![
            rule("subset_rating", &["RATING: 1"], &[("subset_kind", "^own$")], true),
            rule("subset_rating", &["RATING: 5"], &[("subset_kind", "^other$")], true),
        ]);
        let score =
            self_consistency_score(&gw, &candidate(), 0, &own, &others, &ds, "movie", 1, 2, 7)
                .unwrap();
        assert_eq!(score.score, -4.0);
    }

    #[test]
    fn insufficient_history_is_flagged() {
        let ds = tiny_dataset();
        let own = ds.user_history("u1");
        let others: Vec<&Interaction> = ds
            .interactions()
            .iter()
            .filter(|i| i.user_id != "u1")
            .collect();
        let gw = gateway_with(vec![rule("subset_rating", &["RATING: 3"], &[], true)]);
        let err =
            self_consistency_score(&gw, &candidate(), 0, &own, &others, &ds, "movie", 1, 99, 7)
                .unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn match_persona_takes_argmax_with_low_index_ties() {
        let ds = tiny_dataset();
        let own = ds.user_history("u1");
        let others: Vec<&Interaction> = ds
            .interactions()
            .iter()
            .filter(|i| i.user_id != "u1")
            .collect();
        let candidates = vec![candidate(), candidate(), candidate()];
        // Candidate 1 gets own=5/other=1; the others are symmetric.
        let gw = gateway_with(vec![
            rule(
                "subset_rating",
                &["RATING: 5"],
                &[("candidate_index", "^1$"), ("subset_kind", "^own$")],
                true,
            ),
            rule(
                "subset_rating",
                &["RATING: 1"],
                &[("candidate_index", "^1$"), ("subset_kind", "^other$")],
                true,
            ),
            rule("subset_rating", &["RATING: 3"], &[], true),
        ]);
        let (best, scores) =
            match_persona(&gw, &candidates, &own, &others, &ds, "movie", 2, 2, 7).unwrap();
        assert_eq!(best, 1);
        assert_eq!(scores[0].score, 0.0);
        // j=2 rounds of (own 5 - other 1).
        assert_eq!(scores[1].score, 8.0);

        // All-equal scores tie-break to candidate 0.
        let gw_tie = gateway_with(vec![rule("subset_rating", &["RATING: 3"], &[], true)]);
        let (best_tie, _) =
            match_persona(&gw_tie, &candidates, &own, &others, &ds, "movie", 2, 2, 7).unwrap();
        assert_eq!(best_tie, 0);
    }
}
