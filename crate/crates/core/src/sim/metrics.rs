//! Engagement, classification, rating-error, and ranking metrics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Session-level engagement aggregates, averaged over completed agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementMetrics {
    /// Mean of (items watched / items shown).
    pub p_view: f64,
    /// Mean count of liked items (per-item opinion above 3).
    pub n_like: f64,
    /// Mean of (liked / watched); 0 for agents that watched nothing.
    pub p_like: f64,
    /// Mean exit page.
    pub n_exit: f64,
    /// Mean exit-interview satisfaction on the 1-10 scale.
    pub s_sat: f64,
    pub agents: usize,
}

/// Per-agent tallies feeding [`EngagementMetrics`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AgentEngagement {
    pub shown: u64,
    pub watched: u64,
    pub liked: u64,
    pub exit_page: u32,
    pub satisfaction: u8,
}

/// Ratings strictly above this count as a like.
pub const LIKE_THRESHOLD: u8 = 3;

pub fn compute_engagement(per_agent: &[AgentEngagement]) -> Result<EngagementMetrics> {
    if per_agent.is_empty() {
        return Err(Error::EmptyReport(
            "no completed agents to aggregate".to_string(),
        ));
    }
    let n = per_agent.len() as f64;
    let mean = |f: &dyn Fn(&AgentEngagement) -> f64| -> f64 {
        per_agent.iter().map(f).sum::<f64>() / n
    };
    Ok(EngagementMetrics {
        p_view: mean(&|a| {
            if a.shown == 0 {
                0.0
            } else {
                a.watched as f64 / a.shown as f64
            }
        }),
        n_like: mean(&|a| a.liked as f64),
        p_like: mean(&|a| {
            if a.watched == 0 {
                0.0
            } else {
                a.liked as f64 / a.watched as f64
            }
        }),
        n_exit: mean(&|a| a.exit_page as f64),
        s_sat: mean(&|a| a.satisfaction as f64),
        agents: per_agent.len(),
    })
}

/// Binary classification tallies with interacted as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationStats {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ClassificationStats {
    pub fn observe(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &ClassificationStats) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            return 0.0;
        }
        self.tp as f64 / (self.tp + self.fp) as f64
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            return 0.0;
        }
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            return 0.0;
        }
        2.0 * p * r / (p + r)
    }
}

/// Root mean squared error over (predicted, truth) pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyReport("no prediction pairs".to_string()));
    }
    let se: f64 = pairs.iter().map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((se / pairs.len() as f64).sqrt())
}

/// Mean absolute error over (predicted, truth) pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyReport("no prediction pairs".to_string()));
    }
    Ok(pairs.iter().map(|(p, t)| (p - t).abs()).sum::<f64>() / pairs.len() as f64)
}

/// Binary-relevance nDCG@k with log2 position discount.
pub fn ndcg_at_k(ranked: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let k_used = k.min(ranked.len());
    let dcg: f64 = ranked
        .iter()
        .take(k_used)
        .enumerate()
        .map(|(i, item)| {
            if relevant.contains(item) {
                1.0 / ((i + 2) as f64).log2()
            } else {
                0.0
            }
        })
        .sum();
    let ideal_hits = k.min(relevant.len());
    let idcg: f64 = (0..ideal_hits).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// F1@k from precision@k and recall@k with binary relevance.
pub fn f1_at_k(ranked: &[String], relevant: &BTreeSet<String>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let k_used = k.min(ranked.len());
    if k_used == 0 {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .take(k_used)
        .filter(|i| relevant.contains(*i))
        .count() as f64;
    let precision = hits / k_used as f64;
    let recall = hits / relevant.len() as f64;
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

/// Two-sided paired t-test. Returns (t statistic, p value).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::validation("paired samples must have equal length"));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 pairs for a t-test".to_string(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        // Degenerate: identical differences everywhere.
        let t = if mean == 0.0 { 0.0 } else { f64::INFINITY };
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        return Ok((t, p));
    }
    let t = mean / (var / n as f64).sqrt();
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::validation(format!("t distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok((t, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn engagement_hand_example() {
        let agents = vec![AgentEngagement {
            shown: 8,
            watched: 2,
            liked: 1,
            exit_page: 2,
            satisfaction: 3,
        }];
        let m = compute_engagement(&agents).unwrap();
        assert_eq!(m.p_view, 0.25);
        assert_eq!(m.n_like, 1.0);
        assert_eq!(m.p_like, 0.5);
        assert_eq!(m.n_exit, 2.0);
        assert_eq!(m.s_sat, 3.0);
    }

    #[test]
    fn engagement_averages_component_wise() {
        let agents = vec![
            AgentEngagement { shown: 8, watched: 2, liked: 1, exit_page: 2, satisfaction: 3 },
            AgentEngagement { shown: 4, watched: 4, liked: 2, exit_page: 4, satisfaction: 7 },
        ];
        let m = compute_engagement(&agents).unwrap();
        assert!((m.p_view - (0.25 + 1.0) / 2.0).abs() < 1e-12);
        assert!((m.n_like - 1.5).abs() < 1e-12);
        assert!((m.p_like - (0.5 + 0.5) / 2.0).abs() < 1e-12);
        assert!((m.n_exit - 3.0).abs() < 1e-12);
        assert!((m.s_sat - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(matches!(
            compute_engagement(&[]).unwrap_err(),
            Error::EmptyReport(_)
        ));
    }

    #[test]
    fn classification_f1_identity() {
        let mut stats = ClassificationStats::default();
        for _ in 0..7 {
            stats.observe(true, true);
        }
        for _ in 0..3 {
            stats.observe(false, true);
        }
        for _ in 0..5 {
            stats.observe(true, false);
        }
        for _ in 0..10 {
            stats.observe(false, false);
        }
        let p = stats.precision();
        let r = stats.recall();
        assert!((stats.f1() - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert!((stats.accuracy() - 17.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn constant_three_predictor_on_one_and_five() {
        let pairs = vec![(3.0, 1.0), (3.0, 5.0)];
        let r = rmse(&pairs).unwrap();
        assert!((r - 8.0_f64.sqrt() / 2.0_f64.sqrt()).abs() < 1e-12); // = 2.0
        assert!((r - 2.0).abs() < 1e-12);
        assert_eq!(mae(&pairs).unwrap(), 2.0);
    }

    #[test]
    fn perfect_ranking_has_ndcg_one() {
        let ranked = ids(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        let relevant = set(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        assert!((ndcg_at_k(&ranked, &relevant, 10) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_hits_in_top_k_zeroes_both_metrics() {
        let ranked = ids(&["x1", "x2", "x3"]);
        let relevant = set(&["a"]);
        assert_eq!(ndcg_at_k(&ranked, &relevant, 10), 0.0);
        assert_eq!(f1_at_k(&ranked, &relevant, 10), 0.0);
    }

    #[test]
    fn ndcg_matches_brute_force_formula() {
        // a at rank 1, c at rank 3 relevant.
        let ranked = ids(&["a", "b", "c", "d"]);
        let relevant = set(&["a", "c"]);
        let dcg = 1.0 / 2.0_f64.log2() + 1.0 / 4.0_f64.log2();
        let idcg = 1.0 / 2.0_f64.log2() + 1.0 / 3.0_f64.log2();
        assert!((ndcg_at_k(&ranked, &relevant, 4) - dcg / idcg).abs() < 1e-12);
    }

    #[test]
    fn f1_at_k_matches_hand_computation() {
        let ranked = ids(&["a", "b", "c", "d", "e"]);
        let relevant = set(&["a", "c", "z"]);
        // hits=2, P=2/5, R=2/3.
        let p: f64 = 2.0 / 5.0;
        let r: f64 = 2.0 / 3.0;
        let expected = 2.0 * p * r / (p + r);
        assert!((f1_at_k(&ranked, &relevant, 5) - expected).abs() < 1e-12);
    }

    #[test]
    fn short_ranking_uses_available_depth() {
        let ranked = ids(&["a", "b"]);
        let relevant = set(&["a", "b"]);
        // Both found within depth-2: precision 1, recall 1.
        assert!((f1_at_k(&ranked, &relevant, 10) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paired_t_detects_a_shift() {
        let a = vec![2.0, 2.1, 1.9, 2.2, 2.0, 2.05];
        let b = vec![1.0, 1.2, 0.9, 1.1, 1.0, 1.05];
        let (t, p) = paired_t_test(&a, &b).unwrap();
        assert!(t > 5.0);
        assert!(p < 0.01);
        let (t2, p2) = paired_t_test(&a, &a).unwrap();
        assert_eq!(t2, 0.0);
        assert!((p2 - 1.0).abs() < 1e-12);
    }
}
