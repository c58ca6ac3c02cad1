//! Knowledge-graph memory with meta-path similarity and top-k retrieval.
//!
//! The base graph is built once from the train split and shared read-only;
//! each agent owns a private growth overlay layered on top. Similarity
//! between entities extends PathSim: twice the cross-path count over the sum
//! of the self-path counts, blended with user-item similarity (weight alpha)
//! and with semantic embedding similarity (node-embedding weight).
//!
//! Path instances are relation-labeled walks of bounded length with distinct
//! intermediate nodes; every triple is traversable in both directions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{latest_ratings, InteractionDataset, Interaction, ItemId};
use crate::error::{Error, Result};
use crate::gateway::{cosine, Embedder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    User,
    Item,
    Genre,
    Person,
}

impl EntityKind {
    fn label(&self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Item => "item",
            EntityKind::Genre => "genre",
            EntityKind::Person => "person",
        }
    }

    fn from_label(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(EntityKind::User),
            "item" => Ok(EntityKind::Item),
            "genre" => Ok(EntityKind::Genre),
            "person" => Ok(EntityKind::Person),
            other => Err(Error::validation(format!("unknown entity kind `{other}`"))),
        }
    }
}

/// A typed graph node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub key: String,
}

impl Entity {
    pub fn user(key: impl Into<String>) -> Self {
        Entity { kind: EntityKind::User, key: key.into() }
    }
    pub fn item(key: impl Into<String>) -> Self {
        Entity { kind: EntityKind::Item, key: key.into() }
    }
    pub fn genre(key: impl Into<String>) -> Self {
        Entity { kind: EntityKind::Genre, key: key.into() }
    }
    pub fn person(key: impl Into<String>) -> Self {
        Entity { kind: EntityKind::Person, key: key.into() }
    }
}

impl std::fmt::Display for Entity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.kind.label(), self.key)
    }
}

/// A directed labeled edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub head: Entity,
    pub relation: String,
    pub tail: Entity,
}

/// Declared relation vocabulary; edges carry only these labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationSchema {
    pub relations: Vec<String>,
}

impl Default for RelationSchema {
    fn default() -> Self {
        Self {
            relations: ["rated", "liked", "disliked", "has_genre"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

type NodeId = u32;
type RelId = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct EdgeRef {
    rel: RelId,
    to: NodeId,
    forward: bool,
}

/// Immutable base graph shared across agents.
pub struct KnowledgeGraph {
    nodes: Vec<Entity>,
    node_index: BTreeMap<Entity, NodeId>,
    relations: Vec<String>,
    rel_index: BTreeMap<String, RelId>,
    adjacency: Vec<Vec<EdgeRef>>,
    triples: BTreeSet<(NodeId, RelId, NodeId)>,
}

/// Per-agent growth overlay; the base graph is never mutated.
#[derive(Debug, Clone, Default)]
pub struct GraphOverlay {
    triples: BTreeSet<(NodeId, RelId, NodeId)>,
    adjacency: BTreeMap<NodeId, Vec<EdgeRef>>,
}

impl GraphOverlay {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }
}

impl KnowledgeGraph {
    pub fn new(schema: RelationSchema) -> Self {
        let mut relations = Vec::new();
        let mut rel_index = BTreeMap::new();
        for rel in schema.relations {
            if !rel_index.contains_key(&rel) {
                rel_index.insert(rel.clone(), relations.len() as RelId);
                relations.push(rel);
            }
        }
        Self {
            nodes: Vec::new(),
            node_index: BTreeMap::new(),
            relations,
            rel_index,
            adjacency: Vec::new(),
            triples: BTreeSet::new(),
        }
    }

    pub fn add_entity(&mut self, entity: Entity) -> NodeId {
        if let Some(&id) = self.node_index.get(&entity) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.node_index.insert(entity.clone(), id);
        self.nodes.push(entity);
        self.adjacency.push(Vec::new());
        id
    }

    pub fn node_id(&self, entity: &Entity) -> Result<NodeId> {
        self.node_index
            .get(entity)
            .copied()
            .ok_or_else(|| Error::validation(format!("unknown entity {entity}")))
    }

    pub fn contains_entity(&self, entity: &Entity) -> bool {
        self.node_index.contains_key(entity)
    }

    fn rel_id(&self, relation: &str) -> Result<RelId> {
        self.rel_index
            .get(relation)
            .copied()
            .ok_or_else(|| Error::validation(format!("unknown relation `{relation}`")))
    }

    /// Add a triple between already-registered entities.
    pub fn add_triple(&mut self, head: &Entity, relation: &str, tail: &Entity) -> Result<()> {
        let h = self.node_id(head)?;
        let t = self.node_id(tail)?;
        let r = self.rel_id(relation)?;
        if self.triples.insert((h, r, t)) {
            self.adjacency[h as usize].push(EdgeRef { rel: r, to: t, forward: true });
            self.adjacency[t as usize].push(EdgeRef { rel: r, to: h, forward: false });
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.nodes.iter()
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.triples.iter().map(|(h, r, t)| Triple {
            head: self.nodes[*h as usize].clone(),
            relation: self.relations[*r as usize].clone(),
            tail: self.nodes[*t as usize].clone(),
        })
    }

    pub fn contains_triple(&self, head: &Entity, relation: &str, tail: &Entity) -> bool {
        match (self.node_id(head), self.rel_id(relation), self.node_id(tail)) {
            (Ok(h), Ok(r), Ok(t)) => self.triples.contains(&(h, r, t)),
            _ => false,
        }
    }

    /// Node and triple counts per kind/label, for `kg stats`.
    pub fn stats(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for node in &self.nodes {
            *out.entry(format!("nodes.{}", node.kind.label())).or_insert(0) += 1;
        }
        for (_, r, _) in &self.triples {
            *out.entry(format!("edges.{}", self.relations[*r as usize])).or_insert(0) += 1;
        }
        out.insert("nodes.total".to_string(), self.nodes.len());
        out.insert("edges.total".to_string(), self.triples.len());
        out
    }

    /// Export as tab-separated `head relation tail` lines, entities rendered
    /// as `kind:key`.
    pub fn export_triples(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for triple in self.triples() {
            writeln!(file, "{}\t{}\t{}", triple.head, triple.relation, triple.tail)
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn import_triples(path: impl AsRef<Path>, schema: RelationSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut graph = Self::new(schema);
        let parse_entity = |s: &str| -> Result<Entity> {
            let (kind, key) = s.split_once(':').ok_or_else(|| {
                Error::validation(format!("entity `{s}` is not kind:key"))
            })?;
            Ok(Entity { kind: EntityKind::from_label(kind)?, key: key.to_string() })
        };
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno as u64 + 1,
                    message: "expected head\\trelation\\ttail".to_string(),
                });
            }
            let head = parse_entity(parts[0])?;
            let tail = parse_entity(parts[2])?;
            graph.add_entity(head.clone());
            graph.add_entity(tail.clone());
            graph.add_triple(&head, parts[1], &tail)?;
        }
        Ok(graph)
    }

    fn edges_of<'a>(&'a self, overlay: Option<&'a GraphOverlay>, node: NodeId) -> Vec<EdgeRef> {
        let mut out: Vec<EdgeRef> = self.adjacency[node as usize].clone();
        if let Some(ov) = overlay {
            if let Some(extra) = ov.adjacency.get(&node) {
                out.extend(extra.iter().copied());
            }
        }
        out
    }
}

/// Map a rating to its knowledge-graph relation: `liked` at 4 and above,
/// `disliked` at 2 and below, `rated` otherwise.
pub fn rating_relation(rating: u8) -> &'static str {
    if rating >= 4 {
        "liked"
    } else if rating <= 2 {
        "disliked"
    } else {
        "rated"
    }
}

/// Build the base graph from the train split only.
///
/// Every user in the dataset and every item (with its genres) is registered
/// as a node; user-item edges come exclusively from `train`, keeping
/// validation/test interactions out of the graph.
pub fn build_graph(
    train: &[Interaction],
    dataset: &InteractionDataset,
    schema: RelationSchema,
) -> Result<KnowledgeGraph> {
    let mut graph = KnowledgeGraph::new(schema);
    for user in dataset.users() {
        graph.add_entity(Entity::user(user));
    }
    for item in dataset.items() {
        let item_node = Entity::item(item.item_id.clone());
        graph.add_entity(item_node.clone());
        for genre in &item.genres {
            let genre_node = Entity::genre(genre.clone());
            graph.add_entity(genre_node.clone());
            graph.add_triple(&item_node, "has_genre", &genre_node)?;
        }
    }
    for ((user, item), interaction) in latest_ratings(train) {
        let head = Entity::user(user);
        let tail = Entity::item(item.clone());
        if !graph.contains_entity(&tail) {
            return Err(Error::validation(format!(
                "train interaction references unknown item {item}"
            )));
        }
        graph.add_triple(&head, rating_relation(interaction.rating), &tail)?;
    }
    Ok(graph)
}

/// Record an interaction in an agent's private overlay. Idempotent; the base
/// graph is never touched.
pub fn grow(
    graph: &KnowledgeGraph,
    overlay: &mut GraphOverlay,
    head: &Entity,
    relation: &str,
    tail: &Entity,
) -> Result<()> {
    let h = graph.node_id(head)?;
    let t = graph.node_id(tail)?;
    let r = graph.rel_id(relation)?;
    if graph.triples.contains(&(h, r, t)) || !overlay.triples.insert((h, r, t)) {
        return Ok(());
    }
    overlay
        .adjacency
        .entry(h)
        .or_default()
        .push(EdgeRef { rel: r, to: t, forward: true });
    overlay
        .adjacency
        .entry(t)
        .or_default()
        .push(EdgeRef { rel: r, to: h, forward: false });
    Ok(())
}

/// One relation step within a path, keeping traversal direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelStep {
    pub label: String,
    pub forward: bool,
}

/// A concrete path instance between two entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPathInstance {
    pub nodes: Vec<Entity>,
    pub relations: Vec<RelStep>,
}

impl MetaPathInstance {
    pub fn length(&self) -> usize {
        self.relations.len()
    }

    /// Render as a plain-text chain, e.g. `u1 →liked→ Heat ←liked← u2`.
    /// Reverse-direction steps keep the original label with flipped arrows.
    pub fn render(&self, name_of: &dyn Fn(&Entity) -> String) -> String {
        let mut out = name_of(&self.nodes[0]);
        for (step, node) in self.relations.iter().zip(self.nodes.iter().skip(1)) {
            if step.forward {
                out.push_str(&format!(" \u{2192}{}\u{2192} ", step.label));
            } else {
                out.push_str(&format!(" \u{2190}{}\u{2190} ", step.label));
            }
            out.push_str(&name_of(node));
        }
        out
    }
}

fn dfs_paths(
    graph: &KnowledgeGraph,
    overlay: Option<&GraphOverlay>,
    current: NodeId,
    target: NodeId,
    remaining: usize,
    visited: &mut Vec<NodeId>,
    trail: &mut Vec<EdgeRef>,
    emit: &mut dyn FnMut(&[NodeId], &[EdgeRef]),
) {
    if remaining == 0 {
        return;
    }
    for edge in graph.edges_of(overlay, current) {
        if edge.to == target {
            visited.push(edge.to);
            trail.push(edge);
            emit(visited, trail);
            trail.pop();
            visited.pop();
            // The walk ends on first arrival at the target; it cannot pass
            // through and return without revisiting the target node.
            continue;
        }
        if visited.contains(&edge.to) {
            continue;
        }
        visited.push(edge.to);
        trail.push(edge);
        dfs_paths(graph, overlay, edge.to, target, remaining - 1, visited, trail, emit);
        trail.pop();
        visited.pop();
    }
}

/// Count distinct path instances from `x` to `y` with length at most
/// `max_length`. For `x == y` this counts closed walks through distinct
/// intermediate nodes.
pub fn path_count(
    graph: &KnowledgeGraph,
    overlay: Option<&GraphOverlay>,
    x: &Entity,
    y: &Entity,
    max_length: usize,
) -> Result<u64> {
    let start = graph.node_id(x)?;
    let target = graph.node_id(y)?;
    let mut count = 0u64;
    let mut visited = vec![start];
    let mut trail = Vec::new();
    dfs_paths(
        graph,
        overlay,
        start,
        target,
        max_length,
        &mut visited,
        &mut trail,
        &mut |_, _| count += 1,
    );
    Ok(count)
}

/// Enumerate the path instances themselves, shortest first.
pub fn enumerate_paths(
    graph: &KnowledgeGraph,
    overlay: Option<&GraphOverlay>,
    x: &Entity,
    y: &Entity,
    max_length: usize,
    cap: usize,
) -> Result<Vec<MetaPathInstance>> {
    let start = graph.node_id(x)?;
    let target = graph.node_id(y)?;
    let mut paths = Vec::new();
    let mut visited = vec![start];
    let mut trail = Vec::new();
    dfs_paths(
        graph,
        overlay,
        start,
        target,
        max_length,
        &mut visited,
        &mut trail,
        &mut |nodes, edges| {
            paths.push(MetaPathInstance {
                nodes: nodes
                    .iter()
                    .map(|&n| graph.nodes[n as usize].clone())
                    .collect(),
                relations: edges
                    .iter()
                    .map(|e| RelStep {
                        label: graph.relations[e.rel as usize].clone(),
                        forward: e.forward,
                    })
                    .collect(),
            });
        },
    );
    paths.sort_by(|a, b| {
        a.length()
            .cmp(&b.length())
            .then_with(|| a.nodes.cmp(&b.nodes))
    });
    paths.truncate(cap);
    Ok(paths)
}

/// Extended PathSim: `2 |P_xy| / (|P_xx| + |P_yy|)` with counts bounded by
/// `max_length`.
pub fn pathsim(
    graph: &KnowledgeGraph,
    overlay: Option<&GraphOverlay>,
    x: &Entity,
    y: &Entity,
    max_length: usize,
) -> Result<f64> {
    let cross = path_count(graph, overlay, x, y, max_length)?;
    let self_x = path_count(graph, overlay, x, x, max_length)?;
    let self_y = path_count(graph, overlay, y, y, max_length)?;
    if self_x + self_y == 0 {
        return Err(Error::SimilarityUndefined {
            x: x.to_string(),
            y: y.to_string(),
        });
    }
    Ok(2.0 * cross as f64 / (self_x + self_y) as f64)
}

/// Similarity components for one (query, candidate) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    /// PathSim between query item and candidate.
    pub item_item: f64,
    /// PathSim between user and candidate.
    pub user_item: f64,
    /// `alpha * item_item + (1 - alpha) * user_item`.
    pub blended: f64,
    /// Cosine similarity of metadata embeddings.
    pub semantic: f64,
    /// `(1 - w) * blended + w * semantic`.
    pub final_score: f64,
    pub supporting_paths: Vec<MetaPathInstance>,
}

/// Pure arithmetic of the two blends; exposed for verification.
pub fn blend_scores(item_item: f64, user_item: f64, semantic: f64, alpha: f64, w: f64) -> (f64, f64) {
    let blended = alpha * item_item + (1.0 - alpha) * user_item;
    let final_score = (1.0 - w) * blended + w * semantic;
    (blended, final_score)
}

/// Knobs for graph retrieval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalParams {
    /// Weight of item-item vs user-item path similarity.
    pub alpha: f64,
    /// Weight of node (semantic) embeddings in the final score.
    pub embed_weight: f64,
    /// Path length bound for counting and candidate discovery.
    pub max_path_length: usize,
    /// Supporting paths attached per retrieved item.
    pub max_paths_per_result: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            embed_weight: 0.25,
            max_path_length: 3,
            max_paths_per_result: 3,
        }
    }
}

/// Semantic text of an item: title plus genre list.
pub fn item_semantic_text(dataset: &InteractionDataset, item_id: &str) -> String {
    match dataset.item(item_id) {
        Some(item) => {
            let genres: Vec<&str> = item.genres.iter().map(|g| g.as_str()).collect();
            format!("{} ({})", item.title, genres.join(", "))
        }
        None => item_id.to_string(),
    }
}

/// Full similarity breakdown for one candidate.
#[allow(clippy::too_many_arguments)]
pub fn blended_score(
    graph: &KnowledgeGraph,
    overlay: Option<&GraphOverlay>,
    user: &Entity,
    query: &Entity,
    candidate: &Entity,
    params: &RetrievalParams,
    embedder: &dyn Embedder,
    query_text: &str,
    candidate_text: &str,
) -> Result<SimilarityBreakdown> {
    let l = params.max_path_length;
    let item_item = pathsim(graph, overlay, query, candidate, l)?;
    let user_item = pathsim(graph, overlay, user, candidate, l)?;
    let semantic = cosine(&embedder.embed(query_text)?, &embedder.embed(candidate_text)?);
    let (blended, final_score) =
        blend_scores(item_item, user_item, semantic, params.alpha, params.embed_weight);
    let supporting_paths = enumerate_paths(
        graph,
        overlay,
        user,
        candidate,
        l,
        params.max_paths_per_result,
    )?;
    Ok(SimilarityBreakdown {
        item_item,
        user_item,
        blended,
        semantic,
        final_score,
        supporting_paths,
    })
}

/// One retrieved item with metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarItem {
    pub item_id: ItemId,
    pub title: String,
    /// Aggregate rating `R_i` over the train split, when the item has one.
    pub aggregated_rating: Option<f64>,
    pub breakdown: SimilarityBreakdown,
}

/// Retrieve the top-`k2` items similar to `query_item` for `user`.
///
/// Candidates are the items within `max_path_length` hops of the query item;
/// each is scored by brute force and ranked by final score descending, item
/// id ascending.
#[allow(clippy::too_many_arguments)]
pub fn retrieve_similar(
    graph: &KnowledgeGraph,
    overlay: Option<&GraphOverlay>,
    user_id: &str,
    query_item: &str,
    k2: usize,
    params: &RetrievalParams,
    embedder: &dyn Embedder,
    dataset: &InteractionDataset,
    aggregated: &BTreeMap<ItemId, f64>,
) -> Result<Vec<SimilarItem>> {
    let query = Entity::item(query_item);
    let start = graph.node_id(&query)?;
    let user = Entity::user(user_id);
    graph.node_id(&user)?;

    // BFS out to the hop bound to find candidate items.
    let mut frontier = vec![start];
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    seen.insert(start);
    let mut candidates: BTreeSet<NodeId> = BTreeSet::new();
    for _ in 0..params.max_path_length {
        let mut next = Vec::new();
        for node in frontier {
            for edge in graph.edges_of(overlay, node) {
                if seen.insert(edge.to) {
                    next.push(edge.to);
                    if graph.nodes[edge.to as usize].kind == EntityKind::Item {
                        candidates.insert(edge.to);
                    }
                }
            }
        }
        frontier = next;
    }

    let query_text = item_semantic_text(dataset, query_item);
    let mut results = Vec::new();
    for candidate_id in candidates {
        let candidate = graph.nodes[candidate_id as usize].clone();
        let candidate_text = item_semantic_text(dataset, &candidate.key);
        let breakdown = blended_score(
            graph,
            overlay,
            &user,
            &query,
            &candidate,
            params,
            embedder,
            &query_text,
            &candidate_text,
        )?;
        results.push(SimilarItem {
            title: dataset.title_of(&candidate.key).to_string(),
            aggregated_rating: aggregated.get(&candidate.key).copied(),
            item_id: candidate.key,
            breakdown,
        });
    }
    results.sort_by(|a, b| {
        b.breakdown
            .final_score
            .partial_cmp(&a.breakdown.final_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    results.truncate(k2);
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Item;
    use crate::gateway::HashEmbedder;

    fn ds_with_items(specs: &[(&str, &str, &[&str])], interactions: Vec<Interaction>) -> InteractionDataset {
        let items: Vec<Item> = specs
            .iter()
            .map(|(id, title, genres)| Item {
                item_id: id.to_string(),
                title: title.to_string(),
                genres: genres.iter().map(|g| g.to_string()).collect(),
                description: None,
                thumbnail_ref: None,
                review_count: None,
            })
            .collect();
        InteractionDataset::new(interactions, items).unwrap()
    }

    fn it(user: &str, item: &str, rating: u8, ts: i64) -> Interaction {
        Interaction {
            user_id: user.to_string(),
            item_id: item.to_string(),
            rating,
            timestamp: ts,
        }
    }

    #[test]
    fn build_maps_thresholds_to_edge_types() {
        let ds = ds_with_items(
            &[("i1", "A", &["Action"]), ("i2", "B", &["Drama"])],
            vec![it("u1", "i1", 5, 1), it("u1", "i2", 2, 2)],
        );
        let graph = build_graph(ds.interactions(), &ds, RelationSchema::default()).unwrap();
        assert!(graph.contains_triple(&Entity::user("u1"), "liked", &Entity::item("i1")));
        assert!(graph.contains_triple(&Entity::user("u1"), "disliked", &Entity::item("i2")));
        assert!(graph.contains_triple(&Entity::item("i1"), "has_genre", &Entity::genre("Action")));
        // rating 3 -> rated edge
        assert_eq!(rating_relation(3), "rated");
        assert_eq!(rating_relation(4), "liked");
        assert_eq!(rating_relation(2), "disliked");
    }

    #[test]
    fn test_split_edges_are_absent() {
        let ds = ds_with_items(
            &[("i1", "A", &["Action"]), ("i2", "B", &["Drama"])],
            vec![it("u1", "i1", 5, 1), it("u1", "i2", 4, 999)],
        );
        // Train on the first interaction only.
        let train = &ds.interactions()[..1];
        let graph = build_graph(train, &ds, RelationSchema::default()).unwrap();
        assert!(graph.contains_triple(&Entity::user("u1"), "liked", &Entity::item("i1")));
        assert!(!graph.contains_triple(&Entity::user("u1"), "liked", &Entity::item("i2")));
    }

    #[test]
    fn node_and_edge_counts_match_hand_enumeration() {
        // 3 users, 3 items, 2 genres.
        let ds = ds_with_items(
            &[
                ("i1", "A", &["Action"]),
                ("i2", "B", &["Action", "Drama"]),
                ("i3", "C", &["Drama"]),
            ],
            vec![
                it("u1", "i1", 5, 1),
                it("u1", "i2", 3, 2),
                it("u2", "i2", 1, 3),
                it("u3", "i3", 4, 4),
            ],
        );
        let graph = build_graph(ds.interactions(), &ds, RelationSchema::default()).unwrap();
        // Nodes: 3 users + 3 items + 2 genres.
        assert_eq!(graph.node_count(), 8);
        // Edges: 4 user-item + 4 has_genre (i1:1, i2:2, i3:1).
        assert_eq!(graph.triple_count(), 8);
        let stats = graph.stats();
        assert_eq!(stats["nodes.user"], 3);
        assert_eq!(stats["edges.has_genre"], 4);
        assert_eq!(stats["edges.liked"], 2);
        assert_eq!(stats["edges.rated"], 1);
        assert_eq!(stats["edges.disliked"], 1);
    }

    #[test]
    fn overlay_growth_is_isolated_and_idempotent() {
        let ds = ds_with_items(
            &[("i1", "A", &["Action"]), ("i9", "Z", &["Action"])],
            vec![it("u1", "i1", 5, 1)],
        );
        let graph = build_graph(ds.interactions(), &ds, RelationSchema::default()).unwrap();
        let mut overlay = GraphOverlay::new();
        let u = Entity::user("u1");
        let i9 = Entity::item("i9");
        grow(&graph, &mut overlay, &u, "liked", &i9).unwrap();
        assert_eq!(overlay.triple_count(), 1);
        grow(&graph, &mut overlay, &u, "liked", &i9).unwrap();
        assert_eq!(overlay.triple_count(), 1);
        assert!(!graph.contains_triple(&u, "liked", &i9));

        // Path queries see the overlay edge; the bare graph does not.
        let with = path_count(&graph, Some(&overlay), &u, &i9, 1).unwrap();
        let without = path_count(&graph, None, &u, &i9, 1).unwrap();
        assert_eq!(with, 1);
        assert_eq!(without, 0);

        // Growing an edge already in the base graph is a no-op.
        grow(&graph, &mut overlay, &u, "liked", &Entity::item("i1")).unwrap();
        assert_eq!(overlay.triple_count(), 1);

        // Unknown entity is rejected.
        assert!(grow(&graph, &mut overlay, &u, "liked", &Entity::item("nope")).is_err());
    }

    /// Hand-built co-actor shaped graph: x -acts_in-> z, y -acts_in-> z gives
    /// one length-2 path from x to y (x forward to z, backward to y).
    #[test]
    fn single_shared_neighbor_gives_one_length_two_path() {
        let schema = RelationSchema {
            relations: vec!["acts_in".to_string()],
        };
        let mut graph = KnowledgeGraph::new(schema);
        let x = Entity::person("x");
        let y = Entity::person("y");
        let z = Entity::item("z");
        graph.add_entity(x.clone());
        graph.add_entity(y.clone());
        graph.add_entity(z.clone());
        graph.add_triple(&x, "acts_in", &z).unwrap();
        graph.add_triple(&y, "acts_in", &z).unwrap();
        assert_eq!(path_count(&graph, None, &x, &y, 2).unwrap(), 1);
        // Disconnected pair counts zero.
        let w = Entity::person("w");
        let mut g2 = KnowledgeGraph::new(RelationSchema::default());
        g2.add_entity(x.clone());
        g2.add_entity(w.clone());
        assert_eq!(path_count(&g2, None, &x, &w, 3).unwrap(), 0);
    }

    #[test]
    fn pathsim_self_similarity_is_one() {
        let ds = ds_with_items(&[("i1", "A", &["Action"])], vec![it("u1", "i1", 5, 1)]);
        let graph = build_graph(ds.interactions(), &ds, RelationSchema::default()).unwrap();
        let x = Entity::item("i1");
        let self_paths = path_count(&graph, None, &x, &x, 3).unwrap();
        assert!(self_paths > 0);
        let s = pathsim(&graph, None, &x, &x, 3).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pathsim_is_undefined_without_self_paths() {
        let mut graph = KnowledgeGraph::new(RelationSchema::default());
        let a = Entity::item("a");
        let b = Entity::item("b");
        graph.add_entity(a.clone());
        graph.add_entity(b.clone());
        let err = pathsim(&graph, None, &a, &b, 3).unwrap_err();
        assert!(matches!(err, Error::SimilarityUndefined { .. }));
    }

    #[test]
    fn blend_arithmetic_matches_formula() {
        let (blended, final_score) = blend_scores(0.5, 0.25, 1.0, 0.8, 0.25);
        assert!((blended - 0.45).abs() < 1e-12);
        assert!((final_score - 0.5875).abs() < 1e-12);
        let (b2, f2) = blend_scores(0.5, 0.25, 1.0, 0.8, 0.0);
        assert_eq!(b2, f2);
    }

    #[test]
    fn retrieval_ranks_genre_sharing_item_first() {
        // Star: x shares a genre with i2 only; i3 sits in another genre
        // reachable only through the user.
        let ds = ds_with_items(
            &[
                ("x", "Query", &["Action"]),
                ("i2", "Close", &["Action"]),
                ("i3", "Far", &["Romance"]),
            ],
            vec![it("u1", "x", 5, 1), it("u1", "i3", 3, 2)],
        );
        let graph = build_graph(ds.interactions(), &ds, RelationSchema::default()).unwrap();
        let aggregated = crate::dataset::aggregated_ratings_table(ds.interactions());
        let embedder = HashEmbedder::default();
        let results = retrieve_similar(
            &graph,
            None,
            "u1",
            "x",
            3,
            &RetrievalParams::default(),
            &embedder,
            &ds,
            &aggregated,
        )
        .unwrap();
        assert!(!results.is_empty());
        assert_eq!(results[0].item_id, "i2");
        // Metadata carries the aggregate rating where one exists.
        let far = results.iter().find(|r| r.item_id == "i3").unwrap();
        assert_eq!(far.aggregated_rating, Some(3.0));
        // k2 larger than candidate count returns what exists.
        assert!(results.len() <= 3);
    }

    #[test]
    fn supporting_paths_render_as_text_chains() {
        let ds = ds_with_items(
            &[("x", "Query", &["Action"]), ("i2", "Close", &["Action"])],
            vec![it("u1", "x", 5, 1), it("u1", "i2", 4, 2)],
        );
        let graph = build_graph(ds.interactions(), &ds, RelationSchema::default()).unwrap();
        let paths = enumerate_paths(&graph, None, &Entity::user("u1"), &Entity::item("i2"), 3, 3)
            .unwrap();
        assert!(!paths.is_empty());
        let rendered = paths[0].render(&|e: &Entity| match e.kind {
            EntityKind::Item => ds.title_of(&e.key).to_string(),
            _ => e.key.clone(),
        });
        assert!(rendered.starts_with("u1 \u{2192}liked\u{2192} Close"), "{rendered}");
        // Shortest paths come first.
        for pair in paths.windows(2) {
            assert!(pair[0].length() <= pair[1].length());
        }
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kg.tsv");
        let ds = ds_with_items(
            &[("i1", "A", &["Action"]), ("i2", "B", &["Drama"])],
            vec![it("u1", "i1", 5, 1), it("u2", "i2", 1, 2)],
        );
        let graph = build_graph(ds.interactions(), &ds, RelationSchema::default()).unwrap();
        graph.export_triples(&path).unwrap();
        let back = KnowledgeGraph::import_triples(&path, RelationSchema::default()).unwrap();
        assert_eq!(back.triple_count(), graph.triple_count());
        let a: BTreeSet<String> = graph.triples().map(|t| format!("{} {} {}", t.head, t.relation, t.tail)).collect();
        let b: BTreeSet<String> = back.triples().map(|t| format!("{} {} {}", t.head, t.relation, t.tail)).collect();
        assert_eq!(a, b);
    }
}
