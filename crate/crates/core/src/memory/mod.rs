//! Agent memories: an episodic text store and a knowledge-graph store.

pub mod episodic;
pub mod kg;

pub use episodic::{EpisodicMemory, MemoryEntry, MemoryKind, RetrievalResult};
pub use kg::{
    build_graph, blended_score, path_count, pathsim, retrieve_similar, Entity, EntityKind,
    GraphOverlay, KnowledgeGraph, MetaPathInstance, RelationSchema, RetrievalParams,
    SimilarItem, SimilarityBreakdown, Triple,
};
