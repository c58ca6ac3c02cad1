//! Synthetic-user simulation harness for evaluating recommender systems.
//!
//! The crate builds LLM-backed synthetic users from interaction histories
//! (persona inference, episodic and knowledge-graph memories, a perception
//! pipeline, and a five-step decision loop) and runs them against pluggable
//! recommendation strategies, producing engagement metrics, ratings, and exit
//! interviews. A deterministic scripted provider makes every pipeline fully
//! runnable offline.

pub mod brain;
pub mod dataset;
pub mod error;
pub mod gateway;
pub mod memory;
pub mod perception;
pub mod persona;
pub mod sim;

pub use error::{Error, Result};
