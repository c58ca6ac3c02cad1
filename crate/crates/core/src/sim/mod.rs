//! Simulation environment and experiment harness: page-based sessions,
//! baseline recommenders, engagement metrics, and the task suite.

pub mod config;
pub mod metrics;
pub mod recommender;
pub mod run;
pub mod tasks;

pub use config::{
    BelievabilityConfig, CoherenceConfig, ExposureConfig, MfConfig, OfflineCompareConfig,
    PersonaConfig, PersonaMode, ReviewInfluenceConfig, RunConfig, SessionConfig, TaskConfig,
};
pub use metrics::{
    compute_engagement, f1_at_k, mae, ndcg_at_k, paired_t_test, rmse, AgentEngagement,
    ClassificationStats, EngagementMetrics, LIKE_THRESHOLD,
};
pub use recommender::{
    build_recommender, train_mf, MfModel, MfRecommender, PopRecommender, RandomRecommender,
    Recommender,
};
pub use run::{
    build_environment, derived_persona, init_agents, leakage_violations, load_reviews,
    load_traces, matched_persona, run_agent_session, run_simulation, select_users, write_run_dir,
    AgentFailure, AgentSeed, AgentTrace, DisplayMode, Interview, PageTrace, ReviewTable,
    SessionEnv, SimulationReport,
};
pub use tasks::{
    append_task_result, load_coherence_pairs, task_believability, task_coherence, task_exposure,
    task_offline_compare, task_rating, task_review_influence, CoherencePair, TaskResult,
};
