//! Command-line entry point: dataset tooling, gateway probe, persona
//! matching, knowledge-graph queries, caption precomputation, simulation
//! runs, the task suite, and report formatting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use simuser_core::dataset::{
    aggregated_ratings_table, load_dataset_with, load_ratings, save_ratings, split_interactions,
    time_split, DatasetSplit, InteractionDataset, Interaction,
};
use simuser_core::error::{Error, Result};
use simuser_core::gateway::http::{HttpEmbedder, HttpProvider};
use simuser_core::gateway::{
    bindings, default_registry, CachedEmbedder, Embedder, Gateway, HashEmbedder, ScriptedProvider,
    TextProvider,
};
use simuser_core::memory::{build_graph, retrieve_similar, RelationSchema, RetrievalParams};
use simuser_core::perception::{caption_items, CaptionStore, DEFAULT_REMOVAL_THRESHOLD};
use simuser_core::persona::{generate_candidates, match_persona, summarize_tastes, PersonaVocab};
use simuser_core::sim::{
    self, build_environment, build_recommender, init_agents, load_coherence_pairs, load_reviews,
    run_simulation, select_users, write_run_dir, DisplayMode, RunConfig, SessionEnv,
};

#[derive(Parser)]
#[command(
    name = "simuser",
    about = "Synthetic-user evaluation harness for recommender systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset ingestion and splitting.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Provider connectivity checks.
    Gateway {
        #[command(subcommand)]
        command: GatewayCommand,
    },
    /// Persona inference.
    Persona {
        #[command(subcommand)]
        command: PersonaCommand,
    },
    /// Knowledge-graph queries.
    Kg {
        #[command(subcommand)]
        command: KgCommand,
    },
    /// Perception pipeline.
    Perceive {
        #[command(subcommand)]
        command: PerceiveCommand,
    },
    /// Run a full simulation from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one evaluation task from a config file.
    Task {
        #[command(subcommand)]
        command: TaskCommand,
    },
    /// Format a finished run directory.
    Report {
        run_dir: PathBuf,
        #[arg(long, default_value = "table")]
        format: String,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Parse and cross-check a ratings file and an items file.
    Validate {
        ratings: PathBuf,
        items: PathBuf,
        #[arg(long, default_value = "\t")]
        delimiter: String,
    },
    /// Time-based split into train/validation/test files.
    Split {
        ratings: PathBuf,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "\t")]
        delimiter: String,
    },
}

#[derive(Subcommand)]
enum GatewayCommand {
    /// One round-trip sanity call against the configured backend.
    Probe {
        #[arg(long)]
        script: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PersonaCommand {
    /// Phase 1 persona matching for one user or every user.
    Match(PersonaMatchArgs),
}

#[derive(Args)]
struct PersonaMatchArgs {
    /// Directory holding ratings.tsv and items.tsv.
    #[arg(long)]
    dataset: PathBuf,
    /// Restrict to one user id.
    #[arg(long)]
    user: Option<String>,
    #[arg(long, default_value_t = 3)]
    j: usize,
    #[arg(long, default_value_t = 10)]
    rho: usize,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value = "\t")]
    delimiter: String,
}

#[derive(Subcommand)]
enum KgCommand {
    /// Node and edge counts of the train-split graph.
    Stats {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long, default_value = "\t")]
        delimiter: String,
    },
    /// Top-k similar items for a user and query item.
    Similar {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
        #[arg(short, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 0.25)]
        embed_weight: f64,
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long, default_value = "\t")]
        delimiter: String,
    },
}

#[derive(Subcommand)]
enum PerceiveCommand {
    /// Precompute fact-checked captions for every item with a thumbnail.
    Captions {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value = "\t")]
        delimiter: String,
        #[arg(long, default_value = "movie")]
        item_type: String,
    },
}

#[derive(Subcommand)]
enum TaskCommand {
    Believability {
        #[arg(long)]
        config: PathBuf,
    },
    Rating {
        #[arg(long)]
        config: PathBuf,
    },
    Coherence {
        #[arg(long)]
        config: PathBuf,
    },
    Exposure {
        #[arg(long)]
        config: PathBuf,
    },
    Reviews {
        #[arg(long)]
        config: PathBuf,
    },
    OfflineCompare {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_fractions(raw: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::validation(format!("bad fractions `{raw}`")))?;
    if parts.len() != 3 {
        return Err(Error::validation("fractions must have three components"));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn delimiter_byte(raw: &str) -> Result<u8> {
    if raw.len() != 1 {
        return Err(Error::validation("delimiter must be a single byte"));
    }
    Ok(raw.as_bytes()[0])
}

fn make_provider(script: Option<&Path>) -> Result<Arc<dyn TextProvider>> {
    match script {
        Some(path) => Ok(Arc::new(ScriptedProvider::from_path(path)?)),
        None => Ok(Arc::new(HttpProvider::from_env()?)),
    }
}

fn make_embedder(live: bool, dim: usize, seed: u64) -> Result<Arc<dyn Embedder>> {
    if live && std::env::var("EMBED_ENDPOINT").is_ok() {
        Ok(Arc::new(CachedEmbedder::new(HttpEmbedder::from_env()?)))
    } else {
        Ok(Arc::new(CachedEmbedder::new(HashEmbedder::new(dim, seed))))
    }
}

fn make_gateway(
    script: Option<&Path>,
    m: usize,
    embed_dim: usize,
    embed_seed: u64,
) -> Result<Gateway> {
    let provider = make_provider(script)?;
    let embedder = make_embedder(script.is_none(), embed_dim, embed_seed)?;
    Ok(Gateway::new(default_registry(m), provider, embedder))
}

/// Dataset + split + gateway + agents, shared by run and task commands.
struct Workbench {
    config: RunConfig,
    dataset: InteractionDataset,
    split: DatasetSplit,
    gateway: Gateway,
    agents: Vec<sim::AgentSeed>,
}

fn open_workbench(config_path: &Path) -> Result<Workbench> {
    let config = RunConfig::load(config_path)?;
    let delimiter = config.delimiter_byte()?;
    let dataset = load_dataset_with(&config.ratings, &config.items, delimiter)?;
    let split = time_split(&dataset, config.fractions)?;
    let gateway = make_gateway(
        config.script.as_deref(),
        config.persona.m,
        config.embed_dim,
        config.embed_seed,
    )?;
    let users = match &config.users {
        Some(explicit) => explicit.clone(),
        None => select_users(&split, config.agents),
    };
    let agents = init_agents(
        &gateway,
        &dataset,
        &split,
        &config.persona,
        &users,
        config.session.seed,
    )?;
    Ok(Workbench {
        config,
        dataset,
        split,
        gateway,
        agents,
    })
}

fn cmd_dataset_validate(ratings: &Path, items: &Path, delimiter: &str) -> Result<()> {
    let dataset = load_dataset_with(ratings, items, delimiter_byte(delimiter)?)?;
    println!(
        "ok: {} interactions, {} items, {} users",
        dataset.interactions().len(),
        dataset.item_count(),
        dataset.users().len()
    );
    Ok(())
}

fn cmd_dataset_split(ratings: &Path, fractions: &str, out: &Path, delimiter: &str) -> Result<()> {
    let delim = delimiter_byte(delimiter)?;
    let interactions: Vec<Interaction> = load_ratings(ratings, delim)?;
    let split = split_interactions(&interactions, parse_fractions(fractions)?)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    save_ratings(out.join("train.tsv"), &split.train, delim)?;
    save_ratings(out.join("validation.tsv"), &split.validation, delim)?;
    save_ratings(out.join("test.tsv"), &split.test, delim)?;
    println!(
        "split {} interactions into {}/{}/{} (train/validation/test) under {}",
        interactions.len(),
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        out.display()
    );
    Ok(())
}

fn cmd_gateway_probe(script: Option<&Path>) -> Result<()> {
    let gateway = make_gateway(script, 5, 64, 0x5eed)?;
    let resp = gateway.complete("probe", &bindings(&[]))?;
    println!(
        "backend `{}` replied (attempt {}): {}",
        resp.backend_id,
        resp.attempt,
        resp.raw_text.trim()
    );
    let vector = gateway.embed("probe")?;
    println!("embedder produced a {}-dim vector", vector.dim());
    Ok(())
}

fn cmd_persona_match(args: &PersonaMatchArgs) -> Result<()> {
    let delim = delimiter_byte(&args.delimiter)?;
    let dataset = load_dataset_with(
        args.dataset.join("ratings.tsv"),
        args.dataset.join("items.tsv"),
        delim,
    )?;
    let split = time_split(&dataset, (0.8, 0.1, 0.1))?;
    let gateway = make_gateway(args.script.as_deref(), args.m, 64, 0x5eed)?;
    let aggregated = aggregated_ratings_table(&split.train);
    let vocab = PersonaVocab::default();

    let users: Vec<String> = match &args.user {
        Some(user) => vec![user.clone()],
        None => select_users(&split, usize::MAX),
    };
    let mut file = std::fs::File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    use std::io::Write;
    let mut written = 0;
    for user in users {
        let history: Vec<&Interaction> =
            split.train.iter().filter(|i| i.user_id == user).collect();
        if history.is_empty() {
            log::warn!("user {user} has no train history; skipped");
            continue;
        }
        let others: Vec<&Interaction> =
            split.train.iter().filter(|i| i.user_id != user).collect();
        let summary = summarize_tastes(&gateway, &history, &dataset, "movie", 50, args.seed)?;
        let candidates =
            generate_candidates(&gateway, &summary, &history, &dataset, "movie", args.m, &vocab)?;
        let rho = args.rho.min(history.len()).max(1);
        let (best, scores) = match_persona(
            &gateway,
            &candidates,
            &history,
            &others,
            &dataset,
            "movie",
            args.j,
            rho,
            args.seed,
        )?;
        let persona = simuser_core::persona::assemble_persona(
            &candidates[best],
            &summary,
            &history,
            &dataset,
            &aggregated,
        )?;
        let row = serde_json::json!({
            "user_id": user,
            "persona": persona,
            "selected_candidate": best,
            "candidate_scores": scores,
        });
        writeln!(file, "{row}").map_err(|e| Error::io(&args.out, e))?;
        written += 1;
    }
    println!("wrote {written} personas to {}", args.out.display());
    Ok(())
}

fn cmd_kg_stats(ratings: &Path, items: &Path, fractions: &str, delimiter: &str) -> Result<()> {
    let dataset = load_dataset_with(ratings, items, delimiter_byte(delimiter)?)?;
    let split = time_split(&dataset, parse_fractions(fractions)?)?;
    let graph = build_graph(&split.train, &dataset, RelationSchema::default())?;
    for (key, value) in graph.stats() {
        println!("{key}: {value}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_kg_similar(
    ratings: &Path,
    items: &Path,
    user: &str,
    item: &str,
    k: usize,
    alpha: f64,
    embed_weight: f64,
    fractions: &str,
    delimiter: &str,
) -> Result<()> {
    let dataset = load_dataset_with(ratings, items, delimiter_byte(delimiter)?)?;
    let split = time_split(&dataset, parse_fractions(fractions)?)?;
    let graph = build_graph(&split.train, &dataset, RelationSchema::default())?;
    let aggregated = aggregated_ratings_table(&split.train);
    let embedder = HashEmbedder::default();
    let params = RetrievalParams {
        alpha,
        embed_weight,
        ..RetrievalParams::default()
    };
    let results = retrieve_similar(
        &graph, None, user, item, k, &params, &embedder, &dataset, &aggregated,
    )?;
    if results.is_empty() {
        println!("no similar items within {} hops", params.max_path_length);
    }
    for (rank, similar) in results.iter().enumerate() {
        let rating = similar
            .aggregated_rating
            .map(|r| format!("{r:.2}"))
            .unwrap_or_else(|| "unrated".to_string());
        println!(
            "{}. {} (id {}, R_i {rating}) final {:.4} = blend(item {:.4}, user {:.4}) + semantic {:.4}",
            rank + 1,
            similar.title,
            similar.item_id,
            similar.breakdown.final_score,
            similar.breakdown.item_item,
            similar.breakdown.user_item,
            similar.breakdown.semantic,
        );
        for path in &similar.breakdown.supporting_paths {
            println!("     {}", path.render(&|e| e.key.clone()));
        }
    }
    Ok(())
}

fn cmd_perceive_captions(
    items_path: &Path,
    out: &Path,
    script: Option<&Path>,
    delimiter: &str,
    item_type: &str,
) -> Result<()> {
    let items = simuser_core::dataset::load_items(items_path, delimiter_byte(delimiter)?)?;
    let gateway = make_gateway(script, 5, 64, 0x5eed)?;
    let store = CaptionStore::new();
    let captioned = caption_items(
        &gateway,
        items.iter(),
        item_type,
        DEFAULT_REMOVAL_THRESHOLD,
        &store,
    )?;
    store.save_jsonl(out)?;
    println!(
        "captioned {captioned} of {} items into {}",
        items.len(),
        out.display()
    );
    Ok(())
}

fn cmd_run(config_path: &Path) -> Result<()> {
    let bench = open_workbench(config_path)?;
    let (graph, aggregated) = build_environment(&bench.dataset, &bench.split)?;
    let recommender = build_recommender(
        &bench.config.session.recommender,
        &bench.dataset,
        &bench.split.train,
        bench.config.session.seed,
        &bench.config.mf,
    )?;
    let captions = match &bench.config.session.captions {
        Some(path) => Some(CaptionStore::load_jsonl(path)?),
        None => None,
    };
    let env = SessionEnv {
        gateway: &bench.gateway,
        graph: &graph,
        dataset: &bench.dataset,
        split: &bench.split,
        aggregated: &aggregated,
        recommender: recommender.as_ref(),
        captions: captions.as_ref(),
        session: &bench.config.session,
        display: DisplayMode::Origin,
        reviews: None,
    };
    let report = run_simulation(&env, &bench.agents)?;
    let snapshot = serde_json::to_value(&bench.config)
        .map_err(|e| Error::validation(format!("serialize config: {e}")))?;
    write_run_dir(&bench.config.out_dir, &snapshot, &report)?;
    println!(
        "run complete: {} agents ({} failed) -> {}",
        report.traces.len(),
        report.failures.len(),
        bench.config.out_dir.display()
    );
    if let Some(metrics) = &report.metrics {
        println!(
            "P_view {:.3}  N_like {:.2}  P_like {:.3}  N_exit {:.2}  S_sat {:.2}",
            metrics.p_view, metrics.n_like, metrics.p_like, metrics.n_exit, metrics.s_sat
        );
    }
    Ok(())
}

fn print_task(result: &sim::TaskResult) {
    println!("task {}:", result.task);
    for (key, value) in &result.aggregates {
        println!("  {key}: {value:.6}");
    }
}

fn cmd_task(command: &TaskCommand) -> Result<()> {
    let config_path = match command {
        TaskCommand::Believability { config }
        | TaskCommand::Rating { config }
        | TaskCommand::Coherence { config }
        | TaskCommand::Exposure { config }
        | TaskCommand::Reviews { config }
        | TaskCommand::OfflineCompare { config } => config.clone(),
    };
    let bench = open_workbench(&config_path)?;
    let (graph, aggregated) = build_environment(&bench.dataset, &bench.split)?;
    let session = &bench.config.session;

    let result = match command {
        TaskCommand::Believability { .. } => sim::task_believability(
            &bench.gateway,
            &bench.dataset,
            &bench.split,
            &bench.agents,
            &bench.config.tasks.believability,
            &session.item_type,
            session.seed,
        )?,
        TaskCommand::Rating { .. } => sim::task_rating(
            &bench.gateway,
            &graph,
            &bench.dataset,
            &bench.split,
            &aggregated,
            &bench.agents,
            session,
            None,
        )?,
        TaskCommand::Coherence { .. } => {
            let pairs_path = bench.config.tasks.coherence.pairs.as_ref().ok_or_else(|| {
                Error::validation("coherence task needs tasks.coherence.pairs in the config")
            })?;
            let pairs = load_coherence_pairs(pairs_path)?;
            sim::task_coherence(&bench.gateway, &bench.agents, &pairs, &session.item_type)?
        }
        TaskCommand::Exposure { .. } => sim::task_exposure(
            &bench.gateway,
            &graph,
            &bench.dataset,
            &bench.split,
            &aggregated,
            &bench.agents,
            &bench.config.tasks.exposure,
            session,
        )?,
        TaskCommand::Reviews { .. } => {
            let reviews = match &bench.config.tasks.reviews.reviews {
                Some(path) => Some(load_reviews(path)?),
                None => None,
            };
            let recommender = build_recommender(
                &session.recommender,
                &bench.dataset,
                &bench.split.train,
                session.seed,
                &bench.config.mf,
            )?;
            sim::task_review_influence(
                &bench.gateway,
                &graph,
                &bench.dataset,
                &bench.split,
                &aggregated,
                &bench.agents,
                recommender.as_ref(),
                session,
                &bench.config.tasks.reviews.modes,
                reviews.as_ref(),
            )?
        }
        TaskCommand::OfflineCompare { .. } => {
            // Ranking comparison needs simulated labels: run the simulation
            // first with the configured recommender.
            let recommender = build_recommender(
                &session.recommender,
                &bench.dataset,
                &bench.split.train,
                session.seed,
                &bench.config.mf,
            )?;
            let env = SessionEnv {
                gateway: &bench.gateway,
                graph: &graph,
                dataset: &bench.dataset,
                split: &bench.split,
                aggregated: &aggregated,
                recommender: recommender.as_ref(),
                captions: None,
                session,
                display: DisplayMode::Origin,
                reviews: None,
            };
            let report = run_simulation(&env, &bench.agents)?;
            sim::task_offline_compare(
                &bench.dataset,
                &bench.split,
                &report,
                &bench.config.tasks.offline,
                &bench.config.mf,
                session.seed,
            )?
        }
    };
    sim::append_task_result(&bench.config.out_dir, &result)?;
    print_task(&result);
    println!(
        "appended to {}",
        bench.config.out_dir.join("task_results.json").display()
    );
    Ok(())
}

fn cmd_report(run_dir: &Path, format: &str) -> Result<()> {
    let metrics_path = run_dir.join("metrics.json");
    let metrics: serde_json::Value = if metrics_path.exists() {
        serde_json::from_str(
            &std::fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?,
        )
        .map_err(|e| Error::validation(format!("bad metrics.json: {e}")))?
    } else {
        serde_json::Value::Null
    };
    let tasks_path = run_dir.join("task_results.json");
    let tasks: serde_json::Value = if tasks_path.exists() {
        serde_json::from_str(
            &std::fs::read_to_string(&tasks_path).map_err(|e| Error::io(&tasks_path, e))?,
        )
        .map_err(|e| Error::validation(format!("bad task_results.json: {e}")))?
    } else {
        serde_json::Value::Null
    };

    let mut rows: BTreeMap<String, f64> = BTreeMap::new();
    if let Some(m) = metrics.get("metrics").and_then(|m| m.as_object()) {
        for (key, value) in m {
            if let Some(v) = value.as_f64() {
                rows.insert(format!("engagement.{key}"), v);
            }
        }
    }
    if let Some(task_map) = tasks.as_object() {
        for (task, body) in task_map {
            if let Some(aggregates) = body.get("aggregates").and_then(|a| a.as_object()) {
                for (key, value) in aggregates {
                    if let Some(v) = value.as_f64() {
                        rows.insert(format!("{task}.{key}"), v);
                    }
                }
            }
        }
    }

    match format {
        "json" => {
            let combined = serde_json::json!({"metrics": metrics, "tasks": tasks});
            println!("{}", serde_json::to_string_pretty(&combined).unwrap());
        }
        "plot-data" => {
            println!("metric,value");
            for (key, value) in rows {
                println!("{key},{value}");
            }
        }
        "table" => {
            let width = rows.keys().map(|k| k.len()).max().unwrap_or(10);
            for (key, value) in rows {
                println!("{key:width$}  {value:>12.6}");
            }
        }
        other => {
            return Err(Error::validation(format!(
                "unknown format `{other}` (expected table | json | plot-data)"
            )));
        }
    }
    Ok(())
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Dataset { command } => match command {
            DatasetCommand::Validate {
                ratings,
                items,
                delimiter,
            } => cmd_dataset_validate(ratings, items, delimiter),
            DatasetCommand::Split {
                ratings,
                fractions,
                out,
                delimiter,
            } => cmd_dataset_split(ratings, fractions, out, delimiter),
        },
        Command::Gateway { command } => match command {
            GatewayCommand::Probe { script } => cmd_gateway_probe(script.as_deref()),
        },
        Command::Persona { command } => match command {
            PersonaCommand::Match(args) => cmd_persona_match(args),
        },
        Command::Kg { command } => match command {
            KgCommand::Stats {
                ratings,
                items,
                fractions,
                delimiter,
            } => cmd_kg_stats(ratings, items, fractions, delimiter),
            KgCommand::Similar {
                ratings,
                items,
                user,
                item,
                k,
                alpha,
                embed_weight,
                fractions,
                delimiter,
            } => cmd_kg_similar(
                ratings,
                items,
                user,
                item,
                *k,
                *alpha,
                *embed_weight,
                fractions,
                delimiter,
            ),
        },
        Command::Perceive { command } => match command {
            PerceiveCommand::Captions {
                items,
                out,
                script,
                delimiter,
                item_type,
            } => cmd_perceive_captions(items, out, script.as_deref(), delimiter, item_type),
        },
        Command::Run { config } => cmd_run(config),
        Command::Task { command } => cmd_task(command),
        Command::Report { run_dir, format } => cmd_report(run_dir, format),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
