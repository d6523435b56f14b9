mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use gqlforge_core::corpus::{compute_stats, read_dataset, to_jsonl, Dialogue};
use gqlforge_core::da::{infer_dataset, DaCollaborators};
use gqlforge_core::eval::{analyze_dataset, compute_metrics, Breakdown, PredictionSet};
use gqlforge_core::fixture;
use gqlforge_core::forge::{forge_batch, Collaborators};
use gqlforge_core::graph::{GraphSchema, PropertyGraph};
use gqlforge_core::quality::{
    filter_embedding, filter_masked_gql, Embedder, FilterReport, HashEmbedder, RemoteEmbedder,
};
use gqlforge_core::textgen::{Lexicon, MockGenerator, PromptTemplates, RemoteChatGenerator, TextGenerator};
use serde_json::json;

use config::{Align, EmbedderKind, GeneratorKind, RunConfig};

/// Multi-turn GQL dialogue forging, filtering and evaluation.
#[derive(Parser)]
#[command(name = "forge", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    #[arg(long, global = true)]
    templates_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    rounds_min: Option<u32>,
    #[arg(long, global = true)]
    rounds_max: Option<u32>,
    #[arg(long, global = true)]
    retry_budget: Option<u32>,
    #[arg(long, global = true)]
    tau_sem: Option<f64>,
    #[arg(long, global = true)]
    dedup_threshold: Option<f64>,
    #[arg(long, global = true)]
    masked_overlap_limit: Option<usize>,
    #[arg(long, global = true)]
    repair_attempts: Option<u32>,
    #[arg(long, global = true, value_enum)]
    generator: Option<GeneratorKind>,
    #[arg(long, global = true, value_enum)]
    embedder: Option<EmbedderKind>,
    /// Mock generator and fallback embedder; no network traffic.
    #[arg(long, global = true)]
    mock: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Forge dialogues into a JSONL dataset.
    Generate {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop near-duplicate dialogues (masked templates, then embeddings).
    Filter {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Where the kept dialogues go.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where the JSON report goes; standard output otherwise.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score predictions against a gold dataset.
    Evaluate {
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Prediction records, or a dataset whose queries are taken as predictions.
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long, default_value = "none")]
        breakdown: Breakdown,
        #[arg(long)]
        json: bool,
    },
    /// Predict queries for a dataset with the decomposition-alignment baseline.
    Infer {
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        align: Option<Align>,
    },
    /// Dataset statistics and keyword analytics.
    Stats {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Invalid(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("FORGE_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    let p = &mut c.paths;
    p.schema = common.schema.clone().or(p.schema.take());
    p.graph = common.graph.clone().or(p.graph.take());
    p.templates_dir = common.templates_dir.clone().or(p.templates_dir.take());
    c.seed = common.seed.unwrap_or(c.seed);
    c.workers = common.workers.unwrap_or(c.workers);
    c.rounds_min = common.rounds_min.unwrap_or(c.rounds_min);
    c.rounds_max = common.rounds_max.unwrap_or(c.rounds_max);
    c.retry_budget = common.retry_budget.unwrap_or(c.retry_budget);
    let q = &mut c.quality;
    q.tau_sem = common.tau_sem.unwrap_or(q.tau_sem);
    q.dedup_threshold = common.dedup_threshold.unwrap_or(q.dedup_threshold);
    q.masked_overlap_limit = common.masked_overlap_limit.unwrap_or(q.masked_overlap_limit);
    q.repair_attempts = common.repair_attempts.unwrap_or(q.repair_attempts);
    c.generator = common.generator.unwrap_or(c.generator);
    c.embedder = common.embedder.unwrap_or(c.embedder);
    if common.mock {
        c.generator = GeneratorKind::Mock;
        c.embedder = EmbedderKind::Fallback;
    }
    c.validate().map_err(Failure::Usage)?;
    Ok(c)
}

struct Env {
    graph: PropertyGraph,
    templates: PromptTemplates,
    generator: Box<dyn TextGenerator>,
    embedder: Box<dyn Embedder>,
}

fn load_graph(c: &RunConfig) -> anyhow::Result<PropertyGraph> {
    match (&c.paths.schema, &c.paths.graph) {
        (Some(s), Some(g)) => {
            let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
            let schema = GraphSchema::from_json_str(&read(s)?).with_context(|| format!("schema {}", s.display()))?;
            PropertyGraph::from_json_str(&schema, &read(g)?).with_context(|| format!("graph {}", g.display()))
        }
        _ => Ok(fixture::graph()),
    }
}

fn environment(c: &RunConfig) -> anyhow::Result<Env> {
    let graph = load_graph(c)?;
    let templates = match &c.paths.templates_dir {
        Some(d) => PromptTemplates::from_dir(d).with_context(|| format!("templates {}", d.display()))?,
        None => PromptTemplates::builtin(),
    };
    let generator: Box<dyn TextGenerator> = match c.generator {
        GeneratorKind::Mock => Box::new(MockGenerator::for_graph(&graph)),
        GeneratorKind::Remote => Box::new(RemoteChatGenerator::new(c.endpoint.clone())),
    };
    let embedder: Box<dyn Embedder> = match c.embedder {
        EmbedderKind::Fallback => Box::new(HashEmbedder),
        EmbedderKind::Remote => Box::new(RemoteEmbedder::new(c.endpoint.clone())),
    };
    Ok(Env { graph, templates, generator, embedder })
}

fn required(flag: Option<&PathBuf>, config: Option<&PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    flag.or(config).cloned().ok_or_else(|| usage(format!("missing --{name} (or its config path)")))
}

fn identity(p: &Path) -> Option<PathBuf> {
    if let Ok(c) = p.canonicalize() {
        return Some(c);
    }
    let parent = match p.parent() {
        Some(x) if !x.as_os_str().is_empty() => x.canonicalize().ok()?,
        _ => std::env::current_dir().ok()?,
    };
    Some(parent.join(p.file_name()?))
}

/// Refuses to write over any input of the command.
fn guard(out: &Path, inputs: &[&Path]) -> Result<(), Failure> {
    let o = identity(out);
    for i in inputs {
        if o.is_some() && o == identity(i) {
            return Err(usage(format!("output {} would overwrite an input", out.display())));
        }
    }
    Ok(())
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing standard output"),
    }
}

fn dataset(path: &Path) -> anyhow::Result<Vec<Dialogue>> {
    read_dataset(path).with_context(|| format!("dataset {}", path.display()))
}

fn inputs(c: &RunConfig) -> Vec<&Path> {
    [&c.paths.schema, &c.paths.graph].into_iter().flatten().map(|p| p.as_path()).collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = resolve(&cli.common)?;
    match cli.command {
        Command::Generate { count, out } => {
            let out = out.or(c.paths.output.clone());
            if let Some(o) = &out {
                guard(o, &inputs(&c))?;
            }
            let env = environment(&c)?;
            tracing::info!(count, seed = c.seed, workers = c.workers, generator = ?c.generator, "forging");
            let collab = Collaborators {
                generator: env.generator.as_ref(),
                embedder: env.embedder.as_ref(),
                templates: &env.templates,
            };
            let batch = forge_batch(count, &env.graph, &collab, &c.forge()).map_err(usage)?;
            write_out(out.as_deref(), &to_jsonl(&batch.dialogues))?;
            for (id, why) in &batch.abandoned {
                eprintln!("abandoned {id}: {why}");
            }
            eprintln!("forged {} of {count} dialogues", batch.dialogues.len());
            if count > 0 && batch.dialogues.is_empty() {
                return Err(Failure::Invalid(anyhow!("every dialogue was abandoned")));
            }
        }
        Command::Filter { dataset: path, out, report } => {
            let path = required(path.as_ref(), c.paths.dataset.as_ref(), "dataset")?;
            let out = out.or(c.paths.output.clone());
            let mut ins = inputs(&c);
            ins.push(&path);
            for o in out.iter().chain(report.iter()) {
                guard(o, &ins)?;
            }
            let ds = dataset(&path)?;
            let env = environment(&c)?;
            let q = &c.quality;
            let masked = filter_masked_gql(&ds, env.graph.schema(), q.masked_overlap_limit, q.mask_mode)
                .context("masked-template filter")?;
            let stage = masked.apply(&ds);
            let similar =
                filter_embedding(&stage, env.embedder.as_ref(), q.dedup_threshold).context("embedding filter")?;
            let kept = similar.apply(&stage);
            let mut discarded = masked.discarded;
            discarded.extend(similar.discarded);
            let combined = FilterReport { kept: similar.kept, discarded };
            if let Some(o) = &out {
                write_out(Some(o), &to_jsonl(&kept))?;
            }
            let text = serde_json::to_string_pretty(&combined).context("serializing report")? + "\n";
            write_out(report.as_deref(), &text)?;
            eprintln!("kept {} of {} dialogues", kept.len(), ds.len());
        }
        Command::Evaluate { gold, pred, breakdown, json } => {
            let gold = required(gold.as_ref(), c.paths.dataset.as_ref(), "gold")?;
            let pred = required(pred.as_ref(), c.paths.predictions.as_ref(), "pred")?;
            let gold_ds = dataset(&gold)?;
            let text = std::fs::read_to_string(&pred).with_context(|| format!("reading {}", pred.display()))?;
            let preds = match PredictionSet::from_jsonl(&text) {
                Ok(p) => p,
                Err(first) => match gqlforge_core::corpus::from_jsonl(&text) {
                    Ok(ds) => PredictionSet::from_gold(&ds),
                    Err(_) => return Err(anyhow!(first).context(format!("predictions {}", pred.display())).into()),
                },
            };
            let graph = load_graph(&c)?;
            let report = compute_metrics(&preds, &gold_ds, &graph).context("computing metrics")?;
            let text = if json {
                serde_json::to_string_pretty(&report).context("serializing report")? + "\n"
            } else {
                report.render_table(breakdown)
            };
            write_out(None, &text)?;
        }
        Command::Infer { gold, out, align } => {
            let gold = required(gold.as_ref(), c.paths.dataset.as_ref(), "gold")?;
            let out = out.or(c.paths.predictions.clone());
            let mut ins = inputs(&c);
            ins.push(&gold);
            if let Some(o) = &out {
                guard(o, &ins)?;
            }
            let c = RunConfig { align: align.unwrap_or(c.align), ..c };
            let ds = dataset(&gold)?;
            let env = environment(&c)?;
            tracing::info!(dialogues = ds.len(), align = ?c.align, "inferring");
            let lexicon = Lexicon::from_graph(&env.graph);
            let collab = DaCollaborators {
                generator: env.generator.as_ref(),
                embedder: env.embedder.as_ref(),
                templates: &env.templates,
                lexicon: &lexicon,
            };
            let (preds, stats) = infer_dataset(&ds, &env.graph, &collab, &c.da()).context("inference")?;
            write_out(out.as_deref(), &preds.to_jsonl())?;
            eprintln!("{}", serde_json::to_string(&stats).context("serializing stats")?);
        }
        Command::Stats { dataset: path, json } => {
            let path = required(path.as_ref(), c.paths.dataset.as_ref(), "dataset")?;
            let ds = dataset(&path)?;
            let stats = compute_stats(&ds);
            let analytics = analyze_dataset(&ds);
            let text = if json {
                serde_json::to_string_pretty(&json!({ "stats": stats, "analytics": analytics }))
                    .context("serializing")?
                    + "\n"
            } else {
                format!(
                    "dialogues {}\ngqls {}\nentities {}\nrelations {}\navg turns {:.2}\navg entities {:.2}\navg relations {:.2}\n\n{}",
                    stats.data_points,
                    stats.total_gqls,
                    stats.total_entities,
                    stats.total_relations,
                    stats.avg_turns,
                    stats.avg_entities,
                    stats.avg_relations,
                    analytics.render_table()
                )
            };
            write_out(None, &text)?;
        }
    }
    Ok(())
}
