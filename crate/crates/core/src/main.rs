//! Command-line entry point: verify | ingest | bench | inspect.

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use claimcheck::backends::{BackendHandle, CallLog, LoggedBackend};
use claimcheck::config::{BackendKind, CliOverrides, ConfigError, FileConfig, Settings};
use claimcheck::debate::{BackendCallCounts, DebateEngine, DebaterAgent, JudgeAgent, Transcript};
use claimcheck::domain::{AgentId, Claim};
use claimcheck::harness::{
    run_benchmark, BenchResources, DatasetFormat, DatasetSpec, RunSettings,
};
use claimcheck::tools::VectorIndex;

#[derive(Parser)]
#[command(
    name = "claimcheck",
    version,
    about = "Tool-augmented multi-agent debate engine for claim verification"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Backend: mock or openai-compat.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Script JSON for the mock backend.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
    /// Vector index file for RAG agents.
    #[arg(long, global = true)]
    index: Option<PathBuf>,
    /// Directory of canned search results for offline search agents.
    #[arg(long, global = true)]
    search_fixtures: Option<PathBuf>,
    /// Dataset JSONL path (bench).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Dataset format: fever-jsonl or generic-jsonl.
    #[arg(long, global = true)]
    dataset_format: Option<String>,
    /// Claims sampled per run (bench).
    #[arg(long, global = true)]
    sample_size: Option<usize>,
    /// Sampling / bootstrap seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Agent combination, e.g. rag+search.
    #[arg(long, global = true)]
    combo: Option<String>,
    /// Round cap T.
    #[arg(long, global = true)]
    rounds: Option<u32>,
    /// Retrieval depth k.
    #[arg(long, global = true)]
    retrieval_k: Option<usize>,
    /// Faithfulness gate threshold.
    #[arg(long, global = true)]
    faithfulness_min: Option<f64>,
    /// Answer-relevance gate threshold.
    #[arg(long, global = true)]
    relevance_min: Option<f64>,
    /// Ablation: use the claim text as the retrieval query in every round.
    #[arg(long, global = true)]
    no_query_formulation: bool,
    /// Ablation: skip stability scoring; rounds gate on agreement alone.
    #[arg(long, global = true)]
    no_scoring_feedback: bool,
    /// Worker cap for benchmark runs.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Directory for reports, transcripts, and logs.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one debate over a claim and print the outcome.
    Verify { claim: String },
    /// Chunk, embed, and index a corpus (JSONL of {"id", "text"}).
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        index_out: PathBuf,
    },
    /// Run a benchmark over a dataset and report accuracy with a CI.
    Bench,
    /// Pretty-print a transcript JSON file.
    Inspect { transcript: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let settings = match resolve_settings(&cli.global) {
        Ok(settings) => settings,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Verify { claim } => cmd_verify(&settings, claim),
        Command::Ingest { corpus, index_out } => cmd_ingest(&settings, corpus, index_out),
        Command::Bench => cmd_bench(&settings),
        Command::Inspect { transcript } => cmd_inspect(transcript),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.downcast_ref::<ConfigError>().is_some() {
                2
            } else {
                1
            })
        }
    }
}

fn resolve_settings(global: &GlobalArgs) -> Result<Settings, ConfigError> {
    let file = match &global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let overrides = CliOverrides {
        backend: global
            .backend
            .as_deref()
            .map(str::parse::<BackendKind>)
            .transpose()?,
        script: global.script.clone(),
        index_path: global.index.clone(),
        search_fixtures: global.search_fixtures.clone(),
        dataset: global.dataset.clone(),
        dataset_format: global
            .dataset_format
            .as_deref()
            .map(str::parse::<DatasetFormat>)
            .transpose()
            .map_err(|e| ConfigError::Bad(e.to_string()))?,
        sample_size: global.sample_size,
        seed: global.seed,
        combo: global.combo.clone(),
        rounds: global.rounds,
        retrieval_k: global.retrieval_k,
        faithfulness_min: global.faithfulness_min,
        relevance_min: global.relevance_min,
        no_query_formulation: global.no_query_formulation,
        no_scoring_feedback: global.no_scoring_feedback,
        parallelism: global.parallelism,
        out_dir: global.out_dir.clone(),
    };
    Settings::resolve(file, &overrides)
}

fn build_agents(
    settings: &Settings,
    resources: &BenchResources,
    backend: BackendHandle,
) -> anyhow::Result<[DebaterAgent; 2]> {
    let kinds = settings.combo.kinds();
    let names = settings.combo.names();
    Ok([
        DebaterAgent::new(
            AgentId::new(kinds[0], names[0].clone()),
            resources.tool_for(kinds[0])?,
            backend.clone(),
        ),
        DebaterAgent::new(
            AgentId::new(kinds[1], names[1].clone()),
            resources.tool_for(kinds[1])?,
            backend,
        ),
    ])
}

fn build_resources(settings: &Settings) -> anyhow::Result<BenchResources> {
    Ok(BenchResources {
        backend: settings.build_backend()?,
        index: settings.build_index()?,
        search: settings.build_search()?,
        parallelism: settings.parallelism,
    })
}

fn cmd_verify(settings: &Settings, claim_text: &str) -> anyhow::Result<ExitCode> {
    let resources = build_resources(settings)?;
    let claim = Claim::new("cli", claim_text)?;
    let engine = DebateEngine::new(settings.debate.clone());
    let log = CallLog::new();
    let logged: BackendHandle = Arc::new(LoggedBackend::new(resources.backend.clone(), log.clone()));
    let agents = build_agents(settings, &resources, logged.clone())?;
    let judge = JudgeAgent::new("judge", logged);

    let start = std::time::Instant::now();
    let result = engine.run_debate(claim, &agents, &judge);
    let wall_ms = if settings.debate.record_timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let counts = BackendCallCounts {
        chat: log.chat_calls(),
        embed: log.embed_calls(),
    };

    std::fs::create_dir_all(&settings.out_dir)?;
    let transcript_path = settings.out_dir.join("transcript.json");
    match result {
        Ok(outcome) => {
            let transcript =
                Transcript::from_outcome(&outcome, &settings.debate, wall_ms, counts);
            std::fs::write(&transcript_path, transcript.to_json()?)?;
            println!(
                "verdict: {} ({} at round {})",
                outcome.verdict.label(),
                outcome.termination,
                outcome.terminated_at_round
            );
            print_round_table(&transcript);
            println!("transcript: {}", transcript_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(aborted) => {
            let transcript =
                Transcript::from_aborted(&aborted, &settings.debate, wall_ms, counts);
            std::fs::write(&transcript_path, transcript.to_json()?)?;
            eprintln!("debate aborted: {}", aborted.error);
            eprintln!("partial transcript: {}", transcript_path.display());
            Ok(ExitCode::from(1))
        }
    }
}

fn print_round_table(transcript: &Transcript) {
    println!("round  agent            verdict          faithfulness  answer_relevance");
    for record in &transcript.rounds {
        for response in &record.responses {
            let (f, ar) = response
                .stability
                .as_ref()
                .map(|s| (format!("{:.4}", s.faithfulness), format!("{:.4}", s.answer_relevance)))
                .unwrap_or_else(|| ("-".into(), "-".into()));
            println!(
                "{:<6} {:<16} {:<16} {:<13} {}",
                record.round,
                response.agent.name,
                response.verdict.label(),
                f,
                ar
            );
        }
    }
}

fn cmd_ingest(
    settings: &Settings,
    corpus: &Path,
    index_out: &Path,
) -> anyhow::Result<ExitCode> {
    let backend = settings.build_backend()?;
    let file = std::fs::File::open(corpus)
        .map_err(|e| ConfigError::Bad(format!("cannot read corpus {corpus:?}: {e}")))?;
    let mut documents = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| ConfigError::Bad(format!("bad corpus line: {e}")))?;
        let id = value
            .get("id")
            .map(|v| match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .ok_or_else(|| ConfigError::Bad("corpus line missing \"id\"".into()))?;
        let text = value
            .get("text")
            .and_then(|v| v.as_str())
            .ok_or_else(|| ConfigError::Bad("corpus line missing \"text\"".into()))?
            .to_string();
        documents.push((id, text));
    }
    let index = VectorIndex::ingest(
        &documents,
        settings.chunk_chars,
        settings.overlap_chars,
        backend.as_ref(),
    )?;
    if let Some(parent) = index_out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    index.save(index_out)?;
    println!(
        "indexed {} chunks (dim {}) -> {}",
        index.chunks.len(),
        index.dim,
        index_out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(settings: &Settings) -> anyhow::Result<ExitCode> {
    let dataset = settings
        .dataset
        .clone()
        .ok_or_else(|| ConfigError::Bad("bench requires --dataset".into()))?;
    let resources = build_resources(settings)?;
    let spec = DatasetSpec {
        name: settings.dataset_name.clone(),
        path: dataset.clone(),
        format: settings.dataset_format,
        label_set: settings.debate.label_set.clone(),
        sample_size: settings.sample_size,
        seed: settings.seed,
    };
    let run_settings = RunSettings {
        dataset: settings.dataset_name.clone(),
        dataset_path: dataset.display().to_string(),
        format: settings.dataset_format,
        combo: settings.combo.to_string(),
        sample_size: settings.sample_size,
        seed: settings.seed,
        backend: match settings.backend_kind {
            BackendKind::Mock => "mock".to_string(),
            BackendKind::OpenaiCompat => "openai-compat".to_string(),
        },
        parallelism: settings.parallelism,
        resamples: settings.resamples,
        ci_level: settings.ci_level,
    };
    std::fs::create_dir_all(&settings.out_dir)?;
    let report = run_benchmark(
        &spec,
        &settings.debate,
        settings.combo,
        &resources,
        &run_settings,
        Some(&settings.out_dir),
    )?;
    let aborted = report.per_claim.iter().filter(|c| c.aborted).count();
    println!(
        "accuracy {:.2} over {} claims, {:.0}% CI ({:.2}, {:.2})",
        report.accuracy,
        report.per_claim.len(),
        report.settings.ci_level * 100.0,
        report.ci.0,
        report.ci.1
    );
    if aborted > 0 {
        println!("aborted debates (scored incorrect): {aborted}");
    }
    println!("report: {}", settings.out_dir.join("report.json").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(path: &Path) -> anyhow::Result<ExitCode> {
    let data = std::fs::read_to_string(path)?;
    let transcript: Transcript = serde_json::from_str(&data)?;
    println!("claim [{}]: {}", transcript.claim.id, transcript.claim.text);
    match (&transcript.verdict, &transcript.termination) {
        (Some(verdict), Some(termination)) => println!(
            "verdict: {} ({} at round {})",
            verdict.label(),
            termination,
            transcript.terminated_at_round
        ),
        _ => println!(
            "aborted after round {}: {}",
            transcript.terminated_at_round,
            transcript.abort_reason.as_deref().unwrap_or("unknown")
        ),
    }
    if let Some(gold) = &transcript.claim.gold_label {
        println!("gold: {}", gold.label());
    }
    for record in &transcript.rounds {
        println!(
            "round {} (consensus: {}, gate: {}{})",
            record.round,
            record.consensus,
            record.gate_passed,
            if record.flags.is_empty() {
                String::new()
            } else {
                format!(", flags: {}", record.flags.join(" "))
            }
        );
        for response in &record.responses {
            println!("  [{}] query: {}", response.agent.name, response.query);
            println!(
                "  [{}] {} document(s); verdict {}",
                response.agent.name,
                response.documents.len(),
                response.verdict.label()
            );
            if let Some(score) = &response.stability {
                println!(
                    "  [{}] faithfulness {:.4} ({}/{}), answer_relevance {:.4} ({} questions){}",
                    response.agent.name,
                    score.faithfulness,
                    score.n_supported,
                    score.n_statements,
                    score.answer_relevance,
                    score.n_questions,
                    if score.degenerate { " [degenerate]" } else { "" }
                );
            }
        }
    }
    for (agent, score) in &transcript.aggregate_scores {
        println!(
            "average [{}]: faithfulness {:.4}, answer_relevance {:.4}",
            agent, score.faithfulness, score.answer_relevance
        );
    }
    println!(
        "backend calls: {} chat, {} embed; wall {} ms",
        transcript.backend_calls.chat, transcript.backend_calls.embed, transcript.wall_ms
    );
    Ok(ExitCode::SUCCESS)
}
