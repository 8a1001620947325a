//! Benchmark harness: dataset ingestion, sampling, batch debate execution,
//! exact-match accuracy, and bootstrap confidence intervals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendHandle, CallLog, CallRecord, LoggedBackend};
use crate::debate::{
    BackendCallCounts, DebateConfig, DebateEngine, DebaterAgent, JudgeAgent, Transcript,
};
use crate::domain::{exact_match, AgentId, AgentKind, Claim, LabelSet, Termination, Verdict};
use crate::tools::{RetrievalTool, SearchClient, VectorIndex};

pub const DEFAULT_SAMPLE_SIZE: usize = 200;
pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;
pub const DEFAULT_PARALLELISM: usize = 4;
/// Runs abort when more than this fraction of dataset lines is malformed.
pub const MALFORMED_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read dataset {path:?}: {message}")]
    FileUnreadable { path: PathBuf, message: String },
    #[error("{malformed} of {total} dataset lines are malformed (tolerance {tolerance})")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        tolerance: f64,
    },
    #[error("dataset is empty after filtering")]
    EmptyDataset,
    #[error("sample size {requested} exceeds dataset size {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("no gold label for claim {0:?}")]
    MissingGold(String),
    #[error("cannot evaluate an empty run")]
    EmptyRun,
    #[error("cannot bootstrap an empty input")]
    EmptyInput,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    FeverJsonl,
    GenericJsonl,
}

impl FromStr for DatasetFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fever-jsonl" => Ok(DatasetFormat::FeverJsonl),
            "generic-jsonl" => Ok(DatasetFormat::GenericJsonl),
            other => Err(HarnessError::Config(format!(
                "unknown dataset format {other:?} (expected fever-jsonl or generic-jsonl)"
            ))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetFormat::FeverJsonl => f.write_str("fever-jsonl"),
            DatasetFormat::GenericJsonl => f.write_str("generic-jsonl"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub format: DatasetFormat,
    pub label_set: LabelSet,
    pub sample_size: usize,
    pub seed: u64,
}

/// One dataset line. FEVER files carry numeric ids and extra fields; the
/// generic format is a plain `{id, claim, label}` record. Both parse here.
#[derive(Debug, Deserialize)]
struct DatasetLine {
    id: serde_json::Value,
    claim: String,
    label: Option<String>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

/// Loads claims, normalizing gold labels into the spec's label set.
/// Malformed lines (bad JSON, missing fields, unknown labels, duplicate
/// ids) are counted and skipped; the run only fails when they exceed
/// [`MALFORMED_TOLERANCE`].
pub fn load_dataset(spec: &DatasetSpec) -> Result<Vec<Claim>, HarnessError> {
    let file = std::fs::File::open(&spec.path).map_err(|e| HarnessError::FileUnreadable {
        path: spec.path.clone(),
        message: e.to_string(),
    })?;
    let reader = std::io::BufReader::new(file);
    let mut claims = Vec::new();
    let mut seen_ids = BTreeSet::new();
    let mut total = 0usize;
    let mut malformed = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| HarnessError::FileUnreadable {
            path: spec.path.clone(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_line(&line, spec) {
            Some(claim) if seen_ids.insert(claim.id.clone()) => claims.push(claim),
            _ => malformed += 1,
        }
    }
    if total == 0 {
        return Err(HarnessError::EmptyDataset);
    }
    if malformed as f64 / total as f64 > MALFORMED_TOLERANCE {
        return Err(HarnessError::TooManyMalformed {
            malformed,
            total,
            tolerance: MALFORMED_TOLERANCE,
        });
    }
    if claims.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    Ok(claims)
}

fn parse_line(line: &str, spec: &DatasetSpec) -> Option<Claim> {
    let parsed: DatasetLine = serde_json::from_str(line).ok()?;
    let id = match parsed.id {
        serde_json::Value::String(s) => s,
        serde_json::Value::Number(n) => n.to_string(),
        _ => return None,
    };
    // Benchmark records need a gold label; a line without one is malformed.
    let gold = spec.label_set.normalize_exact(&parsed.label?).ok()?;
    let mut claim = Claim::new(id, parsed.claim).ok()?;
    claim.gold_label = Some(gold);
    claim.metadata = parsed.metadata;
    claim
        .metadata
        .insert("dataset".to_string(), spec.name.clone());
    if spec.format == DatasetFormat::FeverJsonl {
        claim
            .metadata
            .insert("format".to_string(), spec.format.to_string());
    }
    Some(claim)
}

/// Uniform sample without replacement; deterministic under a fixed seed.
pub fn sample(claims: &[Claim], n: usize, seed: u64) -> Result<Vec<Claim>, HarnessError> {
    if n > claims.len() {
        return Err(HarnessError::SampleTooLarge {
            requested: n,
            available: claims.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = rand::seq::index::sample(&mut rng, claims.len(), n);
    Ok(indices.iter().map(|i| claims[i].clone()).collect())
}

/// Exact-match accuracy over predictions aligned to golds by claim id.
/// Aborted debates (no verdict) count as misses.
pub fn evaluate(
    preds: &[(String, Option<Verdict>)],
    golds: &BTreeMap<String, Verdict>,
) -> Result<f64, HarnessError> {
    if preds.is_empty() {
        return Err(HarnessError::EmptyRun);
    }
    let mut hits = 0usize;
    for (id, pred) in preds {
        let gold = golds
            .get(id)
            .ok_or_else(|| HarnessError::MissingGold(id.clone()))?;
        if let Some(pred) = pred {
            if exact_match(pred, gold) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / preds.len() as f64)
}

/// Percentile bootstrap interval for the mean of boolean flags.
pub fn bootstrap_ci(
    flags: &[bool],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), HarnessError> {
    if flags.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    assert!(resamples >= 1, "resamples must be positive");
    assert!((0.0..1.0).contains(&level) && level > 0.0, "level must be in (0, 1)");
    let n = flags.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut hits = 0usize;
        for _ in 0..n {
            if flags[rng.random_range(0..n)] {
                hits += 1;
            }
        }
        means.push(hits as f64 / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo_idx = ((resamples as f64 * alpha).floor() as usize).min(resamples - 1);
    let hi_idx = ((resamples as f64 * (1.0 - alpha)).ceil() as usize)
        .saturating_sub(1)
        .min(resamples - 1);
    Ok((means[lo_idx], means[hi_idx]))
}

/// Which tools the two debaters carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentCombo {
    RagSearch,
    RagRag,
    SearchSearch,
    RagVanilla,
    SearchVanilla,
    VanillaVanilla,
}

impl AgentCombo {
    pub fn kinds(&self) -> [AgentKind; 2] {
        match self {
            AgentCombo::RagSearch => [AgentKind::Rag, AgentKind::Search],
            AgentCombo::RagRag => [AgentKind::Rag, AgentKind::Rag],
            AgentCombo::SearchSearch => [AgentKind::Search, AgentKind::Search],
            AgentCombo::RagVanilla => [AgentKind::Rag, AgentKind::Vanilla],
            AgentCombo::SearchVanilla => [AgentKind::Search, AgentKind::Vanilla],
            AgentCombo::VanillaVanilla => [AgentKind::Vanilla, AgentKind::Vanilla],
        }
    }

    /// Display names for the two debaters: bare kind names, suffixed when
    /// both debaters share a kind.
    pub fn names(&self) -> [String; 2] {
        let kinds = self.kinds();
        if kinds[0] == kinds[1] {
            [format!("{}-1", kinds[0]), format!("{}-2", kinds[1])]
        } else {
            [kinds[0].to_string(), kinds[1].to_string()]
        }
    }
}

impl FromStr for AgentCombo {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "rag+search" | "search+rag" => Ok(AgentCombo::RagSearch),
            "rag+rag" => Ok(AgentCombo::RagRag),
            "search+search" => Ok(AgentCombo::SearchSearch),
            "rag+vanilla" | "vanilla+rag" => Ok(AgentCombo::RagVanilla),
            "search+vanilla" | "vanilla+search" => Ok(AgentCombo::SearchVanilla),
            "vanilla+vanilla" => Ok(AgentCombo::VanillaVanilla),
            other => Err(HarnessError::Config(format!(
                "unknown agent combo {other:?} (expected e.g. rag+search)"
            ))),
        }
    }
}

impl fmt::Display for AgentCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kinds = self.kinds();
        write!(f, "{}+{}", kinds[0], kinds[1])
    }
}

/// Shared resources a benchmark run draws on.
pub struct BenchResources {
    pub backend: BackendHandle,
    pub index: Option<Arc<VectorIndex>>,
    pub search: Option<Arc<dyn SearchClient>>,
    pub parallelism: usize,
}

impl BenchResources {
    /// Resolves the tool an agent of `kind` needs, or a config error.
    pub fn tool_for(&self, kind: AgentKind) -> Result<RetrievalTool, HarnessError> {
        match kind {
            AgentKind::Rag => self
                .index
                .clone()
                .map(|index| RetrievalTool::Rag { index })
                .ok_or_else(|| {
                    HarnessError::Config("combo needs a RAG index but none is configured".into())
                }),
            AgentKind::Search => self
                .search
                .clone()
                .map(|client| RetrievalTool::Search { client })
                .ok_or_else(|| {
                    HarnessError::Config(
                        "combo needs a search client but none is configured".into(),
                    )
                }),
            AgentKind::Vanilla => Ok(RetrievalTool::Vanilla),
            AgentKind::Judge => unreachable!("judges carry no tool"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClaimReport {
    pub claim_id: String,
    pub verdict: Option<String>,
    pub gold: Option<String>,
    pub correct: bool,
    pub termination: Option<Termination>,
    pub rounds_used: u32,
    pub aborted: bool,
}

/// One exported (claim, agent, round) score observation, for reproducing
/// threshold-distribution analyses offline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub claim_id: String,
    pub agent: String,
    pub round: u32,
    pub faithfulness: f64,
    pub answer_relevance: f64,
}

/// Run-level settings echoed into the report for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSettings {
    pub dataset: String,
    pub dataset_path: String,
    pub format: DatasetFormat,
    pub combo: String,
    pub sample_size: usize,
    pub seed: u64,
    pub backend: String,
    pub parallelism: usize,
    pub resamples: usize,
    pub ci_level: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub settings: RunSettings,
    pub debate_config: DebateConfig,
    pub accuracy: f64,
    pub ci: (f64, f64),
    pub per_claim: Vec<ClaimReport>,
    pub scores: Vec<ScoreRow>,
}

struct ClaimOutcome {
    report: ClaimReport,
    scores: Vec<ScoreRow>,
    transcript: Transcript,
    call_records: Vec<CallRecord>,
}

/// Runs the full benchmark: sample, debate every claim under a bounded
/// worker pool, aggregate accuracy and CI, and (when `out_dir` is given)
/// export the report, per-claim transcripts, the scores CSV, and the merged
/// call log. Per-claim failures are recorded as incorrect; the run
/// continues.
pub fn run_benchmark(
    spec: &DatasetSpec,
    config: &DebateConfig,
    combo: AgentCombo,
    resources: &BenchResources,
    settings: &RunSettings,
    out_dir: Option<&Path>,
) -> Result<RunReport, HarnessError> {
    // Resolve tools up front so configuration errors surface before any
    // debate launches.
    for kind in combo.kinds() {
        resources.tool_for(kind)?;
    }
    let claims = load_dataset(spec)?;
    let sampled = sample(&claims, spec.sample_size, spec.seed)?;

    let engine = DebateEngine::new(config.clone());
    let names = combo.names();
    let kinds = combo.kinds();
    let run_one = |claim: &Claim| -> ClaimOutcome {
        let log = CallLog::new();
        let logged: BackendHandle =
            Arc::new(LoggedBackend::new(resources.backend.clone(), log.clone()));
        let agents = [
            DebaterAgent::new(
                AgentId::new(kinds[0], names[0].clone()),
                resources.tool_for(kinds[0]).expect("validated above"),
                logged.clone(),
            ),
            DebaterAgent::new(
                AgentId::new(kinds[1], names[1].clone()),
                resources.tool_for(kinds[1]).expect("validated above"),
                logged.clone(),
            ),
        ];
        let judge = JudgeAgent::new("judge", logged.clone());
        let start = Instant::now();
        let result = engine.run_debate(claim.clone(), &agents, &judge);
        let wall_ms = if config.record_timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let counts = BackendCallCounts {
            chat: log.chat_calls(),
            embed: log.embed_calls(),
        };
        let (report, scores, transcript) = match &result {
            Ok(outcome) => {
                let correct = claim
                    .gold_label
                    .as_ref()
                    .is_some_and(|gold| exact_match(&outcome.verdict, gold));
                let report = ClaimReport {
                    claim_id: claim.id.clone(),
                    verdict: Some(outcome.verdict.label().to_string()),
                    gold: claim.gold_label.as_ref().map(|g| g.label().to_string()),
                    correct,
                    termination: Some(outcome.termination),
                    rounds_used: outcome.history.rounds().len() as u32,
                    aborted: false,
                };
                let scores = score_rows(claim, outcome.history.rounds());
                let transcript = Transcript::from_outcome(outcome, config, wall_ms, counts);
                (report, scores, transcript)
            }
            Err(aborted) => {
                let report = ClaimReport {
                    claim_id: claim.id.clone(),
                    verdict: None,
                    gold: claim.gold_label.as_ref().map(|g| g.label().to_string()),
                    correct: false,
                    termination: None,
                    rounds_used: aborted.partial.rounds().len() as u32,
                    aborted: true,
                };
                let scores = score_rows(claim, aborted.partial.rounds());
                let transcript = Transcript::from_aborted(aborted, config, wall_ms, counts);
                (report, scores, transcript)
            }
        };
        ClaimOutcome {
            report,
            scores,
            transcript,
            call_records: log.snapshot(),
        }
    };

    let mut outcomes = parallel_map(&sampled, resources.parallelism, run_one);
    // Deterministic report order regardless of worker scheduling.
    outcomes.sort_by(|a, b| a.report.claim_id.cmp(&b.report.claim_id));

    let flags: Vec<bool> = outcomes.iter().map(|o| o.report.correct).collect();
    let accuracy = if flags.is_empty() {
        return Err(HarnessError::EmptyRun);
    } else {
        flags.iter().filter(|&&c| c).count() as f64 / flags.len() as f64
    };
    let ci = bootstrap_ci(&flags, settings.resamples, settings.ci_level, spec.seed)?;

    let report = RunReport {
        settings: settings.clone(),
        debate_config: config.clone(),
        accuracy,
        ci,
        per_claim: outcomes.iter().map(|o| o.report.clone()).collect(),
        scores: outcomes.iter().flat_map(|o| o.scores.clone()).collect(),
    };

    if let Some(dir) = out_dir {
        export_run(dir, &report, &outcomes)?;
    }
    Ok(report)
}

fn score_rows(claim: &Claim, rounds: &[crate::domain::RoundRecord]) -> Vec<ScoreRow> {
    let mut rows = Vec::new();
    for record in rounds {
        for response in &record.responses {
            if let Some(score) = &response.stability {
                rows.push(ScoreRow {
                    claim_id: claim.id.clone(),
                    agent: response.agent.name.clone(),
                    round: record.round,
                    faithfulness: score.faithfulness,
                    answer_relevance: score.answer_relevance,
                });
            }
        }
    }
    rows
}

fn export_run(
    dir: &Path,
    report: &RunReport,
    outcomes: &[ClaimOutcome],
) -> Result<(), HarnessError> {
    let io_err = |e: std::io::Error| HarnessError::Io(e.to_string());
    let transcripts = dir.join("transcripts");
    std::fs::create_dir_all(&transcripts).map_err(io_err)?;
    let report_json =
        serde_json::to_string_pretty(report).map_err(|e| HarnessError::Io(e.to_string()))?;
    std::fs::write(dir.join("report.json"), report_json).map_err(io_err)?;
    for outcome in outcomes {
        let path = transcripts.join(format!("{}.json", sanitize_id(&outcome.report.claim_id)));
        let json = outcome
            .transcript
            .to_json()
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(io_err)?;
    }
    let mut writer = csv::Writer::from_path(dir.join("scores.csv"))
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    for row in &report.scores {
        writer
            .serialize(row)
            .map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    writer.flush().map_err(io_err)?;
    let mut log_file =
        std::fs::File::create(dir.join("call_log.jsonl")).map_err(io_err)?;
    for outcome in outcomes {
        for record in &outcome.call_records {
            use std::io::Write;
            serde_json::to_writer(&mut log_file, record)
                .map_err(|e| HarnessError::Io(e.to_string()))?;
            log_file.write_all(b"\n").map_err(io_err)?;
        }
    }
    Ok(())
}

fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Order-preserving map over `items` with at most `workers` threads.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    if workers <= 1 || n == 1 {
        return items.iter().map(f).collect();
    }
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = f(&items[i]);
                results.lock().unwrap()[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn spec_for(path: PathBuf) -> DatasetSpec {
        DatasetSpec {
            name: "test".into(),
            path,
            format: DatasetFormat::GenericJsonl,
            label_set: LabelSet::fever(),
            sample_size: 200,
            seed: 7,
        }
    }

    fn write_dataset(lines: &[&str]) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let mut file = std::fs::File::create(&path).unwrap();
        for line in lines {
            writeln!(file, "{line}").unwrap();
        }
        (dir, path)
    }

    #[test]
    fn load_well_formed_dataset() {
        let (_dir, path) = write_dataset(&[
            r#"{"id": 1, "claim": "a", "label": "SUPPORTS"}"#,
            r#"{"id": "2", "claim": "b", "label": "refutes"}"#,
            r#"{"id": 3, "claim": "c", "label": "NOT ENOUGH INFO"}"#,
        ]);
        let claims = load_dataset(&spec_for(path)).unwrap();
        assert_eq!(claims.len(), 3);
        assert_eq!(claims[1].gold_label.as_ref().unwrap().label(), "REFUTES");
        assert_eq!(claims[2].gold_label.as_ref().unwrap().label(), "NOT_ENOUGH_INFO");
        assert_eq!(claims[0].metadata["dataset"], "test");
    }

    #[test]
    fn unknown_label_counts_as_malformed() {
        let mut lines = vec![r#"{"id": 0, "claim": "x", "label": "MOSTLY_TRUE"}"#.to_string()];
        for i in 1..=99 {
            lines.push(format!(r#"{{"id": {i}, "claim": "c{i}", "label": "SUPPORTS"}}"#));
        }
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let (_dir, path) = write_dataset(&refs);
        // 1 malformed of 100 = exactly the tolerance: not fatal, skipped.
        let claims = load_dataset(&spec_for(path)).unwrap();
        assert_eq!(claims.len(), 99);
    }

    #[test]
    fn all_malformed_lines_is_fatal() {
        let (_dir, path) = write_dataset(&["not json", "{\"id\":1}", "also not json"]);
        assert!(matches!(
            load_dataset(&spec_for(path)),
            Err(HarnessError::TooManyMalformed { malformed: 3, total: 3, .. })
        ));
    }

    #[test]
    fn duplicate_ids_are_malformed() {
        let mut lines: Vec<String> = (0..199)
            .map(|i| format!(r#"{{"id": {i}, "claim": "c{i}", "label": "SUPPORTS"}}"#))
            .collect();
        lines.push(r#"{"id": 0, "claim": "dup", "label": "SUPPORTS"}"#.into());
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let (_dir, path) = write_dataset(&refs);
        let claims = load_dataset(&spec_for(path)).unwrap();
        assert_eq!(claims.len(), 199);
    }

    #[test]
    fn missing_file_is_unreadable() {
        let spec = spec_for(PathBuf::from("/nonexistent/data.jsonl"));
        assert!(matches!(
            load_dataset(&spec),
            Err(HarnessError::FileUnreadable { .. })
        ));
    }

    fn make_claims(n: usize) -> Vec<Claim> {
        (0..n)
            .map(|i| Claim::new(format!("c{i:04}"), format!("claim {i}")).unwrap())
            .collect()
    }

    #[test]
    fn sample_full_size_is_a_permutation() {
        let claims = make_claims(20);
        let sampled = sample(&claims, 20, 1).unwrap();
        let mut ids: Vec<&str> = sampled.iter().map(|c| c.id.as_str()).collect();
        ids.sort();
        let expected: Vec<String> = (0..20).map(|i| format!("c{i:04}")).collect();
        assert_eq!(ids, expected.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let claims = make_claims(1000);
        let a = sample(&claims, 50, 42).unwrap();
        let b = sample(&claims, 50, 42).unwrap();
        assert_eq!(
            a.iter().map(|c| &c.id).collect::<Vec<_>>(),
            b.iter().map(|c| &c.id).collect::<Vec<_>>()
        );
        // Different seeds disagree on a 1000-claim pool (overwhelmingly).
        let c = sample(&claims, 50, 43).unwrap();
        assert_ne!(
            a.iter().map(|x| &x.id).collect::<Vec<_>>(),
            c.iter().map(|x| &x.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sample_too_large_is_an_error() {
        let claims = make_claims(3);
        assert!(matches!(
            sample(&claims, 4, 0),
            Err(HarnessError::SampleTooLarge { requested: 4, available: 3 })
        ));
    }

    fn verdicts(labels: &[(&str, Option<&str>)]) -> Vec<(String, Option<Verdict>)> {
        let set = LabelSet::fever();
        labels
            .iter()
            .map(|(id, label)| {
                (id.to_string(), label.map(|l| set.known(l).unwrap()))
            })
            .collect()
    }

    fn golds(pairs: &[(&str, &str)]) -> BTreeMap<String, Verdict> {
        let set = LabelSet::fever();
        pairs
            .iter()
            .map(|(id, label)| (id.to_string(), set.known(label).unwrap()))
            .collect()
    }

    #[test]
    fn evaluate_counts_hits_and_aborts() {
        let preds = verdicts(&[
            ("a", Some("SUPPORTS")),
            ("b", Some("REFUTES")),
            ("c", None), // aborted -> miss
            ("d", Some("SUPPORTS")),
        ]);
        let golds = golds(&[
            ("a", "SUPPORTS"),
            ("b", "SUPPORTS"),
            ("c", "REFUTES"),
            ("d", "SUPPORTS"),
        ]);
        assert_eq!(evaluate(&preds, &golds).unwrap(), 0.5);
    }

    #[test]
    fn evaluate_146_of_200_is_073() {
        let set = LabelSet::fever();
        let mut preds = Vec::new();
        let mut gold_map = BTreeMap::new();
        for i in 0..200 {
            let id = format!("c{i:03}");
            let label = if i < 146 { "SUPPORTS" } else { "REFUTES" };
            preds.push((id.clone(), Some(set.known(label).unwrap())));
            gold_map.insert(id, set.known("SUPPORTS").unwrap());
        }
        assert_eq!(evaluate(&preds, &gold_map).unwrap(), 0.73);
    }

    #[test]
    fn evaluate_missing_gold_and_empty_run() {
        let preds = verdicts(&[("a", Some("SUPPORTS"))]);
        assert!(matches!(
            evaluate(&preds, &BTreeMap::new()),
            Err(HarnessError::MissingGold(_))
        ));
        assert!(matches!(
            evaluate(&[], &BTreeMap::new()),
            Err(HarnessError::EmptyRun)
        ));
    }

    #[test]
    fn evaluate_is_permutation_invariant() {
        let mut preds = verdicts(&[
            ("a", Some("SUPPORTS")),
            ("b", Some("REFUTES")),
            ("c", Some("SUPPORTS")),
        ]);
        let golds = golds(&[("a", "SUPPORTS"), ("b", "SUPPORTS"), ("c", "SUPPORTS")]);
        let forward = evaluate(&preds, &golds).unwrap();
        preds.reverse();
        assert_eq!(forward, evaluate(&preds, &golds).unwrap());
    }

    #[test]
    fn bootstrap_all_true_is_degenerate() {
        let flags = vec![true; 50];
        assert_eq!(bootstrap_ci(&flags, 1000, 0.95, 0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn bootstrap_single_flag_is_degenerate() {
        assert_eq!(bootstrap_ci(&[false], 1000, 0.95, 0).unwrap(), (0.0, 0.0));
        assert_eq!(bootstrap_ci(&[true], 1000, 0.95, 0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn bootstrap_contains_point_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for case in 0..25 {
            let n = rng.random_range(2..200);
            let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let accuracy = flags.iter().filter(|&&f| f).count() as f64 / n as f64;
            let (lo, hi) = bootstrap_ci(&flags, 2000, 0.95, case).unwrap();
            assert!(lo <= accuracy && accuracy <= hi, "case {case}: {lo} {accuracy} {hi}");
        }
    }

    #[test]
    fn bootstrap_width_shrinks_with_n() {
        let small: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let large: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let (lo_s, hi_s) = bootstrap_ci(&small, 3000, 0.95, 5).unwrap();
        let (lo_l, hi_l) = bootstrap_ci(&large, 3000, 0.95, 5).unwrap();
        assert!(hi_l - lo_l < hi_s - lo_s);
    }

    #[test]
    fn bootstrap_empty_input_errors() {
        assert!(matches!(
            bootstrap_ci(&[], 100, 0.95, 0),
            Err(HarnessError::EmptyInput)
        ));
    }

    #[test]
    fn combo_parsing_round_trips() {
        for raw in [
            "rag+search",
            "rag+rag",
            "search+search",
            "rag+vanilla",
            "search+vanilla",
            "vanilla+vanilla",
        ] {
            let combo: AgentCombo = raw.parse().unwrap();
            assert_eq!(combo.to_string(), raw);
        }
        assert!("rag+laser".parse::<AgentCombo>().is_err());
    }

    #[test]
    fn duplicate_kind_combos_get_distinct_names() {
        assert_eq!(AgentCombo::RagRag.names(), ["rag-1", "rag-2"]);
        assert_eq!(AgentCombo::RagSearch.names(), ["rag", "search"]);
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<u64> = (0..200).collect();
        let doubled = parallel_map(&items, 8, |x| x * 2);
        assert_eq!(doubled, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
