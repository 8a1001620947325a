//! End-to-end tests of the `claimcheck` binary: flags, exit codes, and the
//! files each subcommand produces.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use claimcheck::debate::Transcript;
use claimcheck::tools::{FixtureSearchClient, SearchFixture, SearchResult};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_claimcheck")
}

fn write_agree_script(dir: &Path) -> PathBuf {
    let path = dir.join("agree.json");
    let doc = serde_json::json!({
        "responses": [
            {"tag": "query-formulation", "response": "capital of France"},
            {"tag": "respond", "contains": "Paris", "response": "SUPPORTS: Paris is the capital of France."},
            {"tag": "decompose", "response": "Paris is the capital of France."},
            {"tag": "verify", "response": "yes"},
            {"tag": "gen-questions", "response": "Paris is in France"},
            {"tag": "judge", "response": "SUPPORTS"}
        ]
    });
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("LLM_API_KEY")
        .output()
        .expect("binary runs")
}

#[test]
fn verify_scripted_agreement_converges_round_one() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_agree_script(dir.path());
    let out_dir = dir.path().join("out");
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "verify",
        "Paris is in France",
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("verdict: SUPPORTS (consensus at round 1)"), "{stdout}");
    let transcript: Transcript =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("transcript.json")).unwrap())
            .unwrap();
    assert_eq!(transcript.verdict.unwrap().label(), "SUPPORTS");
    assert_eq!(transcript.rounds.len(), 1);
    assert_eq!(transcript.wall_ms, 0, "mock runs record zero wall time");
}

#[test]
fn networked_backend_without_key_exits_2_before_any_call() {
    let dir = tempfile::tempdir().unwrap();
    let output = Command::new(bin())
        .args([
            "--out-dir",
            dir.path().join("out").to_str().unwrap(),
            "verify",
            "anything",
        ])
        .env_remove("LLM_API_KEY")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("LLM_API_KEY"), "{stderr}");
}

#[test]
fn no_query_formulation_makes_every_query_the_claim() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("split.json");
    // Debaters disagree forever so all three rounds run.
    let doc = serde_json::json!({
        "responses": [
            {"tag": "respond", "contains": "You are vanilla-1", "response": "SUPPORTS"},
            {"tag": "respond", "response": "REFUTES"},
            {"tag": "decompose", "response": "a fact"},
            {"tag": "verify", "response": "yes"},
            {"tag": "gen-questions", "response": "Paris is in France"},
            {"tag": "judge", "response": "NOT_ENOUGH_INFO"}
        ]
    });
    std::fs::write(&script, serde_json::to_string(&doc).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "--no-query-formulation",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "verify",
        "Paris is in France",
    ]);
    assert!(output.status.success());
    let transcript: Transcript =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("transcript.json")).unwrap())
            .unwrap();
    assert_eq!(transcript.rounds.len(), 3);
    for record in &transcript.rounds {
        for response in &record.responses {
            assert_eq!(response.query, "Paris is in France");
        }
    }
}

fn write_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let doc = |id: &str, len: usize| {
        format!(
            r#"{{"id": "{id}", "text": "{}"}}"#,
            "x".repeat(len)
        )
    };
    std::fs::write(
        &path,
        [doc("short", 10), doc("medium", 100), doc("long", 120)].join("\n"),
    )
    .unwrap();
    path
}

#[test]
fn ingest_produces_expected_chunk_count_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path());
    let script = write_agree_script(dir.path());
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "[tools]\nchunk_chars = 50\noverlap_chars = 10\n").unwrap();
    let index_a = dir.path().join("a.index.json");
    let index_b = dir.path().join("b.index.json");
    for index in [&index_a, &index_b] {
        let output = run(&[
            "--config",
            config.to_str().unwrap(),
            "--backend",
            "mock",
            "--script",
            script.to_str().unwrap(),
            "ingest",
            "--corpus",
            corpus.to_str().unwrap(),
            "--index-out",
            index.to_str().unwrap(),
        ]);
        assert!(
            output.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let stdout = String::from_utf8(output.stdout).unwrap();
        // Window starts per doc: 10 chars -> {0}; 100 chars -> {0, 40, 80};
        // 120 chars -> {0, 40, 80}. Seven chunks in total.
        assert!(stdout.contains("indexed 7 chunks"), "{stdout}");
    }
    let a = std::fs::read(&index_a).unwrap();
    let b = std::fs::read(&index_b).unwrap();
    assert_eq!(a, b, "re-ingesting the same corpus must be byte-identical");
}

#[test]
fn ingest_empty_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("empty.jsonl");
    std::fs::write(&corpus, "").unwrap();
    let script = write_agree_script(dir.path());
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "ingest",
        "--corpus",
        corpus.to_str().unwrap(),
        "--index-out",
        dir.path().join("never.json").to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("empty"));
}

#[test]
fn bench_full_tooling_combo_runs_offline() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bench.json");
    let doc = serde_json::json!({
        "responses": [
            {"tag": "query-formulation", "response": "shared query"},
            {"tag": "respond", "response": "SUPPORTS"},
            {"tag": "decompose", "response": "a fact"},
            {"tag": "verify", "response": "yes"},
            {"tag": "gen-questions", "response": "shared question"},
            {"tag": "judge", "response": "SUPPORTS"}
        ],
        "embeddings": {"shared question": [1.0, 0.0, 0.0, 0.0]},
        "embedding_dim": 4
    });
    std::fs::write(&script, serde_json::to_string(&doc).unwrap()).unwrap();

    // Small corpus -> index file, via the CLI itself.
    let corpus = dir.path().join("corpus.jsonl");
    std::fs::write(
        &corpus,
        r#"{"id": "d1", "text": "evidence text one"}
{"id": "d2", "text": "evidence text two"}"#,
    )
    .unwrap();
    let index = dir.path().join("index.json");
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "ingest",
        "--corpus",
        corpus.to_str().unwrap(),
        "--index-out",
        index.to_str().unwrap(),
    ]);
    assert!(output.status.success());

    // Canned search results for the one query the script produces.
    let fixtures = dir.path().join("fixtures");
    std::fs::create_dir_all(&fixtures).unwrap();
    FixtureSearchClient::write_fixture(
        &fixtures,
        &SearchFixture {
            query: "shared query".into(),
            results: vec![SearchResult {
                url: "https://example.com/evidence".into(),
                content: "search evidence".into(),
                score: Some(0.9),
            }],
        },
    )
    .unwrap();

    let dataset = dir.path().join("claims.jsonl");
    std::fs::write(
        &dataset,
        r#"{"id": 1, "claim": "claim one", "label": "SUPPORTS"}
{"id": 2, "claim": "claim two", "label": "REFUTES"}"#,
    )
    .unwrap();

    let out_dir = dir.path().join("out");
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "--index",
        index.to_str().unwrap(),
        "--search-fixtures",
        fixtures.to_str().unwrap(),
        "--combo",
        "rag+search",
        "--dataset",
        dataset.to_str().unwrap(),
        "--sample-size",
        "2",
        "--seed",
        "1",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "bench",
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("accuracy 0.50"), "{stdout}");
    // Both tools actually retrieved: every transcript carries rag and
    // search evidence.
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["settings"]["combo"], "rag+search");
    for entry in std::fs::read_dir(out_dir.join("transcripts")).unwrap() {
        let transcript: Transcript =
            serde_json::from_str(&std::fs::read_to_string(entry.unwrap().path()).unwrap())
                .unwrap();
        for record in &transcript.rounds {
            let rag_docs = &record.responses[0].documents;
            let search_docs = &record.responses[1].documents;
            assert!(!rag_docs.is_empty());
            assert!(rag_docs.iter().all(|d| d.source_id.starts_with("d")));
            assert_eq!(search_docs.len(), 1);
            assert!(search_docs[0].source_id.starts_with("https://"));
        }
    }
    assert!(out_dir.join("scores.csv").exists());
    assert!(out_dir.join("call_log.jsonl").exists());
}

#[test]
fn bench_unknown_combo_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_agree_script(dir.path());
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "--combo",
        "rag+laser",
        "bench",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown agent combo"));
}

#[test]
fn aborted_debate_exits_nonzero_with_partial_transcript() {
    let dir = tempfile::tempdir().unwrap();
    // No respond entry: the first response is a ScriptMiss, which aborts.
    let script = dir.path().join("holes.json");
    std::fs::write(
        &script,
        serde_json::to_string(&serde_json::json!({
            "responses": [ {"tag": "query-formulation", "response": "q"} ]
        }))
        .unwrap(),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "verify",
        "some claim",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("debate aborted"));
    let transcript: Transcript =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("transcript.json")).unwrap())
            .unwrap();
    assert!(transcript.aborted);
    assert!(transcript.verdict.is_none());
}

#[test]
fn inspect_pretty_prints_a_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_agree_script(dir.path());
    let out_dir = dir.path().join("out");
    let output = run(&[
        "--backend",
        "mock",
        "--script",
        script.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "verify",
        "Paris is in France",
    ]);
    assert!(output.status.success());
    let output = run(&[
        "inspect",
        out_dir.join("transcript.json").to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("claim [cli]: Paris is in France"), "{stdout}");
    assert!(stdout.contains("verdict: SUPPORTS"), "{stdout}");
    assert!(stdout.contains("faithfulness 1.0000"), "{stdout}");
}
