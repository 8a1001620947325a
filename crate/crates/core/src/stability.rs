//! Per-response stability scoring: faithfulness and answer relevance.
//!
//! Faithfulness decomposes an answer into factual statements and reports the
//! fraction an LLM verifier accepts as supported by the retrieved context.
//! Answer relevance reverse-generates questions from the answer and reports
//! the mean cosine similarity between their embeddings and the original
//! question's. The pair gates round termination and, averaged across rounds,
//! feeds the judge.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{cosine, Backend, BackendError, ChatRequest, Message, PromptTag};

pub const DEFAULT_FAITHFULNESS_MIN: f64 = 0.7;
pub const DEFAULT_RELEVANCE_MIN: f64 = 0.8;
pub const DEFAULT_N_QUESTIONS: usize = 3;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("question generation produced no questions after retry")]
    NoQuestionsGenerated,
    #[error("cannot aggregate an empty score list")]
    EmptyScoreList,
}

/// Factual statements decomposed from one answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatementSet {
    pub statements: Vec<String>,
    pub source_answer: String,
}

impl StatementSet {
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

/// The (faithfulness, answer relevance) pair for one response, with
/// diagnostics. `degenerate` marks scores produced from an empty
/// decomposition or a zero embedding rather than real measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScore {
    pub faithfulness: f64,
    pub answer_relevance: f64,
    pub n_statements: usize,
    pub n_supported: usize,
    pub n_questions: usize,
    pub degenerate: bool,
}

/// Gate thresholds. Comparison is inclusive by default so the shipped
/// threshold values themselves pass at the boundary; `strict` switches to
/// strictly-greater comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityThresholds {
    pub faithfulness_min: f64,
    pub relevance_min: f64,
    #[serde(default)]
    pub strict: bool,
}

impl Default for StabilityThresholds {
    fn default() -> Self {
        Self {
            faithfulness_min: DEFAULT_FAITHFULNESS_MIN,
            relevance_min: DEFAULT_RELEVANCE_MIN,
            strict: false,
        }
    }
}

fn chat(backend: &dyn Backend, tag: PromptTag, prompt: String) -> Result<String, BackendError> {
    backend.chat(&ChatRequest::new(tag, vec![Message::user(prompt)]))
}

fn non_empty_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.trim_start_matches(['-', '*', ' ']).to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Decomposes `answer` into factual statements, one per line. Retries once
/// on empty output, then returns an empty set (degenerate downstream).
pub fn decompose_statements(
    answer: &str,
    backend: &dyn Backend,
) -> Result<StatementSet, BackendError> {
    assert!(!answer.trim().is_empty(), "answer must be non-empty");
    let prompt = format!(
        "Break the following answer into short standalone factual statements.\n\
         Write one statement per line and nothing else.\n\nAnswer:\n{answer}"
    );
    let mut statements = non_empty_lines(&chat(backend, PromptTag::Decompose, prompt.clone())?);
    if statements.is_empty() {
        statements = non_empty_lines(&chat(backend, PromptTag::Decompose, prompt)?);
    }
    Ok(StatementSet {
        statements,
        source_answer: answer.to_string(),
    })
}

/// Asks the backend whether `statement` can be inferred from `context`.
/// Returns 1 for yes, 0 for no; anything unparsable counts as unsupported
/// after one retry (conservative: biases toward another round rather than
/// false convergence).
pub fn verify_statement(
    statement: &str,
    context: &str,
    backend: &dyn Backend,
) -> Result<u8, BackendError> {
    assert!(!statement.trim().is_empty(), "statement must be non-empty");
    let prompt = format!(
        "Context:\n{context}\n\nStatement: {statement}\n\n\
         Can the statement be inferred from the context alone? Answer yes or no."
    );
    for attempt in 0..2 {
        let _ = attempt;
        let reply = chat(backend, PromptTag::Verify, prompt.clone())?;
        match parse_yes_no(&reply) {
            Some(true) => return Ok(1),
            Some(false) => return Ok(0),
            None => continue,
        }
    }
    Ok(0)
}

fn parse_yes_no(reply: &str) -> Option<bool> {
    let first = reply
        .trim()
        .split(|c: char| !c.is_alphanumeric())
        .find(|t| !t.is_empty())?
        .to_lowercase();
    match first.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessOutcome {
    pub score: f64,
    pub n_statements: usize,
    pub n_supported: usize,
    pub degenerate: bool,
}

/// Faithfulness: the fraction of decomposed statements the verifier accepts
/// as supported by `context`. Empty decomposition scores 0 and is flagged
/// degenerate.
pub fn faithfulness(
    answer: &str,
    context: &str,
    backend: &dyn Backend,
) -> Result<FaithfulnessOutcome, BackendError> {
    let set = decompose_statements(answer, backend)?;
    if set.is_empty() {
        return Ok(FaithfulnessOutcome {
            score: 0.0,
            n_statements: 0,
            n_supported: 0,
            degenerate: true,
        });
    }
    let mut supported = 0usize;
    for statement in &set.statements {
        supported += verify_statement(statement, context, backend)? as usize;
    }
    Ok(FaithfulnessOutcome {
        score: supported as f64 / set.statements.len() as f64,
        n_statements: set.statements.len(),
        n_supported: supported,
        degenerate: false,
    })
}

/// Generates up to `n` questions the answer could plausibly be answering,
/// one per line. Fewer than `n` parsed lines is tolerated (at least one is
/// required); empty output twice is an error.
pub fn generate_questions(
    answer: &str,
    n: usize,
    backend: &dyn Backend,
) -> Result<Vec<String>, StabilityError> {
    assert!(n >= 1, "question count must be at least 1");
    assert!(!answer.trim().is_empty(), "answer must be non-empty");
    let prompt = format!(
        "Write exactly {n} questions that the following answer could be answering.\n\
         Write one question per line and nothing else.\n\nAnswer:\n{answer}"
    );
    for _ in 0..2 {
        let questions = non_empty_lines(&chat(backend, PromptTag::GenQuestions, prompt.clone())?);
        if !questions.is_empty() {
            return Ok(questions.into_iter().take(n).collect());
        }
    }
    Err(StabilityError::NoQuestionsGenerated)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceOutcome {
    pub score: f64,
    pub n_questions: usize,
    pub degenerate: bool,
}

/// Answer relevance: mean cosine similarity between the original question's
/// embedding and the embeddings of questions generated from the answer. The
/// divisor is the number of questions actually produced. Zero-vector
/// embeddings contribute 0 and set the degenerate flag.
pub fn answer_relevance(
    question: &str,
    answer: &str,
    n: usize,
    backend: &dyn Backend,
) -> Result<RelevanceOutcome, StabilityError> {
    assert!(!question.trim().is_empty(), "question must be non-empty");
    let questions = generate_questions(answer, n, backend)?;
    let mut texts = Vec::with_capacity(questions.len() + 1);
    texts.push(question.to_string());
    texts.extend(questions.iter().cloned());
    let embeddings = backend.embed(&texts)?;
    let original = &embeddings[0];
    let mut degenerate = false;
    let mut total = 0.0;
    for generated in &embeddings[1..] {
        match cosine(original, generated) {
            Ok(sim) => total += sim,
            Err(_) => degenerate = true, // contributes 0
        }
    }
    Ok(RelevanceOutcome {
        score: total / questions.len() as f64,
        n_questions: questions.len(),
        degenerate,
    })
}

/// Computes the full stability score for one response.
pub fn score_response(
    question: &str,
    answer: &str,
    context: &str,
    n_questions: usize,
    backend: &dyn Backend,
) -> Result<StabilityScore, StabilityError> {
    let f = faithfulness(answer, context, backend)?;
    let ar = answer_relevance(question, answer, n_questions, backend)?;
    Ok(StabilityScore {
        faithfulness: f.score,
        answer_relevance: ar.score,
        n_statements: f.n_statements,
        n_supported: f.n_supported,
        n_questions: ar.n_questions,
        degenerate: f.degenerate || ar.degenerate,
    })
}

/// The round gate: both components must meet their thresholds.
pub fn gate(score: &StabilityScore, thresholds: &StabilityThresholds) -> bool {
    if thresholds.strict {
        score.faithfulness > thresholds.faithfulness_min
            && score.answer_relevance > thresholds.relevance_min
    } else {
        score.faithfulness >= thresholds.faithfulness_min
            && score.answer_relevance >= thresholds.relevance_min
    }
}

/// Arithmetic mean of each component across rounds; counts are summed and
/// the degenerate flag is OR-ed. An all-identical input returns the shared
/// value exactly.
pub fn aggregate(per_round: &[StabilityScore]) -> Result<StabilityScore, StabilityError> {
    let first = per_round.first().ok_or(StabilityError::EmptyScoreList)?;
    let n = per_round.len() as f64;
    let mean = |pick: fn(&StabilityScore) -> f64| -> f64 {
        let v0 = pick(first);
        if per_round.iter().all(|s| pick(s) == v0) {
            v0
        } else {
            per_round.iter().map(pick).sum::<f64>() / n
        }
    };
    Ok(StabilityScore {
        faithfulness: mean(|s| s.faithfulness),
        answer_relevance: mean(|s| s.answer_relevance),
        n_statements: per_round.iter().map(|s| s.n_statements).sum(),
        n_supported: per_round.iter().map(|s| s.n_supported).sum(),
        n_questions: per_round.iter().map(|s| s.n_questions).sum(),
        degenerate: per_round.iter().any(|s| s.degenerate),
    })
}
