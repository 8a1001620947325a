//! Core domain types: claims, verdict labels, agents, evidence, and the
//! append-only debate history.
//!
//! Label sets are data, not a hard-coded enum: datasets disagree on their
//! verdict vocabulary (three-label FEVER-style sets are only the default),
//! so the whole engine is parameterized by a [`LabelSet`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stability::StabilityScore;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("claim text is empty after trimming")]
    EmptyClaimText,
    #[error("no label alias matches verdict text: {0:?}")]
    UnparsableVerdict(String),
    #[error("label {0:?} is not a member of this label set")]
    UnknownLabel(String),
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error("round record is empty")]
    EmptyRound,
    #[error("responses disagree on round number within one record")]
    RoundMismatch,
    #[error("expected round {expected}, got {got}")]
    NonContiguousRound { expected: u32, got: u32 },
}

/// The statement under verification.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Claim {
    pub id: String,
    pub text: String,
    /// Present only in benchmark mode.
    pub gold_label: Option<Verdict>,
    pub metadata: BTreeMap<String, String>,
}

impl Claim {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, DomainError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(DomainError::EmptyClaimText);
        }
        Ok(Self {
            id: id.into(),
            text,
            gold_label: None,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_gold(mut self, gold: Verdict) -> Self {
        self.gold_label = Some(gold);
        self
    }
}

/// A verdict label plus the verbatim model span it was parsed from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Verdict {
    label: String,
    raw_text: String,
}

impl Verdict {
    /// Canonical label within the active label set.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// The span of model output the label was parsed from.
    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// True iff the normalized labels are identical.
pub fn exact_match(pred: &Verdict, gold: &Verdict) -> bool {
    pred.label == gold.label
}

/// Serialized form of [`LabelSet`]; construction goes through validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LabelSetSpec {
    labels: Vec<String>,
    aliases: BTreeMap<String, String>,
    fallback: String,
}

impl From<LabelSet> for LabelSetSpec {
    fn from(set: LabelSet) -> Self {
        Self {
            labels: set.labels,
            aliases: set.aliases,
            fallback: set.fallback,
        }
    }
}

impl TryFrom<LabelSetSpec> for LabelSet {
    type Error = DomainError;
    fn try_from(spec: LabelSetSpec) -> Result<Self, Self::Error> {
        LabelSet::new(spec.labels, spec.aliases, spec.fallback)
    }
}

/// The closed verdict vocabulary plus the alias table used to parse
/// free-form model output into labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabelSetSpec", into = "LabelSetSpec")]
pub struct LabelSet {
    labels: Vec<String>,
    aliases: BTreeMap<String, String>,
    fallback: String,
    /// Alias token sequences sorted longest-first, for parsing.
    #[serde(skip)]
    alias_tokens: Vec<(Vec<String>, String)>,
}

impl LabelSet {
    /// Builds a label set. Every canonical label is implicitly an alias of
    /// itself; `fallback` must be a member label (it is the verdict assigned
    /// when parsing fails after retry).
    pub fn new(
        labels: Vec<String>,
        aliases: BTreeMap<String, String>,
        fallback: String,
    ) -> Result<Self, DomainError> {
        if labels.is_empty() {
            return Err(DomainError::InvalidLabelSet("no labels".into()));
        }
        if !labels.contains(&fallback) {
            return Err(DomainError::InvalidLabelSet(format!(
                "fallback {fallback:?} is not a member label"
            )));
        }
        let mut full_aliases = aliases;
        for label in &labels {
            full_aliases
                .entry(label.clone())
                .or_insert_with(|| label.clone());
        }
        for (alias, target) in &full_aliases {
            if !labels.contains(target) {
                return Err(DomainError::InvalidLabelSet(format!(
                    "alias {alias:?} maps to unknown label {target:?}"
                )));
            }
            if tokenize(alias).is_empty() {
                return Err(DomainError::InvalidLabelSet(format!(
                    "alias {alias:?} has no word tokens"
                )));
            }
        }
        let mut alias_tokens: Vec<(Vec<String>, String)> = full_aliases
            .iter()
            .map(|(alias, target)| (tokenize(alias), target.clone()))
            .collect();
        // Longest alias wins when several match at the same position.
        alias_tokens.sort_by(|a, b| {
            b.0.len()
                .cmp(&a.0.len())
                .then_with(|| b.0.join(" ").len().cmp(&a.0.join(" ").len()))
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(Self {
            labels,
            aliases: full_aliases,
            fallback,
            alias_tokens,
        })
    }

    /// Default FEVER-style three-label set.
    pub fn fever() -> Self {
        let labels = vec![
            "SUPPORTS".to_string(),
            "REFUTES".to_string(),
            "NOT_ENOUGH_INFO".to_string(),
        ];
        let mut aliases = BTreeMap::new();
        for (alias, target) in [
            ("supports", "SUPPORTS"),
            ("supported", "SUPPORTS"),
            ("support", "SUPPORTS"),
            ("true", "SUPPORTS"),
            ("refutes", "REFUTES"),
            ("refuted", "REFUTES"),
            ("refute", "REFUTES"),
            ("false", "REFUTES"),
            ("not enough info", "NOT_ENOUGH_INFO"),
            ("not enough information", "NOT_ENOUGH_INFO"),
            ("not enough evidence", "NOT_ENOUGH_INFO"),
            ("insufficient information", "NOT_ENOUGH_INFO"),
            ("nei", "NOT_ENOUGH_INFO"),
            ("unverifiable", "NOT_ENOUGH_INFO"),
        ] {
            aliases.insert(alias.to_string(), target.to_string());
        }
        Self::new(labels, aliases, "NOT_ENOUGH_INFO".to_string())
            .expect("builtin label set is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Comma-separated canonical labels, for prompt rendering.
    pub fn labels_joined(&self) -> String {
        self.labels.join(", ")
    }

    /// The verdict assigned when parsing fails after the retry.
    pub fn fallback_verdict(&self, raw_text: impl Into<String>) -> Verdict {
        Verdict {
            label: self.fallback.clone(),
            raw_text: raw_text.into(),
        }
    }

    /// Builds a verdict from a known canonical label (e.g. a gold label).
    pub fn known(&self, label: &str) -> Result<Verdict, DomainError> {
        if !self.labels.iter().any(|l| l == label) {
            return Err(DomainError::UnknownLabel(label.to_string()));
        }
        Ok(Verdict {
            label: label.to_string(),
            raw_text: label.to_string(),
        })
    }

    /// Parses a label string that must match an alias in its entirety
    /// (case- and punctuation-insensitive). Used for dataset gold labels,
    /// where a partial match like "mostly true" must not pass as "true".
    pub fn normalize_exact(&self, raw: &str) -> Result<Verdict, DomainError> {
        let toks = tokenize(raw);
        if toks.is_empty() {
            return Err(DomainError::UnparsableVerdict(raw.to_string()));
        }
        for (alias_toks, target) in &self.alias_tokens {
            if *alias_toks == toks {
                return Ok(Verdict {
                    label: target.clone(),
                    raw_text: raw.trim().to_string(),
                });
            }
        }
        Err(DomainError::UnparsableVerdict(raw.to_string()))
    }

    /// Parses free-form text into a verdict: case- and punctuation-insensitive
    /// alias matching at word boundaries. When several aliases occur, the
    /// earliest occurrence wins; ties at the same position go to the longest
    /// alias. `raw_text` is the verbatim matched span.
    pub fn normalize(&self, raw: &str) -> Result<Verdict, DomainError> {
        let toks = tokens_with_spans(raw);
        if toks.is_empty() {
            return Err(DomainError::UnparsableVerdict(raw.to_string()));
        }
        for start in 0..toks.len() {
            for (alias_toks, target) in &self.alias_tokens {
                let end = start + alias_toks.len();
                if end > toks.len() {
                    continue;
                }
                if toks[start..end]
                    .iter()
                    .map(|(t, _, _)| t.as_str())
                    .eq(alias_toks.iter().map(String::as_str))
                {
                    let span_start = toks[start].1;
                    let span_end = toks[end - 1].2;
                    return Ok(Verdict {
                        label: target.clone(),
                        raw_text: raw[span_start..span_end].to_string(),
                    });
                }
            }
        }
        Err(DomainError::UnparsableVerdict(raw.to_string()))
    }
}

fn tokenize(s: &str) -> Vec<String> {
    tokens_with_spans(s).into_iter().map(|(t, _, _)| t).collect()
}

/// Lowercased word tokens with their byte spans in the original string.
fn tokens_with_spans(s: &str) -> Vec<(String, usize, usize)> {
    let mut toks = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in s.char_indices() {
        if ch.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(st) = start.take() {
            toks.push((s[st..i].to_lowercase(), st, i));
        }
    }
    if let Some(st) = start {
        toks.push((s[st..].to_lowercase(), st, s.len()));
    }
    toks
}

/// The role a participant plays, which also selects its retrieval tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Rag,
    Search,
    Vanilla,
    Judge,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AgentKind::Rag => "rag",
            AgentKind::Search => "search",
            AgentKind::Vanilla => "vanilla",
            AgentKind::Judge => "judge",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentId {
    pub kind: AgentKind,
    pub name: String,
}

impl AgentId {
    pub fn new(kind: AgentKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
        }
    }
}

/// One retrieved piece of evidence.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvidenceDocument {
    /// Corpus chunk id or URL.
    pub source_id: String,
    pub text: String,
    /// Retrieval similarity in [0, 1]; `None` means rank-only.
    pub score: Option<f64>,
    /// Tool kind that fetched it.
    pub tool: AgentKind,
}

/// One agent's output for one round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentResponse {
    pub agent: AgentId,
    pub round: u32,
    pub query: String,
    pub documents: Vec<EvidenceDocument>,
    pub verdict: Verdict,
    pub rationale: String,
    pub stability: Option<StabilityScore>,
}

/// All responses of one round plus the consensus and gate outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub responses: Vec<AgentResponse>,
    /// True iff all debater verdict labels are equal after normalization.
    pub consensus: bool,
    pub gate_passed: bool,
    /// Degradations observed this round (e.g. search unavailable).
    pub flags: Vec<String>,
}

impl RoundRecord {
    /// Consensus is computed here so the invariant holds by construction.
    pub fn new(
        responses: Vec<AgentResponse>,
        gate_passed: bool,
        flags: Vec<String>,
    ) -> Result<Self, DomainError> {
        let first = responses.first().ok_or(DomainError::EmptyRound)?;
        let round = first.round;
        if responses.iter().any(|r| r.round != round) {
            return Err(DomainError::RoundMismatch);
        }
        let consensus = responses
            .iter()
            .all(|r| r.verdict.label() == first.verdict.label());
        Ok(Self {
            round,
            responses,
            consensus,
            gate_passed,
            flags,
        })
    }
}

/// Append-only log of a debate. Rounds are numbered 1..=len with no gaps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateHistory {
    pub claim: Claim,
    rounds: Vec<RoundRecord>,
}

impl DebateHistory {
    pub fn new(claim: Claim) -> Self {
        Self {
            claim,
            rounds: Vec::new(),
        }
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn last_round(&self) -> Option<&RoundRecord> {
        self.rounds.last()
    }

    pub fn push_round(&mut self, record: RoundRecord) -> Result<(), DomainError> {
        let expected = self.rounds.len() as u32 + 1;
        if record.round != expected {
            return Err(DomainError::NonContiguousRound {
                expected,
                got: record.round,
            });
        }
        self.rounds.push(record);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Consensus,
    Judge,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Consensus => f.write_str("consensus"),
            Termination::Judge => f.write_str("judge"),
        }
    }
}

/// Final result of one debate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateOutcome {
    pub verdict: Verdict,
    pub termination: Termination,
    pub terminated_at_round: u32,
    pub history: DebateHistory,
    /// Per-agent stability scores averaged across executed rounds.
    pub aggregate_scores: BTreeMap<String, StabilityScore>,
}
