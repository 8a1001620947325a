//! The debate state machine: per-round query formulation, retrieval,
//! response generation, consensus and gate checks, and judge fallback.
//!
//! Each round both debaters (independently, off round r-1 state) formulate a
//! retrieval query, fetch evidence with their own tool, and answer. When
//! scoring feedback is on, each response receives a stability score and the
//! round only terminates the debate if the debaters agree *and* both scores
//! pass the gate. A debate that reaches the round cap without such a round
//! is settled by the judge, which sees the claim, the full history, and each
//! debater's averaged scores.

mod prompts;

pub use prompts::{
    render, PromptTemplates, DEFAULT_JUDGE_TEMPLATE, DEFAULT_QUERY_TEMPLATE,
    DEFAULT_RESPOND_TEMPLATE, NO_EVIDENCE_MARKER, OPPONENT_BLOCK, PREVIOUS_QUERY_BLOCK,
    QUERY_CONTEXT_BLOCK,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    Backend, BackendError, BackendHandle, ChatRequest, Message, MetaBackend, PromptTag,
};
use crate::domain::{
    AgentId, AgentKind, AgentResponse, Claim, DebateHistory, DebateOutcome, DomainError,
    EvidenceDocument, LabelSet, RoundRecord, Termination, Verdict,
};
use crate::stability::{
    self, StabilityError, StabilityScore, StabilityThresholds, DEFAULT_N_QUESTIONS,
};
use crate::tools::{RetrievalTool, ToolError, DEFAULT_K, DEFAULT_MAX_DOC_CHARS};

pub const DEFAULT_MAX_ROUNDS: u32 = 3;

#[derive(Debug, Error)]
pub enum DebateError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Unrecoverable failure carrying whatever history was accumulated. The
/// benchmark harness counts these as incorrect.
#[derive(Debug, Error)]
#[error("debate aborted: {error}")]
pub struct DebateAborted {
    pub error: DebateError,
    pub partial: DebateHistory,
}

/// All knobs of one debate. Serialized wholesale into transcripts so every
/// run records the exact configuration that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebateConfig {
    /// Round cap T.
    pub max_rounds: u32,
    /// Retrieval depth.
    pub k: usize,
    pub thresholds: StabilityThresholds,
    /// When false, responses are never scored and the gate is vacuously
    /// true: termination reduces to verdict agreement alone.
    pub scoring_feedback: bool,
    /// When false, every retrieval query is the claim text verbatim.
    pub query_formulation: bool,
    /// When true (default), query formulation after round 1 also sees the
    /// agent's own previous query, not just the opponent's answer.
    pub include_own_previous_query: bool,
    /// Question count for answer relevance.
    pub n_questions: usize,
    pub max_doc_chars: usize,
    pub label_set: LabelSet,
    pub templates: PromptTemplates,
    /// When false (mock runs), transcripts record wall_ms as 0 so repeated
    /// runs are byte-identical.
    pub record_timing: bool,
}

impl Default for DebateConfig {
    fn default() -> Self {
        Self {
            max_rounds: DEFAULT_MAX_ROUNDS,
            k: DEFAULT_K,
            thresholds: StabilityThresholds::default(),
            scoring_feedback: true,
            query_formulation: true,
            include_own_previous_query: true,
            n_questions: DEFAULT_N_QUESTIONS,
            max_doc_chars: DEFAULT_MAX_DOC_CHARS,
            label_set: LabelSet::fever(),
            templates: PromptTemplates::default(),
            record_timing: true,
        }
    }
}

/// A debater: identity, retrieval tool, and backend handle.
#[derive(Clone)]
pub struct DebaterAgent {
    pub id: AgentId,
    pub tool: RetrievalTool,
    pub backend: BackendHandle,
}

impl DebaterAgent {
    /// `tool` must match the declared kind.
    pub fn new(id: AgentId, tool: RetrievalTool, backend: BackendHandle) -> Self {
        assert_eq!(id.kind, tool.kind(), "tool kind must match agent kind");
        assert_ne!(id.kind, AgentKind::Judge, "debaters cannot be judges");
        Self { id, tool, backend }
    }
}

#[derive(Clone)]
pub struct JudgeAgent {
    pub id: AgentId,
    pub backend: BackendHandle,
}

impl JudgeAgent {
    pub fn new(name: impl Into<String>, backend: BackendHandle) -> Self {
        Self {
            id: AgentId::new(AgentKind::Judge, name),
            backend,
        }
    }
}

pub struct DebateEngine {
    pub config: DebateConfig,
}

impl DebateEngine {
    pub fn new(config: DebateConfig) -> Self {
        assert!(config.max_rounds >= 1, "round cap must be at least 1");
        assert!(config.k >= 1, "retrieval depth k must be at least 1");
        Self { config }
    }

    /// Builds the retrieval query for one agent and round. Round 1 sees the
    /// claim alone; later rounds add the opponent's previous answer and (by
    /// default) the agent's own previous query. With query formulation
    /// disabled this is the claim text verbatim and no backend call is made.
    /// A backend outage degrades to the claim text and flags the round.
    pub fn formulate_query(
        &self,
        agent: &DebaterAgent,
        claim: &Claim,
        opp_prev_answer: Option<&str>,
        own_prev_query: Option<&str>,
        round: u32,
        flags: &mut Vec<String>,
    ) -> Result<String, DebateError> {
        assert_eq!(
            round == 1,
            opp_prev_answer.is_none(),
            "round 1 iff no opponent answer"
        );
        if !self.config.query_formulation {
            return Ok(claim.text.clone());
        }
        let mut context = String::new();
        if let Some(opponent_answer) = opp_prev_answer {
            context.push_str(&render(
                QUERY_CONTEXT_BLOCK,
                &[("opponent_answer", opponent_answer)],
            ));
            if self.config.include_own_previous_query {
                let previous = own_prev_query.expect("previous query exists after round 1");
                context.push_str(&render(
                    PREVIOUS_QUERY_BLOCK,
                    &[("previous_query", previous)],
                ));
            }
        }
        let prompt = render(
            &self.config.templates.query,
            &[
                ("agent_name", agent.id.name.as_str()),
                ("claim", claim.text.as_str()),
                ("debate_context", context.as_str()),
            ],
        );
        let mut req = ChatRequest::new(PromptTag::QueryFormulation, vec![Message::user(prompt)]);
        req.agent = Some(agent.id.name.clone());
        req.round = Some(round);
        match agent.backend.chat(&req) {
            Ok(text) => {
                let query = text.trim().to_string();
                if query.is_empty() {
                    flags.push(format!("empty_query_fallback:{}", agent.id.name));
                    Ok(claim.text.clone())
                } else {
                    Ok(query)
                }
            }
            Err(BackendError::Unavailable { .. }) => {
                flags.push(format!("query_fallback:{}", agent.id.name));
                Ok(claim.text.clone())
            }
            Err(other) => Err(other.into()),
        }
    }

    /// Generates one agent's answer over the claim and its evidence, parsing
    /// the verdict out of the reply. An unparsable verdict gets one stricter
    /// retry, then degrades to the label set's fallback label.
    pub fn respond(
        &self,
        agent: &DebaterAgent,
        documents: Vec<EvidenceDocument>,
        claim: &Claim,
        opp_prev_answer: Option<&str>,
        query: String,
        round: u32,
    ) -> Result<AgentResponse, DebateError> {
        assert!(documents.len() <= self.config.k, "more documents than k");
        assert_eq!(
            round == 1,
            opp_prev_answer.is_none(),
            "round 1 iff no opponent answer"
        );
        let rendered_docs = render_documents(&documents);
        let opponent_context = match opp_prev_answer {
            Some(answer) => render(OPPONENT_BLOCK, &[("opponent_answer", answer)]),
            None => String::new(),
        };
        let prompt = render(
            &self.config.templates.respond,
            &[
                ("agent_name", agent.id.name.as_str()),
                ("claim", claim.text.as_str()),
                ("documents", rendered_docs.as_str()),
                ("opponent_context", opponent_context.as_str()),
                ("labels", self.config.label_set.labels_joined().as_str()),
            ],
        );
        let mut req = ChatRequest::new(PromptTag::Respond, vec![Message::user(prompt)]);
        req.agent = Some(agent.id.name.clone());
        req.round = Some(round);
        let (verdict, rationale) =
            chat_for_verdict(agent.backend.as_ref(), req, &self.config.label_set)?;
        Ok(AgentResponse {
            agent: agent.id.clone(),
            round,
            query,
            documents,
            verdict,
            rationale,
            stability: None,
        })
    }

    /// Executes one round for both agents and appends it to the history.
    pub fn run_round(
        &self,
        history: &mut DebateHistory,
        agents: &[DebaterAgent; 2],
    ) -> Result<(), DebateError> {
        let round = history.rounds().len() as u32 + 1;
        assert!(
            round <= self.config.max_rounds,
            "round {round} exceeds configured cap"
        );
        let prev = history.last_round();
        let mut responses = Vec::with_capacity(2);
        let mut flags = Vec::new();
        let mut gate_passed = true;
        for (i, agent) in agents.iter().enumerate() {
            let opp_prev_answer = prev.map(|p| p.responses[1 - i].rationale.clone());
            let own_prev_query = prev.map(|p| p.responses[i].query.clone());
            let query = self.formulate_query(
                agent,
                &history.claim,
                opp_prev_answer.as_deref(),
                own_prev_query.as_deref(),
                round,
                &mut flags,
            )?;
            let documents = match agent.tool.retrieve(
                &query,
                self.config.k,
                self.config.max_doc_chars,
                agent.backend.as_ref(),
            ) {
                Ok(docs) => docs,
                Err(ToolError::Search(_)) => {
                    flags.push(format!("search_unavailable:{}", agent.id.name));
                    Vec::new()
                }
                Err(other) => return Err(other.into()),
            };
            let mut response = self.respond(
                agent,
                documents,
                &history.claim,
                opp_prev_answer.as_deref(),
                query,
                round,
            )?;
            if self.config.scoring_feedback {
                // Null-tool agents have no retrieved context; the claim text
                // substitutes so the gate stays defined.
                let context = if response.documents.is_empty() {
                    history.claim.text.clone()
                } else {
                    response
                        .documents
                        .iter()
                        .map(|d| d.text.as_str())
                        .collect::<Vec<_>>()
                        .join("\n\n")
                };
                let scoring_backend =
                    MetaBackend::new(agent.backend.clone(), agent.id.name.clone(), round);
                let score = stability::score_response(
                    &history.claim.text,
                    &response.rationale,
                    &context,
                    self.config.n_questions,
                    &scoring_backend,
                )?;
                gate_passed &= stability::gate(&score, &self.config.thresholds);
                response.stability = Some(score);
            }
            responses.push(response);
        }
        let record = RoundRecord::new(responses, gate_passed, flags)?;
        history.push_round(record)?;
        Ok(())
    }

    /// Runs the full protocol: up to `max_rounds` rounds with early return
    /// on gated consensus, judge fallback otherwise.
    #[allow(clippy::result_large_err)] // Err carries the partial history
    pub fn run_debate(
        &self,
        claim: Claim,
        agents: &[DebaterAgent; 2],
        judge: &JudgeAgent,
    ) -> Result<DebateOutcome, DebateAborted> {
        assert_ne!(agents[0].id.name, agents[1].id.name, "agent names must differ");
        let mut history = DebateHistory::new(claim);
        for round in 1..=self.config.max_rounds {
            if let Err(error) = self.run_round(&mut history, agents) {
                return Err(DebateAborted {
                    error,
                    partial: history,
                });
            }
            let record = history.last_round().expect("round was just appended");
            if record.consensus && record.gate_passed {
                let verdict = record.responses[0].verdict.clone();
                let aggregate_scores = aggregate_by_agent(&history);
                return Ok(DebateOutcome {
                    verdict,
                    termination: Termination::Consensus,
                    terminated_at_round: round,
                    history,
                    aggregate_scores,
                });
            }
        }
        let aggregate_scores = aggregate_by_agent(&history);
        let verdict = match self.judge(judge, &history, &aggregate_scores) {
            Ok(verdict) => verdict,
            Err(error) => {
                return Err(DebateAborted {
                    error,
                    partial: history,
                })
            }
        };
        Ok(DebateOutcome {
            verdict,
            termination: Termination::Judge,
            terminated_at_round: self.config.max_rounds,
            history,
            aggregate_scores,
        })
    }

    /// Judge decision over the claim, the full transcript, and each agent's
    /// averaged stability scores.
    pub fn judge(
        &self,
        judge: &JudgeAgent,
        history: &DebateHistory,
        aggregate_scores: &BTreeMap<String, StabilityScore>,
        ) -> Result<Verdict, DebateError> {
        assert_eq!(
            history.rounds().len() as u32,
            self.config.max_rounds,
            "judge requires exactly max_rounds rounds"
        );
        let rendered_history = render_history(history);
        let rendered_scores = render_scores(aggregate_scores);
        let prompt = render(
            &self.config.templates.judge,
            &[
                ("claim", history.claim.text.as_str()),
                ("history", rendered_history.as_str()),
                ("scores", rendered_scores.as_str()),
                ("labels", self.config.label_set.labels_joined().as_str()),
            ],
        );
        let mut req = ChatRequest::new(PromptTag::Judge, vec![Message::user(prompt)]);
        req.agent = Some(judge.id.name.clone());
        req.round = Some(self.config.max_rounds);
        let (verdict, _) = chat_for_verdict(judge.backend.as_ref(), req, &self.config.label_set)?;
        Ok(verdict)
    }
}

/// Chats and parses a verdict out of the reply. On parse failure, retries
/// once with a stricter label-only instruction, then falls back to the
/// label set's fallback verdict with the raw text preserved.
fn chat_for_verdict(
    backend: &dyn Backend,
    req: ChatRequest,
    label_set: &LabelSet,
) -> Result<(Verdict, String), DebateError> {
    let reply = backend.chat(&req)?;
    match label_set.normalize(&reply) {
        Ok(verdict) => Ok((verdict, reply)),
        Err(DomainError::UnparsableVerdict(_)) => {
            let mut retry = req.clone();
            retry.messages.push(Message::assistant(reply));
            retry.messages.push(Message::user(format!(
                "Answer with exactly one of: {}. Reply with the label only.",
                label_set.labels_joined()
            )));
            let second = backend.chat(&retry)?;
            match label_set.normalize(&second) {
                Ok(verdict) => Ok((verdict, second)),
                Err(DomainError::UnparsableVerdict(_)) => {
                    Ok((label_set.fallback_verdict(second.clone()), second))
                }
                Err(other) => Err(other.into()),
            }
        }
        Err(other) => Err(other.into()),
    }
}

fn render_documents(documents: &[EvidenceDocument]) -> String {
    if documents.is_empty() {
        return NO_EVIDENCE_MARKER.to_string();
    }
    let mut out = String::new();
    for (i, doc) in documents.iter().enumerate() {
        let _ = writeln!(out, "{}. [{}] {}", i + 1, doc.source_id, doc.text);
    }
    out
}

fn render_history(history: &DebateHistory) -> String {
    let mut out = String::new();
    for record in history.rounds() {
        let _ = writeln!(out, "Round {}:", record.round);
        for response in &record.responses {
            let _ = writeln!(out, "  [{}] query: {}", response.agent.name, response.query);
            if response.documents.is_empty() {
                let _ = writeln!(out, "  [{}] evidence: {}", response.agent.name, NO_EVIDENCE_MARKER);
            } else {
                let _ = writeln!(out, "  [{}] evidence:", response.agent.name);
                for doc in &response.documents {
                    let _ = writeln!(out, "    - [{}] {}", doc.source_id, doc.text);
                }
            }
            let _ = writeln!(
                out,
                "  [{}] answer ({}): {}",
                response.agent.name,
                response.verdict.label(),
                response.rationale
            );
        }
    }
    out
}

/// Scores rendered for the judge prompt, four decimals per component.
fn render_scores(aggregate_scores: &BTreeMap<String, StabilityScore>) -> String {
    if aggregate_scores.is_empty() {
        return "(scoring feedback disabled)".to_string();
    }
    aggregate_scores
        .iter()
        .map(|(agent, score)| {
            format!(
                "{agent}: faithfulness={:.4}, answer_relevance={:.4}",
                score.faithfulness, score.answer_relevance
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Per-agent average of stability scores across all executed rounds.
fn aggregate_by_agent(history: &DebateHistory) -> BTreeMap<String, StabilityScore> {
    let mut per_agent: BTreeMap<String, Vec<StabilityScore>> = BTreeMap::new();
    for record in history.rounds() {
        for response in &record.responses {
            if let Some(score) = &response.stability {
                per_agent
                    .entry(response.agent.name.clone())
                    .or_default()
                    .push(score.clone());
            }
        }
    }
    per_agent
        .into_iter()
        .filter_map(|(agent, scores)| {
            stability::aggregate(&scores).ok().map(|agg| (agent, agg))
        })
        .collect()
}

/// Per-debate backend call accounting carried in transcripts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BackendCallCounts {
    pub chat: usize,
    pub embed: usize,
}

/// One exported debate: the claim, the exact configuration, every round,
/// and the outcome. Serialized as a single JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub claim: Claim,
    pub config: DebateConfig,
    pub verdict: Option<Verdict>,
    pub termination: Option<Termination>,
    pub terminated_at_round: u32,
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    pub rounds: Vec<RoundRecord>,
    pub aggregate_scores: BTreeMap<String, StabilityScore>,
    pub wall_ms: u64,
    pub backend_calls: BackendCallCounts,
}

impl Transcript {
    pub fn from_outcome(
        outcome: &DebateOutcome,
        config: &DebateConfig,
        wall_ms: u64,
        backend_calls: BackendCallCounts,
    ) -> Self {
        Self {
            claim: outcome.history.claim.clone(),
            config: config.clone(),
            verdict: Some(outcome.verdict.clone()),
            termination: Some(outcome.termination),
            terminated_at_round: outcome.terminated_at_round,
            aborted: false,
            abort_reason: None,
            rounds: outcome.history.rounds().to_vec(),
            aggregate_scores: outcome.aggregate_scores.clone(),
            wall_ms,
            backend_calls,
        }
    }

    pub fn from_aborted(
        aborted: &DebateAborted,
        config: &DebateConfig,
        wall_ms: u64,
        backend_calls: BackendCallCounts,
    ) -> Self {
        Self {
            claim: aborted.partial.claim.clone(),
            config: config.clone(),
            verdict: None,
            termination: None,
            terminated_at_round: aborted.partial.rounds().len() as u32,
            aborted: true,
            abort_reason: Some(aborted.error.to_string()),
            rounds: aborted.partial.rounds().to_vec(),
            aggregate_scores: BTreeMap::new(),
            wall_ms,
            backend_calls,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
