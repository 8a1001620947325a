//! Tool-augmented multi-agent debate engine for claim verification.
//!
//! Two debater agents with heterogeneous retrieval tools argue over a claim
//! across bounded rounds. Every response is gated by a stability score
//! (faithfulness and answer relevance); debates either converge on a gated
//! consensus or fall through to a judge agent. A benchmark harness runs
//! datasets through the engine and reports exact-match accuracy with
//! bootstrap confidence intervals.

pub mod backends;
pub mod config;
pub mod debate;
pub mod domain;
pub mod harness;
pub mod stability;
pub mod tools;

pub use backends::{Backend, BackendError, BackendHandle, CallLog, ScriptedBackend};
pub use debate::{
    DebateAborted, DebateConfig, DebateEngine, DebaterAgent, JudgeAgent, Transcript,
};
pub use domain::{
    exact_match, AgentId, AgentKind, Claim, DebateHistory, DebateOutcome, LabelSet, Termination,
    Verdict,
};
pub use stability::{StabilityScore, StabilityThresholds};
pub use tools::{RetrievalTool, VectorIndex};
