//! Prompt templates with named placeholders.
//!
//! Templates are plain text with `{name}` slots; defaults ship in-repo under
//! `prompts/` and any of them can be overridden from files at runtime.

use std::path::Path;

use serde::{Deserialize, Serialize};

pub const DEFAULT_QUERY_TEMPLATE: &str = include_str!("../../prompts/query.txt");
pub const DEFAULT_RESPOND_TEMPLATE: &str = include_str!("../../prompts/respond.txt");
pub const DEFAULT_JUDGE_TEMPLATE: &str = include_str!("../../prompts/judge.txt");

/// Context block appended to query prompts after round 1.
pub const QUERY_CONTEXT_BLOCK: &str = "\nYour opponent answered previously:\n{opponent_answer}\n";
/// Added to the query context when the agent's own previous query is passed
/// back in (the default protocol variant).
pub const PREVIOUS_QUERY_BLOCK: &str = "Your previous query was: {previous_query}\n";
/// Context block appended to respond prompts after round 1.
pub const OPPONENT_BLOCK: &str = "\nYour opponent's previous answer:\n{opponent_answer}\n";
/// Marker inserted when an agent has no retrieved evidence.
pub const NO_EVIDENCE_MARKER: &str = "(no evidence retrieved)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub query: String,
    pub respond: String,
    pub judge: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            query: DEFAULT_QUERY_TEMPLATE.to_string(),
            respond: DEFAULT_RESPOND_TEMPLATE.to_string(),
            judge: DEFAULT_JUDGE_TEMPLATE.to_string(),
        }
    }
}

impl PromptTemplates {
    pub fn with_query_file(mut self, path: &Path) -> std::io::Result<Self> {
        self.query = std::fs::read_to_string(path)?;
        Ok(self)
    }

    pub fn with_respond_file(mut self, path: &Path) -> std::io::Result<Self> {
        self.respond = std::fs::read_to_string(path)?;
        Ok(self)
    }

    pub fn with_judge_file(mut self, path: &Path) -> std::io::Result<Self> {
        self.judge = std::fs::read_to_string(path)?;
        Ok(self)
    }
}

/// Replaces each `{name}` slot with its value. Unknown slots are left
/// verbatim so custom templates fail visibly rather than silently.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}
