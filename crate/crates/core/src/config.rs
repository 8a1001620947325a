//! CLI configuration: a TOML config file merged with environment variables
//! and command-line flags. Flags override file values, file values override
//! defaults; the fully resolved result is echoed into every report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    BackendHandle, OpenAiCompatBackend, Script, ScriptedBackend,
};
use crate::debate::{DebateConfig, PromptTemplates};
use crate::domain::LabelSet;
use crate::harness::{
    AgentCombo, DatasetFormat, DEFAULT_CI_LEVEL, DEFAULT_PARALLELISM, DEFAULT_RESAMPLES,
    DEFAULT_SAMPLE_SIZE,
};
use crate::stability::StabilityThresholds;
use crate::tools::{
    FixtureSearchClient, HttpSearchClient, SearchClient, VectorIndex, DEFAULT_CHUNK_CHARS,
    DEFAULT_OVERLAP_CHARS,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path:?}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("cannot parse config {path:?}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{0}")]
    Bad(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Mock,
    OpenaiCompat,
}

impl std::str::FromStr for BackendKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "openai-compat" => Ok(BackendKind::OpenaiCompat),
            other => Err(ConfigError::Bad(format!(
                "unknown backend {other:?} (expected mock or openai-compat)"
            ))),
        }
    }
}

/// `[backend]` section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSection {
    pub kind: Option<BackendKind>,
    pub script: Option<PathBuf>,
}

/// `[tools]` section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolsSection {
    pub index_path: Option<PathBuf>,
    pub search_fixtures: Option<PathBuf>,
    pub search_endpoint: Option<String>,
    pub chunk_chars: Option<usize>,
    pub overlap_chars: Option<usize>,
    pub max_doc_chars: Option<usize>,
}

/// `[debate]` section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DebateSection {
    pub rounds: Option<u32>,
    pub k: Option<usize>,
    pub faithfulness_min: Option<f64>,
    pub relevance_min: Option<f64>,
    pub strict_thresholds: Option<bool>,
    pub scoring_feedback: Option<bool>,
    pub query_formulation: Option<bool>,
    pub include_own_previous_query: Option<bool>,
    pub n_questions: Option<usize>,
    pub labels: Option<Vec<String>>,
    pub label_aliases: Option<BTreeMap<String, String>>,
    pub fallback_label: Option<String>,
    pub query_template: Option<PathBuf>,
    pub respond_template: Option<PathBuf>,
    pub judge_template: Option<PathBuf>,
}

/// `[benchmark]` section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSection {
    pub dataset: Option<PathBuf>,
    pub dataset_name: Option<String>,
    pub format: Option<DatasetFormat>,
    pub sample_size: Option<usize>,
    pub seed: Option<u64>,
    pub combo: Option<String>,
    pub parallelism: Option<usize>,
    pub resamples: Option<usize>,
    pub ci_level: Option<f64>,
}

/// `[output]` section.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub backend: BackendSection,
    pub tools: ToolsSection,
    pub debate: DebateSection,
    pub benchmark: BenchmarkSection,
    pub output: OutputSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let data = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        toml::from_str(&data).map_err(|e| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Command-line overrides, already parsed. `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub backend: Option<BackendKind>,
    pub script: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub search_fixtures: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub dataset_format: Option<DatasetFormat>,
    pub sample_size: Option<usize>,
    pub seed: Option<u64>,
    pub combo: Option<String>,
    pub rounds: Option<u32>,
    pub retrieval_k: Option<usize>,
    pub faithfulness_min: Option<f64>,
    pub relevance_min: Option<f64>,
    pub no_query_formulation: bool,
    pub no_scoring_feedback: bool,
    pub parallelism: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub backend_kind: BackendKind,
    pub script: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub search_fixtures: Option<PathBuf>,
    pub search_endpoint: Option<String>,
    pub combo: AgentCombo,
    pub dataset: Option<PathBuf>,
    pub dataset_name: String,
    pub dataset_format: DatasetFormat,
    pub sample_size: usize,
    pub seed: u64,
    pub resamples: usize,
    pub ci_level: f64,
    pub parallelism: usize,
    pub chunk_chars: usize,
    pub overlap_chars: usize,
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub debate: DebateConfig,
}

impl Settings {
    /// Merges defaults, the optional config file, and CLI flags.
    pub fn resolve(file: FileConfig, cli: &CliOverrides) -> Result<Self, ConfigError> {
        let backend_kind = cli
            .backend
            .or(file.backend.kind)
            .unwrap_or(BackendKind::OpenaiCompat);
        let script = cli.script.clone().or(file.backend.script);
        if backend_kind == BackendKind::Mock && script.is_none() {
            return Err(ConfigError::Bad(
                "mock backend requires a script (--script PATH)".into(),
            ));
        }

        let labels = file.debate.labels.clone();
        let label_set = match labels {
            Some(labels) => {
                let aliases = file.debate.label_aliases.clone().unwrap_or_default();
                let fallback = file
                    .debate
                    .fallback_label
                    .clone()
                    .or_else(|| labels.last().cloned())
                    .ok_or_else(|| ConfigError::Bad("label set has no labels".into()))?;
                LabelSet::new(labels, aliases, fallback)
                    .map_err(|e| ConfigError::Bad(e.to_string()))?
            }
            None => LabelSet::fever(),
        };

        let mut templates = PromptTemplates::default();
        if let Some(path) = &file.debate.query_template {
            templates = templates
                .with_query_file(path)
                .map_err(|e| ConfigError::Bad(format!("query template: {e}")))?;
        }
        if let Some(path) = &file.debate.respond_template {
            templates = templates
                .with_respond_file(path)
                .map_err(|e| ConfigError::Bad(format!("respond template: {e}")))?;
        }
        if let Some(path) = &file.debate.judge_template {
            templates = templates
                .with_judge_file(path)
                .map_err(|e| ConfigError::Bad(format!("judge template: {e}")))?;
        }

        let thresholds = StabilityThresholds {
            faithfulness_min: cli
                .faithfulness_min
                .or(file.debate.faithfulness_min)
                .unwrap_or_else(|| StabilityThresholds::default().faithfulness_min),
            relevance_min: cli
                .relevance_min
                .or(file.debate.relevance_min)
                .unwrap_or_else(|| StabilityThresholds::default().relevance_min),
            strict: file.debate.strict_thresholds.unwrap_or(false),
        };

        let defaults = DebateConfig::default();
        let debate = DebateConfig {
            max_rounds: cli.rounds.or(file.debate.rounds).unwrap_or(defaults.max_rounds),
            k: cli.retrieval_k.or(file.debate.k).unwrap_or(defaults.k),
            thresholds,
            scoring_feedback: if cli.no_scoring_feedback {
                false
            } else {
                file.debate.scoring_feedback.unwrap_or(true)
            },
            query_formulation: if cli.no_query_formulation {
                false
            } else {
                file.debate.query_formulation.unwrap_or(true)
            },
            include_own_previous_query: file
                .debate
                .include_own_previous_query
                .unwrap_or(true),
            n_questions: file.debate.n_questions.unwrap_or(defaults.n_questions),
            max_doc_chars: file.tools.max_doc_chars.unwrap_or(defaults.max_doc_chars),
            label_set,
            templates,
            // Mock runs must be byte-reproducible, so timings are zeroed.
            record_timing: backend_kind != BackendKind::Mock,
        };
        if debate.max_rounds < 1 {
            return Err(ConfigError::Bad("rounds must be at least 1".into()));
        }
        if debate.k < 1 {
            return Err(ConfigError::Bad("retrieval depth k must be at least 1".into()));
        }

        let combo_str = cli
            .combo
            .clone()
            .or(file.benchmark.combo)
            .unwrap_or_else(|| "vanilla+vanilla".to_string());
        let combo: AgentCombo = combo_str
            .parse()
            .map_err(|e: crate::harness::HarnessError| ConfigError::Bad(e.to_string()))?;

        let dataset = cli.dataset.clone().or(file.benchmark.dataset);
        let dataset_name = file
            .benchmark
            .dataset_name
            .clone()
            .or_else(|| {
                dataset
                    .as_ref()
                    .and_then(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            })
            .unwrap_or_else(|| "dataset".to_string());

        Ok(Settings {
            backend_kind,
            script,
            index_path: cli.index_path.clone().or(file.tools.index_path),
            search_fixtures: cli.search_fixtures.clone().or(file.tools.search_fixtures),
            search_endpoint: file.tools.search_endpoint,
            combo,
            dataset,
            dataset_name,
            dataset_format: cli
                .dataset_format
                .or(file.benchmark.format)
                .unwrap_or(DatasetFormat::GenericJsonl),
            sample_size: cli
                .sample_size
                .or(file.benchmark.sample_size)
                .unwrap_or(DEFAULT_SAMPLE_SIZE),
            seed: cli.seed.or(file.benchmark.seed).unwrap_or(0),
            resamples: file.benchmark.resamples.unwrap_or(DEFAULT_RESAMPLES),
            ci_level: file.benchmark.ci_level.unwrap_or(DEFAULT_CI_LEVEL),
            parallelism: cli
                .parallelism
                .or(file.benchmark.parallelism)
                .unwrap_or(DEFAULT_PARALLELISM),
            chunk_chars: file.tools.chunk_chars.unwrap_or(DEFAULT_CHUNK_CHARS),
            overlap_chars: file.tools.overlap_chars.unwrap_or(DEFAULT_OVERLAP_CHARS),
            out_dir: cli
                .out_dir
                .clone()
                .or(file.output.out_dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            debate,
        })
    }

    /// Builds the configured backend. Config problems (missing script,
    /// missing credentials) surface here, before any network call.
    pub fn build_backend(&self) -> Result<BackendHandle, ConfigError> {
        match self.backend_kind {
            BackendKind::Mock => {
                let path = self
                    .script
                    .as_ref()
                    .ok_or_else(|| ConfigError::Bad("mock backend requires a script".into()))?;
                let script = Script::from_json_file(path)
                    .map_err(|e| ConfigError::Bad(e.to_string()))?;
                let backend =
                    ScriptedBackend::new(script).map_err(|e| ConfigError::Bad(e.to_string()))?;
                Ok(Arc::new(backend))
            }
            BackendKind::OpenaiCompat => {
                let backend = OpenAiCompatBackend::from_env()
                    .map_err(|e| ConfigError::Bad(e.to_string()))?;
                Ok(Arc::new(backend))
            }
        }
    }

    /// Loads the vector index when the combo needs one.
    pub fn build_index(&self) -> Result<Option<Arc<VectorIndex>>, ConfigError> {
        match &self.index_path {
            Some(path) => {
                let index =
                    VectorIndex::load(path).map_err(|e| ConfigError::Bad(e.to_string()))?;
                Ok(Some(Arc::new(index)))
            }
            None => Ok(None),
        }
    }

    /// Builds the search client: fixtures when a directory is configured,
    /// the networked client otherwise (requires SEARCH_API_KEY).
    pub fn build_search(&self) -> Result<Option<Arc<dyn SearchClient>>, ConfigError> {
        if let Some(dir) = &self.search_fixtures {
            return Ok(Some(Arc::new(FixtureSearchClient::new(dir.clone()))));
        }
        if self.backend_kind == BackendKind::Mock {
            // Offline mode never falls through to the network.
            return Ok(None);
        }
        match HttpSearchClient::from_env(self.search_endpoint.clone()) {
            Ok(client) => Ok(Some(Arc::new(client))),
            Err(_) => Ok(None),
        }
    }
}
