//! Web-search clients behind one interface: a networked client with
//! Tavily-style query/results semantics and a fixture-backed client reading
//! canned results from disk so the full protocol runs offline.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ENV_SEARCH_API_KEY: &str = "SEARCH_API_KEY";
pub const DEFAULT_SEARCH_ENDPOINT: &str = "https://api.tavily.com/search";

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("no fixture for query {query:?} (expected {path:?})")]
    MissingFixture { query: String, path: PathBuf },
    #[error("search configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub url: String,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

pub trait SearchClient: Send + Sync {
    /// Up to `k` results for `query`; fewer when the source has fewer.
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, SearchError>;
}

/// Fixture file layout: one JSON file per query, named by the query's
/// SHA-256 hex digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchFixture {
    pub query: String,
    pub results: Vec<SearchResult>,
}

pub fn fixture_file_name(query: &str) -> String {
    let digest = Sha256::digest(query.as_bytes());
    format!("{digest:x}.json")
}

/// Reads canned search results from a fixture directory.
pub struct FixtureSearchClient {
    dir: PathBuf,
}

impl FixtureSearchClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Writes a fixture where this client will look for it.
    pub fn write_fixture(dir: &Path, fixture: &SearchFixture) -> std::io::Result<PathBuf> {
        let path = dir.join(fixture_file_name(&fixture.query));
        std::fs::write(&path, serde_json::to_string_pretty(fixture)?)?;
        Ok(path)
    }
}

impl SearchClient for FixtureSearchClient {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, SearchError> {
        let path = self.dir.join(fixture_file_name(query));
        let data = std::fs::read_to_string(&path).map_err(|_| SearchError::MissingFixture {
            query: query.to_string(),
            path: path.clone(),
        })?;
        let fixture: SearchFixture = serde_json::from_str(&data).map_err(|e| {
            SearchError::Config(format!("cannot parse fixture {path:?}: {e}"))
        })?;
        Ok(fixture.results.into_iter().take(k).collect())
    }
}

/// Networked search client (Tavily-style: POST a query, read a results
/// array). Retries transient failures like the chat backend does.
pub struct HttpSearchClient {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
    max_attempts: u32,
    backoff_ms: u64,
}

#[derive(Debug, Deserialize)]
struct HttpSearchResponse {
    results: Vec<SearchResult>,
}

impl HttpSearchClient {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self, SearchError> {
        let api_key = api_key.into();
        if api_key.is_empty() {
            return Err(SearchError::Config("search API key is empty".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| SearchError::Config(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            client,
            max_attempts: 3,
            backoff_ms: 250,
        })
    }

    pub fn from_env(endpoint: Option<String>) -> Result<Self, SearchError> {
        let key = std::env::var(ENV_SEARCH_API_KEY)
            .map_err(|_| SearchError::Config(format!("{ENV_SEARCH_API_KEY} is not set")))?;
        Self::new(
            endpoint.unwrap_or_else(|| DEFAULT_SEARCH_ENDPOINT.to_string()),
            key,
        )
    }
}

impl SearchClient for HttpSearchClient {
    fn search(&self, query: &str, k: usize) -> Result<Vec<SearchResult>, SearchError> {
        let body = json!({
            "api_key": self.api_key,
            "query": query,
            "max_results": k,
        });
        let mut last_error = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.backoff_ms.saturating_mul(1 << (attempt - 1)),
                ));
            }
            match self.client.post(&self.endpoint).json(&body).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: HttpSearchResponse = resp.json().map_err(|e| {
                            SearchError::Config(format!("cannot parse search response: {e}"))
                        })?;
                        return Ok(parsed.results.into_iter().take(k).collect());
                    }
                    let text = resp.text().unwrap_or_default();
                    last_error = format!("HTTP {status}: {text}");
                    if !(status.as_u16() == 429 || status.is_server_error()) {
                        break;
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(SearchError::Unavailable {
            attempts: self.max_attempts,
            message: last_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let fixture = SearchFixture {
            query: "who owns the guardian".into(),
            results: vec![
                SearchResult {
                    url: "https://example.com/a".into(),
                    content: "Guardian Media Limited ...".into(),
                    score: Some(0.9),
                },
                SearchResult {
                    url: "https://example.com/b".into(),
                    content: "ANSA McAL ...".into(),
                    score: None,
                },
            ],
        };
        FixtureSearchClient::write_fixture(dir.path(), &fixture).unwrap();
        let client = FixtureSearchClient::new(dir.path());
        let hits = client.search("who owns the guardian", 3).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].url, "https://example.com/a");
        let truncated = client.search("who owns the guardian", 1).unwrap();
        assert_eq!(truncated.len(), 1);
    }

    #[test]
    fn missing_fixture_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let client = FixtureSearchClient::new(dir.path());
        assert!(matches!(
            client.search("never canned", 3),
            Err(SearchError::MissingFixture { .. })
        ));
    }

    #[test]
    fn unreachable_search_endpoint_reports_unavailable() {
        let port = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let mut client =
            HttpSearchClient::new(format!("http://127.0.0.1:{port}/search"), "key").unwrap();
        client.backoff_ms = 1;
        match client.search("q", 3) {
            Err(SearchError::Unavailable { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected Unavailable, got {other:?}"),
        }
    }
}
