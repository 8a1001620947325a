//! Networked backend speaking OpenAI-compatible wire semantics.
//!
//! Chat goes to `POST {base}/v1/chat/completions`, embeddings to
//! `POST {base}/v1/embeddings`. Transient failures (transport errors, 429,
//! 5xx) are retried with bounded exponential backoff; an in-flight request
//! cap bounds concurrency when many debates run at once.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendError, ChatRequest, EmbeddingVector, Role};

pub const ENV_API_BASE: &str = "LLM_API_BASE";
pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL: &str = "LLM_MODEL";
pub const ENV_EMBED_MODEL: &str = "LLM_EMBED_MODEL";

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    pub api_base: String,
    pub api_key: String,
    pub model: String,
    pub embed_model: String,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        Self {
            api_base: "https://api.openai.com".to_string(),
            api_key: String::new(),
            model: "gpt-4o-mini".to_string(),
            embed_model: "text-embedding-3-small".to_string(),
            max_attempts: 3,
            backoff_ms: 250,
            timeout_secs: 60,
            max_in_flight: 8,
        }
    }
}

impl OpenAiConfig {
    /// Reads endpoint, credentials, and model names from the environment.
    pub fn from_env() -> Result<Self, BackendError> {
        let mut config = Self::default();
        if let Ok(base) = std::env::var(ENV_API_BASE) {
            config.api_base = base;
        }
        config.api_key = std::env::var(ENV_API_KEY)
            .map_err(|_| BackendError::Config(format!("{ENV_API_KEY} is not set")))?;
        if let Ok(model) = std::env::var(ENV_MODEL) {
            config.model = model;
        }
        if let Ok(model) = std::env::var(ENV_EMBED_MODEL) {
            config.embed_model = model;
        }
        Ok(config)
    }
}

/// Counting semaphore capping concurrent outbound requests.
struct InFlightGate {
    state: Mutex<usize>,
    cvar: Condvar,
    cap: usize,
}

impl InFlightGate {
    fn new(cap: usize) -> Self {
        Self {
            state: Mutex::new(0),
            cvar: Condvar::new(),
            cap: cap.max(1),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut in_flight = self.state.lock().unwrap();
        while *in_flight >= self.cap {
            in_flight = self.cvar.wait(in_flight).unwrap();
        }
        *in_flight += 1;
        InFlightGuard { gate: self }
    }
}

struct InFlightGuard<'a> {
    gate: &'a InFlightGate,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.gate.state.lock().unwrap();
        *in_flight -= 1;
        self.gate.cvar.notify_one();
    }
}

pub struct OpenAiCompatBackend {
    config: OpenAiConfig,
    client: reqwest::blocking::Client,
    gate: InFlightGate,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChatChoiceMessage {
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl OpenAiCompatBackend {
    pub fn new(config: OpenAiConfig) -> Result<Self, BackendError> {
        if config.api_key.is_empty() {
            return Err(BackendError::Config("API key is empty".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let gate = InFlightGate::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            gate,
        })
    }

    pub fn from_env() -> Result<Self, BackendError> {
        Self::new(OpenAiConfig::from_env()?)
    }

    fn endpoint(&self, path: &str) -> String {
        let base = self.config.api_base.trim_end_matches('/');
        if base.ends_with("/v1") {
            format!("{base}/{path}")
        } else {
            format!("{base}/v1/{path}")
        }
    }

    /// POSTs `body`, retrying transport errors, 429, and 5xx with
    /// exponential backoff up to `max_attempts`.
    fn post_with_retry(
        &self,
        url: &str,
        body: &serde_json::Value,
    ) -> Result<serde_json::Value, BackendError> {
        let _guard = self.gate.acquire();
        let mut last_error = String::new();
        for attempt in 0..self.config.max_attempts {
            if attempt > 0 {
                let backoff = self.config.backoff_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let sent = self
                .client
                .post(url)
                .bearer_auth(&self.config.api_key)
                .json(body)
                .send();
            match sent {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp
                            .json()
                            .map_err(|e| BackendError::InvalidResponse(e.to_string()));
                    }
                    let text = resp.text().unwrap_or_default();
                    last_error = format!("HTTP {status}: {text}");
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    if !retryable {
                        break;
                    }
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(BackendError::Unavailable {
            attempts: self.config.max_attempts,
            message: last_error,
        })
    }
}

impl Backend for OpenAiCompatBackend {
    fn chat(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let messages: Vec<serde_json::Value> = req
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({"role": role, "content": m.content})
            })
            .collect();
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let raw = self.post_with_retry(&self.endpoint("chat/completions"), &body)?;
        let parsed: ChatResponse = serde_json::from_value(raw)
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::InvalidResponse("no choices in response".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        let body = json!({
            "model": self.config.embed_model,
            "input": texts,
        });
        let raw = self.post_with_retry(&self.endpoint("embeddings"), &body)?;
        let parsed: EmbeddingResponse = serde_json::from_value(raw)
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(BackendError::InvalidResponse(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        let mut data = parsed.data;
        data.sort_by_key(|d| d.index);
        let vectors: Vec<EmbeddingVector> = data
            .into_iter()
            .map(|d| EmbeddingVector::new(d.embedding))
            .collect();
        if vectors.iter().any(|v| !v.is_finite() || v.dim() == 0) {
            return Err(BackendError::InvalidResponse(
                "embedding with empty or non-finite values".into(),
            ));
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{Message, PromptTag};
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    fn test_config(base: String) -> OpenAiConfig {
        OpenAiConfig {
            api_base: base,
            api_key: "test-key".into(),
            backoff_ms: 1,
            timeout_secs: 5,
            ..OpenAiConfig::default()
        }
    }

    /// Serves `responses` in order on a local port, counting connections.
    fn serve(responses: Vec<String>) -> (String, Arc<AtomicU32>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicU32::new(0));
        let hits_inner = hits.clone();
        std::thread::spawn(move || {
            for response in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                hits_inner.fetch_add(1, Ordering::SeqCst);
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let _ = stream.write_all(response.as_bytes());
            }
        });
        (format!("http://{addr}"), hits)
    }

    fn http_response(status: &str, body: &str) -> String {
        format!(
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    #[test]
    fn unreachable_host_fails_after_max_attempts() {
        // Bind then drop a listener so the port actively refuses connections.
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        let backend =
            OpenAiCompatBackend::new(test_config(format!("http://127.0.0.1:{port}"))).unwrap();
        let req = ChatRequest::new(PromptTag::Respond, vec![Message::user("hi")]);
        match backend.chat(&req) {
            Err(BackendError::Unavailable { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected Unavailable, got {other:?}"),
        }
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let ok_body = r#"{"choices":[{"message":{"content":"SUPPORTS"}}]}"#;
        let (base, hits) = serve(vec![
            http_response("500 Internal Server Error", "{}"),
            http_response("500 Internal Server Error", "{}"),
            http_response("200 OK", ok_body),
        ]);
        let backend = OpenAiCompatBackend::new(test_config(base)).unwrap();
        let req = ChatRequest::new(PromptTag::Respond, vec![Message::user("hi")]);
        assert_eq!(backend.chat(&req).unwrap(), "SUPPORTS");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (base, hits) = serve(vec![http_response(
            "401 Unauthorized",
            r#"{"error":"bad key"}"#,
        )]);
        let backend = OpenAiCompatBackend::new(test_config(base)).unwrap();
        let req = ChatRequest::new(PromptTag::Respond, vec![Message::user("hi")]);
        assert!(matches!(
            backend.chat(&req),
            Err(BackendError::Unavailable { .. })
        ));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn embeddings_are_reordered_by_index() {
        let body = r#"{"data":[
            {"index":1,"embedding":[0.0,1.0]},
            {"index":0,"embedding":[1.0,0.0]}
        ]}"#;
        let (base, _) = serve(vec![http_response("200 OK", body)]);
        let backend = OpenAiCompatBackend::new(test_config(base)).unwrap();
        let out = backend
            .embed(&["a".to_string(), "b".to_string()])
            .unwrap();
        assert_eq!(out[0].values, vec![1.0, 0.0]);
        assert_eq!(out[1].values, vec![0.0, 1.0]);
    }

    #[test]
    fn missing_api_key_is_a_config_error() {
        let config = OpenAiConfig {
            api_key: String::new(),
            ..OpenAiConfig::default()
        };
        assert!(matches!(
            OpenAiCompatBackend::new(config),
            Err(BackendError::Config(_))
        ));
    }

    #[test]
    fn retried_call_appears_once_in_the_call_log() {
        use crate::backends::{CallLog, LoggedBackend};
        let ok_body = r#"{"choices":[{"message":{"content":"ok"}}]}"#;
        let (base, hits) = serve(vec![
            http_response("500 Internal Server Error", "{}"),
            http_response("200 OK", ok_body),
        ]);
        let backend = Arc::new(OpenAiCompatBackend::new(test_config(base)).unwrap());
        let log = CallLog::new();
        let logged = LoggedBackend::new(backend, log.clone());
        let req = ChatRequest::new(PromptTag::Judge, vec![Message::user("hi")]);
        assert_eq!(logged.chat(&req).unwrap(), "ok");
        assert_eq!(hits.load(Ordering::SeqCst), 2, "two wire attempts");
        assert_eq!(log.count_tag("judge"), 1, "one logical call in the log");
    }

    #[test]
    fn in_flight_gate_enforces_the_cap() {
        let gate = Arc::new(InFlightGate::new(2));
        let active = Arc::new(AtomicU32::new(0));
        let peak = Arc::new(AtomicU32::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let (gate, active, peak) = (gate.clone(), active.clone(), peak.clone());
            handles.push(std::thread::spawn(move || {
                let _guard = gate.acquire();
                let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(std::time::Duration::from_millis(10));
                active.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for handle in handles {
            handle.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2, "cap of 2 was exceeded");
    }
}
