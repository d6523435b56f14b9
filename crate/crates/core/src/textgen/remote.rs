use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{parse_sections, GeneratorOutput, Prompt, PromptKind, TextGenError, TextGenerator};

/// Chat-completion endpoint settings. The API key is read from the named
/// environment variable at call time and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "qwen2.5-14b-instruct".into(),
            api_key_env: Some("GQLFORGE_API_KEY".into()),
            timeout_secs: 60,
            max_in_flight: 4,
            max_retries: 3,
            backoff_base_ms: 500,
            backoff_cap_ms: 8_000,
        }
    }
}

impl EndpointConfig {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.backoff_base_ms.saturating_mul(1u64 << attempt.min(20));
        Duration::from_millis(ms.min(self.backoff_cap_ms))
    }

    fn api_key(&self) -> Option<String> {
        self.api_key_env.as_deref().and_then(|v| std::env::var(v).ok()).filter(|k| !k.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// One JSON POST. Errors are connection-level; HTTP statuses come back in the reply.
pub trait ChatTransport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &serde_json::Value) -> std::io::Result<HttpReply>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build();
        UreqTransport { agent: ureq::Agent::new_with_config(config) }
    }
}

impl ChatTransport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &serde_json::Value) -> std::io::Result<HttpReply> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(std::io::Error::other)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(std::io::Error::other)?;
        Ok(HttpReply { status, body })
    }
}

/// Counting gate bounding concurrent requests.
struct Gate {
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(limit: usize) -> Self {
        Gate { limit: limit.max(1), busy: Mutex::new(0), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut busy = self.busy.lock().expect("gate lock");
        while *busy >= self.limit {
            busy = self.freed.wait(busy).expect("gate lock");
        }
        *busy += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().expect("gate lock") -= 1;
        self.0.freed.notify_one();
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Client for an OpenAI-style chat endpoint.
pub struct RemoteChatGenerator {
    config: EndpointConfig,
    transport: Arc<dyn ChatTransport>,
    sleep: Sleeper,
    gate: Gate,
}

impl RemoteChatGenerator {
    pub fn new(config: EndpointConfig) -> Self {
        let transport = Arc::new(UreqTransport::new(Duration::from_secs(config.timeout_secs)));
        Self::with_transport(config, transport)
    }

    pub fn with_transport(config: EndpointConfig, transport: Arc<dyn ChatTransport>) -> Self {
        let gate = Gate::new(config.max_in_flight);
        RemoteChatGenerator { config, transport, sleep: Arc::new(std::thread::sleep), gate }
    }

    pub fn with_sleep(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// POSTs `body` to `<base_url>/<path>`, retrying 429, 5xx and connection
    /// failures with capped exponential backoff.
    pub fn post(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value, TextGenError> {
        let url = format!("{}/{}", self.config.base_url.trim_end_matches('/'), path.trim_start_matches('/'));
        let key = self.config.api_key();
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                (self.sleep)(self.config.backoff(attempt - 1));
            }
            let reply = {
                let _permit = self.gate.acquire();
                self.transport.post_json(&url, key.as_deref(), body)
            };
            match reply {
                Ok(r) if (200..300).contains(&r.status) => {
                    return serde_json::from_str(&r.body)
                        .map_err(|e| TextGenError::MalformedResponse(format!("body is not JSON: {e}")));
                }
                Ok(r) if r.status == 429 || r.status >= 500 => {
                    tracing::warn!(status = r.status, attempt, "retrying {url}");
                    last = format!("HTTP {}", r.status);
                }
                Ok(r) => {
                    let excerpt: String = r.body.chars().take(200).collect();
                    return Err(TextGenError::Transport(format!("HTTP {}: {excerpt}", r.status)));
                }
                Err(e) => {
                    tracing::warn!(error = %e, attempt, "retrying {url}");
                    last = e.to_string();
                }
            }
        }
        Err(TextGenError::Transport(format!("gave up after {} attempts: {last}", self.config.max_retries + 1)))
    }

    pub fn chat(&self, content: &str, seed: u64) -> Result<String, TextGenError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
            "seed": seed,
        });
        let reply = self.post("chat/completions", &body)?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(strip_fences)
            .ok_or_else(|| TextGenError::MalformedResponse("no choices[0].message.content".into()))
    }
}

fn strip_fences(text: &str) -> String {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map_or("", |(_, b)| b);
        return body.trim_end().trim_end_matches("```").trim().to_string();
    }
    t.to_string()
}

impl TextGenerator for RemoteChatGenerator {
    fn generate(&self, prompt: &Prompt, seed: u64) -> Result<GeneratorOutput, TextGenError> {
        let text = self.chat(&prompt.rendered_text, seed)?;
        match prompt.kind {
            PromptKind::Question => {
                let (raw, complete) = parse_sections(&text)?;
                Ok(GeneratorOutput::Question { raw, complete })
            }
            _ if text.is_empty() => Err(TextGenError::MalformedResponse("empty completion".into())),
            _ => Ok(GeneratorOutput::Text(text)),
        }
    }
}
