// SPDX-License-Identifier: Apache-2.0

//! Chat-completion backends: a live HTTP client, on-disk replay and
//! recording, and a scripted provider for tests.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider reply: {0}")]
    Malformed(String),
    #[error("no recorded response for request {0}")]
    MissingRecording(String),
    #[error("scripted provider has no responses left")]
    Exhausted,
    #[error("missing credentials: environment variable {0} is not set")]
    MissingCredentials(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ProviderError {
    /// Whether retrying the same request can help.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait Provider: Send + Sync {
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<Completion, ProviderError>;
}

/// Stable digest of a conversation, used as the replay key.
pub fn request_hash(messages: &[Message]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(messages).expect("messages serialize"));
    crate::sandbox::hex_digest(hasher)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_transport_retries: u32,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 300_000,
            max_transport_retries: 3,
        }
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpProvider {
    cfg: HttpConfig,
    key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(cfg: HttpConfig) -> Result<Self, ProviderError> {
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| ProviderError::MissingCredentials(cfg.api_key_env.clone()))?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build();
        Ok(HttpProvider { cfg, key, agent })
    }

    fn once(&self, body: &serde_json::Value) -> Result<Completion, ProviderError> {
        let reply = self
            .agent
            .post(&self.cfg.endpoint)
            .set("Authorization", &format!("Bearer {}", self.key))
            .send_json(body.clone());
        let reply: serde_json::Value = match reply {
            Ok(r) => r
                .into_json()
                .map_err(|e| ProviderError::Malformed(e.to_string()))?,
            Err(ureq::Error::Status(status, r)) => {
                return Err(ProviderError::Status {
                    status,
                    body: r.into_string().unwrap_or_default(),
                })
            }
            Err(e) => return Err(ProviderError::Transport(e.to_string())),
        };
        let text = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))?
            .to_string();
        let usage = Usage {
            prompt_tokens: reply["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: reply["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        };
        Ok(Completion { text, usage })
    }
}

impl Provider for HttpProvider {
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<Completion, ProviderError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": temperature,
        });
        let mut attempt = 0;
        loop {
            match self.once(&body) {
                Err(e) if e.is_transient() && attempt < self.cfg.max_transport_retries => {
                    attempt += 1;
                    tracing::warn!(attempt, error = %e, "retrying provider request");
                    std::thread::sleep(Duration::from_millis(500 << attempt.min(6)));
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Recording {
    response: String,
    #[serde(default)]
    usage: Usage,
}

fn recording_path(dir: &Path, messages: &[Message]) -> PathBuf {
    dir.join(format!("{}.json", request_hash(messages)))
}

/// Serves responses previously stored as `<hash>.json` files.
pub struct ReplayProvider {
    dir: PathBuf,
}

impl ReplayProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayProvider { dir: dir.into() }
    }
}

impl Provider for ReplayProvider {
    fn complete(&self, messages: &[Message], _temperature: f64) -> Result<Completion, ProviderError> {
        let path = recording_path(&self.dir, messages);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ProviderError::MissingRecording(request_hash(messages)))
            }
            Err(e) => return Err(e.into()),
        };
        let rec: Recording = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Malformed(format!("{}: {e}", path.display())))?;
        Ok(Completion {
            text: rec.response,
            usage: rec.usage,
        })
    }
}

/// Forwards to an inner provider and stores every response for replay.
pub struct RecordingProvider<P> {
    inner: P,
    dir: PathBuf,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(RecordingProvider { inner, dir })
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<Completion, ProviderError> {
        let c = self.inner.complete(messages, temperature)?;
        let rec = Recording {
            response: c.text.clone(),
            usage: c.usage,
        };
        let body = serde_json::to_string_pretty(&rec).expect("recording serializes");
        std::fs::write(recording_path(&self.dir, messages), body)?;
        Ok(c)
    }
}

/// Returns queued responses in order and remembers every request.
#[derive(Default)]
pub struct ScriptedProvider {
    queue: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<Vec<Message>>>,
}

impl ScriptedProvider {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedProvider {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<Vec<Message>> {
        self.seen.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, messages: &[Message], _temperature: f64) -> Result<Completion, ProviderError> {
        self.seen.lock().unwrap().push(messages.to_vec());
        let text = self.queue.lock().unwrap().pop_front().ok_or(ProviderError::Exhausted)?;
        Ok(Completion {
            usage: Usage {
                prompt_tokens: messages.iter().map(|m| super::approx_tokens(&m.content)).sum(),
                completion_tokens: super::approx_tokens(&text),
            },
            text,
        })
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<Completion, ProviderError> {
        (**self).complete(messages, temperature)
    }
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&self, messages: &[Message], temperature: f64) -> Result<Completion, ProviderError> {
        (**self).complete(messages, temperature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_content_and_role() {
        let a = request_hash(&[Message::user("x")]);
        assert_eq!(a, request_hash(&[Message::user("x")]));
        assert_ne!(a, request_hash(&[Message::assistant("x")]));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let msgs = vec![Message::user("hello")];
        let rec = RecordingProvider::new(ScriptedProvider::new(["world"]), dir.path()).unwrap();
        assert_eq!(rec.complete(&msgs, 0.0).unwrap().text, "world");
        let replay = ReplayProvider::new(dir.path());
        assert_eq!(replay.complete(&msgs, 0.0).unwrap().text, "world");
        assert!(matches!(
            replay.complete(&[Message::user("other")], 0.0),
            Err(ProviderError::MissingRecording(_))
        ));
    }

    #[test]
    fn scripted_runs_out() {
        let p = ScriptedProvider::new(["a"]);
        assert_eq!(p.complete(&[], 0.0).unwrap().text, "a");
        assert!(matches!(p.complete(&[], 0.0), Err(ProviderError::Exhausted)));
        assert_eq!(p.requests().len(), 2);
    }

    #[test]
    fn transient_classification() {
        assert!(ProviderError::Status { status: 503, body: String::new() }.is_transient());
        assert!(ProviderError::Status { status: 429, body: String::new() }.is_transient());
        assert!(!ProviderError::Status { status: 400, body: String::new() }.is_transient());
        assert!(!ProviderError::Exhausted.is_transient());
    }
}
