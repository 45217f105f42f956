//! Model clients: scripted, file-backed and a live chat-completions client.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(s: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: s.into() }
    }
    pub fn user(s: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: s.into() }
    }
    pub fn assistant(s: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: s.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("model endpoint unreachable: {0}")]
    Transport(String),
    #[error("model endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed model response: {0}")]
    Malformed(String),
    #[error("scripted responses exhausted after {0} calls")]
    Exhausted(usize),
    #[error("client configuration: {0}")]
    Config(String),
}

pub trait ModelClient: Send + Sync {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, ClientError>;

    /// `None` when the client has no embedding endpoint.
    fn embed(&self, _text: &str) -> Option<Result<Vec<f32>, ClientError>> {
        None
    }

    fn name(&self) -> String;
}

/// Replays queued responses in order and records every prompt it receives.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    queue: Mutex<VecDeque<Result<String, ClientError>>>,
    prompts: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedClient {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedClient {
            queue: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            prompts: Mutex::default(),
        }
    }

    pub fn push(&self, r: Result<String, ClientError>) {
        self.queue.lock().unwrap().push_back(r);
    }

    pub fn prompts(&self) -> Vec<Vec<ChatMessage>> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl ModelClient for ScriptedClient {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let mut prompts = self.prompts.lock().unwrap();
        prompts.push(messages.to_vec());
        let calls = prompts.len();
        self.queue.lock().unwrap().pop_front().unwrap_or(Err(ClientError::Exhausted(calls - 1)))
    }

    fn name(&self) -> String {
        "scripted".into()
    }
}

/// Scripted client loaded from a JSON array of strings.
pub fn file_client(path: &Path) -> Result<ScriptedClient, ClientError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ClientError::Config(format!("cannot read {}: {e}", path.display())))?;
    let responses: Vec<String> = serde_json::from_str(&text)
        .map_err(|e| ClientError::Config(format!("{} is not a JSON array of strings: {e}", path.display())))?;
    Ok(ScriptedClient::new(responses))
}

pub const ENV_URL: &str = "SETSCOPE_MODEL_URL";
pub const ENV_MODEL: &str = "SETSCOPE_MODEL";
pub const ENV_KEY: &str = "SETSCOPE_API_KEY";

/// OpenAI-compatible `/chat/completions` and `/embeddings` client.
#[derive(Debug, Clone)]
pub struct LiveClient {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub embedding_model: Option<String>,
    agent: ureq::Agent,
}

impl LiveClient {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        LiveClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            embedding_model: None,
            agent,
        }
    }

    pub fn from_env() -> Result<Self, ClientError> {
        let url = std::env::var(ENV_URL).map_err(|_| ClientError::Config(format!("{ENV_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| ClientError::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(LiveClient::new(url, model, std::env::var(ENV_KEY).ok()))
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, ClientError> {
        let mut req = self.agent.post(format!("{}/{path}", self.base_url));
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = req.send_json(body).map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| ClientError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ClientError::Status { status, body: text.chars().take(500).collect() });
        }
        serde_json::from_str(&text).map_err(|e| ClientError::Malformed(e.to_string()))
    }
}

impl ModelClient for LiveClient {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let body = json!({ "model": self.model, "messages": messages, "temperature": 0 });
        let v = self.post("chat/completions", &body)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ClientError::Malformed("missing choices[0].message.content".into()))
    }

    fn embed(&self, text: &str) -> Option<Result<Vec<f32>, ClientError>> {
        let model = self.embedding_model.as_ref()?;
        let v = match self.post("embeddings", &json!({ "model": model, "input": text })) {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        let arr = v.pointer("/data/0/embedding").and_then(Value::as_array);
        Some(
            arr.map(|a| a.iter().filter_map(Value::as_f64).map(|x| x as f32).collect())
                .ok_or_else(|| ClientError::Malformed("missing data[0].embedding".into())),
        )
    }

    fn name(&self) -> String {
        format!("live:{}", self.model)
    }
}
