use std::time::Duration;

use serde_json::{json, Value};

use super::{GatewayError, PromptRequest};

pub const API_BASE_ENV: &str = "MODLAB_API_BASE";
pub const API_KEY_ENV: &str = "MODLAB_API_KEY";

#[derive(Debug, Clone)]
pub struct TransportError {
    /// Worth retrying (connection errors, 429, 5xx).
    pub transient: bool,
    pub message: String,
}

/// One network round trip for a prompt.
pub trait Transport: Send + Sync {
    fn send(&self, request: &PromptRequest) -> Result<String, TransportError>;
}

/// OpenAI-style `POST {base}/chat/completions`.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base: String,
    key: String,
}

impl HttpTransport {
    pub fn new(base: impl Into<String>, key: impl Into<String>) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::InvalidRequest(e.to_string()))?;
        Ok(HttpTransport {
            client,
            base: base.into().trim_end_matches('/').to_string(),
            key: key.into(),
        })
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GatewayError::Credentials(format!("{API_KEY_ENV} is not set")))?;
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| "https://api.openai.com/v1".into());
        HttpTransport::new(base, key)
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &PromptRequest) -> Result<String, TransportError> {
        let body = json!({
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        });
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.base))
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .map_err(|e| TransportError {
                transient: true,
                message: e.to_string(),
            })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError {
                transient: status.as_u16() == 429 || status.is_server_error(),
                message: format!("HTTP {status}"),
            });
        }
        let value: Value = resp.json().map_err(|e| TransportError {
            transient: true,
            message: format!("bad response body: {e}"),
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TransportError {
                transient: false,
                message: "response has no choices[0].message.content".into(),
            })
    }
}
