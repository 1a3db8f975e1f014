//! Chat-completions client.
//!
//! Request: `POST {endpoint}` with
//! `{"model", "messages": [{"role": "user", "content": prompt}], "stream": true,
//! "temperature", "max_tokens"}` and an optional `Authorization: Bearer` header.
//! Streamed response: server-sent events `data: {"choices":[{"delta":{"content": ..}}]}`
//! terminated by `data: [DONE]`.

use std::io::{BufRead, BufReader};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GenerationRequest, StreamEnd, StreamingBackend, Token};
use crate::clock::{CancelToken, Clock};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    /// Full URL of the completions route, e.g. `http://host:8000/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    120_000
}

#[derive(Debug, Clone)]
pub struct ChatBackend {
    cfg: ChatConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

/// One parsed server-sent-event line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SseLine {
    Delta(String),
    Done,
    Skip,
}

pub fn parse_sse_line(line: &str) -> Result<SseLine> {
    let Some(payload) = line.strip_prefix("data:") else {
        return Ok(SseLine::Skip);
    };
    let payload = payload.trim();
    if payload == "[DONE]" {
        return Ok(SseLine::Done);
    }
    let v: Value = serde_json::from_str(payload).map_err(|e| Error::backend(None, format!("bad stream chunk: {e}")))?;
    match v["choices"][0]["delta"]["content"].as_str() {
        Some(s) if !s.is_empty() => Ok(SseLine::Delta(s.to_string())),
        _ => Ok(SseLine::Skip),
    }
}

impl ChatBackend {
    pub fn new(cfg: ChatConfig) -> Result<Self> {
        let api_key = match &cfg.api_key_env {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| Error::Config(format!("environment variable {var} is not set")))?)
            }
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::backend(None, e.to_string()))?;
        Ok(Self { cfg, api_key, client })
    }

    fn body(&self, prompt: &str, max_tokens: usize, temperature: f64, stream: bool) -> Value {
        json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "stream": stream,
            "temperature": temperature,
            "max_tokens": max_tokens,
        })
    }

    fn post(&self, body: &Value) -> Result<reqwest::blocking::Response> {
        let mut rb = self.client.post(&self.cfg.endpoint).json(body);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(|e| Error::backend(None, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Error::backend(Some(status.as_u16()), text));
        }
        Ok(resp)
    }

    /// Non-streaming completion.
    pub fn complete(&self, prompt: &str, max_tokens: usize) -> Result<String> {
        let v: Value = self
            .post(&self.body(prompt, max_tokens, 0.0, false))?
            .json()
            .map_err(|e| Error::backend(None, format!("bad response body: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::backend(None, "response has no choices[0].message.content"))
    }

    /// One-token request, used to fail fast before a live run.
    pub fn probe(&self) -> Result<()> {
        self.complete("ping", 1).map(|_| ())
    }
}

impl StreamingBackend for ChatBackend {
    fn stream(
        &self,
        req: &GenerationRequest,
        cancel: &CancelToken,
        clock: &dyn Clock,
        on_token: &mut dyn FnMut(Token),
    ) -> Result<StreamEnd> {
        let resp = self.post(&self.body(&req.prompt, req.max_new_tokens, req.temperature, true))?;
        for line in BufReader::new(resp).lines() {
            if cancel.is_cancelled() {
                return Ok(StreamEnd::Cancelled);
            }
            let line = line.map_err(|e| Error::backend(None, e.to_string()))?;
            match parse_sse_line(&line)? {
                SseLine::Delta(text) => on_token(Token {
                    text,
                    t_ms: clock.now_ms(),
                }),
                SseLine::Done => break,
                SseLine::Skip => {}
            }
        }
        if cancel.is_cancelled() {
            return Ok(StreamEnd::Cancelled);
        }
        Ok(StreamEnd::Completed)
    }
}
