//! Streaming text generation.
//!
//! [`ScriptedBackend`] is a deterministic simulator whose token timelines are
//! computable up front, which is what the discrete-event scheduler needs.
//! Anything implementing [`StreamingBackend`] can also run against the wall
//! clock, including the chat-completions HTTP client in [`chat`].

pub mod chat;
mod scripted;

use serde::{Deserialize, Serialize};

use crate::clock::{CancelToken, Clock};
use crate::error::Result;
use crate::vocab;

pub use chat::{ChatBackend, ChatConfig};
pub use scripted::{section, Responder, ResponseRule, ScriptedBackend, ScriptedProfile, Timeline, REASONING_DIRECTIVE};

pub const DEFAULT_MAX_NEW_TOKENS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Thinker,
    Speaker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub role: Role,
    pub prompt: String,
    pub max_new_tokens: usize,
    /// Zero means greedy decoding.
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn new(role: Role, prompt: impl Into<String>) -> Self {
        Self {
            role,
            prompt: prompt.into(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            temperature: 0.0,
        }
    }
}

/// A generated token (a whitespace-delimited word for the simulator, a
/// streamed delta for live servers). `text` carries its own leading space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub t_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamEnd {
    Completed,
    Cancelled,
}

/// A generation that delivers tokens in real time.
pub trait StreamingBackend: Send + Sync {
    /// Streams tokens for `req` until completion or until `cancel` fires.
    /// Token timestamps come from `clock`.
    fn stream(
        &self,
        req: &GenerationRequest,
        cancel: &CancelToken,
        clock: &dyn Clock,
        on_token: &mut dyn FnMut(Token),
    ) -> Result<StreamEnd>;
}

/// One model invocation as observed by the orchestrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub role: Role,
    pub start_ms: u64,
    pub first_token_ms: Option<u64>,
    /// First token time at which the output contains a sentence terminator.
    pub first_sentence_ms: Option<u64>,
    pub end_ms: Option<u64>,
    pub interrupted: bool,
    pub output_text: String,
    pub n_tokens: usize,
    pub prompt_len_chars: usize,
    pub prompt: String,
    /// The transcript the prompt was built from.
    pub transcript: String,
    /// Index into the utterance's snapshot list of the injected state.
    pub injected_snapshot: Option<usize>,
    /// Thinker output that did not parse as a state snapshot.
    pub flagged: bool,
    pub error: Option<String>,
}

impl GenerationRecord {
    pub fn started(req: &GenerationRequest, transcript: &str, start_ms: u64) -> Self {
        Self {
            role: req.role,
            start_ms,
            first_token_ms: None,
            first_sentence_ms: None,
            end_ms: None,
            interrupted: false,
            output_text: String::new(),
            n_tokens: 0,
            prompt_len_chars: req.prompt.chars().count(),
            prompt: req.prompt.clone(),
            transcript: transcript.to_string(),
            injected_snapshot: None,
            flagged: false,
            error: None,
        }
    }

    pub fn push_token(&mut self, tok: &Token) {
        self.first_token_ms.get_or_insert(tok.t_ms);
        self.output_text.push_str(&tok.text);
        self.n_tokens += 1;
        if self.first_sentence_ms.is_none() && vocab::has_sentence_terminator(&tok.text) {
            self.first_sentence_ms = Some(tok.t_ms);
        }
    }

    pub fn complete(&mut self, t_ms: u64) {
        self.end_ms = Some(t_ms);
    }

    pub fn cancel(&mut self, t_ms: u64) {
        self.interrupted = true;
        self.end_ms = Some(t_ms);
    }

    pub fn is_finished(&self) -> bool {
        self.end_ms.is_some()
    }

    /// Finished on its own, without cancellation or error.
    pub fn completed_ok(&self) -> bool {
        self.end_ms.is_some() && !self.interrupted && self.error.is_none()
    }
}

/// Runs a streaming generation to the end and collects its record.
pub fn generate(
    backend: &dyn StreamingBackend,
    req: &GenerationRequest,
    cancel: &CancelToken,
    clock: &dyn Clock,
) -> Result<GenerationRecord> {
    let mut rec = GenerationRecord::started(req, "", clock.now_ms());
    let end = backend.stream(req, cancel, clock, &mut |tok| rec.push_token(&tok))?;
    match end {
        StreamEnd::Completed => rec.complete(clock.now_ms()),
        StreamEnd::Cancelled => rec.cancel(clock.now_ms()),
    }
    Ok(rec)
}
