//! Semantic saturation scoring and trigger gating.
//!
//! A scorer rates how "complete" a streaming transcript prefix is; the gate
//! turns scores into activation decisions with a fixed threshold plus
//! suppression of repeat fires on an unchanged transcript.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab;

pub const DEFAULT_TAU: f64 = 0.65;
pub const DEFAULT_MAX_INPUT_LEN: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerConfig {
    pub tau: f64,
    pub max_input_len: usize,
}

impl TriggerConfig {
    pub fn new(tau: f64, max_input_len: usize) -> Result<Self> {
        let cfg = Self { tau, max_input_len };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if self.max_input_len == 0 {
            return Err(Error::Config("max_input_len must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            max_input_len: DEFAULT_MAX_INPUT_LEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerReason {
    Fired,
    BelowThreshold,
    DedupSuppressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerDecision {
    pub fired: bool,
    pub score: f64,
    pub reason: TriggerReason,
    pub prefix_text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriggerState {
    pub last_fired_text: Option<String>,
    pub decisions: Vec<TriggerDecision>,
    #[serde(skip, default = "yes")]
    dedup: bool,
}

fn yes() -> bool {
    true
}

impl Default for TriggerState {
    fn default() -> Self {
        Self {
            last_fired_text: None,
            decisions: Vec::new(),
            dedup: true,
        }
    }
}

impl TriggerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Gate with deduplication switched off; only useful for testing the
    /// threshold in isolation.
    pub fn without_dedup() -> Self {
        Self {
            dedup: false,
            ..Self::default()
        }
    }

    /// Threshold gate (`score >= tau`) followed by suppression of a prefix
    /// identical to the last fired one. Every decision is logged.
    pub fn gate(&mut self, prefix: &str, score: f64, cfg: &TriggerConfig) -> TriggerDecision {
        let score = if score.is_nan() { 0.0 } else { score.clamp(0.0, 1.0) };
        let key = prefix.trim_end();
        let reason = if score < cfg.tau {
            TriggerReason::BelowThreshold
        } else if self.dedup && self.last_fired_text.as_deref() == Some(key) {
            TriggerReason::DedupSuppressed
        } else {
            TriggerReason::Fired
        };
        let fired = reason == TriggerReason::Fired;
        if fired {
            self.last_fired_text = Some(key.to_string());
        }
        let decision = TriggerDecision {
            fired,
            score,
            reason,
            prefix_text: prefix.to_string(),
        };
        self.decisions.push(decision.clone());
        decision
    }
}

pub fn gate(state: &mut TriggerState, prefix: &str, score: f64, cfg: &TriggerConfig) -> TriggerDecision {
    state.gate(prefix, score, cfg)
}

/// The trailing `max_tokens` whitespace tokens of `text`, as a slice.
pub fn truncate_tail(text: &str, max_tokens: usize) -> &str {
    let mut seen = 0;
    let mut in_token = false;
    for (i, c) in text.char_indices().rev() {
        if c.is_whitespace() {
            if in_token {
                seen += 1;
                if seen == max_tokens {
                    return &text[i + c.len_utf8()..];
                }
            }
            in_token = false;
        } else {
            in_token = true;
        }
    }
    text
}

pub trait Scorer: Send + Sync {
    fn score(&self, prefix: &str) -> Result<f64>;

    fn name(&self) -> &'static str;
}

/// Scores `prefix` after truncating it to the configured input length.
pub fn score_prefix(scorer: &dyn Scorer, prefix: &str, cfg: &TriggerConfig) -> Result<f64> {
    scorer.score(truncate_tail(prefix, cfg.max_input_len))
}

/// Rule-based stand-in for a learned classifier.
///
/// 1.0 at a clause end (terminal punctuation, or a coordinating conjunction
/// right after a comma), 0.0 on a trailing filler, 0.5 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicScorer;

impl HeuristicScorer {
    pub fn score_str(prefix: &str) -> f64 {
        let toks: Vec<&str> = truncate_tail(prefix, 5).split_whitespace().collect();
        let n = toks.len();
        let Some(&last) = toks.last() else {
            return 0.0;
        };
        if vocab::is_filler_at(&toks, n - 1) {
            return 0.0;
        }
        if vocab::ends_clause(last) {
            return 1.0;
        }
        if n >= 2
            && vocab::is_conjunction(last)
            && vocab::ends_with_comma(toks[n - 2])
            && !vocab::is_filler_at(&toks, n - 2)
        {
            return 1.0;
        }
        0.5
    }
}

impl Scorer for HeuristicScorer {
    fn score(&self, prefix: &str) -> Result<f64> {
        Ok(Self::score_str(prefix))
    }

    fn name(&self) -> &'static str {
        "heuristic"
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    score: f64,
}

/// Client for a classifier served over `POST /score`.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl RemoteScorer {
    pub fn new(base_url: impl Into<String>) -> Result<Self> {
        Self::with_timeout(base_url, Duration::from_secs(2))
    }

    pub fn with_timeout(base_url: impl Into<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::ScorerUnavailable(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
        })
    }

    /// `GET /health`, used to fail fast before a live run.
    pub fn health(&self) -> Result<()> {
        let resp = self
            .client
            .get(format!("{}/health", self.base_url))
            .send()
            .map_err(|e| Error::ScorerUnavailable(e.to_string()))?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(Error::ScorerUnavailable(format!("health returned {}", resp.status())))
        }
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, prefix: &str) -> Result<f64> {
        let resp = self
            .client
            .post(format!("{}/score", self.base_url))
            .json(&ScoreRequest { text: prefix })
            .send()
            .map_err(|e| Error::ScorerUnavailable(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() != 200 {
            return Err(Error::ScorerUnavailable(format!("status {status}")));
        }
        let body: ScoreResponse = resp
            .json()
            .map_err(|e| Error::ScorerUnavailable(format!("bad response body: {e}")))?;
        if !(0.0..=1.0).contains(&body.score) {
            return Err(Error::ScorerUnavailable(format!("score {} outside [0, 1]", body.score)));
        }
        Ok(body.score)
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}
