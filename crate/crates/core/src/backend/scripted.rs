use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{GenerationRecord, GenerationRequest, Role, StreamEnd, StreamingBackend, Token};
use crate::clock::{CancelToken, Clock};
use crate::error::Result;

/// Prompt directive that makes the simulator emit a reasoning preamble.
pub const REASONING_DIRECTIVE: &str = "Reason step by step inside <think></think> before answering.";

/// Content of the first `<tag>...</tag>` section of a prompt.
pub fn section<'a>(prompt: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = prompt.find(&open)? + open.len();
    let len = prompt[start..].find(&close)?;
    Some(prompt[start..start + len].trim_matches('\n'))
}

/// Overrides the default reply for prompts that contain `contains`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRule {
    #[serde(default)]
    pub role: Option<Role>,
    pub contains: String,
    /// Verbatim reply.
    #[serde(default)]
    pub reply: Option<String>,
    /// Answer to slot into the default Speaker reply.
    #[serde(default)]
    pub answer: Option<String>,
}

impl ResponseRule {
    /// Speaker rule matching a prompt built from exactly `transcript`.
    pub fn answer_for(transcript: &str, answer: impl Into<String>) -> Self {
        Self {
            role: Some(Role::Speaker),
            contains: format!("<transcript>\n{transcript}\n</transcript>"),
            reply: None,
            answer: Some(answer.into()),
        }
    }

    fn matches(&self, req: &GenerationRequest) -> bool {
        self.role.is_none_or(|r| r == req.role) && req.prompt.contains(&self.contains)
    }
}

/// Maps prompts to reply text. First matching rule wins; otherwise the
/// default echo rules build a reply from the prompt's sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responder {
    #[serde(default)]
    pub rules: Vec<ResponseRule>,
    /// Speaker answers keyed by the exact transcript in the prompt.
    #[serde(default)]
    pub answers: BTreeMap<String, String>,
    /// Length of the reasoning preamble when the prompt asks for one.
    #[serde(default = "default_think_words")]
    pub think_words: usize,
}

fn default_think_words() -> usize {
    64
}

impl Default for Responder {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            answers: BTreeMap::new(),
            think_words: default_think_words(),
        }
    }
}

#[derive(Serialize)]
struct EchoSnapshot<'a> {
    corrected_text: &'a str,
    key_variables: IndexMap<String, String>,
    plan: [&'a str; 3],
}

impl Responder {
    pub fn reply(&self, req: &GenerationRequest) -> String {
        let rule = self.rules.iter().find(|r| r.matches(req));
        if let Some(text) = rule.and_then(|r| r.reply.clone()) {
            return text;
        }
        let transcript = section(&req.prompt, "transcript").unwrap_or(&req.prompt);
        match req.role {
            Role::Thinker => thinker_echo(transcript),
            Role::Speaker => {
                let answer = rule
                    .and_then(|r| r.answer.as_deref())
                    .or_else(|| self.answers.get(transcript).map(String::as_str))
                    .unwrap_or("unknown");
                let mut out = String::new();
                if req.prompt.contains(REASONING_DIRECTIVE) {
                    out.push_str(&self.reasoning(transcript));
                    out.push(' ');
                }
                out.push_str(&speaker_echo(transcript, section(&req.prompt, "plan"), answer));
                out
            }
        }
    }

    fn reasoning(&self, transcript: &str) -> String {
        let words: Vec<String> = transcript
            .split_whitespace()
            .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
            .filter(|w| !w.is_empty())
            .collect();
        let body: Vec<&str> = if words.is_empty() {
            Vec::new()
        } else {
            words
                .iter()
                .cycle()
                .take(self.think_words)
                .map(String::as_str)
                .collect()
        };
        format!("<think> {} </think>", body.join(" "))
    }
}

fn thinker_echo(transcript: &str) -> String {
    let mut vars = IndexMap::new();
    for w in transcript.split_whitespace() {
        let n = w.trim_matches(|c: char| !c.is_ascii_digit());
        if !n.is_empty() && n.chars().all(|c| c.is_ascii_digit() || c == '.') {
            let key = format!("n{}", vars.len() + 1);
            vars.insert(key, n.to_string());
        }
    }
    let snap = EchoSnapshot {
        corrected_text: transcript,
        key_variables: vars,
        plan: ["identify the quantities", "relate them", "compute the result"],
    };
    serde_json::to_string(&snap).expect("snapshot serializes")
}

/// Answer first, then restate, consult the plan, work through the
/// transcript, and close on the answer again.
fn speaker_echo(transcript: &str, plan: Option<&str>, answer: &str) -> String {
    let question = transcript
        .split_inclusive(['.', '!', '?'])
        .map(str::trim)
        .rfind(|s| !s.is_empty())
        .unwrap_or("");
    let mut out = format!("The answer is {answer}. You asked: {question}");
    if !question.ends_with(['.', '!', '?']) {
        out.push('.');
    }
    if let Some(plan) = plan {
        let steps: Vec<&str> = plan
            .lines()
            .map(|l| {
                l.trim()
                    .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.')
                    .trim()
            })
            .filter(|l| !l.is_empty())
            .collect();
        if !steps.is_empty() {
            out.push_str(&format!(" Following the plan: {}.", steps.join(", then ")));
        }
    }
    let working: Vec<String> = transcript
        .split_whitespace()
        .map(|w| w.trim_end_matches(['.', '!', '?', ',', ';', ':']).to_string())
        .filter(|w| !w.is_empty())
        .collect();
    if !working.is_empty() {
        out.push_str(&format!(" Working through it: {}.", working.join(" ")));
    }
    out.push_str(&format!(" So the answer is {answer}."));
    out
}

/// Timing and content of a simulated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedProfile {
    pub ttft_ms: u64,
    pub tokens_per_second: f64,
    pub responder: Responder,
    /// Extra time to first token, drawn per request from a hash of
    /// (seed, role, prompt) so reruns stay identical.
    pub ttft_jitter_ms: u64,
    pub seed: u64,
}

impl Default for ScriptedProfile {
    fn default() -> Self {
        Self {
            ttft_ms: 150,
            tokens_per_second: 50.0,
            responder: Responder::default(),
            ttft_jitter_ms: 0,
            seed: 0,
        }
    }
}

impl ScriptedProfile {
    pub fn new(ttft_ms: u64, tokens_per_second: f64) -> Self {
        Self {
            ttft_ms,
            tokens_per_second,
            ..Self::default()
        }
    }

    pub fn with_rule(mut self, rule: ResponseRule) -> Self {
        self.responder.rules.push(rule);
        self
    }
}

/// Token arrival times of one scripted generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    pub tokens: Vec<Token>,
    /// Completion time: the last token, or start + ttft for an empty reply.
    pub end_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    pub profile: ScriptedProfile,
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in *part {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl ScriptedBackend {
    pub fn new(profile: ScriptedProfile) -> Self {
        Self { profile }
    }

    fn ttft(&self, req: &GenerationRequest) -> u64 {
        let j = self.profile.ttft_jitter_ms;
        if j == 0 {
            return self.profile.ttft_ms;
        }
        let role = [req.role as u8];
        let h = fnv1a(&[&self.profile.seed.to_le_bytes(), &role, req.prompt.as_bytes()]);
        self.profile.ttft_ms + h % (j + 1)
    }

    pub fn timeline(&self, req: &GenerationRequest, start_ms: u64) -> Timeline {
        let reply = self.profile.responder.reply(req);
        let first = start_ms + self.ttft(req);
        let step = 1000.0 / self.profile.tokens_per_second;
        let tokens: Vec<Token> = reply
            .split_whitespace()
            .take(req.max_new_tokens)
            .enumerate()
            .map(|(k, w)| Token {
                text: if k == 0 { w.to_string() } else { format!(" {w}") },
                t_ms: first + (k as f64 * step).round() as u64,
            })
            .collect();
        let end_ms = tokens.last().map_or(first, |t| t.t_ms);
        Timeline { tokens, end_ms }
    }

    /// Runs a generation on the simulated clock. A cancel at `t` keeps the
    /// tokens stamped at or before `t` and only takes effect if it lands
    /// before completion.
    pub fn simulate(
        &self,
        req: &GenerationRequest,
        transcript: &str,
        start_ms: u64,
        cancel_at: Option<u64>,
    ) -> GenerationRecord {
        let tl = self.timeline(req, start_ms);
        let mut rec = GenerationRecord::started(req, transcript, start_ms);
        match cancel_at {
            Some(c) if c < tl.end_ms => {
                for tok in tl.tokens.iter().take_while(|t| t.t_ms <= c) {
                    rec.push_token(tok);
                }
                rec.cancel(c.max(start_ms));
            }
            _ => {
                for tok in &tl.tokens {
                    rec.push_token(tok);
                }
                rec.complete(tl.end_ms);
            }
        }
        rec
    }
}

impl StreamingBackend for ScriptedBackend {
    fn stream(
        &self,
        req: &GenerationRequest,
        cancel: &CancelToken,
        clock: &dyn Clock,
        on_token: &mut dyn FnMut(Token),
    ) -> Result<StreamEnd> {
        let start = clock.now_ms();
        let tl = self.timeline(req, start);
        let sleep_until = |ms: u64| {
            let wait = ms.saturating_sub(clock.now_ms());
            cancel.wait_until(Instant::now() + Duration::from_millis(wait))
        };
        for tok in tl.tokens {
            if sleep_until(tok.t_ms) {
                return Ok(StreamEnd::Cancelled);
            }
            on_token(Token {
                text: tok.text,
                t_ms: clock.now_ms(),
            });
        }
        if sleep_until(tl.end_ms) {
            return Ok(StreamEnd::Cancelled);
        }
        Ok(StreamEnd::Completed)
    }
}
