//! Timestamped transcript traces standing in for streaming ASR output.
//!
//! A trace is the sequence of cumulative partial hypotheses an ASR engine
//! would emit at a fixed chunk cadence, ending in exactly one final event.

pub mod corpus;
mod io;
pub mod perturb;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab;

pub use io::{load_traces, read_traces, save_traces, write_traces};

/// Default ASR chunk period: 200 ms (3,200 samples of 16 kHz mono PCM).
pub const DEFAULT_CHUNK_MS: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub t_ms: u64,
    #[serde(rename = "text")]
    pub cumulative_text: String,
    #[serde(rename = "final")]
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceTrace {
    pub id: String,
    pub events: Vec<TranscriptEvent>,
    #[serde(rename = "answer", default)]
    pub reference_answer: String,
    #[serde(rename = "meta", default)]
    pub metadata: BTreeMap<String, String>,
}

impl UtteranceTrace {
    /// Builds a trace and checks its invariants.
    pub fn new(
        id: impl Into<String>,
        events: Vec<TranscriptEvent>,
        reference_answer: impl Into<String>,
    ) -> Result<Self> {
        let trace = Self {
            id: id.into(),
            events,
            reference_answer: reference_answer.into(),
            metadata: BTreeMap::new(),
        };
        trace.validate().map_err(Error::InvalidInput)?;
        Ok(trace)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_answer(mut self, answer: impl Into<String>) -> Self {
        self.reference_answer = answer.into();
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Timestamp of the final event.
    pub fn end_of_speech_ms(&self) -> u64 {
        self.events.last().map_or(0, |e| e.t_ms)
    }

    /// The reference transcript, i.e. the final event's text.
    pub fn final_text(&self) -> &str {
        self.events.last().map_or("", |e| e.cumulative_text.as_str())
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let Some(last) = self.events.last() else {
            return Err("trace has no events".into());
        };
        for (i, pair) in self.events.windows(2).enumerate() {
            if pair[1].t_ms <= pair[0].t_ms {
                return Err(format!(
                    "event {} at {} ms does not follow event {} at {} ms",
                    i + 1,
                    pair[1].t_ms,
                    i,
                    pair[0].t_ms
                ));
            }
        }
        if !last.is_final {
            return Err("last event is not final".into());
        }
        if let Some(i) = self.events[..self.events.len() - 1].iter().position(|e| e.is_final) {
            return Err(format!("event {i} is final but is not the last event"));
        }
        Ok(())
    }
}

/// Partial-hypothesis revision model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct JitterModel {
    pub revise_probability: f64,
    pub revision_window_words: usize,
    pub seed: u64,
}

impl JitterModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(revise_probability: f64, revision_window_words: usize, seed: u64) -> Self {
        Self {
            revise_probability,
            revision_window_words,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechRateModel {
    pub words_per_minute: f64,
    pub chunk_ms: u64,
    #[serde(default)]
    pub jitter: JitterModel,
    /// Extra silence after any word ending in pause punctuation. Zero keeps a
    /// constant speaking rate.
    #[serde(default)]
    pub pause_ms: u64,
}

impl SpeechRateModel {
    pub fn new(words_per_minute: f64) -> Self {
        Self {
            words_per_minute,
            chunk_ms: DEFAULT_CHUNK_MS,
            jitter: JitterModel::none(),
            pause_ms: 0,
        }
    }

    pub fn with_chunk_ms(mut self, chunk_ms: u64) -> Self {
        self.chunk_ms = chunk_ms;
        self
    }

    pub fn with_jitter(mut self, jitter: JitterModel) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn with_pause_ms(mut self, pause_ms: u64) -> Self {
        self.pause_ms = pause_ms;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.words_per_minute.is_finite() && self.words_per_minute > 0.0) {
            return Err(Error::InvalidInput(format!(
                "words_per_minute must be positive, got {}",
                self.words_per_minute
            )));
        }
        if self.chunk_ms == 0 {
            return Err(Error::InvalidInput("chunk_ms must be positive".into()));
        }
        let p = self.jitter.revise_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "revise_probability must be in [0, 1], got {p}"
            )));
        }
        Ok(())
    }
}

impl Default for SpeechRateModel {
    fn default() -> Self {
        Self::new(150.0)
    }
}

const TICK_EPS: f64 = 1e-6;

/// Byte spans `(start, end)` of whitespace-delimited tokens in `text`.
pub(crate) fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Replays `text` as a streaming ASR transcript.
///
/// Word `i` becomes audible at `(i + 1) * 60000 / wpm` ms plus accumulated
/// pauses; each chunk tick reports every word audible by then. Ticks before
/// the first word are not emitted.
pub fn synthesize_trace(text: &str, rate: &SpeechRateModel) -> Result<UtteranceTrace> {
    rate.validate()?;
    let spans = token_spans(text);
    if spans.is_empty() {
        return Err(Error::InvalidInput("cannot synthesize a trace from empty text".into()));
    }
    let ms_per_word = 60_000.0 / rate.words_per_minute;
    let mut arrivals = Vec::with_capacity(spans.len());
    let mut pauses = 0u64;
    for (i, &(s, e)) in spans.iter().enumerate() {
        arrivals.push((i + 1) as f64 * ms_per_word + (pauses * rate.pause_ms) as f64);
        if vocab::ends_with_pause(&text[s..e]) {
            pauses += 1;
        }
    }
    let chunk = rate.chunk_ms as f64;
    let last_arrival = *arrivals.last().expect("non-empty");
    let ticks = ((last_arrival - TICK_EPS) / chunk).ceil().max(1.0) as u64;

    let jitter = rate.jitter;
    let mut rng = ChaCha8Rng::seed_from_u64(jitter.seed);
    let mut events = Vec::new();
    let mut visible = 0usize;
    for tick in 1..=ticks {
        let t_ms = tick * rate.chunk_ms;
        while visible < arrivals.len() && arrivals[visible] <= t_ms as f64 + TICK_EPS {
            visible += 1;
        }
        if tick == ticks {
            events.push(TranscriptEvent {
                t_ms,
                cumulative_text: text.to_string(),
                is_final: true,
            });
            break;
        }
        if visible == 0 {
            continue;
        }
        let clean = &text[..spans[visible - 1].1];
        let mut hypothesis = clean.to_string();
        if jitter.revise_probability > 0.0 && jitter.revision_window_words > 0 {
            let revise = rng.random_bool(jitter.revise_probability);
            let lo = visible.saturating_sub(jitter.revision_window_words);
            let pos = rng.random_range(lo..visible);
            if revise {
                let (s, e) = spans[pos];
                if let Some(partial) = misrecognize(&text[s..e]) {
                    hypothesis = format!("{}{}{}", &text[..s], partial, &clean[e..]);
                }
            }
        }
        events.push(TranscriptEvent {
            t_ms,
            cumulative_text: hypothesis,
            is_final: false,
        });
    }
    Ok(UtteranceTrace {
        id: String::new(),
        events,
        reference_answer: String::new(),
        metadata: BTreeMap::new(),
    })
}

/// A plausible unstable partial for a word: numbers lose their last digit,
/// words are cut to their first half. Punctuation is dropped.
fn misrecognize(token: &str) -> Option<String> {
    let core: String = token.trim_matches(|c: char| !c.is_alphanumeric()).to_string();
    let chars: Vec<char> = core.chars().collect();
    if chars.len() < 2 {
        return None;
    }
    let keep = if chars.iter().all(|c| c.is_ascii_digit()) {
        chars.len() - 1
    } else {
        chars.len().div_ceil(2)
    };
    let partial: String = chars[..keep].iter().collect();
    (partial != token).then_some(partial)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        (1..=n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    /// Steps the clock one word at a time in integer arithmetic and counts
    /// the chunk ticks needed to cover the last word.
    fn tick_oracle(n_words: u64, wpm: u64, chunk_ms: u64) -> u64 {
        let mut clock_ms_times_wpm = 0u64;
        for _ in 0..n_words {
            clock_ms_times_wpm += 60_000;
        }
        let mut ticks = 0;
        while ticks * chunk_ms * wpm < clock_ms_times_wpm {
            ticks += 1;
        }
        ticks * chunk_ms
    }

    #[test]
    fn one_word_per_chunk_at_300_wpm() {
        let rate = SpeechRateModel::new(300.0);
        let tr = synthesize_trace("one two three four five", &rate).unwrap();
        let times: Vec<u64> = tr.events.iter().map(|e| e.t_ms).collect();
        assert_eq!(times, vec![200, 400, 600, 800, 1000]);
        assert_eq!(tr.events[0].cumulative_text, "one");
        assert_eq!(tr.events[2].cumulative_text, "one two three");
        assert!(tr.events[4].is_final);
        assert_eq!(tr.final_text(), "one two three four five");
        assert!(tr.events[..4].iter().all(|e| !e.is_final));
    }

    #[test]
    fn single_word_yields_single_final_event() {
        for wpm in [60.0, 150.0, 333.0, 1000.0] {
            let tr = synthesize_trace("hello", &SpeechRateModel::new(wpm)).unwrap();
            assert_eq!(tr.events.len(), 1);
            assert!(tr.events[0].is_final);
            assert_eq!(tr.events[0].cumulative_text, "hello");
        }
    }

    #[test]
    fn end_of_speech_matches_clock_oracle() {
        assert_eq!(tick_oracle(20, 150, 200), 8000);
        let tr = synthesize_trace(&words(20), &SpeechRateModel::new(150.0)).unwrap();
        assert_eq!(tr.end_of_speech_ms(), 8000);
        for (n, wpm, chunk) in [(7, 130, 200), (13, 97, 160), (31, 211, 250), (1, 45, 200)] {
            let rate = SpeechRateModel::new(wpm as f64).with_chunk_ms(chunk);
            let tr = synthesize_trace(&words(n), &rate).unwrap();
            assert_eq!(
                tr.end_of_speech_ms(),
                tick_oracle(n as u64, wpm, chunk),
                "n={n} wpm={wpm}"
            );
        }
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(matches!(
            synthesize_trace("   ", &SpeechRateModel::default()),
            Err(Error::InvalidInput(_))
        ));
        assert!(synthesize_trace("a", &SpeechRateModel::new(0.0)).is_err());
        assert!(synthesize_trace("a", &SpeechRateModel::new(100.0).with_chunk_ms(0)).is_err());
    }

    #[test]
    fn final_text_is_exact_even_with_odd_spacing() {
        let text = "  I have   3 apples.\t";
        let tr = synthesize_trace(text, &SpeechRateModel::new(300.0)).unwrap();
        assert_eq!(tr.final_text(), text);
        assert_eq!(tr.events[0].cumulative_text, "  I");
    }

    #[test]
    fn pauses_follow_punctuation() {
        let rate = SpeechRateModel::new(300.0).with_pause_ms(400);
        let tr = synthesize_trace("I have apples, and pears.", &rate).unwrap();
        // arrivals: 200, 400, 600, (pause) 1200, 1400
        assert_eq!(tr.end_of_speech_ms(), 1400);
        let at_1000 = tr.events.iter().find(|e| e.t_ms == 1000).unwrap();
        assert_eq!(at_1000.cumulative_text, "I have apples,");
    }

    #[test]
    fn built_traces_validate() {
        let ev = |t, s: &str, f| TranscriptEvent {
            t_ms: t,
            cumulative_text: s.into(),
            is_final: f,
        };
        assert!(UtteranceTrace::new("a", vec![ev(200, "a", true)], "").is_ok());
        assert!(UtteranceTrace::new("a", vec![], "").is_err());
        assert!(UtteranceTrace::new("a", vec![ev(200, "a", false)], "").is_err());
        assert!(UtteranceTrace::new("a", vec![ev(200, "a", true), ev(400, "a", true)], "").is_err());
        assert!(UtteranceTrace::new("a", vec![ev(400, "a", false), ev(400, "a b", true)], "").is_err());
    }

    #[test]
    fn misrecognition_shortens_words() {
        assert_eq!(misrecognize("apples,").as_deref(), Some("app"));
        assert_eq!(misrecognize("2017").as_deref(), Some("201"));
        assert_eq!(misrecognize("a"), None);
    }
}
