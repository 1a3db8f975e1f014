//! Listen-think-speak orchestration.
//!
//! [`UtteranceMachine`] holds all per-utterance state and decides when to
//! launch or cancel Thinker and Speaker generations. Two drivers feed it:
//! [`run_simulated`] is a deterministic discrete-event loop over a
//! [`ScriptedBackend`]; [`run_wall`] replays the trace in real time against
//! any [`StreamingBackend`], one thread per generation.

mod machine;
pub mod prompt;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{GenerationRecord, ScriptedBackend, StreamEnd, StreamingBackend, Token};
use crate::clock::{CancelToken, Clock, WallClock};
use crate::error::{Error, Result};
use crate::trace::UtteranceTrace;
use crate::trigger::{Scorer, TriggerConfig, TriggerDecision};

pub use machine::{Command, UtteranceMachine};
pub use prompt::{
    build_serial_prompt, build_speaker_prompt, build_thinker_prompt, first_json_object, parse_snapshot, StateSnapshot,
};

pub const DEFAULT_VAD_SILENCE_MS: u64 = 400;

fn one() -> usize {
    1
}

fn default_silence() -> u64 {
    DEFAULT_VAD_SILENCE_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Wait for end of speech, then one Speaker call.
    Serial {
        #[serde(default)]
        think: bool,
    },
    /// Restart the Speaker whenever the transcript grew by `chunk_chars`.
    Predgen {
        #[serde(default = "one")]
        chunk_chars: usize,
    },
    /// Restart the Speaker once the transcript has been unchanged for
    /// `silence_ms`.
    Vad {
        #[serde(default = "default_silence")]
        silence_ms: u64,
    },
    /// Trigger-gated Thinker then Speaker, with state injection.
    LtsSemantic {
        #[serde(default)]
        trigger: TriggerConfig,
        /// Allow a further Thinker on a later fire when no Speaker is running.
        #[serde(default)]
        rethink: bool,
    },
}

impl Strategy {
    pub fn lts() -> Self {
        Strategy::LtsSemantic {
            trigger: TriggerConfig::default(),
            rethink: false,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Serial { think: false } => "serial",
            Strategy::Serial { think: true } => "serial_think",
            Strategy::Predgen { .. } => "predgen",
            Strategy::Vad { .. } => "vad",
            Strategy::LtsSemantic { .. } => "lts",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::Predgen { chunk_chars: 0 } => Err(Error::Config("chunk_chars must be positive".into())),
            Strategy::Vad { silence_ms: 0 } => Err(Error::Config("silence_ms must be positive".into())),
            Strategy::LtsSemantic { trigger, .. } => trigger.validate(),
            _ => Ok(()),
        }
    }
}

/// Everything that happened while serving one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceLog {
    pub trace_id: String,
    pub strategy: String,
    pub generations: Vec<GenerationRecord>,
    pub trigger_decisions: Vec<TriggerDecision>,
    pub snapshots: Vec<StateSnapshot>,
    pub accepted_index: Option<usize>,
    pub accepted_response: String,
    /// Falls back to the completion time for an empty response.
    pub accepted_first_token_ms: Option<u64>,
    /// Falls back to the completion time when no sentence ever ends.
    pub accepted_first_sentence_ms: Option<u64>,
    pub end_of_speech_ms: u64,
    pub failed: Option<String>,
    pub scorer_errors: usize,
}

impl UtteranceLog {
    pub fn nfe(&self) -> usize {
        self.generations.len()
    }

    pub fn nit(&self) -> usize {
        self.generations.iter().filter(|g| g.interrupted).count()
    }

    pub fn accepted(&self) -> Option<&GenerationRecord> {
        self.accepted_index.map(|i| &self.generations[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SimEvent {
    Token { id: usize, k: usize },
    Done { id: usize },
    Transcript(usize),
}

impl SimEvent {
    /// At equal timestamps generation output is delivered before transcript
    /// input.
    fn class(self) -> u8 {
        match self {
            SimEvent::Token { .. } | SimEvent::Done { .. } => 0,
            SimEvent::Transcript(_) => 1,
        }
    }
}

/// Runs one utterance on a simulated clock. Bit-reproducible.
pub fn run_simulated(
    trace: &UtteranceTrace,
    strategy: &Strategy,
    scorer: &dyn Scorer,
    backend: &ScriptedBackend,
) -> Result<UtteranceLog> {
    trace.validate().map_err(Error::InvalidInput)?;
    strategy.validate()?;
    let mut machine = UtteranceMachine::new(trace.id.clone(), strategy.clone(), scorer);
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |queue: &mut BinaryHeap<_>, t: u64, ev: SimEvent| {
        queue.push(Reverse((t, ev.class(), seq, ev)));
        seq += 1;
    };
    for (i, ev) in trace.events.iter().enumerate() {
        push(&mut queue, ev.t_ms, SimEvent::Transcript(i));
    }
    let mut timelines: HashMap<usize, Vec<Token>> = HashMap::new();
    let mut cancelled: HashSet<usize> = HashSet::new();

    while let Some(Reverse((now, _, _, ev))) = queue.pop() {
        match ev {
            SimEvent::Token { id, k } if !cancelled.contains(&id) => machine.on_token(id, &timelines[&id][k]),
            SimEvent::Done { id } if !cancelled.contains(&id) => machine.on_completed(id, now),
            SimEvent::Transcript(i) => {
                for cmd in machine.on_transcript(&trace.events[i]) {
                    match cmd {
                        Command::Launch { id, req } => {
                            let tl = backend.timeline(&req, now);
                            for (k, tok) in tl.tokens.iter().enumerate() {
                                push(&mut queue, tok.t_ms, SimEvent::Token { id, k });
                            }
                            push(&mut queue, tl.end_ms, SimEvent::Done { id });
                            timelines.insert(id, tl.tokens);
                        }
                        Command::Cancel { id } => {
                            cancelled.insert(id);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if !machine.is_done() {
        return Err(Error::Invariant(format!("utterance {} did not settle", trace.id)));
    }
    Ok(machine.finish())
}

enum WallMsg {
    Token {
        id: usize,
        tok: Token,
    },
    End {
        id: usize,
        t_ms: u64,
        result: Result<StreamEnd>,
    },
}

/// Runs one utterance in real time: transcript events are released at their
/// trace timestamps and every generation streams on its own thread.
pub fn run_wall(
    trace: &UtteranceTrace,
    strategy: &Strategy,
    scorer: &dyn Scorer,
    backend: &dyn StreamingBackend,
) -> Result<UtteranceLog> {
    trace.validate().map_err(Error::InvalidInput)?;
    strategy.validate()?;
    let mut machine = UtteranceMachine::new(trace.id.clone(), strategy.clone(), scorer);
    let clock = WallClock::start();
    let (tx, rx) = mpsc::channel::<WallMsg>();
    let mut cancels: HashMap<usize, CancelToken> = HashMap::new();

    thread::scope(|scope| {
        let mut next = 0usize;
        while !machine.is_done() {
            let msg = match trace.events.get(next) {
                Some(ev) => {
                    let wait = clock.instant_at(ev.t_ms).saturating_duration_since(Instant::now());
                    rx.recv_timeout(wait).ok()
                }
                None => Some(rx.recv().expect("sender is held by this loop")),
            };
            match msg {
                Some(WallMsg::Token { id, tok }) => machine.on_token(id, &tok),
                Some(WallMsg::End { id, t_ms, result }) => match result {
                    Ok(StreamEnd::Completed) => machine.on_completed(id, t_ms),
                    Ok(StreamEnd::Cancelled) => {}
                    Err(e) => machine.on_failed(id, t_ms, e.to_string()),
                },
                None => {
                    let ev = &trace.events[next];
                    next += 1;
                    for cmd in machine.on_transcript(ev) {
                        match cmd {
                            Command::Launch { id, req } => {
                                let cancel = CancelToken::new();
                                cancels.insert(id, cancel.clone());
                                let tx = tx.clone();
                                scope.spawn(move || {
                                    let result = backend.stream(&req, &cancel, &clock, &mut |tok| {
                                        let _ = tx.send(WallMsg::Token { id, tok });
                                    });
                                    let _ = tx.send(WallMsg::End {
                                        id,
                                        t_ms: clock.now_ms(),
                                        result,
                                    });
                                });
                            }
                            Command::Cancel { id } => {
                                if let Some(c) = cancels.get(&id) {
                                    c.cancel();
                                }
                            }
                        }
                    }
                }
            }
        }
        for c in cancels.values() {
            c.cancel();
        }
    });
    Ok(machine.finish())
}
