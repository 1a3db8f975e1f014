//! Per-utterance state machine.
//!
//! Consumes transcript and generation events in timestamp order and emits
//! launch/cancel commands. Drivers own the actual generations.

use log::warn;

use super::prompt::{build_serial_prompt, build_speaker_prompt, build_thinker_prompt, parse_snapshot, StateSnapshot};
use super::{Strategy, UtteranceLog};
use crate::backend::{GenerationRecord, GenerationRequest, Role, Token};
use crate::trace::TranscriptEvent;
use crate::trigger::{score_prefix, Scorer, TriggerState};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Launch { id: usize, req: GenerationRequest },
    Cancel { id: usize },
}

pub struct UtteranceMachine<'a> {
    trace_id: String,
    strategy: Strategy,
    scorer: &'a dyn Scorer,
    trigger: TriggerState,
    gens: Vec<GenerationRecord>,
    snapshots: Vec<StateSnapshot>,
    speaker: Option<usize>,
    thinker: Option<usize>,
    thinkers_launched: usize,
    last_started: Option<String>,
    last_text: Option<String>,
    last_growth_ms: u64,
    eos_ms: Option<u64>,
    awaiting: Option<usize>,
    accepted: Option<usize>,
    failure: Option<String>,
    scorer_errors: usize,
}

impl<'a> UtteranceMachine<'a> {
    pub fn new(trace_id: impl Into<String>, strategy: Strategy, scorer: &'a dyn Scorer) -> Self {
        Self {
            trace_id: trace_id.into(),
            strategy,
            scorer,
            trigger: TriggerState::new(),
            gens: Vec::new(),
            snapshots: Vec::new(),
            speaker: None,
            thinker: None,
            thinkers_launched: 0,
            last_started: None,
            last_text: None,
            last_growth_ms: 0,
            eos_ms: None,
            awaiting: None,
            accepted: None,
            failure: None,
            scorer_errors: 0,
        }
    }

    pub fn generations(&self) -> &[GenerationRecord] {
        &self.gens
    }

    pub fn snapshots(&self) -> &[StateSnapshot] {
        &self.snapshots
    }

    pub fn speaker_in_flight(&self) -> Option<usize> {
        self.speaker
    }

    /// End of speech seen, the response settled, and no lane still running.
    pub fn is_done(&self) -> bool {
        self.eos_ms.is_some()
            && (self.accepted.is_some() || self.failure.is_some())
            && self.speaker.is_none()
            && self.thinker.is_none()
    }

    fn launch(&mut self, role: Role, transcript: &str, prompt: String, injected: Option<usize>, now: u64) -> Command {
        let req = GenerationRequest::new(role, prompt);
        let mut rec = GenerationRecord::started(&req, transcript, now);
        rec.injected_snapshot = injected;
        let id = self.gens.len();
        self.gens.push(rec);
        match role {
            Role::Thinker => {
                self.thinker = Some(id);
                self.thinkers_launched += 1;
            }
            Role::Speaker => {
                self.speaker = Some(id);
                self.last_started = Some(transcript.to_string());
            }
        }
        Command::Launch { id, req }
    }

    fn cancel_speaker(&mut self, now: u64) -> Option<Command> {
        let id = self.speaker.take()?;
        self.gens[id].cancel(now);
        Some(Command::Cancel { id })
    }

    fn latest_snapshot(&self) -> (StateSnapshot, Option<usize>) {
        match self.snapshots.last() {
            Some(s) => (s.clone(), Some(self.snapshots.len() - 1)),
            None => (StateSnapshot::default(), None),
        }
    }

    fn launch_speaker(&mut self, text: &str, now: u64) -> Command {
        match self.strategy {
            Strategy::Serial { think } => self.launch(Role::Speaker, text, build_serial_prompt(text, think), None, now),
            Strategy::LtsSemantic { .. } => {
                let (snap, idx) = self.latest_snapshot();
                self.launch(Role::Speaker, text, build_speaker_prompt(text, &snap), idx, now)
            }
            Strategy::Predgen { .. } | Strategy::Vad { .. } => {
                let prompt = build_speaker_prompt(text, &StateSnapshot::default());
                self.launch(Role::Speaker, text, prompt, None, now)
            }
        }
    }

    fn launch_thinker(&mut self, text: &str, now: u64) -> Command {
        let (prior, idx) = self.latest_snapshot();
        self.launch(Role::Thinker, text, build_thinker_prompt(text, &prior), idx, now)
    }

    /// Cancels the in-flight Speaker if `new_prefix` strictly extends its
    /// transcript. The snapshot list is left untouched.
    pub fn handle_interruption(&mut self, new_prefix: &str, now: u64) -> Option<Command> {
        let id = self.speaker?;
        let tr = &self.gens[id].transcript;
        if new_prefix.len() > tr.len() && new_prefix.starts_with(tr.as_str()) {
            self.cancel_speaker(now)
        } else {
            None
        }
    }

    fn restart_speaker(&mut self, text: &str, now: u64) -> Vec<Command> {
        let mut cmds: Vec<Command> = self.cancel_speaker(now).into_iter().collect();
        cmds.push(self.launch_speaker(text, now));
        cmds
    }

    fn on_fire(&mut self, text: &str, now: u64, rethink: bool) -> Vec<Command> {
        if self.thinkers_launched == 0 {
            return vec![self.launch_thinker(text, now)];
        }
        let mut cmds = Vec::new();
        if rethink && self.speaker.is_none() && self.thinker.is_none() {
            cmds.push(self.launch_thinker(text, now));
        }
        if self.speaker.is_some() {
            match self.handle_interruption(text, now) {
                Some(cancel) => cmds.push(cancel),
                None => return cmds,
            }
        }
        cmds.push(self.launch_speaker(text, now));
        cmds
    }

    pub fn on_transcript(&mut self, ev: &TranscriptEvent) -> Vec<Command> {
        let now = ev.t_ms;
        let text = ev.cumulative_text.as_str();
        if self.last_text.as_deref() != Some(text) {
            self.last_text = Some(text.to_string());
            self.last_growth_ms = now;
        }
        let mut fired = false;
        if let Strategy::LtsSemantic { trigger, .. } = &self.strategy {
            let score = score_prefix(self.scorer, text, trigger).unwrap_or_else(|e| {
                warn!("{}: scorer failed at {now} ms: {e}", self.trace_id);
                self.scorer_errors += 1;
                0.0
            });
            fired = self.trigger.gate(text, score, trigger).fired;
        }
        if ev.is_final {
            return self.on_end_of_speech(text, now);
        }
        let started = self.last_started.as_deref();
        match self.strategy.clone() {
            Strategy::Serial { .. } => Vec::new(),
            Strategy::Predgen { chunk_chars } => {
                let base = started.map_or(0, |s| s.chars().count());
                let grown = text.chars().count().saturating_sub(base);
                if started != Some(text) && grown >= chunk_chars {
                    self.restart_speaker(text, now)
                } else {
                    Vec::new()
                }
            }
            Strategy::Vad { silence_ms } => {
                let silent = now.saturating_sub(self.last_growth_ms) >= silence_ms;
                if silent && started != Some(text) {
                    self.restart_speaker(text, now)
                } else {
                    Vec::new()
                }
            }
            Strategy::LtsSemantic { rethink, .. } => {
                if fired {
                    self.on_fire(text, now, rethink)
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn on_end_of_speech(&mut self, text: &str, now: u64) -> Vec<Command> {
        self.eos_ms = Some(now);
        if !matches!(self.strategy, Strategy::Serial { .. }) {
            if let Some(id) = self.speaker {
                if self.gens[id].transcript == text {
                    self.awaiting = Some(id);
                    return Vec::new();
                }
            }
            let done = self
                .gens
                .iter()
                .position(|g| g.role == Role::Speaker && g.completed_ok() && g.transcript == text);
            if let Some(id) = done {
                self.accepted = Some(id);
                return self.cancel_speaker(now).into_iter().collect();
            }
        }
        let cmds = self.restart_speaker(text, now);
        self.awaiting = self.speaker;
        cmds
    }

    pub fn on_token(&mut self, id: usize, tok: &Token) {
        let rec = &mut self.gens[id];
        if !rec.is_finished() {
            rec.push_token(tok);
        }
    }

    pub fn on_completed(&mut self, id: usize, t_ms: u64) {
        if self.gens[id].is_finished() {
            return;
        }
        self.gens[id].complete(t_ms);
        match self.gens[id].role {
            Role::Thinker => {
                if self.thinker == Some(id) {
                    self.thinker = None;
                }
                let (mut snap, flagged) = parse_snapshot(&self.gens[id].output_text);
                if flagged {
                    warn!("{}: thinker output is not a state snapshot", self.trace_id);
                    self.gens[id].flagged = true;
                } else {
                    snap.turn_index = self.snapshots.len() as u32;
                    self.snapshots.push(snap);
                }
            }
            Role::Speaker => {
                if self.speaker == Some(id) {
                    self.speaker = None;
                }
                if self.awaiting == Some(id) {
                    self.accepted = Some(id);
                }
            }
        }
    }

    pub fn on_failed(&mut self, id: usize, t_ms: u64, message: String) {
        if self.gens[id].is_finished() {
            return;
        }
        warn!("{}: generation {id} failed: {message}", self.trace_id);
        let rec = &mut self.gens[id];
        rec.end_ms = Some(t_ms);
        rec.error = Some(message.clone());
        if self.thinker == Some(id) {
            self.thinker = None;
        }
        if self.speaker == Some(id) {
            self.speaker = None;
        }
        if self.awaiting == Some(id) {
            self.failure = Some(message);
        }
    }

    pub fn finish(self) -> UtteranceLog {
        let accepted = self.accepted.map(|i| &self.gens[i]);
        UtteranceLog {
            trace_id: self.trace_id,
            strategy: self.strategy.label().to_string(),
            accepted_index: self.accepted,
            accepted_response: accepted.map(|g| g.output_text.clone()).unwrap_or_default(),
            accepted_first_token_ms: accepted.and_then(|g| g.first_token_ms.or(g.end_ms)),
            accepted_first_sentence_ms: accepted.and_then(|g| g.first_sentence_ms.or(g.end_ms)),
            end_of_speech_ms: self.eos_ms.unwrap_or_default(),
            failed: self
                .failure
                .or_else(|| self.accepted.is_none().then(|| "no response was accepted".to_string())),
            scorer_errors: self.scorer_errors,
            trigger_decisions: self.trigger.decisions,
            snapshots: self.snapshots,
            generations: self.gens,
        }
    }
}
