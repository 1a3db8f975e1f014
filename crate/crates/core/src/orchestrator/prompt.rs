//! Thinker/Speaker prompt construction and snapshot parsing.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::REASONING_DIRECTIVE;

/// The Thinker's structured memory for the current turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StateSnapshot {
    pub corrected_text: String,
    pub key_variables: IndexMap<String, String>,
    pub plan: Vec<String>,
    pub turn_index: u32,
}

impl StateSnapshot {
    pub fn is_empty(&self) -> bool {
        self.corrected_text.is_empty() && self.key_variables.is_empty() && self.plan.is_empty()
    }
}

pub fn build_thinker_prompt(prefix: &str, prior: &StateSnapshot) -> String {
    let mut p = String::from(
        "You are the Thinker behind a voice assistant. The user is still speaking; \
         below is the partial speech recognition transcript.\n\
         1. Correct phonetic recognition errors (homophones, misheard numbers).\n\
         2. Extract the key variables as name/value pairs.\n\
         3. Write a short step-by-step plan for solving the request.\n\
         Reply with a single JSON object with the fields \"corrected_text\", \
         \"key_variables\" and \"plan\", and nothing else.\n",
    );
    if !prior.is_empty() {
        let prior_json = serde_json::to_string(prior).expect("snapshot serializes");
        p.push_str(&format!("<previous_state>\n{prior_json}\n</previous_state>\n"));
    }
    p.push_str(&format!("<transcript>\n{prefix}\n</transcript>\n"));
    p
}

/// Speaker prompt: transcript, then the injected plan and variables (each
/// omitted when empty), then the response directives.
pub fn build_speaker_prompt(transcript: &str, injected: &StateSnapshot) -> String {
    let mut p = String::from("You are the Speaker of a voice assistant answering a spoken request.\n");
    p.push_str(&format!("<transcript>\n{transcript}\n</transcript>\n"));
    if !injected.plan.is_empty() {
        p.push_str("<plan>\n");
        for (i, step) in injected.plan.iter().enumerate() {
            p.push_str(&format!("{}. {}\n", i + 1, step));
        }
        p.push_str("</plan>\n");
    }
    if !injected.key_variables.is_empty() {
        p.push_str("<variables>\n");
        for (k, v) in &injected.key_variables {
            p.push_str(&format!("{k} = {v}\n"));
        }
        p.push_str("</variables>\n");
    }
    p.push_str(
        "Briefly restate the problem, follow the plan if it is clear (otherwise reason \
         from the transcript alone), and give the final answer first.\n",
    );
    p
}

/// Speaker prompt for the serial baselines.
pub fn build_serial_prompt(transcript: &str, think: bool) -> String {
    let p = build_speaker_prompt(transcript, &StateSnapshot::default());
    if think {
        format!("{REASONING_DIRECTIVE}\n{p}")
    } else {
        p
    }
}

/// Byte range of the balanced `{...}` starting at `open`, honouring JSON
/// string literals.
fn balanced_end(s: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s[open..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// The first balanced substring that parses as a JSON object.
pub fn first_json_object(s: &str) -> Option<(usize, usize, serde_json::Map<String, Value>)> {
    for (open, _) in s.match_indices('{') {
        if let Some(end) = balanced_end(s, open) {
            if let Ok(Value::Object(map)) = serde_json::from_str(&s[open..end]) {
                return Some((open, end, map));
            }
        }
    }
    None
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Extracts a snapshot from Thinker output. Returns the empty snapshot and
/// `flagged = true` when no usable object is found.
pub fn parse_snapshot(output: &str) -> (StateSnapshot, bool) {
    let Some((_, _, map)) = first_json_object(output) else {
        return (StateSnapshot::default(), true);
    };
    let mut snap = StateSnapshot::default();
    let mut recognized = false;
    if let Some(t) = map.get("corrected_text") {
        recognized = true;
        snap.corrected_text = scalar(t);
    }
    match map.get("key_variables") {
        Some(Value::Object(vars)) => {
            recognized = true;
            snap.key_variables = vars.iter().map(|(k, v)| (k.clone(), scalar(v))).collect();
        }
        Some(_) => return (StateSnapshot::default(), true),
        None => {}
    }
    match map.get("plan") {
        Some(Value::Array(steps)) => {
            recognized = true;
            snap.plan = steps.iter().map(scalar).collect();
        }
        Some(Value::String(s)) => {
            recognized = true;
            snap.plan = vec![s.clone()];
        }
        Some(_) => return (StateSnapshot::default(), true),
        None => {}
    }
    if let Some(n) = map.get("turn_index").and_then(Value::as_u64) {
        snap.turn_index = n as u32;
    }
    if recognized {
        (snap, false)
    } else {
        (StateSnapshot::default(), true)
    }
}
