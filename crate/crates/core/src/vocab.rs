//! Shared word lists and token classification.
//!
//! Tokenization throughout the crate is plain whitespace splitting with
//! punctuation left attached to the word. Classification helpers here look
//! through that punctuation.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillerCategory {
    Hesitation,
    Correction,
    Delaying,
    Transition,
}

pub const HESITATION: &[&str] = &["umm", "ah", "let me see", "basically"];
pub const CORRECTION: &[&str] = &["wait, no", "actually, scrap that", "I mean"];
pub const DELAYING: &[&str] = &["uh", "hmm", "so", "anyway"];
pub const TRANSITION: &[&str] = &["well", "like", "you know", "actually", "basically"];

pub const CATEGORIES: &[(FillerCategory, &[&str])] = &[
    (FillerCategory::Hesitation, HESITATION),
    (FillerCategory::Correction, CORRECTION),
    (FillerCategory::Delaying, DELAYING),
    (FillerCategory::Transition, TRANSITION),
];

/// Hesitation spellings recognized when scoring or annotating but never
/// injected.
pub const RECOGNIZED_ONLY: &[&str] = &["um", "er", "uhm", "erm"];

/// Coordinating conjunctions that open a new clause after a comma.
pub const CONJUNCTIONS: &[&str] = &["and", "but", "or", "nor", "yet", "so"];

/// Every filler phrase, deduplicated, in first-seen order.
pub fn all_fillers() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for (_, phrases) in CATEGORIES {
        for p in phrases.iter() {
            if !out.contains(p) {
                out.push(p);
            }
        }
    }
    out
}

/// Lowercased word with surrounding punctuation removed.
pub fn bare(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_lowercase()
}

static DETECTION_PHRASES: LazyLock<Vec<Vec<String>>> = LazyLock::new(|| {
    all_fillers()
        .into_iter()
        .chain(RECOGNIZED_ONLY.iter().copied())
        .map(|p| p.split_whitespace().map(bare).collect())
        .collect()
});

/// Number of tokens of the longest filler phrase ending exactly at `tokens[end]`.
pub fn filler_ending_at(tokens: &[&str], end: usize) -> Option<usize> {
    if end >= tokens.len() {
        return None;
    }
    let mut best = None;
    for words in DETECTION_PHRASES.iter() {
        let n = words.len();
        if n == 0 || n > end + 1 {
            continue;
        }
        let start = end + 1 - n;
        let matches = tokens[start..=end].iter().zip(words).all(|(tok, w)| bare(tok) == *w);
        if matches && best.is_none_or(|b| n > b) {
            best = Some(n);
        }
    }
    best
}

/// True when the token at `idx` is the last word of a filler phrase.
pub fn is_filler_at(tokens: &[&str], idx: usize) -> bool {
    filler_ending_at(tokens, idx).is_some()
}

/// True when the text's last word closes a filler phrase.
pub fn ends_with_filler(text: &str) -> bool {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    !tokens.is_empty() && is_filler_at(&tokens, tokens.len() - 1)
}

pub fn is_conjunction(token: &str) -> bool {
    CONJUNCTIONS.contains(&bare(token).as_str())
}

fn strip_closers(token: &str) -> &str {
    token.trim_end_matches(['"', '\'', ')', ']', '}'])
}

/// Sentence- or clause-final punctuation. A trailing ellipsis marks a
/// trailing-off hesitation and does not count.
pub fn ends_clause(token: &str) -> bool {
    let t = strip_closers(token);
    if t.ends_with("...") || t.ends_with('…') {
        return false;
    }
    t.ends_with(['.', '!', '?', ';', ':'])
}

pub fn ends_with_comma(token: &str) -> bool {
    strip_closers(token).ends_with(',')
}

/// Any punctuation after which a speaker would naturally pause.
pub fn ends_with_pause(token: &str) -> bool {
    let t = strip_closers(token);
    t.ends_with(['.', '!', '?', ';', ':', ',', '…'])
}

/// Sentence terminators used for first-sentence detection.
pub fn has_sentence_terminator(text: &str) -> bool {
    text.contains(['.', '!', '?'])
}
