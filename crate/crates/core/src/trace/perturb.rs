//! Disfluency augmentation: filler insertion and self-correction patterns.
//!
//! Every perturbation is an insertion in front of an original token, so the
//! source text survives byte-for-byte between insertions. Spans record where
//! each insertion landed (char offsets in the perturbed text) and removing
//! them restores the source exactly.

use rand::seq::{index, IndexedRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::token_spans;
use crate::error::{Error, Result};
use crate::vocab::{self, FillerCategory};

/// How many fillers to insert for a given token count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityPolicy {
    Zero,
    /// One filler per 25 tokens, at least 1 and at most 5.
    Moderate,
    PerTokens {
        per_tokens: usize,
        min: usize,
        max: usize,
    },
}

impl DensityPolicy {
    /// `(min, max)` fillers this policy allows for a non-empty text.
    pub fn band(&self) -> (usize, usize) {
        match *self {
            DensityPolicy::Zero => (0, 0),
            DensityPolicy::Moderate => (1, 5),
            DensityPolicy::PerTokens { min, max, .. } => (min, max),
        }
    }

    pub fn target(&self, n_tokens: usize) -> usize {
        if n_tokens == 0 {
            return 0;
        }
        let (per, min, max) = match *self {
            DensityPolicy::Zero => return 0,
            DensityPolicy::Moderate => (25, 1, 5),
            DensityPolicy::PerTokens { per_tokens, min, max } => (per_tokens.max(1), min, max),
        };
        (n_tokens / per).clamp(min, max.max(min))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionPattern {
    EntitySwap,
    Misreading,
    LogicCheck,
    Distraction,
}

impl CorrectionPattern {
    pub const ALL: [CorrectionPattern; 4] = [
        CorrectionPattern::EntitySwap,
        CorrectionPattern::Misreading,
        CorrectionPattern::LogicCheck,
        CorrectionPattern::Distraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrectionPattern::EntitySwap => "entity_swap",
            CorrectionPattern::Misreading => "misreading",
            CorrectionPattern::LogicCheck => "logic_check",
            CorrectionPattern::Distraction => "distraction",
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            CorrectionPattern::EntitySwap => "wait, no",
            CorrectionPattern::Misreading => "I mean",
            CorrectionPattern::LogicCheck => "actually, scrap that",
            CorrectionPattern::Distraction => "anyway",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillerSpan {
    pub filler: String,
    /// Char range of the inserted `"<filler>, "` in the perturbed text.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionSpan {
    pub pattern: CorrectionPattern,
    pub wrong_text: String,
    pub marker: String,
    pub correct_text: String,
    /// Char range of the inserted `"<wrong>... <marker>, "`; the correct
    /// segment begins at `end`.
    pub start: usize,
    pub end: usize,
}

impl CorrectionSpan {
    pub fn inserted_text(&self) -> String {
        correction_insert(&self.wrong_text, &self.marker)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    #[default]
    None,
    Fillers,
    Corrections,
    Hybrid,
}

impl std::str::FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PerturbKind::None),
            "fillers" => Ok(PerturbKind::Fillers),
            "corrections" => Ok(PerturbKind::Corrections),
            "hybrid" => Ok(PerturbKind::Hybrid),
            other => Err(Error::InvalidInput(format!("unknown perturbation `{other}`"))),
        }
    }
}

/// A perturbed text together with the provenance of every insertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbed {
    pub text: String,
    pub fillers: Vec<FillerSpan>,
    pub corrections: Vec<CorrectionSpan>,
}

impl Perturbed {
    pub fn unchanged(text: &str) -> Self {
        Self {
            text: text.to_string(),
            fillers: Vec::new(),
            corrections: Vec::new(),
        }
    }

    /// Removes every inserted filler, keeping corrections in place.
    pub fn strip_fillers(&self) -> Perturbed {
        let removed: Vec<(usize, usize)> = self.fillers.iter().map(|f| (f.start, f.end)).collect();
        let corrections = self
            .corrections
            .iter()
            .map(|c| {
                let mut c = c.clone();
                let shift = shift_before(&removed, c.start);
                c.start -= shift;
                c.end -= shift;
                c
            })
            .collect();
        Perturbed {
            text: remove_char_ranges(&self.text, &removed),
            fillers: Vec::new(),
            corrections,
        }
    }

    /// Applies correction semantics: drops each wrong segment and its marker.
    pub fn resolve_corrections(&self) -> Perturbed {
        let removed: Vec<(usize, usize)> = self.corrections.iter().map(|c| (c.start, c.end)).collect();
        let fillers = self
            .fillers
            .iter()
            .map(|f| {
                let mut f = f.clone();
                let shift = shift_before(&removed, f.start);
                f.start -= shift;
                f.end -= shift;
                f
            })
            .collect();
        Perturbed {
            text: remove_char_ranges(&self.text, &removed),
            fillers,
            corrections: Vec::new(),
        }
    }

    pub fn restore(&self) -> String {
        self.strip_fillers().resolve_corrections().text
    }
}

pub fn strip_fillers(text: &str, spans: &[FillerSpan]) -> String {
    let ranges: Vec<_> = spans.iter().map(|s| (s.start, s.end)).collect();
    remove_char_ranges(text, &ranges)
}

pub fn resolve_corrections(text: &str, spans: &[CorrectionSpan]) -> String {
    let ranges: Vec<_> = spans.iter().map(|s| (s.start, s.end)).collect();
    remove_char_ranges(text, &ranges)
}

fn shift_before(removed: &[(usize, usize)], pos: usize) -> usize {
    removed.iter().filter(|(_, e)| *e <= pos).map(|(s, e)| e - s).sum()
}

fn remove_char_ranges(text: &str, ranges: &[(usize, usize)]) -> String {
    text.chars()
        .enumerate()
        .filter(|(i, _)| !ranges.iter().any(|(s, e)| (*s..*e).contains(i)))
        .map(|(_, c)| c)
        .collect()
}

/// Inserts fillers at clause boundaries. Zero density returns the input.
pub fn inject_fillers(text: &str, density: DensityPolicy, seed: u64) -> String {
    inject_fillers_spanned(text, density, seed).text
}

pub fn inject_fillers_spanned(text: &str, density: DensityPolicy, seed: u64) -> Perturbed {
    let spans = token_spans(text);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inserts = filler_insertions(text, &spans, density, &mut rng);
    render(text, inserts)
}

/// Inserts one self-correction of the requested pattern.
pub fn inject_self_correction(text: &str, pattern: CorrectionPattern, seed: u64) -> Result<(String, CorrectionSpan)> {
    let spans = token_spans(text);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ins = correction_insertion(text, &spans, pattern, &mut rng)?;
    let mut out = render(text, vec![ins]);
    let span = out.corrections.pop().expect("one correction rendered");
    Ok((out.text, span))
}

/// Patterns with at least one eligible site in `text`.
pub fn applicable_patterns(text: &str) -> Vec<CorrectionPattern> {
    let spans = token_spans(text);
    if spans.is_empty() {
        return Vec::new();
    }
    CorrectionPattern::ALL
        .into_iter()
        .filter(|p| *p != CorrectionPattern::EntitySwap || !entity_sites(text, &spans).is_empty())
        .collect()
}

const HYBRID_SALT: u64 = 0x5eed_c0de_cafe_f00d;

/// Applies a perturbation of the given kind. `Corrections` and `Hybrid` pick
/// one applicable pattern at random.
pub fn perturb(text: &str, kind: PerturbKind, density: DensityPolicy, seed: u64) -> Result<Perturbed> {
    let spans = token_spans(text);
    let mut inserts = Vec::new();
    if matches!(kind, PerturbKind::Corrections | PerturbKind::Hybrid) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ HYBRID_SALT);
        let patterns = applicable_patterns(text);
        let pattern = *patterns
            .choose(&mut rng)
            .ok_or(Error::PatternInapplicable { pattern: "any" })?;
        inserts.push(correction_insertion(text, &spans, pattern, &mut rng)?);
    }
    if matches!(kind, PerturbKind::Fillers | PerturbKind::Hybrid) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        inserts.extend(filler_insertions(text, &spans, density, &mut rng));
    }
    Ok(render(text, inserts))
}

const SUBORDINATORS: &[&str] = &[
    "because", "if", "when", "while", "although", "since", "which", "then", "how", "what",
];

fn filler_slots(text: &str, spans: &[(usize, usize)]) -> Vec<usize> {
    (0..spans.len())
        .filter(|&j| {
            let tok = &text[spans[j].0..spans[j].1];
            j == 0
                || vocab::ends_with_pause(&text[spans[j - 1].0..spans[j - 1].1])
                || vocab::is_conjunction(tok)
                || SUBORDINATORS.contains(&vocab::bare(tok).as_str())
        })
        .collect()
}

fn injectable_fillers() -> Vec<&'static str> {
    let mut out = Vec::new();
    for (cat, phrases) in vocab::CATEGORIES {
        if *cat == FillerCategory::Correction {
            continue;
        }
        for p in phrases.iter() {
            if !out.contains(p) {
                out.push(*p);
            }
        }
    }
    out
}

#[derive(Debug)]
enum InsertKind {
    Filler(String),
    Correction {
        pattern: CorrectionPattern,
        wrong: String,
        correct: String,
    },
}

#[derive(Debug)]
struct Insertion {
    /// Byte offset in the source text; always a token start.
    at: usize,
    kind: InsertKind,
}

impl Insertion {
    fn rank(&self) -> u8 {
        match self.kind {
            InsertKind::Filler(_) => 0,
            InsertKind::Correction { .. } => 1,
        }
    }
}

fn filler_insertions(
    text: &str,
    spans: &[(usize, usize)],
    density: DensityPolicy,
    rng: &mut ChaCha8Rng,
) -> Vec<Insertion> {
    let slots = filler_slots(text, spans);
    let want = density.target(spans.len()).min(slots.len());
    if want == 0 {
        return Vec::new();
    }
    let vocab = injectable_fillers();
    let mut chosen: Vec<usize> = index::sample(rng, slots.len(), want).into_vec();
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|k| Insertion {
            at: spans[slots[k]].0,
            kind: InsertKind::Filler(vocab.choose(rng).expect("non-empty").to_string()),
        })
        .collect()
}

fn correction_insert(wrong: &str, marker: &str) -> String {
    format!("{wrong}... {marker}, ")
}

fn trim_pause(s: &str) -> &str {
    s.trim_end_matches([',', '.', ';', ':', '!', '?', '…'])
}

const NAMES: &[&str] = &["Tom", "Anna", "Sam", "Maria", "Lee", "Nina", "Omar", "Julia"];

const SWAPS: &[(&str, &str)] = &[
    ("low", "high"),
    ("man", "woman"),
    ("he", "she"),
    ("his", "her"),
    ("buy", "sell"),
    ("bought", "sold"),
    ("more", "less"),
    ("first", "last"),
    ("left", "right"),
    ("add", "subtract"),
    ("big", "small"),
    ("before", "after"),
    ("up", "down"),
    ("increase", "decrease"),
    ("profit", "loss"),
    ("morning", "evening"),
    ("boy", "girl"),
    ("boys", "girls"),
    ("each", "all"),
    ("week", "month"),
    ("day", "week"),
];

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "should", "can", "will", "would", "do", "does", "did", "have", "has", "had", "must",
    "could",
];

const DISTRACTORS: &[&str] = &["pie", "dinner", "the weekend", "my keys", "the game"];

fn swap_word(word: &str) -> Option<String> {
    let b = vocab::bare(word);
    let alt = SWAPS.iter().find_map(|&(a, z)| {
        if b == a {
            Some(z)
        } else if b == z {
            Some(a)
        } else {
            None
        }
    })?;
    let capitalized = word.chars().next().is_some_and(char::is_uppercase);
    Some(if capitalized {
        let mut c = alt.chars();
        c.next()
            .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
            .unwrap_or_default()
    } else {
        alt.to_string()
    })
}

#[derive(Debug, Clone, Copy)]
enum EntitySite {
    Number { token: usize },
    Name { token: usize },
}

fn first_digit_run(tok: &str) -> Option<(usize, usize)> {
    let start = tok.find(|c: char| c.is_ascii_digit())?;
    let len = tok[start..]
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(tok.len() - start);
    Some((start, start + len))
}

fn entity_sites(text: &str, spans: &[(usize, usize)]) -> Vec<EntitySite> {
    let toks: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
    let mut sites = Vec::new();
    for (j, tok) in toks.iter().enumerate() {
        if let Some((s, e)) = first_digit_run(tok) {
            if tok[s..e].parse::<u64>().is_ok() {
                sites.push(EntitySite::Number { token: j });
                continue;
            }
        }
        let core = trim_pause(tok);
        let sentence_start = j == 0 || vocab::ends_clause(toks[j - 1]);
        let is_name = !sentence_start
            && core.len() > 1
            && core.chars().next().is_some_and(char::is_uppercase)
            && core.chars().all(char::is_alphabetic)
            && !vocab::is_filler_at(&toks, j);
        if is_name {
            sites.push(EntitySite::Name { token: j });
        }
    }
    sites
}

/// Token index ranges `[start, end]` of clause openings, at most `max_len` tokens.
fn clause_segments(text: &str, spans: &[(usize, usize)], max_len: usize) -> Vec<(usize, usize)> {
    let toks: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
    let mut out = Vec::new();
    for j in 0..toks.len() {
        if j > 0 && !vocab::ends_with_pause(toks[j - 1]) {
            continue;
        }
        let mut k = j;
        while k + 1 < toks.len() && k + 1 < j + max_len && !vocab::ends_with_pause(toks[k]) {
            k += 1;
        }
        out.push((j, k));
    }
    out
}

fn correction_insertion(
    text: &str,
    spans: &[(usize, usize)],
    pattern: CorrectionPattern,
    rng: &mut ChaCha8Rng,
) -> Result<Insertion> {
    let inapplicable = Error::PatternInapplicable {
        pattern: pattern.name(),
    };
    let tok = |j: usize| &text[spans[j].0..spans[j].1];
    let joined = |j: usize, k: usize| trim_pause(&text[spans[j].0..spans[k].1]).to_string();

    let (at, wrong, correct) = match pattern {
        CorrectionPattern::EntitySwap => {
            let sites = entity_sites(text, spans);
            let site = *sites.choose(rng).ok_or(inapplicable)?;
            match site {
                EntitySite::Number { token } => {
                    let t = trim_pause(tok(token));
                    let (s, e) = first_digit_run(t).expect("site has digits");
                    let n: u64 = t[s..e].parse().expect("site parses");
                    let slip = if n >= 2 { n - 2 } else { n + 2 };
                    let wrong = format!("{}{}{}", &t[..s], slip, &t[e..]);
                    (spans[token].0, wrong, t.to_string())
                }
                EntitySite::Name { token } => {
                    let t = trim_pause(tok(token));
                    let others: Vec<&&str> = NAMES.iter().filter(|n| **n != t).collect();
                    let wrong = others.choose(rng).expect("names available").to_string();
                    (spans[token].0, wrong, t.to_string())
                }
            }
        }
        CorrectionPattern::Misreading => {
            let segs = clause_segments(text, spans, 8);
            let &(j, k) = segs.choose(rng).ok_or(inapplicable)?;
            match (j..=k).find_map(|i| swap_word(trim_pause(tok(i))).map(|w| (i, w))) {
                Some((i, alt)) => {
                    let prefix = if i > j {
                        format!("{} ", &text[spans[j].0..spans[i - 1].1])
                    } else {
                        String::new()
                    };
                    (spans[j].0, format!("{prefix}{alt}"), joined(j, i))
                }
                None => {
                    let i = (j + 1).min(k);
                    let word: Vec<char> = trim_pause(tok(i)).chars().collect();
                    let cut: String = word[..word.len().div_ceil(2)].iter().collect();
                    let prefix = if i > j {
                        format!("{} ", &text[spans[j].0..spans[i - 1].1])
                    } else {
                        String::new()
                    };
                    (spans[j].0, format!("{prefix}{cut}-"), joined(j, i))
                }
            }
        }
        CorrectionPattern::LogicCheck => {
            let segs = clause_segments(text, spans, 6);
            let &(j, k) = segs.choose(rng).ok_or(inapplicable)?;
            let words: Vec<&str> = (j..=k).map(|i| trim_pause(tok(i))).collect();
            let negated = match words
                .iter()
                .position(|w| AUXILIARIES.contains(&vocab::bare(w).as_str()))
            {
                Some(a) => {
                    let mut w: Vec<String> = words.iter().map(|s| s.to_string()).collect();
                    w.insert(a + 1, "not".into());
                    w.join(" ")
                }
                None => format!("I don't think {}", words.join(" ")),
            };
            (spans[j].0, format!("so {negated}"), joined(j, k))
        }
        CorrectionPattern::Distraction => {
            let segs = clause_segments(text, spans, 4);
            let &(j, k) = segs.choose(rng).ok_or(inapplicable)?;
            let d = DISTRACTORS.choose(rng).expect("non-empty");
            let seg = joined(j, k);
            (spans[j].0, format!("{seg}... thinking of {d}"), seg)
        }
    };
    Ok(Insertion {
        at,
        kind: InsertKind::Correction {
            pattern,
            wrong,
            correct,
        },
    })
}

fn render(text: &str, mut inserts: Vec<Insertion>) -> Perturbed {
    inserts.sort_by_key(|i| (i.at, i.rank()));
    let mut out = String::with_capacity(text.len() + 64);
    let mut chars = 0usize;
    let mut cursor = 0usize;
    let mut fillers = Vec::new();
    let mut corrections = Vec::new();
    for ins in inserts {
        let chunk = &text[cursor..ins.at];
        out.push_str(chunk);
        chars += chunk.chars().count();
        cursor = ins.at;
        let start = chars;
        match ins.kind {
            InsertKind::Filler(f) => {
                let s = format!("{f}, ");
                chars += s.chars().count();
                out.push_str(&s);
                fillers.push(FillerSpan {
                    filler: f,
                    start,
                    end: chars,
                });
            }
            InsertKind::Correction {
                pattern,
                wrong,
                correct,
            } => {
                let s = correction_insert(&wrong, pattern.marker());
                chars += s.chars().count();
                out.push_str(&s);
                corrections.push(CorrectionSpan {
                    pattern,
                    wrong_text: wrong,
                    marker: pattern.marker().to_string(),
                    correct_text: correct,
                    start,
                    end: chars,
                });
            }
        }
    }
    out.push_str(&text[cursor..]);
    Perturbed {
        text: out,
        fillers,
        corrections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_is_identity() {
        assert_eq!(
            inject_fillers("I need 5 apples.", DensityPolicy::Zero, 3),
            "I need 5 apples."
        );
        assert_eq!(inject_fillers("", DensityPolicy::Moderate, 3), "");
    }

    #[test]
    fn moderate_density_inserts_at_a_boundary_and_strips_back() {
        let src = "I want to set the price low to gain market share.";
        let p = inject_fillers_spanned(src, DensityPolicy::Moderate, 7);
        assert_eq!(p.fillers.len(), 1);
        assert!(injectable_fillers().iter().any(|f| p.text.contains(&format!("{f}, "))));
        // the only boundary in a single clause is its start
        assert_eq!(p.fillers[0].start, 0);
        assert_eq!(p.strip_fillers().text, src);
    }

    #[test]
    fn density_targets() {
        assert_eq!(DensityPolicy::Moderate.target(3), 1);
        assert_eq!(DensityPolicy::Moderate.target(100), 4);
        assert_eq!(DensityPolicy::Moderate.target(1000), 5);
        assert_eq!(DensityPolicy::Zero.target(100), 0);
    }

    #[test]
    fn entity_swap_on_year() {
        let (out, span) = inject_self_correction("In 2017 the firm grew.", CorrectionPattern::EntitySwap, 1).unwrap();
        assert_eq!(out, "In 2015... wait, no, 2017 the firm grew.");
        assert_eq!(span.wrong_text, "2015");
        assert_eq!(span.correct_text, "2017");
        assert_eq!(span.marker, "wait, no");
        assert_eq!(resolve_corrections(&out, &[span]), "In 2017 the firm grew.");
    }

    #[test]
    fn entity_swap_needs_a_site() {
        let err = inject_self_correction("the cat sat on the mat.", CorrectionPattern::EntitySwap, 1).unwrap_err();
        assert!(matches!(err, Error::PatternInapplicable { pattern: "entity_swap" }));
        assert!(inject_self_correction("", CorrectionPattern::Misreading, 1).is_err());
    }

    #[test]
    fn named_entity_swap() {
        let (out, span) =
            inject_self_correction("Yesterday Tom bought eggs.", CorrectionPattern::EntitySwap, 4).unwrap();
        assert_eq!(span.correct_text, "Tom");
        assert_ne!(span.wrong_text, "Tom");
        assert!(out.contains(&format!("{}... wait, no, Tom bought", span.wrong_text)));
    }

    #[test]
    fn misreading_prefers_a_swap() {
        let src = "I want to set the price low to gain market share.";
        let (out, span) = inject_self_correction(src, CorrectionPattern::Misreading, 0).unwrap();
        assert_eq!(span.wrong_text, "I want to set the price high");
        assert_eq!(span.correct_text, "I want to set the price low");
        assert!(out.starts_with("I want to set the price high... I mean, I want"));
    }

    #[test]
    fn clause_patterns_recover_source() {
        let src = "So I should agree with the plan, and then I need to buy apples.";
        for pattern in [
            CorrectionPattern::Misreading,
            CorrectionPattern::LogicCheck,
            CorrectionPattern::Distraction,
        ] {
            for seed in 0..20 {
                let (out, span) = inject_self_correction(src, pattern, seed).unwrap();
                assert_ne!(out, src);
                assert_eq!(
                    resolve_corrections(&out, std::slice::from_ref(&span)),
                    src,
                    "{pattern:?} {seed}"
                );
                assert_ne!(span.wrong_text, span.correct_text);
            }
        }
    }

    #[test]
    fn hybrid_restores_in_either_order() {
        let src = "Hi there, I bought 232 candies for the party. I know 54 are red, and the rest are pink. How many are pink?";
        for seed in 0..50 {
            let p = perturb(src, PerturbKind::Hybrid, DensityPolicy::Moderate, seed).unwrap();
            assert_eq!(p.corrections.len(), 1);
            assert!(!p.fillers.is_empty());
            assert_eq!(p.strip_fillers().resolve_corrections().text, src);
            assert_eq!(p.resolve_corrections().strip_fillers().text, src);
        }
    }

    #[test]
    fn perturbation_is_deterministic() {
        let src = "I have 3 apples, and I buy 2 more. How many now?";
        let a = perturb(src, PerturbKind::Hybrid, DensityPolicy::Moderate, 11).unwrap();
        let b = perturb(src, PerturbKind::Hybrid, DensityPolicy::Moderate, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unicode_offsets_are_chars() {
        let src = "Café au lait costs 4 euros, and tea costs 3.";
        let p = perturb(src, PerturbKind::Hybrid, DensityPolicy::Moderate, 2).unwrap();
        assert_eq!(p.restore(), src);
    }
}
