//! Per-utterance and aggregate quality, latency and interruption metrics.

use std::str::FromStr;
use std::sync::LazyLock;

use num::{BigInt, BigRational, Zero};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::Role;
use crate::error::{Error, Result};
use crate::orchestrator::UtteranceLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Last number in the response equals the reference as an exact rational.
    #[default]
    Numeric,
    /// Case- and punctuation-folded reference appears in the response.
    NormalizedString,
}

impl FromStr for Matcher {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "numeric" => Ok(Matcher::Numeric),
            "normalized_string" | "normalized-string" | "string" => Ok(Matcher::NormalizedString),
            other => Err(Error::Config(format!("unknown matcher `{other}`"))),
        }
    }
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"-?\d+(?:,\d{3})*(?:\.\d+)?(?:/\d+)?").expect("valid regex"));

fn to_rational(lit: &str) -> Option<BigRational> {
    let lit = lit.replace(',', "");
    let (num, den) = match lit.split_once('/') {
        Some((n, d)) => (n.to_string(), d.to_string()),
        None => (lit, "1".to_string()),
    };
    let (neg, num) = match num.strip_prefix('-') {
        Some(rest) => (true, rest.to_string()),
        None => (false, num),
    };
    let (int_part, frac_part) = num.split_once('.').unwrap_or((&num, ""));
    let digits = format!("{int_part}{frac_part}");
    let mut n = BigInt::parse_bytes(digits.as_bytes(), 10)?;
    if neg {
        n = -n;
    }
    let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
    let d = BigInt::parse_bytes(den.as_bytes(), 10)? * scale;
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

/// Every number literal in `text`, in order. A leading `-` is a sign only
/// when it does not follow a letter or digit.
pub fn numbers(text: &str) -> Vec<BigRational> {
    NUMBER
        .find_iter(text)
        .filter_map(|m| {
            let mut lit = m.as_str();
            if lit.starts_with('-') && text[..m.start()].chars().next_back().is_some_and(char::is_alphanumeric) {
                lit = &lit[1..];
            }
            to_rational(lit)
        })
        .collect()
}

pub fn last_number(text: &str) -> Option<BigRational> {
    numbers(text).pop()
}

fn fold(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn score_accuracy(response: &str, reference: &str, matcher: Matcher) -> bool {
    match matcher {
        Matcher::Numeric => match (last_number(response), last_number(reference)) {
            (Some(got), Some(want)) => got == want,
            _ => false,
        },
        Matcher::NormalizedString => {
            let want = fold(reference);
            !want.is_empty() && format!(" {} ", fold(response)).contains(&format!(" {want} "))
        }
    }
}

/// `100 * nit / nfe`, or 0 when nothing ran.
pub fn interruption_rate(nfe: f64, nit: f64) -> Result<f64> {
    if nit < 0.0 || nfe < 0.0 {
        return Err(Error::Invariant(format!("negative counts: nfe={nfe}, nit={nit}")));
    }
    if nit > nfe {
        return Err(Error::Invariant(format!("nit ({nit}) exceeds nfe ({nfe})")));
    }
    if nfe == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * nit / nfe)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    pub trace_id: String,
    pub correct: bool,
    pub failed: bool,
    pub latency_ms: Option<f64>,
    pub ttfs_ms: Option<f64>,
    pub nfe: usize,
    pub nit: usize,
    pub nfe_thinker: usize,
    pub nit_thinker: usize,
}

impl UtteranceMetrics {
    pub fn rate_pct(&self) -> Result<f64> {
        interruption_rate(self.nfe as f64, self.nit as f64)
    }
}

fn since_eos(t: Option<u64>, eos: u64) -> Option<f64> {
    t.map(|t| t.saturating_sub(eos) as f64)
}

pub fn utterance_metrics(log: &UtteranceLog, reference: &str, matcher: Matcher) -> UtteranceMetrics {
    let failed = log.failed.is_some() || log.accepted_index.is_none();
    let thinkers = log.generations.iter().filter(|g| g.role == Role::Thinker);
    let (timing_lat, timing_ttfs) = if failed {
        (None, None)
    } else {
        (
            since_eos(log.accepted_first_token_ms, log.end_of_speech_ms),
            since_eos(log.accepted_first_sentence_ms, log.end_of_speech_ms),
        )
    };
    UtteranceMetrics {
        trace_id: log.trace_id.clone(),
        correct: !failed && score_accuracy(&log.accepted_response, reference, matcher),
        failed,
        latency_ms: timing_lat,
        ttfs_ms: timing_ttfs,
        nfe: log.nfe(),
        nit: log.nit(),
        nfe_thinker: thinkers.clone().count(),
        nit_thinker: thinkers.filter(|g| g.interrupted).count(),
    }
}

/// Cell-level means over utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub accuracy_pct: f64,
    pub latency_ms: f64,
    pub ttfs_ms: f64,
    pub nfe: f64,
    pub nit: f64,
    /// Rate of the mean counts (equivalently sum nit / sum nfe).
    pub interruption_rate_pct: f64,
    /// Mean of per-utterance rates.
    pub mean_interruption_rate_pct: f64,
    pub nfe_thinker: f64,
    pub nit_thinker: f64,
    pub n_utterances: usize,
    pub n_failed: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Failed utterances count against accuracy but are left out of the timing
/// means; timing means are 0 when every utterance failed.
pub fn aggregate(items: &[UtteranceMetrics]) -> Result<RunMetrics> {
    let n = items.len();
    let nfe = mean(items.iter().map(|m| m.nfe as f64));
    let nit = mean(items.iter().map(|m| m.nit as f64));
    let rates = items
        .iter()
        .map(UtteranceMetrics::rate_pct)
        .collect::<Result<Vec<_>>>()?;
    Ok(RunMetrics {
        accuracy_pct: if n == 0 {
            0.0
        } else {
            100.0 * items.iter().filter(|m| m.correct).count() as f64 / n as f64
        },
        latency_ms: mean(items.iter().filter_map(|m| m.latency_ms)),
        ttfs_ms: mean(items.iter().filter_map(|m| m.ttfs_ms)),
        nfe,
        nit,
        interruption_rate_pct: interruption_rate(nfe, nit)?,
        mean_interruption_rate_pct: mean(rates.into_iter()),
        nfe_thinker: mean(items.iter().map(|m| m.nfe_thinker as f64)),
        nit_thinker: mean(items.iter().map(|m| m.nit_thinker as f64)),
        n_utterances: n,
        n_failed: items.iter().filter(|m| m.failed).count(),
    })
}
