//! Batch synthesis of benchmark traces from question texts.

use std::io::BufRead;

use super::perturb::{perturb, DensityPolicy, PerturbKind, Perturbed};
use super::{synthesize_trace, SpeechRateModel, UtteranceTrace};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// A source utterance: id, text, reference answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceItem {
    pub id: String,
    pub text: String,
    pub answer: String,
}

/// Parses `text<TAB>answer` lines (answer optional). Blank lines and lines
/// starting with `#` are skipped; ids are `{prefix}-{n:03}` by line order.
pub fn read_sources<R: BufRead>(reader: R, prefix: &str) -> Result<Vec<SourceItem>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (text, answer) = line.split_once('\t').unwrap_or((line, ""));
        out.push(SourceItem {
            id: format!("{prefix}-{:03}", out.len() + 1),
            text: text.trim().to_string(),
            answer: answer.trim().to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub rate: SpeechRateModel,
    pub perturb: PerturbKind,
    pub density: DensityPolicy,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            rate: SpeechRateModel::default(),
            perturb: PerturbKind::None,
            density: DensityPolicy::Moderate,
            seed: 42,
        }
    }
}

/// Perturbs and streams every source. Item `i` uses seed `seed + i` for both
/// perturbation and jitter, so output does not depend on execution mode.
///
/// The perturbation record is kept in metadata: `source_text`, `perturb`,
/// `fillers` and `corrections` (the last two as JSON span lists).
pub fn synthesize_corpus(items: &[SourceItem], opts: &SynthOptions, exec: Execution) -> Result<Vec<UtteranceTrace>> {
    let indexed: Vec<(usize, &SourceItem)> = items.iter().enumerate().collect();
    par::map(exec, &indexed, |&(i, item)| {
        let seed = opts.seed.wrapping_add(i as u64);
        let p: Perturbed = match opts.perturb {
            PerturbKind::None => Perturbed::unchanged(&item.text),
            kind => perturb(&item.text, kind, opts.density, seed)?,
        };
        let mut rate = opts.rate;
        rate.jitter.seed = rate.jitter.seed.wrapping_add(seed);
        let trace = synthesize_trace(&p.text, &rate).map_err(|e| Error::InvalidInput(format!("{}: {e}", item.id)))?;
        Ok(trace
            .with_id(item.id.clone())
            .with_answer(item.answer.clone())
            .with_meta("source_text", item.text.clone())
            .with_meta("perturb", format!("{:?}", opts.perturb).to_lowercase())
            .with_meta("fillers", serde_json::to_string(&p.fillers)?)
            .with_meta("corrections", serde_json::to_string(&p.corrections)?))
    })
    .into_iter()
    .collect()
}
