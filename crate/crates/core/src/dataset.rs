//! Training data for the trigger classifier.
//!
//! Source texts are annotated with `[T]` boundary markers, expanded into
//! every token prefix, labeled positive when the prefix ends right before a
//! marker, and balanced 1:1 by downsampling the majority class.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::ChatBackend;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::vocab;

pub const MARKER: &str = "[T]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedText {
    pub tokens: Vec<String>,
    /// `i` in the set means a marker follows `tokens[i]`.
    pub marker_positions: BTreeSet<usize>,
}

impl MarkedText {
    /// Parses a marked string. Markers may stand alone or be glued to a
    /// token; markers after fillers or before the first token are dropped.
    pub fn parse(marked: &str) -> Self {
        let mut tokens: Vec<String> = Vec::new();
        let mut markers = BTreeSet::new();
        for raw in marked.split_whitespace() {
            let mut rest = raw;
            while let Some(r) = rest.strip_prefix(MARKER) {
                if !tokens.is_empty() {
                    markers.insert(tokens.len() - 1);
                }
                rest = r;
            }
            let trailing = rest.matches(MARKER).count();
            let word = rest.replace(MARKER, "");
            if !word.is_empty() {
                tokens.push(word);
            }
            if trailing > 0 && !tokens.is_empty() {
                markers.insert(tokens.len() - 1);
            }
        }
        let toks: Vec<&str> = tokens.iter().map(String::as_str).collect();
        markers.retain(|&i| !vocab::is_filler_at(&toks, i));
        Self {
            tokens,
            marker_positions: markers,
        }
    }

    pub fn plain_text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(t);
            if self.marker_positions.contains(&i) {
                out.push(' ');
                out.push_str(MARKER);
            }
        }
        out
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let toks: Vec<&str> = self.tokens.iter().map(String::as_str).collect();
        for &i in &self.marker_positions {
            if i >= self.tokens.len() {
                return Err(format!("marker position {i} out of range"));
            }
            if vocab::is_filler_at(&toks, i) {
                return Err(format!("marker after filler token {:?}", self.tokens[i]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixSample {
    #[serde(rename = "text")]
    pub prefix_text: String,
    pub label: u8,
    pub source_id: String,
}

/// Produces a `[T]`-marked rendering of a text.
pub trait Annotator: Send + Sync {
    fn annotate(&self, text: &str) -> Result<String>;
}

static CLAUSE_END: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"[^.…]([.!?;:])["')\]}]*$|^[!?;:]["')\]}]*$"#).expect("valid regex"));
static COMMA_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#",["')\]}]*$"#).expect("valid regex"));
static CONJUNCTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)^["'(\[]*(and|but|or|nor|yet|so)[^\p{L}\p{N}']*$"#).expect("valid regex"));

/// Markers after clause-final punctuation and after a comma that precedes
/// a coordinating conjunction; never after a filler.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedAnnotator;

impl RuleBasedAnnotator {
    pub fn marker_positions(tokens: &[&str]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (i, tok) in tokens.iter().enumerate() {
            if vocab::is_filler_at(tokens, i) {
                continue;
            }
            let clause = CLAUSE_END.is_match(tok);
            let conj = COMMA_END.is_match(tok) && tokens.get(i + 1).is_some_and(|next| CONJUNCTION.is_match(next));
            if clause || conj {
                out.insert(i);
            }
        }
        out
    }
}

impl Annotator for RuleBasedAnnotator {
    fn annotate(&self, text: &str) -> Result<String> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let marked = MarkedText {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            marker_positions: Self::marker_positions(&tokens),
        };
        Ok(marked.render())
    }
}

/// Asks a chat model to insert the markers.
pub struct ChatAnnotator {
    backend: ChatBackend,
}

impl ChatAnnotator {
    pub fn new(backend: ChatBackend) -> Self {
        Self { backend }
    }

    pub fn prompt(text: &str) -> String {
        format!(
            "Insert the token {MARKER} after every word that ends a clause, a constraint or a \
             complete intent, where a listener could start reasoning. Never place it after a \
             hesitation or filler word. Do not change, add or remove any other text. Reply with \
             the marked text only.\n\n{text}"
        )
    }
}

impl Annotator for ChatAnnotator {
    fn annotate(&self, text: &str) -> Result<String> {
        self.backend.complete(&Self::prompt(text), 1024)
    }
}

/// Annotates `text`, rejecting annotator output whose words differ from the
/// input once markers are removed.
pub fn annotate_boundaries(text: &str, annotator: &dyn Annotator) -> Result<MarkedText> {
    if text.trim().is_empty() {
        return Err(Error::InvalidInput("cannot annotate empty text".into()));
    }
    let marked = MarkedText::parse(&annotator.annotate(text)?);
    let expected: Vec<&str> = text.split_whitespace().collect();
    if marked.tokens != expected {
        return Err(Error::AnnotationDrift(format!(
            "expected {} tokens, annotator returned {}",
            expected.len(),
            marked.tokens.len()
        )));
    }
    Ok(marked)
}

/// One sample per prefix length `k = 1..=n`; positive iff a marker follows
/// token `k - 1`.
pub fn expand_prefixes(m: &MarkedText, source_id: &str) -> Vec<PrefixSample> {
    let mut prefix = String::new();
    m.tokens
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            if i > 0 {
                prefix.push(' ');
            }
            prefix.push_str(tok);
            PrefixSample {
                prefix_text: prefix.clone(),
                label: u8::from(m.marker_positions.contains(&i)),
                source_id: source_id.to_string(),
            }
        })
        .collect()
}

/// Keeps the minority class whole, samples an equal-sized subset of the
/// majority class, then shuffles. Deterministic per seed.
pub fn balance_dataset(samples: &[PrefixSample], seed: u64) -> Result<Vec<PrefixSample>> {
    let (pos, neg): (Vec<&PrefixSample>, Vec<&PrefixSample>) = samples.iter().partition(|s| s.label == 1);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::CannotBalance {
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pos.len().min(neg.len());
    let mut pick = |class: &[&PrefixSample]| -> Vec<PrefixSample> {
        if class.len() == n {
            return class.iter().map(|s| (*s).clone()).collect();
        }
        let mut idx = index::sample(&mut rng, class.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| class[i].clone()).collect()
    };
    let mut out = pick(&pos);
    out.extend(pick(&neg));
    out.shuffle(&mut rng);
    Ok(out)
}

pub fn export_dataset(samples: &[PrefixSample], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<PrefixSample>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: PrefixSample = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct DatasetBuild {
    pub samples: Vec<PrefixSample>,
    pub marker_count: usize,
    pub drifted: Vec<String>,
}

/// Annotates and expands every `(id, text)` source. Sources whose
/// annotation drifts are skipped and listed.
pub fn build_dataset(sources: &[(String, String)], annotator: &dyn Annotator, exec: Execution) -> Result<DatasetBuild> {
    let per_source = par::map(exec, sources, |(id, text)| {
        annotate_boundaries(text, annotator).map(|m| (m.marker_positions.len(), expand_prefixes(&m, id)))
    });
    let mut build = DatasetBuild::default();
    for ((id, _), res) in sources.iter().zip(per_source) {
        match res {
            Ok((markers, samples)) => {
                build.marker_count += markers;
                build.samples.extend(samples);
            }
            Err(Error::AnnotationDrift(msg)) => {
                log::warn!("discarding {id}: {msg}");
                build.drifted.push(id.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(build)
}
