//! Strategy x corpus benchmark runs.

mod table;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::info;
use serde::{Deserialize, Serialize};

use crate::backend::{ChatBackend, ChatConfig, ScriptedBackend, ScriptedProfile};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, utterance_metrics, Matcher};
use crate::orchestrator::{run_simulated, run_wall, Strategy, UtteranceLog};
use crate::par::{self, Execution};
use crate::trace::{load_traces, UtteranceTrace};
use crate::trigger::{HeuristicScorer, RemoteScorer, Scorer};

pub use table::{read_csv, render_text, write_csv, ResultRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    /// Row label; defaults to the strategy's own label.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub strategy: Strategy,
}

impl StrategySpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.strategy.label().to_string())
    }
}

impl From<Strategy> for StrategySpec {
    fn from(strategy: Strategy) -> Self {
        Self { name: None, strategy }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Scripted {
        #[serde(default)]
        profile: ScriptedProfile,
        /// Make the Speaker give each trace's reference answer when its
        /// prompt holds that trace's final transcript.
        #[serde(default = "yes")]
        oracle_answers: bool,
    },
    Live(ChatConfig),
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Scripted {
            profile: ScriptedProfile::default(),
            oracle_answers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerSpec {
    #[default]
    Heuristic,
    Remote {
        url: String,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Simulated,
    Wall,
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub traces: Vec<PathBuf>,
    pub strategies: Vec<StrategySpec>,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default)]
    pub trigger: TriggerSpec,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub matcher: Matcher,
    /// Utterances run concurrently within a cell; `None` uses all cores.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl BenchmarkConfig {
    pub fn new(traces: Vec<PathBuf>, strategies: Vec<StrategySpec>) -> Self {
        Self {
            traces,
            strategies,
            backend: BackendSpec::default(),
            trigger: TriggerSpec::default(),
            clock: ClockMode::default(),
            seed: default_seed(),
            matcher: Matcher::default(),
            workers: None,
            execution: Execution::default(),
            output_dir: default_output_dir(),
        }
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = serde_json::from_reader(BufReader::new(File::open(path)?))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for t in &mut cfg.traces {
            if t.is_relative() {
                *t = base.join(&*t);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.traces.is_empty() {
            return Err(Error::Config("at least one trace file is required".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        for s in &self.strategies {
            s.strategy.validate()?;
        }
        if self.clock == ClockMode::Simulated && matches!(self.backend, BackendSpec::Live(_)) {
            return Err(Error::Config("a live backend needs the wall clock".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(())
    }
}

/// One audited utterance in `logs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub strategy: String,
    pub corpus: String,
    pub trace_id: String,
    pub reference_answer: String,
    pub log: UtteranceLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub rows: Vec<ResultRow>,
    pub logs: Vec<LogEntry>,
}

fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn build_scorer(spec: &TriggerSpec) -> Result<Box<dyn Scorer>> {
    match spec {
        TriggerSpec::Heuristic => Ok(Box::new(HeuristicScorer)),
        TriggerSpec::Remote { url, timeout_ms } => {
            let timeout = Duration::from_millis(timeout_ms.unwrap_or(2000));
            let scorer = RemoteScorer::with_timeout(url.clone(), timeout)?;
            scorer.health().map_err(|e| Error::Unreachable {
                component: "trigger",
                message: format!("{url}: {e}"),
            })?;
            Ok(Box::new(scorer))
        }
    }
}

enum Engine {
    Scripted(ScriptedBackend),
    Live(ChatBackend),
}

fn scripted_for(profile: &ScriptedProfile, oracle: bool, seed: u64, traces: &[UtteranceTrace]) -> ScriptedBackend {
    let mut profile = profile.clone();
    profile.seed = seed;
    if oracle {
        for t in traces.iter().filter(|t| !t.reference_answer.is_empty()) {
            profile
                .responder
                .answers
                .insert(t.final_text().to_string(), t.reference_answer.clone());
        }
    }
    ScriptedBackend::new(profile)
}

/// Runs every (strategy, corpus) cell. Rows are ordered corpus-major,
/// following the config's strategy order within a corpus.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let scorer = build_scorer(&cfg.trigger)?;
    let live = match &cfg.backend {
        BackendSpec::Live(chat) => {
            let b = ChatBackend::new(chat.clone())?;
            b.probe().map_err(|e| Error::Unreachable {
                component: "backend",
                message: format!("{}: {e}", chat.endpoint),
            })?;
            Some(b)
        }
        BackendSpec::Scripted { .. } => None,
    };

    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for path in &cfg.traces {
        let corpus = corpus_name(path);
        let traces = load_traces(path)?;
        let engine = match (&cfg.backend, &live) {
            (_, Some(b)) => Engine::Live(b.clone()),
            (
                BackendSpec::Scripted {
                    profile,
                    oracle_answers,
                },
                None,
            ) => Engine::Scripted(scripted_for(profile, *oracle_answers, cfg.seed, &traces)),
            (BackendSpec::Live(_), None) => unreachable!("live backend is built above"),
        };
        for spec in &cfg.strategies {
            let label = spec.label();
            let scorer = scorer.as_ref();
            let run = |t: &UtteranceTrace| match (&engine, cfg.clock) {
                (Engine::Scripted(b), ClockMode::Simulated) => run_simulated(t, &spec.strategy, scorer, b),
                (Engine::Scripted(b), ClockMode::Wall) => run_wall(t, &spec.strategy, scorer, b),
                (Engine::Live(b), _) => run_wall(t, &spec.strategy, scorer, b),
            };
            let cell: Vec<UtteranceLog> = par::map_bounded(cfg.execution, cfg.workers, &traces, run)
                .into_iter()
                .collect::<Result<_>>()?;
            let per: Vec<_> = cell
                .iter()
                .zip(&traces)
                .map(|(log, t)| utterance_metrics(log, &t.reference_answer, cfg.matcher))
                .collect();
            let metrics = aggregate(&per)?;
            info!(
                "{label} on {corpus}: nfe {:.2}, rate {:.2}%",
                metrics.nfe, metrics.interruption_rate_pct
            );
            rows.push(ResultRow::new(label.clone(), corpus.clone(), &metrics));
            logs.extend(cell.into_iter().zip(&traces).map(|(log, t)| LogEntry {
                strategy: label.clone(),
                corpus: corpus.clone(),
                trace_id: t.id.clone(),
                reference_answer: t.reference_answer.clone(),
                log,
            }));
        }
    }
    Ok(BenchmarkResult { rows, logs })
}

/// Writes `results.csv`, `results.txt` and (if given) `logs.jsonl`.
pub fn write_outputs(dir: impl AsRef<Path>, rows: &[ResultRow], logs: Option<&[LogEntry]>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv(rows, BufWriter::new(File::create(dir.join("results.csv"))?))?;
    fs::write(dir.join("results.txt"), render_text(rows))?;
    if let Some(logs) = logs {
        let mut out = BufWriter::new(File::create(dir.join("logs.jsonl"))?);
        for entry in logs {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    Ok(())
}

pub fn load_logs(path: impl AsRef<Path>) -> Result<Vec<LogEntry>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Recomputes the result table from audited logs, grouping by
/// (strategy, corpus) in first-seen order.
pub fn report(logs: &[LogEntry], matcher: Matcher) -> Result<Vec<ResultRow>> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<_>> = BTreeMap::new();
    for e in logs {
        let key = (e.strategy.clone(), e.corpus.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups
            .entry(key)
            .or_default()
            .push(utterance_metrics(&e.log, &e.reference_answer, matcher));
    }
    order
        .into_iter()
        .map(|key| {
            let m = aggregate(&groups[&key])?;
            Ok(ResultRow::new(key.0, key.1, &m))
        })
        .collect()
}
