use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use thinkstream::backend::{ChatBackend, ChatConfig};
use thinkstream::dataset::{
    balance_dataset, build_dataset, export_dataset, Annotator, ChatAnnotator, RuleBasedAnnotator,
};
use thinkstream::harness::{self, BenchmarkConfig};
use thinkstream::metrics::Matcher;
use thinkstream::par::Execution;
use thinkstream::trace::corpus::{read_sources, synthesize_corpus, SynthOptions};
use thinkstream::trace::perturb::{DensityPolicy, PerturbKind};
use thinkstream::trace::{save_traces, JitterModel, SpeechRateModel, DEFAULT_CHUNK_MS};

#[derive(Parser)]
#[command(
    name = "thinkstream",
    version,
    about = "Streaming listen-think-speak benchmark engine"
)]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a strategy x corpus benchmark from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Concurrent utterances per cell.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Turn text lines (`text<TAB>answer`) into a trace file.
    SynthTraces {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 150.0)]
        wpm: f64,
        #[arg(long, default_value_t = DEFAULT_CHUNK_MS)]
        chunk_ms: u64,
        /// Probability that a partial hypothesis revises a recent word.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 2)]
        jitter_window: usize,
        #[arg(long, default_value = "none")]
        perturb: PerturbKind,
        /// Extra silence after pause punctuation.
        #[arg(long, default_value_t = 0)]
        pause_ms: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Id prefix; defaults to the input file stem.
        #[arg(long)]
        id_prefix: Option<String>,
    },
    /// Build a balanced trigger-classifier dataset from text lines.
    SynthTriggerData {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Keep every prefix instead of downsampling to 1:1.
        #[arg(long)]
        no_balance: bool,
        /// `rule` or `chat`.
        #[arg(long, default_value = "rule")]
        annotator: String,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        api_key_env: Option<String>,
    },
    /// Recompute result tables from a logs.jsonl file.
    Report {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "numeric")]
        matcher: Matcher,
    },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "utt".into(), |s| s.to_string_lossy().into_owned())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Cmd::Run {
            config,
            out,
            seed,
            workers,
        } => {
            let mut cfg = BenchmarkConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if cli.sequential {
                cfg.execution = Execution::Sequential;
            }
            let result = harness::run_benchmark(&cfg)?;
            harness::write_outputs(&cfg.output_dir, &result.rows, Some(&result.logs))?;
            print!("{}", harness::render_text(&result.rows));
            eprintln!("wrote {}", cfg.output_dir.display());
        }
        Cmd::SynthTraces {
            input,
            output,
            wpm,
            chunk_ms,
            jitter,
            jitter_window,
            perturb,
            pause_ms,
            seed,
            id_prefix,
        } => {
            let reader = BufReader::new(File::open(&input).with_context(|| format!("opening {}", input.display()))?);
            let items = read_sources(reader, &id_prefix.unwrap_or_else(|| stem(&input)))?;
            let rate = SpeechRateModel::new(wpm)
                .with_chunk_ms(chunk_ms)
                .with_pause_ms(pause_ms)
                .with_jitter(JitterModel::new(jitter, jitter_window, seed));
            let opts = SynthOptions {
                rate,
                perturb,
                density: DensityPolicy::Moderate,
                seed,
            };
            let traces = synthesize_corpus(&items, &opts, exec)?;
            save_traces(&traces, &output)?;
            eprintln!("wrote {} traces to {}", traces.len(), output.display());
        }
        Cmd::SynthTriggerData {
            input,
            output,
            seed,
            no_balance,
            annotator,
            endpoint,
            model,
            api_key_env,
        } => {
            let reader = BufReader::new(File::open(&input).with_context(|| format!("opening {}", input.display()))?);
            let sources: Vec<(String, String)> = read_sources(reader, &stem(&input))?
                .into_iter()
                .map(|s| (s.id, s.text))
                .collect();
            let annotator: Box<dyn Annotator> = match annotator.as_str() {
                "rule" => Box::new(RuleBasedAnnotator),
                "chat" => {
                    let (Some(endpoint), Some(model)) = (endpoint, model) else {
                        bail!("--annotator chat needs --endpoint and --model");
                    };
                    let backend = ChatBackend::new(ChatConfig {
                        endpoint,
                        model,
                        api_key_env,
                        timeout_ms: 120_000,
                    })?;
                    Box::new(ChatAnnotator::new(backend))
                }
                other => bail!("unknown annotator `{other}` (expected rule or chat)"),
            };
            let build = build_dataset(&sources, annotator.as_ref(), exec)?;
            let positives = build.samples.iter().filter(|s| s.label == 1).count();
            let samples = if no_balance {
                build.samples
            } else {
                balance_dataset(&build.samples, seed)?
            };
            export_dataset(&samples, &output)?;
            eprintln!(
                "{} sources, {} markers, {} positives, {} drifted; wrote {} samples to {}",
                sources.len(),
                build.marker_count,
                positives,
                build.drifted.len(),
                samples.len(),
                output.display()
            );
        }
        Cmd::Report { logs, out, matcher } => {
            let entries = harness::load_logs(&logs)?;
            let rows = harness::report(&entries, matcher)?;
            harness::write_outputs(&out, &rows, None)?;
            print!("{}", harness::render_text(&rows));
        }
    }
    Ok(())
}
