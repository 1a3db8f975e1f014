//! Sequential vs parallel execution of the batch workloads.

use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use thinkstream::dataset::{build_dataset, RuleBasedAnnotator};
use thinkstream::harness::{run_benchmark, BenchmarkConfig};
use thinkstream::orchestrator::Strategy;
use thinkstream::par::Execution;
use thinkstream::trace::corpus::{read_sources, synthesize_corpus, SynthOptions};
use thinkstream::trace::perturb::PerturbKind;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn benchmark_cell(c: &mut Criterion) {
    let mut g = c.benchmark_group("benchmark_cell");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = BenchmarkConfig::new(
            vec![fixture("corpus.jsonl")],
            vec![Strategy::Predgen { chunk_chars: 1 }.into(), Strategy::lts().into()],
        );
        cfg.execution = exec;
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| run_benchmark(cfg).unwrap())
        });
    }
    g.finish();
}

fn dataset_build(c: &mut Criterion) {
    let texts = std::fs::read_to_string(fixture("trigger_texts.txt")).unwrap();
    let sources: Vec<(String, String)> = (0..20)
        .flat_map(|rep| {
            texts
                .lines()
                .enumerate()
                .map(move |(i, t)| (format!("{rep}-{i}"), t.to_string()))
        })
        .collect();
    let mut g = c.benchmark_group("dataset_build");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| build_dataset(&sources, &RuleBasedAnnotator, exec).unwrap())
        });
    }
    g.finish();
}

fn trace_synthesis(c: &mut Criterion) {
    let f = std::fs::File::open(fixture("corpus_texts.tsv")).unwrap();
    let items = read_sources(std::io::BufReader::new(f), "fx").unwrap();
    let opts = SynthOptions {
        perturb: PerturbKind::Hybrid,
        ..SynthOptions::default()
    };
    let mut g = c.benchmark_group("trace_synthesis");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| synthesize_corpus(&items, &opts, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, benchmark_cell, dataset_build, trace_synthesis);
criterion_main!(benches);
