//! Result tables: full-precision CSV plus an aligned text rendering.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::RunMetrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub strategy: String,
    pub corpus: String,
    pub n_utterances: usize,
    pub n_failed: usize,
    pub accuracy_pct: f64,
    pub latency_ms: f64,
    pub ttfs_ms: f64,
    pub nfe: f64,
    pub nit: f64,
    pub interruption_rate_pct: f64,
    pub mean_interruption_rate_pct: f64,
    pub nfe_thinker: f64,
    pub nit_thinker: f64,
}

impl ResultRow {
    pub fn new(strategy: impl Into<String>, corpus: impl Into<String>, m: &RunMetrics) -> Self {
        Self {
            strategy: strategy.into(),
            corpus: corpus.into(),
            n_utterances: m.n_utterances,
            n_failed: m.n_failed,
            accuracy_pct: m.accuracy_pct,
            latency_ms: m.latency_ms,
            ttfs_ms: m.ttfs_ms,
            nfe: m.nfe,
            nit: m.nit,
            interruption_rate_pct: m.interruption_rate_pct,
            mean_interruption_rate_pct: m.mean_interruption_rate_pct,
            nfe_thinker: m.nfe_thinker,
            nit_thinker: m.nit_thinker,
        }
    }

    pub fn metrics(&self) -> RunMetrics {
        RunMetrics {
            accuracy_pct: self.accuracy_pct,
            latency_ms: self.latency_ms,
            ttfs_ms: self.ttfs_ms,
            nfe: self.nfe,
            nit: self.nit,
            interruption_rate_pct: self.interruption_rate_pct,
            mean_interruption_rate_pct: self.mean_interruption_rate_pct,
            nfe_thinker: self.nfe_thinker,
            nit_thinker: self.nit_thinker,
            n_utterances: self.n_utterances,
            n_failed: self.n_failed,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

pub fn render_text(rows: &[ResultRow]) -> String {
    let header = [
        "strategy",
        "corpus",
        "n",
        "failed",
        "acc%",
        "lat_ms",
        "ttfs_ms",
        "nfe",
        "nit",
        "rate%",
        "mean_rate%",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        cells.push(vec![
            r.strategy.clone(),
            r.corpus.clone(),
            r.n_utterances.to_string(),
            r.n_failed.to_string(),
            format!("{:.2}", r.accuracy_pct),
            format!("{:.2}", r.latency_ms),
            format!("{:.2}", r.ttfs_ms),
            format!("{:.2}", r.nfe),
            format!("{:.2}", r.nit),
            format!("{:.2}", r.interruption_rate_pct),
            format!("{:.2}", r.mean_interruption_rate_pct),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c < 2 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
