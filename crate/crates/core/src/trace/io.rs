//! Line-delimited JSON trace files.
//!
//! One trace per line:
//! `{"id":..,"events":[{"t_ms":..,"text":..,"final":..}],"answer":..,"meta":{..}}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::UtteranceTrace;
use crate::error::{Error, Result};

pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<UtteranceTrace>> {
    let path = path.as_ref();
    read_traces(BufReader::new(File::open(path)?), path)
}

pub fn read_traces<R: BufRead>(reader: R, origin: impl Into<PathBuf>) -> Result<Vec<UtteranceTrace>> {
    let origin = origin.into();
    let mut traces = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let trace: UtteranceTrace = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: origin.clone(),
            line: lineno,
            message: e.to_string(),
        })?;
        trace.validate().map_err(|message| Error::SchemaViolation {
            path: origin.clone(),
            line: lineno,
            message,
        })?;
        traces.push(trace);
    }
    Ok(traces)
}

pub fn save_traces(traces: &[UtteranceTrace], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_traces(traces, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_traces<W: Write>(traces: &[UtteranceTrace], mut out: W) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
