//! Canonical dataset files: one JSON object per line.
//!
//! Keys per line: `samples`, `sample_period_s`, `first_path_index`, `C`,
//! `N`, `F` (three values), `A_db`, `pair_id`, and optionally `bias_m` and
//! `label` (one of `LOS`, `DP_NLOS`, `NDP_NLOS`). Real values survive a
//! write/read cycle bit-for-bit.
//!
//! External datasets are brought into this format by implementing
//! [`DatasetAdapter`] against their own documentation and writing the
//! result with [`write_dataset`].

use crate::cir::{ChannelDiagnostics, PropagationClass, RangingRecord, Waveform};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// How to treat malformed lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// Abort on the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and report them.
    Lenient,
}

/// Result of reading a dataset file.
#[derive(Debug)]
pub struct ReadOutcome {
    pub records: Vec<RangingRecord>,
    /// `(line_number, message)` for lines skipped in lenient mode.
    pub skipped: Vec<(usize, String)>,
}

/// Wire format of one dataset line.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    samples: Vec<f64>,
    sample_period_s: f64,
    first_path_index: usize,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "N")]
    n: f64,
    #[serde(rename = "F")]
    f: [f64; 3],
    #[serde(rename = "A_db")]
    a_db: f64,
    pair_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl RecordLine {
    fn from_record(rec: &RangingRecord) -> Self {
        Self {
            samples: rec.waveform.samples().to_vec(),
            sample_period_s: rec.waveform.sample_period_s(),
            first_path_index: rec.waveform.first_path_index(),
            c: rec.diagnostics.cir_power,
            n: rec.diagnostics.preamble_count,
            f: rec.diagnostics.first_path_amps,
            a_db: rec.diagnostics.prf_constant_db,
            pair_id: rec.pair_id.clone(),
            bias_m: rec.bias_m,
            label: rec.label.map(|l| l.label().to_string()),
        }
    }

    fn into_record(self) -> Result<RangingRecord, String> {
        let label = match self.label {
            Some(s) => Some(s.parse::<PropagationClass>().map_err(|e| e.to_string())?),
            None => None,
        };
        let waveform = Waveform::new(self.samples, self.sample_period_s, self.first_path_index)
            .map_err(|e| e.to_string())?;
        let diagnostics = ChannelDiagnostics::new(self.c, self.n, self.f, self.a_db)
            .map_err(|e| e.to_string())?;
        RangingRecord::new(waveform, diagnostics, self.pair_id, self.bias_m, label)
            .map_err(|e| e.to_string())
    }
}

fn parse_line(text: &str) -> Result<RangingRecord, String> {
    let line: RecordLine = serde_json::from_str(text).map_err(|e| e.to_string())?;
    line.into_record()
}

pub fn read_dataset(path: &Path, mode: ReadMode) -> Result<ReadOutcome, DatasetError> {
    let file = fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        match parse_line(&text) {
            Ok(rec) => records.push(rec),
            Err(message) => match mode {
                ReadMode::Strict => {
                    return Err(DatasetError::Line {
                        line: line_no,
                        message,
                    })
                }
                ReadMode::Lenient => skipped.push((line_no, message)),
            },
        }
    }
    Ok(ReadOutcome { records, skipped })
}

pub fn write_dataset(records: &[RangingRecord], path: &Path) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    for rec in records {
        serde_json::to_writer(&mut buf, &RecordLine::from_record(rec))
            .expect("record serialization cannot fail");
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// Write to a sibling temp file and rename into place, so readers never see
/// a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = match path.extension() {
        Some(ext) => path.with_extension(format!("{}.tmp", ext.to_string_lossy())),
        None => path.with_extension("tmp"),
    };
    {
        let mut file = fs::File::create(&tmp).map_err(io_err)?;
        file.write_all(bytes).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// Hook for mapping an external dataset layout into canonical records.
pub trait DatasetAdapter {
    fn read(&self, path: &Path) -> Result<Vec<RangingRecord>, DatasetError>;
}
