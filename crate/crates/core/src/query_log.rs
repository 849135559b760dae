//! Ordered record of the pairwise questions asked during a run.
//!
//! On disk a log is newline-delimited JSON, one
//! `{"a": id, "b": id, "answer": "must-link"|"cannot-link"}` record per
//! oracle answer. Entries answered from the constraint closure are not
//! written, since replaying them never reaches an oracle.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::Answer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Oracle,
    Closure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub a: usize,
    pub b: usize,
    pub answer: Answer,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub a: usize,
    pub b: usize,
    pub answer: Answer,
}

#[derive(Debug, Error)]
pub enum LogFileError {
    #[error("query log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("query log line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLog {
    entries: Vec<LogEntry>,
}

impl QueryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: LogEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of questions that actually reached an oracle.
    pub fn oracle_count(&self) -> usize {
        self.oracle_entries().count()
    }

    pub fn oracle_entries(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(|e| e.source == Source::Oracle)
    }

    pub fn write_ndjson(&self, mut out: impl Write) -> Result<(), LogFileError> {
        for e in self.oracle_entries() {
            let record = LogRecord {
                a: e.a,
                b: e.b,
                answer: e.answer,
            };
            serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl From<Vec<LogEntry>> for QueryLog {
    fn from(entries: Vec<LogEntry>) -> Self {
        Self { entries }
    }
}

/// Parses newline-delimited log records; blank lines are skipped.
pub fn read_ndjson(input: impl BufRead) -> Result<Vec<LogRecord>, LogFileError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| LogFileError::Parse {
            line: i + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}
