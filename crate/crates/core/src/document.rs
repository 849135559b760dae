//! Result document written after a clustering run.
//!
//! JSON with a `schema_version` field:
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "dataset_fingerprint": "<sha256 hex>",
//!   "config": {"n_super": 25, "seed": 1},
//!   "assignment": [cluster index per instance id],
//!   "super_instances": [[ids], ...],
//!   "medoids": [ids],
//!   "query_log": [{"a": 3, "b": 9, "answer": "must-link", "source": "oracle"}, ...],
//!   "oracle_count": 31,
//!   "n_clusters_found": 3,
//!   "derived_stats": {"queried": 31, "derivable_pairs": 10731},
//!   "wall_time": 0.0123
//! }
//! ```
//!
//! `wall_time` is the only field that varies between identical runs; it is
//! `null` when timing is suppressed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cobra::CobraOutcome;
use crate::constraints::DerivedStats;
use crate::dataset::Dataset;
use crate::query_log::LogEntry;

pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("result document I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("result document JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    Version(u32),
}

/// Parameters that, together with the data and the oracle's answers,
/// determine the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunParams {
    pub n_super: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub dataset_fingerprint: String,
    pub config: RunParams,
    pub assignment: Vec<usize>,
    pub super_instances: Vec<Vec<usize>>,
    pub medoids: Vec<usize>,
    pub query_log: Vec<LogEntry>,
    pub oracle_count: usize,
    pub n_clusters_found: usize,
    pub derived_stats: DerivedStats,
    pub wall_time: Option<f64>,
}

impl ResultDocument {
    pub fn new(data: &Dataset, config: RunParams, outcome: &CobraOutcome, wall_time: Option<f64>) -> Self {
        Self {
            schema_version: RESULT_SCHEMA_VERSION,
            dataset_fingerprint: data.fingerprint(),
            config,
            assignment: outcome.clustering.assignment.clone(),
            super_instances: outcome.super_instances.groups.clone(),
            medoids: outcome.super_instances.medoids.clone(),
            query_log: outcome.log.entries().to_vec(),
            oracle_count: outcome.oracle_count(),
            n_clusters_found: outcome.clustering.n_clusters(),
            derived_stats: outcome.store.derived_stats(),
            wall_time,
        }
    }

    pub fn without_timing(mut self) -> Self {
        self.wall_time = None;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result document always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.schema_version != RESULT_SCHEMA_VERSION {
            return Err(DocumentError::Version(doc.schema_version));
        }
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DocumentError> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DocumentError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
