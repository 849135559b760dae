//! Answer sources for pairwise queries.
//!
//! Oracles only answer. Recording what was learned is the caller's job
//! (see [`crate::constraints::ConstraintStore`]).

mod session;

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

pub use session::{session_channel, PendingQuery, SessionHandle, SessionOracle, SubmitError};

pub use crate::constraints::Answer;
use crate::query_log::{read_ndjson, LogFileError, LogRecord};

/// A question put to an oracle, plus progress information for oracles
/// that display it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub a: usize,
    pub b: usize,
    /// Oracle answers received so far in this run.
    pub oracle_count: usize,
    /// Current number of clusters.
    pub n_clusters: usize,
}

impl Query {
    pub fn pair(a: usize, b: usize) -> Self {
        Self {
            a,
            b,
            oracle_count: 0,
            n_clusters: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("no label for instance {0}")]
    MissingLabel(usize),
    #[error("replay diverged: pair ({a}, {b}) is not in the recorded log")]
    Divergence { a: usize, b: usize },
    #[error("pair ({a}, {b}) touches an instance the oracle may not be asked about")]
    Forbidden { a: usize, b: usize },
    #[error("session cancelled")]
    Aborted,
}

pub trait Oracle {
    fn answer(&mut self, query: &Query) -> Result<Answer, OracleError>;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn answer(&mut self, query: &Query) -> Result<Answer, OracleError> {
        (**self).answer(query)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn answer(&mut self, query: &Query) -> Result<Answer, OracleError> {
        (**self).answer(query)
    }
}

/// Answers from ground-truth class labels: must-link iff the labels match.
#[derive(Debug, Clone)]
pub struct LabelOracle<L> {
    labels: Vec<L>,
}

impl<L: PartialEq> LabelOracle<L> {
    pub fn new(labels: Vec<L>) -> Self {
        Self { labels }
    }
}

impl<L: PartialEq> Oracle for LabelOracle<L> {
    fn answer(&mut self, query: &Query) -> Result<Answer, OracleError> {
        let la = self.labels.get(query.a).ok_or(OracleError::MissingLabel(query.a))?;
        let lb = self.labels.get(query.b).ok_or(OracleError::MissingLabel(query.b))?;
        Ok(if la == lb {
            Answer::MustLink
        } else {
            Answer::CannotLink
        })
    }
}

/// Plays back a recorded log. Asking about a pair the log never saw is a
/// divergence error.
#[derive(Debug, Clone, Default)]
pub struct ReplayOracle {
    answers: HashMap<(usize, usize), Answer>,
}

impl ReplayOracle {
    pub fn new(records: impl IntoIterator<Item = LogRecord>) -> Self {
        let answers = records
            .into_iter()
            .map(|r| ((r.a.min(r.b), r.a.max(r.b)), r.answer))
            .collect();
        Self { answers }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LogFileError> {
        let file = std::fs::File::open(path)?;
        Ok(Self::new(read_ndjson(std::io::BufReader::new(file))?))
    }
}

impl Oracle for ReplayOracle {
    fn answer(&mut self, query: &Query) -> Result<Answer, OracleError> {
        let key = (query.a.min(query.b), query.a.max(query.b));
        self.answers
            .get(&key)
            .copied()
            .ok_or(OracleError::Divergence { a: query.a, b: query.b })
    }
}

/// Refuses any pair involving an instance outside the allowed set, then
/// defers to the wrapped oracle. Used to keep test instances hidden.
#[derive(Debug, Clone)]
pub struct RestrictedOracle<O> {
    inner: O,
    allowed: Vec<bool>,
}

impl<O: Oracle> RestrictedOracle<O> {
    pub fn new(inner: O, allowed: Vec<bool>) -> Self {
        Self { inner, allowed }
    }
}

impl<O: Oracle> Oracle for RestrictedOracle<O> {
    fn answer(&mut self, query: &Query) -> Result<Answer, OracleError> {
        let ok = |id: usize| self.allowed.get(id).copied().unwrap_or(false);
        if !ok(query.a) || !ok(query.b) {
            return Err(OracleError::Forbidden { a: query.a, b: query.b });
        }
        self.inner.answer(query)
    }
}
