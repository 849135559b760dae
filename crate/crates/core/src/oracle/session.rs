//! Blocking rendezvous between a clustering run and an external answerer.
//!
//! The run owns a [`SessionOracle`]; each call publishes a [`PendingQuery`]
//! and parks the calling thread until the matching answer or a cancellation
//! arrives. The answering side holds a cloneable [`SessionHandle`]. Answers
//! carry the sequence number of the query they respond to, and a sequence
//! number is accepted at most once.

use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Answer, Oracle, OracleError, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub seq: u64,
    pub a: usize,
    pub b: usize,
    pub oracle_count: usize,
    pub n_clusters: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubmitError {
    #[error("answer for query {got} is stale (pending: {pending:?})")]
    Stale { got: u64, pending: Option<u64> },
    #[error("session is no longer accepting answers")]
    Terminal,
}

#[derive(Debug, Default)]
struct Slot {
    pending: Option<PendingQuery>,
    answer: Option<Answer>,
    next_seq: u64,
    cancelled: bool,
    closed: bool,
}

#[derive(Debug, Default)]
struct Shared {
    slot: Mutex<Slot>,
    changed: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Slot> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Creates a connected oracle/handle pair.
pub fn session_channel() -> (SessionOracle, SessionHandle) {
    let shared = Arc::new(Shared::default());
    (
        SessionOracle {
            shared: Arc::clone(&shared),
        },
        SessionHandle { shared },
    )
}

/// Run-side end. Dropping it marks the session closed.
#[derive(Debug)]
pub struct SessionOracle {
    shared: Arc<Shared>,
}

impl Oracle for SessionOracle {
    fn answer(&mut self, query: &Query) -> Result<Answer, OracleError> {
        let mut slot = self.shared.lock();
        if slot.cancelled {
            return Err(OracleError::Aborted);
        }
        let seq = slot.next_seq;
        slot.next_seq += 1;
        slot.answer = None;
        slot.pending = Some(PendingQuery {
            seq,
            a: query.a,
            b: query.b,
            oracle_count: query.oracle_count,
            n_clusters: query.n_clusters,
        });
        self.shared.changed.notify_all();
        loop {
            // an accepted answer is delivered even if a cancel follows it
            if let Some(answer) = slot.answer.take() {
                return Ok(answer);
            }
            if slot.cancelled {
                slot.pending = None;
                return Err(OracleError::Aborted);
            }
            slot = self
                .shared
                .changed
                .wait(slot)
                .unwrap_or_else(|e| e.into_inner());
        }
    }
}

impl Drop for SessionOracle {
    fn drop(&mut self) {
        let mut slot = self.shared.lock();
        slot.closed = true;
        slot.pending = None;
        self.shared.changed.notify_all();
    }
}

/// Answer-side end.
#[derive(Debug, Clone)]
pub struct SessionHandle {
    shared: Arc<Shared>,
}

impl SessionHandle {
    pub fn pending(&self) -> Option<PendingQuery> {
        self.shared.lock().pending
    }

    pub fn is_cancelled(&self) -> bool {
        self.shared.lock().cancelled
    }

    /// True once the run side has gone away.
    pub fn is_closed(&self) -> bool {
        self.shared.lock().closed
    }

    /// Delivers `answer` to the query numbered `seq`.
    pub fn submit(&self, seq: u64, answer: Answer) -> Result<(), SubmitError> {
        let mut slot = self.shared.lock();
        if slot.cancelled || slot.closed {
            return Err(SubmitError::Terminal);
        }
        match slot.pending {
            Some(p) if p.seq == seq => {
                slot.pending = None;
                slot.answer = Some(answer);
                self.shared.changed.notify_all();
                Ok(())
            }
            other => Err(SubmitError::Stale {
                got: seq,
                pending: other.map(|p| p.seq),
            }),
        }
    }

    /// Aborts the run at its current or next query.
    pub fn cancel(&self) {
        let mut slot = self.shared.lock();
        slot.cancelled = true;
        slot.pending = None;
        self.shared.changed.notify_all();
    }

    /// Blocks until a query is pending or the run side closes, up to
    /// `timeout`. Returns the pending query, if any.
    pub fn wait_pending(&self, timeout: Duration) -> Option<PendingQuery> {
        let deadline = Instant::now() + timeout;
        let mut slot = self.shared.lock();
        loop {
            if slot.pending.is_some() || slot.closed || slot.cancelled {
                return slot.pending;
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return None;
            }
            slot = self
                .shared
                .changed
                .wait_timeout(slot, left)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }
}
