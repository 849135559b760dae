//! One interactive run: a worker thread merging super-instances against a
//! session oracle, plus the state the HTTP side reads.

use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Instant;

use cobra_core::oracle::{session_channel, PendingQuery, SessionHandle};
use cobra_core::query_log::LogEntry;
use cobra_core::{build_super_instances, merge_super_instances, Dataset, ResultDocument, RunParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    Created,
    AwaitingAnswer,
    Running,
    Completed,
    Cancelled,
    Failed,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Completed | Self::Cancelled | Self::Failed)
    }
}

#[derive(Debug)]
enum Status {
    Created,
    Running,
    Completed(Box<ResultDocument>),
    Cancelled(Vec<LogEntry>),
    Failed { error: String, log: Vec<LogEntry> },
}

#[derive(Debug, Default)]
struct Shared {
    status: Option<Status>,
    super_instance_of: Option<Vec<usize>>,
    oracle_count: usize,
    n_clusters: usize,
}

/// Consistent view of a session at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: SessionState,
    pub pending: Option<PendingQuery>,
    pub oracle_count: usize,
    pub n_clusters: usize,
    pub error: Option<String>,
    pub log: Option<Vec<LogEntry>>,
}

#[derive(Debug)]
pub struct Session {
    pub params: RunParams,
    handle: SessionHandle,
    shared: Arc<Mutex<Shared>>,
    worker: Mutex<Option<JoinHandle<()>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Session {
    /// Spawns the worker thread. The run starts immediately.
    pub fn start(data: Arc<Dataset>, params: RunParams) -> Self {
        let (oracle, handle) = session_channel();
        let shared = Arc::new(Mutex::new(Shared {
            status: Some(Status::Created),
            ..Shared::default()
        }));
        let worker_shared = Arc::clone(&shared);
        let worker = std::thread::spawn(move || {
            let set_status = |s: Status| lock(&worker_shared).status = Some(s);
            set_status(Status::Running);
            let started = Instant::now();
            let set = match build_super_instances(&data, params.n_super, params.seed, None) {
                Ok(set) => set,
                Err(e) => {
                    set_status(Status::Failed { error: e.to_string(), log: Vec::new() });
                    return;
                }
            };
            {
                let mut s = lock(&worker_shared);
                s.super_instance_of = Some(set.membership(data.len()));
                s.n_clusters = set.len();
            }
            let status = match merge_super_instances(&data, set, oracle) {
                Ok(outcome) => {
                    let elapsed = started.elapsed().as_secs_f64();
                    Status::Completed(Box::new(ResultDocument::new(&data, params, &outcome, Some(elapsed))))
                }
                Err(e) => {
                    let log = e.partial_log().map(|l| l.entries().to_vec()).unwrap_or_default();
                    if matches!(e, cobra_core::CobraError::Oracle { source: cobra_core::OracleError::Aborted, .. }) {
                        Status::Cancelled(log)
                    } else {
                        Status::Failed { error: e.to_string(), log }
                    }
                }
            };
            tracing::debug!(?params, "session run finished");
            set_status(status);
        });
        Self {
            params,
            handle,
            shared,
            worker: Mutex::new(Some(worker)),
        }
    }

    pub fn handle(&self) -> &SessionHandle {
        &self.handle
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut shared = lock(&self.shared);
        // read under the status lock so a finishing worker cannot interleave
        let pending = self.handle.pending();
        if let Some(p) = pending {
            shared.oracle_count = shared.oracle_count.max(p.oracle_count);
            shared.n_clusters = p.n_clusters;
        }
        let mut snap = Snapshot {
            state: SessionState::Running,
            pending: None,
            oracle_count: shared.oracle_count,
            n_clusters: shared.n_clusters,
            error: None,
            log: None,
        };
        match shared.status.as_ref().expect("status is always set") {
            Status::Created => snap.state = SessionState::Created,
            Status::Running if pending.is_some() => {
                snap.state = SessionState::AwaitingAnswer;
                snap.pending = pending;
            }
            Status::Running => {}
            Status::Completed(doc) => {
                snap.state = SessionState::Completed;
                snap.oracle_count = doc.oracle_count;
                snap.n_clusters = doc.n_clusters_found;
                snap.log = Some(doc.query_log.clone());
            }
            Status::Cancelled(log) => {
                snap.state = SessionState::Cancelled;
                snap.log = Some(log.clone());
            }
            Status::Failed { error, log } => {
                snap.state = SessionState::Failed;
                snap.error = Some(error.clone());
                snap.log = Some(log.clone());
            }
        }
        if let Some(log) = &snap.log {
            let answered = log.iter().filter(|e| e.source == cobra_core::query_log::Source::Oracle).count();
            snap.oracle_count = snap.oracle_count.max(answered);
            shared.oracle_count = snap.oracle_count;
        }
        snap
    }

    pub fn result(&self) -> Option<ResultDocument> {
        match lock(&self.shared).status.as_ref() {
            Some(Status::Completed(doc)) => Some((**doc).clone()),
            _ => None,
        }
    }

    /// Super-instance index per instance, once the worker has built them.
    pub fn super_instance_of(&self) -> Option<Vec<usize>> {
        lock(&self.shared).super_instance_of.clone()
    }

    /// Cancels the run and waits for the worker to exit.
    pub fn cancel_and_join(&self) {
        self.handle.cancel();
        self.join();
    }

    /// Blocks until the run has ended.
    pub fn join(&self) {
        if let Some(worker) = lock(&self.worker).take() {
            let _ = worker.join();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.handle.cancel();
    }
}
