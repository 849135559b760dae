//! Instance-level querying strategies without super-instances.
//!
//! [`baseline_full`] asks about every pair. [`baseline_closure`] walks the
//! pairs in a chosen order and only asks when the constraint store cannot
//! already derive the answer. Both produce the must-link components as the
//! clustering, which is exact under a consistent oracle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintStore};
use crate::dataset::Dataset;
use crate::oracle::{Oracle, OracleError, Query};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Contradiction(#[from] ConstraintError),
}

/// Order in which [`baseline_closure`] visits pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOrdering {
    /// Uniform shuffle of all pairs.
    Random { seed: u64 },
    /// Ascending Euclidean distance, ties by id pair.
    ClosestFirst,
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    /// Must-link component of every instance.
    pub assignment: Vec<usize>,
    pub n_clusters: usize,
    pub oracle_count: usize,
    pub store: ConstraintStore,
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect()
}

fn finish(n: usize, store: ConstraintStore, oracle_count: usize) -> BaselineOutcome {
    let assignment = store.component_labels(n);
    let n_clusters = assignment.iter().max().map_or(0, |m| m + 1);
    BaselineOutcome {
        assignment,
        n_clusters,
        oracle_count,
        store,
    }
}

/// Asks the oracle about all `C(n, 2)` pairs.
pub fn baseline_full<O: Oracle>(data: &Dataset, mut oracle: O) -> Result<BaselineOutcome, BaselineError> {
    let n = data.len();
    let mut store = ConstraintStore::with_capacity(n);
    let mut count = 0;
    for (a, b) in all_pairs(n) {
        let answer = oracle.answer(&Query {
            a,
            b,
            oracle_count: count,
            n_clusters: 0,
        })?;
        count += 1;
        store.add(a, b, answer)?;
    }
    Ok(finish(n, store, count))
}

/// Visits every pair in `ordering`, asking only about pairs whose relation
/// cannot be derived from earlier answers.
pub fn baseline_closure<O: Oracle>(
    data: &Dataset,
    mut oracle: O,
    ordering: PairOrdering,
) -> Result<BaselineOutcome, BaselineError> {
    let n = data.len();
    let mut pairs = all_pairs(n);
    match ordering {
        PairOrdering::Random { seed } => pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        PairOrdering::ClosestFirst => {
            let mut keyed: Vec<(f64, (usize, usize))> =
                pairs.iter().map(|&(a, b)| (data.distance(a, b), (a, b))).collect();
            keyed.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            pairs = keyed.into_iter().map(|(_, p)| p).collect();
        }
    }

    let mut store = ConstraintStore::with_capacity(n);
    let mut count = 0;
    for (a, b) in pairs {
        if store.relation(a, b).known().is_some() {
            continue;
        }
        let answer = oracle.answer(&Query {
            a,
            b,
            oracle_count: count,
            n_clusters: 0,
        })?;
        count += 1;
        store.add(a, b, answer)?;
    }
    Ok(finish(n, store, count))
}
