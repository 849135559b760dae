//! Merging super-instances into clusters with pairwise queries.
//!
//! Every super-instance starts as its own cluster. Each pass sorts the
//! cluster pairs not yet separated by a cannot-link by single-linkage
//! distance between their medoids, then walks that list asking about the
//! closest medoid pair of each. A must-link merges the two clusters and
//! starts a new pass; a cannot-link is recorded and the walk continues. The
//! run ends after a pass with no merge.
//!
//! Before a question goes to the oracle the constraint store is consulted;
//! answers it can already derive are logged with [`Source::Closure`] and do
//! not count as oracle queries.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{Answer, ConstraintError, ConstraintStore, Relation};
use crate::dataset::Dataset;
use crate::oracle::{Oracle, OracleError, Query};
use crate::query_log::{LogEntry, QueryLog, Source};
use crate::super_instances::{build_super_instances, SuperInstanceError, SuperInstanceSet};

#[derive(Debug, Error)]
pub enum CobraError {
    #[error(transparent)]
    SuperInstances(#[from] SuperInstanceError),
    #[error("cluster has no representatives")]
    EmptyCluster,
    #[error("oracle failed after {} answers: {source}", partial_log.oracle_count())]
    Oracle {
        #[source]
        source: OracleError,
        partial_log: QueryLog,
    },
    #[error("oracle contradicted itself after {} answers: {source}", partial_log.oracle_count())]
    Contradiction {
        #[source]
        source: ConstraintError,
        partial_log: QueryLog,
    },
}

impl CobraError {
    /// Log of the queries answered before the failure, if the run got that
    /// far.
    pub fn partial_log(&self) -> Option<&QueryLog> {
        match self {
            CobraError::Oracle { partial_log, .. } | CobraError::Contradiction { partial_log, .. } => {
                Some(partial_log)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("query bounds need 1 <= n_clusters ({n_clusters}) <= n_super ({n_super})")]
pub struct BoundsError {
    pub n_super: usize,
    pub n_clusters: usize,
}

/// Partition of super-instances into clusters, with the induced
/// instance-level assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    /// Super-instance indices per cluster, each ascending; clusters ordered
    /// by their smallest member.
    pub clusters: Vec<Vec<usize>>,
    /// Cluster index of every instance.
    pub assignment: Vec<usize>,
}

impl Clustering {
    fn new(clusters: Vec<Vec<usize>>, super_instances: &SuperInstanceSet, n: usize) -> Self {
        let mut assignment = vec![0; n];
        for (c, members) in clusters.iter().enumerate() {
            for &s in members {
                for &id in &super_instances.groups[s] {
                    assignment[id] = c;
                }
            }
        }
        Self {
            clusters,
            assignment,
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }
}

#[derive(Debug, Clone)]
pub struct CobraOutcome {
    pub super_instances: SuperInstanceSet,
    pub clustering: Clustering,
    pub log: QueryLog,
    pub store: ConstraintStore,
}

impl CobraOutcome {
    pub fn oracle_count(&self) -> usize {
        self.log.oracle_count()
    }
}

/// Closest pair `(x, y)` with `x` from `c1` and `y` from `c2` under `dist`.
/// Equal distances resolve to the lexicographically smallest pair.
pub(crate) fn closest_pair_by(
    c1: &[usize],
    c2: &[usize],
    mut dist: impl FnMut(usize, usize) -> f64,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for &x in c1 {
        for &y in c2 {
            let d = dist(x, y);
            let better = match best {
                None => true,
                Some((bx, by, bd)) => match d.total_cmp(&bd) {
                    Ordering::Less => true,
                    Ordering::Equal => (x, y) < (bx, by),
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((x, y, d));
            }
        }
    }
    best
}

/// Representative pair realising the single-linkage distance between two
/// clusters of instance ids.
pub fn closest_rep_pair(c1: &[usize], c2: &[usize], data: &Dataset) -> Result<(usize, usize), CobraError> {
    closest_pair_by(c1, c2, |x, y| data.distance(x, y))
        .map(|(x, y, _)| (x, y))
        .ok_or(CobraError::EmptyCluster)
}

/// Single-linkage distance: the smallest distance between a representative
/// of `c1` and one of `c2`.
pub fn cluster_distance(c1: &[usize], c2: &[usize], data: &Dataset) -> Result<f64, CobraError> {
    closest_pair_by(c1, c2, |x, y| data.distance(x, y))
        .map(|(_, _, d)| d)
        .ok_or(CobraError::EmptyCluster)
}

/// `(n_super - n_clusters + C(n_clusters, 2), C(n_super, 2))`: the query
/// count under pure super-instances with must-link pairs closer than
/// cannot-link pairs, and the count when every pair has to be asked.
pub fn query_bounds(n_super: usize, n_clusters: usize) -> Result<(u64, u64), BoundsError> {
    if n_clusters == 0 || n_clusters > n_super {
        return Err(BoundsError {
            n_super,
            n_clusters,
        });
    }
    let choose2 = |n: usize| (n as u64) * (n as u64).saturating_sub(1) / 2;
    Ok((
        (n_super - n_clusters) as u64 + choose2(n_clusters),
        choose2(n_super),
    ))
}

struct Candidate {
    distance: f64,
    pair: (usize, usize),
    left: usize,
    right: usize,
}

/// Merges the given super-instances by querying `oracle` about medoid
/// pairs.
pub fn merge_super_instances<O: Oracle>(
    data: &Dataset,
    super_instances: SuperInstanceSet,
    mut oracle: O,
) -> Result<CobraOutcome, CobraError> {
    let medoids = &super_instances.medoids;
    let k = medoids.len();
    let mut between = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d = data.distance(medoids[i], medoids[j]);
            between[i * k + j] = d;
            between[j * k + i] = d;
        }
    }

    let mut slot = vec![usize::MAX; data.len()];
    for (s, &m) in medoids.iter().enumerate() {
        slot[m] = s;
    }
    let (mut reps_left, mut reps_right) = (Vec::new(), Vec::new());

    let mut clusters: Vec<Vec<usize>> = (0..k).map(|s| vec![s]).collect();
    let mut store = ConstraintStore::with_capacity(data.len());
    let mut log = QueryLog::new();

    loop {
        let mut candidates = Vec::new();
        for left in 0..clusters.len() {
            for right in (left + 1)..clusters.len() {
                let (ml, mr) = (medoids[clusters[left][0]], medoids[clusters[right][0]]);
                if store.relation(ml, mr) == Relation::CannotLink {
                    continue;
                }
                reps_left.clear();
                reps_left.extend(clusters[left].iter().map(|&s| medoids[s]));
                reps_right.clear();
                reps_right.extend(clusters[right].iter().map(|&s| medoids[s]));
                let (a, b, distance) = closest_pair_by(&reps_left, &reps_right, |x, y| {
                    between[slot[x] * k + slot[y]]
                })
                .ok_or(CobraError::EmptyCluster)?;
                candidates.push(Candidate {
                    distance,
                    pair: (a.min(b), a.max(b)),
                    left,
                    right,
                });
            }
        }
        candidates.sort_by(|p, q| p.distance.total_cmp(&q.distance).then(p.pair.cmp(&q.pair)));

        let mut merge = None;
        for cand in &candidates {
            let (a, b) = cand.pair;
            let answer = match store.relation(a, b).known() {
                Some(answer) => {
                    log.push(LogEntry { a, b, answer, source: Source::Closure });
                    answer
                }
                None => {
                    let query = Query {
                        a,
                        b,
                        oracle_count: log.oracle_count(),
                        n_clusters: clusters.len(),
                    };
                    let answer = match oracle.answer(&query) {
                        Ok(answer) => answer,
                        Err(source) => {
                            return Err(CobraError::Oracle {
                                source,
                                partial_log: log,
                            })
                        }
                    };
                    log.push(LogEntry { a, b, answer, source: Source::Oracle });
                    if let Err(source) = store.add(a, b, answer) {
                        return Err(CobraError::Contradiction {
                            source,
                            partial_log: log,
                        });
                    }
                    answer
                }
            };
            if answer == Answer::MustLink {
                merge = Some((cand.left, cand.right));
                break;
            }
        }

        let Some((left, right)) = merge else { break };
        let absorbed = clusters.remove(right);
        clusters[left].extend(absorbed);
        clusters[left].sort_unstable();
    }

    let clustering = Clustering::new(clusters, &super_instances, data.len());
    Ok(CobraOutcome {
        super_instances,
        clustering,
        log,
        store,
    })
}

/// Builds `n_super` super-instances and merges them. With `train`, medoids
/// are training instances only, so the oracle never sees anything else.
pub fn run_cobra<O: Oracle>(
    data: &Dataset,
    n_super: usize,
    oracle: O,
    seed: u64,
    train: Option<&[usize]>,
) -> Result<CobraOutcome, CobraError> {
    let super_instances = build_super_instances(data, n_super, seed, train)?;
    merge_super_instances(data, super_instances, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::LabelOracle;

    fn points(rows: &[[f64; 2]]) -> Dataset {
        Dataset::from_rows(rows.iter().map(|r| r.to_vec()).collect(), None).unwrap()
    }

    fn singletons(n: usize) -> SuperInstanceSet {
        SuperInstanceSet {
            groups: (0..n).map(|i| vec![i]).collect(),
            medoids: (0..n).collect(),
        }
    }

    #[test]
    fn cluster_distance_examples() {
        let d = points(&[[0.0, 0.0], [3.0, 4.0], [1.0, 0.0], [3.0, 0.0]]);
        assert_eq!(cluster_distance(&[0], &[1], &d).unwrap(), 5.0);
        assert_eq!(cluster_distance(&[0, 2], &[3], &d).unwrap(), 2.0);
        assert_eq!(
            cluster_distance(&[0, 2], &[1, 3], &d).unwrap(),
            cluster_distance(&[1, 3], &[0, 2], &d).unwrap()
        );
        assert!(matches!(cluster_distance(&[], &[1], &d), Err(CobraError::EmptyCluster)));
    }

    #[test]
    fn closest_rep_pair_examples() {
        let d = points(&[[0.0, 0.0], [5.0, 0.0], [1.0, 0.0], [9.0, 9.0]]);
        assert_eq!(closest_rep_pair(&[3], &[1], &d).unwrap(), (3, 1));
        assert_eq!(closest_rep_pair(&[0, 1], &[2], &d).unwrap(), (0, 2));
        // 1 and 3 both sit at distance 1 from 2
        let tied = points(&[[9.0, 9.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(closest_rep_pair(&[1, 3], &[2], &tied).unwrap(), (1, 2));
        assert_eq!(closest_rep_pair(&[3, 1], &[2], &tied).unwrap(), (1, 2));
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(query_bounds(25, 3), Ok((25, 300)));
        assert_eq!(query_bounds(2, 2), Ok((1, 1)));
        assert_eq!(query_bounds(50, 1), Ok((49, 1225)));
        assert!(query_bounds(3, 4).is_err());
        assert!(query_bounds(3, 0).is_err());
    }

    #[test]
    fn two_super_instances_cannot_link() {
        let d = points(&[[0.0, 0.0], [1.0, 1.0]]);
        let out = merge_super_instances(&d, singletons(2), LabelOracle::new(vec![0, 1])).unwrap();
        assert_eq!(out.clustering.n_clusters(), 2);
        assert_eq!(out.oracle_count(), 1);
    }

    #[test]
    fn four_same_label_super_instances_need_three_queries() {
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [6.0, 0.0]]);
        let out = merge_super_instances(&d, singletons(4), LabelOracle::new(vec![7; 4])).unwrap();
        assert_eq!(out.clustering.n_clusters(), 1);
        assert_eq!(out.oracle_count(), 3);
        assert_eq!(out.oracle_count() as u64, query_bounds(4, 1).unwrap().0);
        assert_eq!(out.clustering.assignment, vec![0; 4]);
    }

    #[test]
    fn merge_order_follows_single_linkage() {
        // two label groups {0,1,2} and {3,4}; ML pairs closer than CL pairs
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [10.0, 0.0], [11.5, 0.0]]);
        let out =
            merge_super_instances(&d, singletons(5), LabelOracle::new(vec![0, 0, 0, 1, 1])).unwrap();
        let asked: Vec<(usize, usize, Answer)> =
            out.log.entries().iter().map(|e| (e.a, e.b, e.answer)).collect();
        assert_eq!(
            asked,
            vec![
                (0, 1, Answer::MustLink),
                (1, 2, Answer::MustLink),
                (3, 4, Answer::MustLink),
                (2, 3, Answer::CannotLink),
            ]
        );
        assert_eq!(out.clustering.clusters, vec![vec![0, 1, 2], vec![3, 4]]);
        assert_eq!(out.oracle_count() as u64, query_bounds(5, 2).unwrap().0);
    }

    #[test]
    fn oracle_failure_keeps_partial_log() {
        struct FailSecond(usize);
        impl Oracle for FailSecond {
            fn answer(&mut self, _: &Query) -> Result<Answer, OracleError> {
                self.0 += 1;
                if self.0 > 1 {
                    Err(OracleError::Aborted)
                } else {
                    Ok(Answer::CannotLink)
                }
            }
        }
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let err = merge_super_instances(&d, singletons(3), FailSecond(0)).unwrap_err();
        assert!(matches!(err, CobraError::Oracle { source: OracleError::Aborted, .. }));
        assert_eq!(err.partial_log().unwrap().oracle_count(), 1);
    }

    #[test]
    fn merged_cluster_is_queried_through_its_closest_member() {
        struct Liar;
        impl Oracle for Liar {
            fn answer(&mut self, q: &Query) -> Result<Answer, OracleError> {
                Ok(if (q.a, q.b) == (0, 2) { Answer::CannotLink } else { Answer::MustLink })
            }
        }
        let d = points(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        // 0-1 merge, then the closest pair between {0,1} and {2} is (1,2): ML
        let out = merge_super_instances(&d, singletons(3), Liar).unwrap();
        assert_eq!(out.clustering.n_clusters(), 1);
        assert!(out.log.entries().iter().all(|e| e.source == Source::Oracle));
    }
}
