//! Active constraint-based clustering.
//!
//! Data is over-clustered with K-means into super-instances, and their
//! medoids are merged single-linkage style, closest pair first, by asking an
//! oracle whether two medoids belong together. Must-link transitivity and
//! cannot-link entailment keep the number of questions low.
//!
//! ```
//! use cobra_core::{run_cobra, Dataset, LabelOracle};
//!
//! let rows = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0], vec![5.1], vec![5.2]];
//! let labels = vec![0, 0, 0, 1, 1, 1];
//! let data = Dataset::from_rows(rows, None).unwrap();
//! let outcome = run_cobra(&data, 4, LabelOracle::new(labels), 42, None).unwrap();
//! assert_eq!(outcome.clustering.n_clusters(), 2);
//! ```

pub mod baselines;
pub mod cobra;
pub mod constraints;
pub mod dataset;
pub mod document;
pub mod eval;
pub mod oracle;
pub mod query_log;
pub mod super_instances;

pub use baselines::{baseline_closure, baseline_full, BaselineOutcome, PairOrdering};
pub use cobra::{
    closest_rep_pair, cluster_distance, merge_super_instances, query_bounds, run_cobra, Clustering,
    CobraError, CobraOutcome,
};
pub use constraints::{Answer, ConstraintStore, DerivedStats, Relation};
pub use dataset::{load_csv, CsvOptions, Dataset, DatasetError};
pub use document::{ResultDocument, RunParams};
pub use eval::{ari, cross_validate, make_folds, BenchReport, FoldResult};
pub use oracle::{LabelOracle, Oracle, OracleError, Query, ReplayOracle};
pub use query_log::QueryLog;
pub use super_instances::{build_super_instances, kmeans, medoid, SuperInstanceSet};
