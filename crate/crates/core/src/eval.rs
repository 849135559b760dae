//! Scoring and the constrained cross-validation protocol.
//!
//! In every fold the whole dataset is clustered, but only pairs of training
//! instances may be asked about and medoids are picked among training
//! instances. Quality is the adjusted Rand index on the held-out fold.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cobra::{run_cobra, CobraError, CobraOutcome};
use crate::dataset::Dataset;
use crate::oracle::{LabelOracle, RestrictedOracle};
use crate::super_instances::id_mask;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("assignments differ in length: {pred} vs {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("instance {0} is not covered by both assignments")]
    MissingInstance(usize),
    #[error("need 2 <= folds <= instances, got {k_folds} folds for {n} instances")]
    InvalidFolds { k_folds: usize, n: usize },
    #[error("dataset has no labels")]
    NoLabels,
    #[error("fold {fold}: {source}")]
    Run {
        fold: usize,
        #[source]
        source: CobraError,
    },
    #[error("fold {fold}: queried pair ({a}, {b}) touches a test instance")]
    ProtocolViolation { fold: usize, a: usize, b: usize },
    #[error(transparent)]
    SuperInstances(#[from] crate::super_instances::SuperInstanceError),
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two labelings, restricted to `subset` when
/// given. Two trivial partitions (no pair together in either, or all pairs
/// together in both) score 1.
pub fn ari(pred: &[usize], truth: &[usize], subset: Option<&[usize]>) -> Result<f64, EvalError> {
    let ids: Vec<usize> = match subset {
        Some(ids) => {
            if let Some(&bad) = ids.iter().find(|&&id| id >= pred.len() || id >= truth.len()) {
                return Err(EvalError::MissingInstance(bad));
            }
            ids.to_vec()
        }
        None => {
            if pred.len() != truth.len() {
                return Err(EvalError::LengthMismatch {
                    pred: pred.len(),
                    truth: truth.len(),
                });
            }
            (0..pred.len()).collect()
        }
    };

    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for &id in &ids {
        *table.entry((pred[id], truth[id])).or_default() += 1;
        *rows.entry(pred[id]).or_default() += 1;
        *cols.entry(truth[id]).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(ids.len() as u64);
    let expected = if total > 0.0 {
        sum_rows * sum_cols / total
    } else {
        0.0
    };
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denominator = max_index - expected;
    if denominator == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denominator)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and deals it into `k_folds` test sets whose
/// sizes differ by at most one (earlier folds take the remainder).
pub fn make_folds(n: usize, k_folds: usize, seed: u64) -> Result<Vec<Fold>, EvalError> {
    if k_folds < 2 || n < k_folds {
        return Err(EvalError::InvalidFolds { k_folds, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k_folds, n % k_folds);
    let mut folds = Vec::with_capacity(k_folds);
    let mut start = 0;
    for f in 0..k_folds {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        train.sort_unstable();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_index: usize,
    pub ari_test: f64,
    pub oracle_count: usize,
    pub n_clusters_found: usize,
    /// Super-instances left after test-only groups were folded in.
    pub n_super_effective: usize,
    /// Seconds; `None` when timing is suppressed.
    pub wall_time: Option<f64>,
}

/// Everything one fold produced.
#[derive(Debug, Clone)]
pub struct FoldRun {
    pub result: FoldResult,
    pub fold: Fold,
    pub outcome: CobraOutcome,
}

/// K-means seed used in fold `fold` of a cross-validation run seeded with
/// `seed`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add(fold as u64)
}

/// Runs the label-oracle protocol on every fold and keeps the full
/// per-fold outcome.
pub fn cross_validate_detailed(
    data: &Dataset,
    n_super: usize,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<FoldRun>, EvalError> {
    let truth = data.label_ids().ok_or(EvalError::NoLabels)?;
    let folds = make_folds(data.len(), k_folds, seed)?;
    let mut runs = Vec::with_capacity(folds.len());
    for (fold_index, fold) in folds.into_iter().enumerate() {
        let started = Instant::now();
        let mask = id_mask(&fold.train, data.len())?;
        let oracle = RestrictedOracle::new(LabelOracle::new(truth.clone()), mask.clone());
        let outcome = run_cobra(data, n_super, oracle, fold_seed(seed, fold_index), Some(&fold.train))
            .map_err(|source| EvalError::Run {
                fold: fold_index,
                source,
            })?;
        if let Some(e) = outcome
            .log
            .oracle_entries()
            .find(|e| !mask[e.a] || !mask[e.b])
        {
            return Err(EvalError::ProtocolViolation {
                fold: fold_index,
                a: e.a,
                b: e.b,
            });
        }
        let ari_test = ari(&outcome.clustering.assignment, &truth, Some(&fold.test))?;
        let result = FoldResult {
            fold_index,
            ari_test,
            oracle_count: outcome.oracle_count(),
            n_clusters_found: outcome.clustering.n_clusters(),
            n_super_effective: outcome.super_instances.len(),
            wall_time: Some(started.elapsed().as_secs_f64()),
        };
        runs.push(FoldRun {
            result,
            fold,
            outcome,
        });
    }
    Ok(runs)
}

pub fn cross_validate(
    data: &Dataset,
    n_super: usize,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<FoldResult>, EvalError> {
    Ok(cross_validate_detailed(data, n_super, k_folds, seed)?
        .into_iter()
        .map(|run| run.result)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_super: usize,
    pub folds: Vec<FoldResult>,
    pub ari_test: MeanStd,
    pub oracle_count: MeanStd,
    pub n_clusters_found: MeanStd,
    pub wall_time: Option<MeanStd>,
}

impl BenchRow {
    pub fn new(n_super: usize, folds: Vec<FoldResult>) -> Self {
        let wall_time = folds
            .iter()
            .map(|f| f.wall_time)
            .collect::<Option<Vec<_>>>()
            .map(MeanStd::of);
        Self {
            n_super,
            ari_test: MeanStd::of(folds.iter().map(|f| f.ari_test)),
            oracle_count: MeanStd::of(folds.iter().map(|f| f.oracle_count as f64)),
            n_clusters_found: MeanStd::of(folds.iter().map(|f| f.n_clusters_found as f64)),
            wall_time,
            folds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub dataset_fingerprint: String,
    pub n_instances: usize,
    pub k_folds: usize,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Drops every timing field so two runs can be compared byte for byte.
    pub fn without_timing(mut self) -> Self {
        for row in &mut self.rows {
            row.wall_time = None;
            row.folds.iter_mut().for_each(|f| f.wall_time = None);
        }
        self
    }

    /// Aligned plain-text summary, one line per super-instance setting.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8}  {:>15}  {:>15}  {:>13}  {:>10}",
            "n_super", "queries", "ARI (test)", "clusters", "time (s)"
        );
        for row in &self.rows {
            let time = row
                .wall_time
                .map(|t| format!("{:.3}", t.mean))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:>8}  {:>7.1} ± {:<5.1}  {:>7.3} ± {:<5.3}  {:>5.1} ± {:<5.1}  {:>10}",
                row.n_super,
                row.oracle_count.mean,
                row.oracle_count.std,
                row.ari_test.mean,
                row.ari_test.std,
                row.n_clusters_found.mean,
                row.n_clusters_found.std,
                time
            );
        }
        out
    }
}

/// Cross-validates at every requested super-instance count.
pub fn bench(
    data: &Dataset,
    n_super_values: &[usize],
    k_folds: usize,
    seed: u64,
) -> Result<BenchReport, EvalError> {
    let rows = n_super_values
        .iter()
        .map(|&n_super| Ok(BenchRow::new(n_super, cross_validate(data, n_super, k_folds, seed)?)))
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset_fingerprint: data.fingerprint(),
        n_instances: data.len(),
        k_folds,
        seed,
        rows,
    })
}
