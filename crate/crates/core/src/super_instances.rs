//! Over-clustering into super-instances.
//!
//! K-means (k-means++ seeding, Lloyd iterations) splits the data into many
//! small groups. Each group is represented by its medoid, and only medoids
//! are ever shown to an oracle. When a training mask is given, medoids are
//! chosen among training instances and groups without any training
//! instance are folded into the nearest group that has one.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{euclidean, Dataset};

pub const MAX_KMEANS_ITERATIONS: usize = 300;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuperInstanceError {
    #[error("k must be in 1..={n}, got {k}")]
    InvalidK { k: usize, n: usize },
    #[error("no eligible instance to act as medoid")]
    NoEligibleMember,
    #[error("training mask selects no instances")]
    NoTrainingInstances,
    #[error("instance id {0} is out of range")]
    UnknownInstance(usize),
}

/// Output of [`kmeans`]: groups of instance ids and their centroids.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub groups: Vec<Vec<usize>>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Lloyd's K-means seeded with k-means++.
///
/// Stops when no assignment changes or after [`MAX_KMEANS_ITERATIONS`]
/// rounds. A cluster that goes empty receives the point currently farthest
/// from its own centroid, so every returned group is non-empty. Assignment
/// ties go to the lower centroid index. Groups list ids in ascending order.
pub fn kmeans(data: &Dataset, k: usize, seed: u64) -> Result<KMeansResult, SuperInstanceError> {
    let n = data.len();
    if k == 0 || k > n {
        return Err(SuperInstanceError::InvalidK { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;

    while iterations < MAX_KMEANS_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        for (id, slot) in assignment.iter_mut().enumerate() {
            let nearest = nearest_centroid(data.row(id), &centroids).0;
            if *slot != nearest {
                *slot = nearest;
                changed = true;
            }
        }
        changed |= repair_empty(data, &mut assignment, &mut centroids);
        if !changed {
            break;
        }
        centroids = mean_centroids(data, &assignment, k);
    }

    let mut groups = vec![Vec::new(); k];
    for (id, &c) in assignment.iter().enumerate() {
        groups[c].push(id);
    }
    Ok(KMeansResult {
        groups,
        centroids,
        iterations,
    })
}

fn plus_plus_init(data: &Dataset, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![data.row(first).to_vec()];
    let mut weights: Vec<f64> = data
        .rows()
        .map(|row| squared(row, &centroids[0]))
        .collect();

    while centroids.len() < k {
        let next = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(rng),
            // every remaining point coincides with a centroid
            Err(_) => (0..n).find(|&i| !chosen[i]).unwrap_or(0),
        };
        chosen[next] = true;
        let centre = data.row(next).to_vec();
        for (w, row) in weights.iter_mut().zip(data.rows()) {
            *w = w.min(squared(row, &centre));
        }
        centroids.push(centre);
    }
    centroids
}

fn squared(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.iter().enumerate() {
        let d = squared(x, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Moves the farthest-from-centroid point into each empty cluster.
fn repair_empty(data: &Dataset, assignment: &mut [usize], centroids: &mut [Vec<f64>]) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    let mut repaired = false;
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..assignment.len())
            .filter(|&id| sizes[assignment[id]] > 1)
            .map(|id| (id, squared(data.row(id), &centroids[assignment[id]])))
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((id, _)) = donor else { break };
        sizes[assignment[id]] -= 1;
        assignment[id] = empty;
        sizes[empty] += 1;
        centroids[empty] = data.row(id).to_vec();
        repaired = true;
    }
    repaired
}

fn mean_centroids(data: &Dataset, assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; data.dim()]; k];
    let mut counts = vec![0usize; k];
    for (id, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(data.row(id)) {
            *s += v;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            sum.iter_mut().for_each(|s| *s /= count as f64);
        }
    }
    sums
}

/// Member of `group` minimising the summed distance to every member of
/// `group`. Candidates are limited to `restrict_to` when given; ties go to
/// the smallest id.
pub fn medoid(
    group: &[usize],
    data: &Dataset,
    restrict_to: Option<&[bool]>,
) -> Result<usize, SuperInstanceError> {
    if let Some(&bad) = group.iter().find(|&&id| id >= data.len()) {
        return Err(SuperInstanceError::UnknownInstance(bad));
    }
    let mut candidates: Vec<usize> = group
        .iter()
        .copied()
        .filter(|&id| restrict_to.is_none_or(|mask| mask.get(id).copied().unwrap_or(false)))
        .collect();
    candidates.sort_unstable();
    let mut best: Option<(usize, f64)> = None;
    for &c in &candidates {
        let total: f64 = group.iter().map(|&m| data.distance(c, m)).sum();
        if best.is_none_or(|(_, b)| total < b) {
            best = Some((c, total));
        }
    }
    best.map(|(id, _)| id).ok_or(SuperInstanceError::NoEligibleMember)
}

/// Groups of instances treated as single units during merging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperInstanceSet {
    pub groups: Vec<Vec<usize>>,
    pub medoids: Vec<usize>,
}

impl SuperInstanceSet {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Super-instance index of every instance.
    pub fn membership(&self, n_instances: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n_instances];
        for (s, group) in self.groups.iter().enumerate() {
            for &id in group {
                out[id] = s;
            }
        }
        out
    }
}

/// Converts an id list into a dense membership mask.
pub fn id_mask(ids: &[usize], n: usize) -> Result<Vec<bool>, SuperInstanceError> {
    let mut mask = vec![false; n];
    for &id in ids {
        *mask
            .get_mut(id)
            .ok_or(SuperInstanceError::UnknownInstance(id))? = true;
    }
    Ok(mask)
}

/// Runs K-means with `n_super` clusters and picks medoids.
///
/// With a training set, every group lacking training instances is merged
/// into the train-containing group whose centroid is nearest to its own,
/// so the result can hold fewer than `n_super` groups.
pub fn build_super_instances(
    data: &Dataset,
    n_super: usize,
    seed: u64,
    train: Option<&[usize]>,
) -> Result<SuperInstanceSet, SuperInstanceError> {
    let mask = train.map(|ids| id_mask(ids, data.len())).transpose()?;
    if let Some(mask) = &mask {
        if !mask.iter().any(|&t| t) {
            return Err(SuperInstanceError::NoTrainingInstances);
        }
    }
    let KMeansResult {
        mut groups,
        centroids,
        ..
    } = kmeans(data, n_super, seed)?;

    if let Some(mask) = &mask {
        let has_train: Vec<bool> = groups
            .iter()
            .map(|g| g.iter().any(|&id| mask[id]))
            .collect();
        let targets: Vec<usize> = (0..groups.len()).filter(|&g| has_train[g]).collect();
        for g in 0..groups.len() {
            if has_train[g] {
                continue;
            }
            let nearest = targets
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    euclidean(&centroids[g], &centroids[x])
                        .total_cmp(&euclidean(&centroids[g], &centroids[y]))
                })
                .ok_or(SuperInstanceError::NoTrainingInstances)?;
            let moved = std::mem::take(&mut groups[g]);
            groups[nearest].extend(moved);
        }
        groups.retain(|g| !g.is_empty());
        groups.iter_mut().for_each(|g| g.sort_unstable());
    }

    let medoids = groups
        .iter()
        .map(|g| medoid(g, data, mask.as_deref()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SuperInstanceSet { groups, medoids })
}
