//! Feature data: CSV ingestion, exact-duplicate removal, min-max scaling and
//! Euclidean distance.
//!
//! A [`Dataset`] is immutable once built. Every transformation returns a new
//! value, so a dataset can be shared freely between concurrent readers.

use std::collections::HashMap;
use std::collections::HashSet;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: {value:?} is not a finite number")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("label column {0:?} is not in the header")]
    MissingLabelColumn(String),
    #[error("row {row} has {found} fields, header has {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("dataset has no rows")]
    Empty,
    #[error("{labels} labels for {instances} instances")]
    LabelCount { labels: usize, instances: usize },
    #[error("vector lengths differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Options for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Name of the column holding ground-truth class labels, if any.
    pub label_column: Option<String>,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: None,
            delimiter: b',',
        }
    }
}

/// Instances to be clustered, stored row-major.
///
/// Instance ids are the row indices `0..len()`. `source_rows` maps each id
/// back to its 0-based data row in the file it was loaded from, which stays
/// meaningful after [`Dataset::dedupe`] reassigns ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    dim: usize,
    labels: Option<Vec<String>>,
    feature_names: Vec<String>,
    source_rows: Vec<usize>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self, DatasetError> {
        let dim = rows.first().map(Vec::len).ok_or(DatasetError::Empty)?;
        if dim == 0 {
            return Err(DatasetError::NoFeatures);
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(DatasetError::Ragged {
                    row: i + 1,
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let feature_names = (0..dim).map(|j| format!("x{j}")).collect();
        Self::from_parts(values, dim, labels, feature_names)
    }

    fn from_parts(
        values: Vec<f64>,
        dim: usize,
        labels: Option<Vec<String>>,
        feature_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let n = values.len() / dim;
        if n == 0 {
            return Err(DatasetError::Empty);
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(DatasetError::LabelCount {
                    labels: labels.len(),
                    instances: n,
                });
            }
        }
        Ok(Self {
            values,
            dim,
            labels,
            feature_names,
            source_rows: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of features per instance.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    /// Labels mapped to dense class indices in order of first appearance.
    pub fn label_ids(&self) -> Option<Vec<usize>> {
        let labels = self.labels.as_ref()?;
        let mut index: HashMap<&str, usize> = HashMap::new();
        Some(
            labels
                .iter()
                .map(|l| {
                    let next = index.len();
                    *index.entry(l.as_str()).or_insert(next)
                })
                .collect(),
        )
    }

    pub fn n_classes(&self) -> Option<usize> {
        let labels = self.labels.as_ref()?;
        Some(labels.iter().collect::<HashSet<_>>().len())
    }

    /// Euclidean distance between two instances.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        euclidean(self.row(a), self.row(b))
    }

    /// Keeps the first occurrence of every distinct feature vector.
    ///
    /// Equality is exact, bit-for-bit on the values as stored (with `-0.0`
    /// and `0.0` treated as equal). Labels and source rows follow their
    /// instances; ids are renumbered contiguously.
    pub fn dedupe(&self) -> Dataset {
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(self.len());
        let mut keep = Vec::with_capacity(self.len());
        for (id, row) in self.rows().enumerate() {
            let key = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            if seen.insert(key) {
                keep.push(id);
            }
        }
        self.select(&keep)
    }

    /// Min-max scales every feature to [0, 1]. Constant features map to 0.
    pub fn normalize(&self) -> Dataset {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for row in self.rows() {
            for (j, &v) in row.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let j = k % self.dim;
                let span = hi[j] - lo[j];
                if span > 0.0 {
                    ((v - lo[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        Dataset {
            values,
            ..self.clone()
        }
    }

    /// Sub-dataset of the given ids, in the given order.
    pub fn select(&self, ids: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            values.extend_from_slice(self.row(id));
        }
        Dataset {
            values,
            dim: self.dim,
            labels: self
                .labels
                .as_ref()
                .map(|l| ids.iter().map(|&id| l[id].clone()).collect()),
            feature_names: self.feature_names.clone(),
            source_rows: ids.iter().map(|&id| self.source_rows[id]).collect(),
        }
    }

    /// Hex SHA-256 over dimensions, feature values and labels.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.dim as u64).to_le_bytes());
        for v in &self.values {
            hasher.update(v.to_bits().to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            for l in labels {
                hasher.update((l.len() as u64).to_le_bytes());
                hasher.update(l.as_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Euclidean distance. Panics in debug builds on a length mismatch; use
/// [`distance`] for checked input.
#[inline]
pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn distance(x: &[f64], y: &[f64]) -> Result<f64, DatasetError> {
    if x.len() != y.len() {
        return Err(DatasetError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(euclidean(x, y))
}

/// Reads a headered CSV. Every column except the label column must hold
/// finite numbers. Row numbers in errors count data rows from 1; column
/// numbers count fields from 1.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&bytes, options)
}

pub fn parse_csv(bytes: &[u8], options: &CsvOptions) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = match &options.label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::MissingLabelColumn(name.clone()))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let dim = feature_names.len();
    if dim == 0 {
        return Err(DatasetError::NoFeatures);
    }

    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(DatasetError::Ragged {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (c, field) in record.iter().enumerate() {
            if Some(c) == label_idx {
                if let Some(labels) = labels.as_mut() {
                    labels.push(field.to_owned());
                }
                continue;
            }
            let value = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DatasetError::NonNumeric {
                    row,
                    column: c + 1,
                    value: field.to_owned(),
                })?;
            values.push(value);
        }
    }
    Dataset::from_parts(values, dim, labels, feature_names)
}
