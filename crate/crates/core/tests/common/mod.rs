//! Shared helpers: bundled dataset loading and brute-force reference
//! implementations that share no code with the crate under test.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use cobra_core::{load_csv, Answer, CsvOptions, Dataset, Relation};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// (file stem, label column) of every dataset shipped in `data/`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("iris", "class"),
    ("wine", "class"),
    ("ecoli", "class"),
    ("dermatology", "pityriasis_rubra_pilaris"),
];

pub fn raw(name: &str, label: &str) -> Dataset {
    let path = data_dir().join(format!("{name}.csv"));
    load_csv(&path, &CsvOptions { label_column: Some(label.into()), ..Default::default() })
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Deduplicated and min-max scaled, the way every experiment sees it.
pub fn prepared(name: &str) -> Dataset {
    let label = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, l)| *l)
        .unwrap_or("class");
    raw(name, label).dedupe().normalize()
}

pub fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// ARI from the four pair counts, enumerating every unordered pair.
pub fn brute_force_ari(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len();
    let (mut both, mut only_pred, mut only_truth, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_pred += 1.0,
                (false, true) => only_truth += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let num = 2.0 * (neither * both - only_pred * only_truth);
    let den = (neither + only_pred) * (only_pred + both) + (neither + only_truth) * (only_truth + both);
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Relation closure computed from scratch: must-link components by BFS,
/// cannot-links lifted to whole components.
pub struct BruteClosure {
    component: Vec<usize>,
    cannot: Vec<(usize, usize)>,
}

impl BruteClosure {
    pub fn new(n: usize, constraints: &[(usize, usize, Answer)]) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b, ans) in constraints {
            if ans == Answer::MustLink {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        let mut component = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([start]);
            component[start] = next;
            while let Some(v) = queue.pop_front() {
                for &w in &adjacency[v] {
                    if component[w] == usize::MAX {
                        component[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        let cannot = constraints
            .iter()
            .filter(|c| c.2 == Answer::CannotLink)
            .map(|&(a, b, _)| (component[a], component[b]))
            .collect();
        Self { component, cannot }
    }

    pub fn relation(&self, a: usize, b: usize) -> Relation {
        let (ca, cb) = (self.component[a], self.component[b]);
        if ca == cb {
            Relation::MustLink
        } else if self
            .cannot
            .iter()
            .any(|&(x, y)| (x, y) == (ca, cb) || (x, y) == (cb, ca))
        {
            Relation::CannotLink
        } else {
            Relation::Unknown
        }
    }
}

/// Closest-first closure baseline simulated pair by pair with
/// [`BruteClosure`] recomputed after every answer.
pub fn simulate_closest_first(data: &Dataset, labels: &[usize]) -> usize {
    let n = data.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let d: f64 = data
                .row(a)
                .iter()
                .zip(data.row(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            pairs.push((d, a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut asked = Vec::new();
    for (_, a, b) in pairs {
        if BruteClosure::new(n, &asked).relation(a, b) != Relation::Unknown {
            continue;
        }
        let ans = if labels[a] == labels[b] { Answer::MustLink } else { Answer::CannotLink };
        asked.push((a, b, ans));
    }
    asked.len()
}
