//! Must-link / cannot-link bookkeeping closed under transitivity and
//! entailment.
//!
//! Must-link components live in a union-find forest. Cannot-link edges are
//! kept between component roots and moved onto the new root whenever two
//! components are unioned, so a cannot-link between any two members of two
//! components is visible from every other member of those components.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Answer an oracle can give about a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Answer {
    MustLink,
    CannotLink,
}

/// What the store knows about a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    MustLink,
    CannotLink,
    Unknown,
}

impl From<Answer> for Relation {
    fn from(answer: Answer) -> Self {
        match answer {
            Answer::MustLink => Relation::MustLink,
            Answer::CannotLink => Relation::CannotLink,
        }
    }
}

impl Relation {
    pub fn known(self) -> Option<Answer> {
        match self {
            Relation::MustLink => Some(Answer::MustLink),
            Relation::CannotLink => Some(Answer::CannotLink),
            Relation::Unknown => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("{requested:?}({a}, {b}) contradicts the derived {existing:?}")]
    Inconsistent {
        a: usize,
        b: usize,
        requested: Answer,
        existing: Relation,
    },
    #[error("an instance cannot be cannot-linked to itself ({0})")]
    SelfCannotLink(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DerivedStats {
    /// Distinct unordered pairs asserted directly.
    pub queried: usize,
    /// Unordered pairs over all ids seen whose relation is known.
    pub derivable_pairs: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintStore {
    parent: Vec<usize>,
    rank: Vec<u8>,
    seen: Vec<bool>,
    cannot: HashMap<usize, BTreeSet<usize>>,
    queried: HashSet<(usize, usize)>,
}

fn unordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ConstraintStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store pre-sized for ids `0..n`; larger ids still grow it on demand.
    pub fn with_capacity(n: usize) -> Self {
        let mut store = Self::default();
        store.grow(n);
        store
    }

    fn grow(&mut self, n: usize) {
        let old = self.parent.len();
        if n > old {
            self.parent.extend(old..n);
            self.rank.resize(n, 0);
            self.seen.resize(n, false);
        }
    }

    fn touch(&mut self, id: usize) {
        self.grow(id + 1);
        self.seen[id] = true;
    }

    fn root(&self, mut id: usize) -> usize {
        if id >= self.parent.len() {
            return id;
        }
        while self.parent[id] != id {
            id = self.parent[id];
        }
        id
    }

    fn find(&mut self, id: usize) -> usize {
        let root = self.root(id);
        let mut node = id;
        while node < self.parent.len() && self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub fn relation(&self, a: usize, b: usize) -> Relation {
        if a == b {
            return Relation::MustLink;
        }
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            Relation::MustLink
        } else if self.cannot.get(&ra).is_some_and(|set| set.contains(&rb)) {
            Relation::CannotLink
        } else {
            Relation::Unknown
        }
    }

    /// Records a must-link. Returns whether anything new was learned.
    pub fn add_must_link(&mut self, a: usize, b: usize) -> Result<bool, ConstraintError> {
        let existing = self.relation(a, b);
        if existing == Relation::CannotLink {
            return Err(ConstraintError::Inconsistent {
                a,
                b,
                requested: Answer::MustLink,
                existing,
            });
        }
        self.touch(a);
        self.touch(b);
        let fresh = self.queried.insert(unordered(a, b));
        if existing == Relation::MustLink {
            return Ok(fresh);
        }

        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if self.rank[ra] < self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        if self.rank[ra] == self.rank[rb] {
            self.rank[ra] = self.rank[ra].saturating_add(1);
        }
        if let Some(moved) = self.cannot.remove(&rb) {
            for other in moved {
                if let Some(set) = self.cannot.get_mut(&other) {
                    set.remove(&rb);
                    set.insert(ra);
                }
                self.cannot.entry(ra).or_default().insert(other);
            }
        }
        Ok(true)
    }

    /// Records a cannot-link. Returns whether anything new was learned.
    pub fn add_cannot_link(&mut self, a: usize, b: usize) -> Result<bool, ConstraintError> {
        if a == b {
            return Err(ConstraintError::SelfCannotLink(a));
        }
        let existing = self.relation(a, b);
        if existing == Relation::MustLink {
            return Err(ConstraintError::Inconsistent {
                a,
                b,
                requested: Answer::CannotLink,
                existing,
            });
        }
        self.touch(a);
        self.touch(b);
        let fresh = self.queried.insert(unordered(a, b));
        if existing == Relation::CannotLink {
            return Ok(fresh);
        }
        let (ra, rb) = (self.find(a), self.find(b));
        self.cannot.entry(ra).or_default().insert(rb);
        self.cannot.entry(rb).or_default().insert(ra);
        Ok(true)
    }

    pub fn add(&mut self, a: usize, b: usize, answer: Answer) -> Result<bool, ConstraintError> {
        match answer {
            Answer::MustLink => self.add_must_link(a, b),
            Answer::CannotLink => self.add_cannot_link(a, b),
        }
    }

    pub fn queried_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.queried.iter().copied()
    }

    pub fn derived_stats(&self) -> DerivedStats {
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for id in (0..self.seen.len()).filter(|&id| self.seen[id]) {
            *sizes.entry(self.root(id)).or_default() += 1;
        }
        let mut derivable: usize = sizes.values().map(|&s| s * (s - 1) / 2).sum();
        for (&ra, others) in &self.cannot {
            for &rb in others.iter().filter(|&&rb| ra < rb) {
                derivable += sizes.get(&ra).copied().unwrap_or(0) * sizes.get(&rb).copied().unwrap_or(0);
            }
        }
        DerivedStats {
            queried: self.queried.len(),
            derivable_pairs: derivable,
        }
    }

    /// Must-link component index for ids `0..n`, numbered by first
    /// appearance.
    pub fn component_labels(&self, n: usize) -> Vec<usize> {
        let mut index: HashMap<usize, usize> = HashMap::new();
        (0..n)
            .map(|id| {
                let next = index.len();
                *index.entry(self.root(id)).or_insert(next)
            })
            .collect()
    }
}
