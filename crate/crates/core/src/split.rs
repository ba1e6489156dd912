//! Per-user chronological train/test splits and transition construction.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{Corpus, Visit};

/// Which (i, j) index pairs of a sequence count as transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    /// Consecutive pairs `(i, i + 1)`.
    Next,
    /// Every ordered pair `i < j`.
    TimeSpecific,
    /// Pairs `i < j` at least this many hours apart.
    TimeSpecificMinGap(f64),
}

impl Task {
    pub fn name(&self) -> String {
        match self {
            Task::Next => "next".to_string(),
            Task::TimeSpecific => "timespec".to_string(),
            Task::TimeSpecificMinGap(h) => format!("timespec-gap{h}h"),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    /// Accepts `next`, `timespec`, and `timespec-gap` (5 hours) or
    /// `timespec-gap:<hours>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "next" => Ok(Task::Next),
            "timespec" => Ok(Task::TimeSpecific),
            "timespec-gap" => Ok(Task::TimeSpecificMinGap(5.0)),
            other => match other.strip_prefix("timespec-gap:") {
                Some(h) => h
                    .parse::<f64>()
                    .ok()
                    .filter(|h| h.is_finite() && *h >= 0.0)
                    .map(Task::TimeSpecificMinGap)
                    .ok_or_else(|| format!("bad gap hours in `{other}`")),
                None => Err(format!("unknown task `{other}`")),
            },
        }
    }
}

/// Transition index pairs of `seq` for `task`, in lexicographic (i, j) order.
pub fn make_transitions(seq: &[Visit], task: Task) -> Vec<(usize, usize)> {
    let n = seq.len();
    match task {
        Task::Next => (1..n).map(|j| (j - 1, j)).collect(),
        Task::TimeSpecific => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        Task::TimeSpecificMinGap(hours) => {
            let gap = hours * 3600.0;
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| (seq[j].timestamp - seq[i].timestamp) as f64 >= gap)
                .collect()
        }
    }
}

/// Number of leading records that go to training for a sequence of length
/// `len`: `ceil(fraction * len)`, kept within `[1, len - 1]`.
pub fn split_point(len: usize, train_fraction: f64) -> usize {
    debug_assert!(len >= 2);
    // Absorb representation error such as 0.7 * 10 = 7.000000000000001.
    let raw = (train_fraction * len as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, len - 1)
}

/// A user retained by a split and the index of their first test record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserCut {
    pub user: usize,
    pub cut: usize,
}

/// Train/test view of a corpus. Each retained user's sequence is cut into a
/// training prefix and a test suffix; users with fewer than two records are
/// dropped.
#[derive(Debug, Clone)]
pub struct Split {
    corpus: Corpus,
    cuts: Vec<UserCut>,
    dropped_users: usize,
}

impl Split {
    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn users(&self) -> &[UserCut] {
        &self.cuts
    }

    pub fn dropped_users(&self) -> usize {
        self.dropped_users
    }

    pub fn train(&self, cut: &UserCut) -> &[Visit] {
        &self.corpus.sequence(cut.user)[..cut.cut]
    }

    pub fn test(&self, cut: &UserCut) -> &[Visit] {
        &self.corpus.sequence(cut.user)[cut.cut..]
    }

    pub fn n_train_records(&self) -> usize {
        self.cuts.iter().map(|c| c.cut).sum()
    }

    pub fn n_test_records(&self) -> usize {
        self.cuts.iter().map(|c| self.test(c).len()).sum()
    }

    /// Transitions whose target falls in the test region of `cut`. The source
    /// may lie in the training prefix.
    pub fn test_transitions(&self, cut: &UserCut, task: Task) -> Vec<(usize, usize)> {
        make_transitions(self.corpus.sequence(cut.user), task)
            .into_iter()
            .filter(|&(_, j)| j >= cut.cut)
            .collect()
    }

    /// Transitions entirely inside the training prefix of `cut`.
    pub fn train_transitions(&self, cut: &UserCut, task: Task) -> Vec<(usize, usize)> {
        make_transitions(self.train(cut), task)
    }
}

pub fn chronological_split(corpus: Corpus, train_fraction: f64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut cuts = Vec::new();
    let mut dropped_users = 0;
    for (user, seq) in corpus.sequences().iter().enumerate() {
        if seq.len() < 2 {
            dropped_users += 1;
            continue;
        }
        cuts.push(UserCut {
            user,
            cut: split_point(seq.len(), train_fraction),
        });
    }
    if cuts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Split {
        corpus,
        cuts,
        dropped_users,
    })
}
