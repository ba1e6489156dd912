//! Top@k evaluation over a chronological split.
//!
//! Every test transition is ranked against the full POI vocabulary and
//! counted as a hit at `k` when the true next POI lands within the first `k`
//! positions. Top@k is hits over samples.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TimeKey;
use crate::model::{Model, RankMode};
use crate::split::{Split, Task};

pub const DEFAULT_KS: [usize; 5] = [1, 5, 10, 20, 50];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Strictly increasing cut-offs.
    pub ks: Vec<usize>,
    pub task: Task,
    pub rank_mode: RankMode,
    /// Drop transitions that mention ids unknown to the model instead of
    /// failing.
    pub skip_unknown: bool,
    pub per_user: bool,
}

impl EvalConfig {
    pub fn new(ks: Vec<usize>, task: Task, rank_mode: RankMode) -> Self {
        Self {
            ks,
            task,
            rank_mode,
            skip_unknown: false,
            per_user: false,
        }
    }

    pub fn validate(&self, n_pois: usize) -> Result<()> {
        if self.ks.is_empty() {
            return Err(Error::InvalidArgument("no cut-offs given".into()));
        }
        if self.ks[0] == 0 || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "cut-offs must be positive and strictly increasing".into(),
            ));
        }
        let max = *self.ks.last().expect("non-empty");
        if max > n_pois {
            return Err(Error::InvalidArgument(format!(
                "cut-off {max} exceeds the {n_pois} POIs in the model"
            )));
        }
        Ok(())
    }
}

/// One ranked test transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedSample {
    pub user: usize,
    /// Source index in the user's sequence.
    pub prev: usize,
    /// Target index in the user's sequence.
    pub next: usize,
    pub target_poi: usize,
    /// 1-based rank of the target among all POIs.
    pub rank: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserHits {
    pub hits: Vec<usize>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub rank_mode: RankMode,
    pub ks: Vec<usize>,
    /// Hit counts, parallel to `ks`.
    pub hits: Vec<usize>,
    pub n_samples: usize,
    /// Transitions dropped because they mention unknown ids.
    pub skipped: usize,
    pub per_user: Option<BTreeMap<usize, UserHits>>,
}

/// One (task, k) line of the structured report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub name: String,
    pub task: String,
    pub rank_mode: String,
    pub k: usize,
    pub ratio: f64,
    pub hits: usize,
    pub n_samples: usize,
}

impl EvalReport {
    pub fn ratios(&self) -> Vec<(usize, f64)> {
        self.ks
            .iter()
            .zip(&self.hits)
            .map(|(&k, &h)| (k, h as f64 / self.n_samples as f64))
            .collect()
    }

    pub fn top_k(&self, k: usize) -> Option<f64> {
        self.ratios()
            .into_iter()
            .find(|&(kk, _)| kk == k)
            .map(|(_, r)| r)
    }

    /// Flat `key = value` block.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "task = {}\nrank_mode = {}\nn_samples = {}\nskipped = {}\n",
            self.task, self.rank_mode, self.n_samples, self.skipped
        );
        for (k, r) in self.ratios() {
            out.push_str(&format!("top@{k} = {r:.6}\n"));
        }
        out
    }

    pub fn records(&self, name: &str) -> Vec<ReportRecord> {
        self.ratios()
            .into_iter()
            .zip(&self.hits)
            .map(|((k, ratio), &hits)| ReportRecord {
                name: name.to_string(),
                task: self.task.name(),
                rank_mode: self.rank_mode.to_string(),
                k,
                ratio,
                hits,
                n_samples: self.n_samples,
            })
            .collect()
    }
}

/// Writes the structured report: a JSON array of [`ReportRecord`].
pub fn write_report_json(path: &Path, reports: &[(String, EvalReport)]) -> io::Result<()> {
    let records: Vec<ReportRecord> = reports
        .iter()
        .flat_map(|(name, r)| r.records(name))
        .collect();
    let json = serde_json::to_string_pretty(&records).map_err(io::Error::other)?;
    fs::write(path, json + "\n")
}

fn unknown(split: &Split, user: usize, pois: &[usize], model: &Model) -> Option<Error> {
    let corpus = split.corpus();
    if user >= model.params.n_users() {
        return Some(Error::VocabMismatch {
            kind: "user",
            id: corpus.users().id(user).to_string(),
        });
    }
    pois.iter()
        .find(|&&p| p >= model.params.n_pois())
        .map(|&p| Error::VocabMismatch {
            kind: "POI",
            id: corpus.pois().id(p).to_string(),
        })
}

/// Ranks every test transition of `config.task`. Returns the ranked samples
/// in (user, prev, next) order and the number skipped as unknown.
pub fn rank_test_samples(
    model: &Model,
    split: &Split,
    config: &EvalConfig,
) -> Result<(Vec<RankedSample>, usize)> {
    let mut pending = Vec::new();
    let mut skipped = 0;
    for cut in split.users() {
        let seq = split.corpus().sequence(cut.user);
        for (i, j) in split.test_transitions(cut, config.task) {
            if let Some(err) = unknown(split, cut.user, &[seq[i].poi, seq[j].poi], model) {
                if config.skip_unknown {
                    skipped += 1;
                    continue;
                }
                return Err(err);
            }
            pending.push((cut.user, i, j));
        }
    }
    let ranked = pending
        .par_iter()
        .map(|&(user, i, j)| {
            let seq = split.corpus().sequence(user);
            let ctx = model.query(user, seq[i].time, seq[i].poi, seq[j].time)?;
            Ok(RankedSample {
                user,
                prev: i,
                next: j,
                target_poi: seq[j].poi,
                rank: model.rank_of(&ctx, seq[j].poi, config.rank_mode),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ranked, skipped))
}

pub fn evaluate(model: &Model, split: &Split, config: &EvalConfig) -> Result<EvalReport> {
    config.validate(model.params.n_pois())?;
    let (samples, skipped) = rank_test_samples(model, split, config)?;
    if samples.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let count = |ranks: &mut dyn Iterator<Item = usize>, hits: &mut [usize]| {
        for rank in ranks {
            for (h, &k) in hits.iter_mut().zip(&config.ks) {
                if rank <= k {
                    *h += 1;
                }
            }
        }
    };
    let mut hits = vec![0; config.ks.len()];
    count(&mut samples.iter().map(|s| s.rank), &mut hits);

    let per_user = config.per_user.then(|| {
        let mut map: BTreeMap<usize, UserHits> = BTreeMap::new();
        for s in &samples {
            let entry = map.entry(s.user).or_insert_with(|| UserHits {
                hits: vec![0; config.ks.len()],
                n_samples: 0,
            });
            entry.n_samples += 1;
            count(&mut std::iter::once(s.rank), &mut entry.hits);
        }
        map
    });

    Ok(EvalReport {
        task: config.task,
        rank_mode: config.rank_mode,
        ks: config.ks.clone(),
        hits,
        n_samples: samples.len(),
        skipped,
        per_user,
    })
}

/// Side-by-side Top@k values and the first report's relative improvement
/// `(a - b) / b` over each of the others.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub names: Vec<String>,
    pub ks: Vec<usize>,
    /// `values[report][k]`.
    pub values: Vec<Vec<f64>>,
    /// `improvements[other - 1][k]`, `None` where the other report is 0.
    pub improvements: Vec<Vec<Option<f64>>>,
}

pub fn compare(reports: &[(String, EvalReport)]) -> Result<Comparison> {
    let Some((_, first)) = reports.first() else {
        return Err(Error::MismatchedConfig("nothing to compare".into()));
    };
    for (name, r) in &reports[1..] {
        if r.ks != first.ks {
            return Err(Error::MismatchedConfig(format!(
                "`{name}` uses different cut-offs"
            )));
        }
        if r.task != first.task {
            return Err(Error::MismatchedConfig(format!(
                "`{name}` uses a different task"
            )));
        }
    }
    let values: Vec<Vec<f64>> = reports
        .iter()
        .map(|(_, r)| r.ratios().into_iter().map(|(_, v)| v).collect())
        .collect();
    let improvements = values[1..]
        .iter()
        .map(|other| {
            values[0]
                .iter()
                .zip(other)
                .map(|(&a, &b)| (b != 0.0).then(|| (a - b) / b))
                .collect()
        })
        .collect();
    Ok(Comparison {
        names: reports.iter().map(|(n, _)| n.clone()).collect(),
        ks: first.ks.clone(),
        values,
        improvements,
    })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.names.iter().map(String::len).max().unwrap_or(0).max(8);
        write!(f, "{:width$}", "model")?;
        for k in &self.ks {
            write!(f, "  {:>9}", format!("top@{k}"))?;
        }
        writeln!(f)?;
        for (name, row) in self.names.iter().zip(&self.values) {
            write!(f, "{name:width$}")?;
            for v in row {
                write!(f, "  {v:>9.4}")?;
            }
            writeln!(f)?;
        }
        for (other, row) in self.names[1..].iter().zip(&self.improvements) {
            write!(f, "{:width$}", format!("vs {other}"))?;
            for v in row {
                match v {
                    Some(x) => write!(f, "  {:>+8.2}%", 100.0 * x)?,
                    None => write!(f, "  {:>9}", "n/a")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A `(t_i, p_i, t_j)` query for a fixed user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseQuery {
    pub prev_time: TimeKey,
    pub prev_poi: usize,
    pub next_time: TimeKey,
}

/// For each query, the 1-based rank of every watched POI in the full ranking.
pub fn case_study(
    model: &Model,
    user: usize,
    queries: &[CaseQuery],
    watch: &[usize],
    mode: RankMode,
) -> Result<Vec<Vec<(usize, usize)>>> {
    let n_pois = model.params.n_pois();
    if user >= model.params.n_users() {
        return Err(Error::VocabMismatch {
            kind: "user",
            id: format!("#{user}"),
        });
    }
    if let Some(p) = watch
        .iter()
        .chain(queries.iter().map(|q| &q.prev_poi))
        .find(|&&p| p >= n_pois)
    {
        return Err(Error::VocabMismatch {
            kind: "POI",
            id: format!("#{p}"),
        });
    }
    queries
        .iter()
        .map(|q| {
            let ctx = model.query(user, q.prev_time, q.prev_poi, q.next_time)?;
            let scores = model.score_all(&ctx, mode);
            Ok(watch
                .iter()
                .map(|&p| (p, crate::model::rank_in_scores(&scores, p, mode)))
                .collect())
        })
        .collect()
}
