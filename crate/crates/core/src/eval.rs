//! Ranking metrics, candidate sampling for test users and reference
//! baselines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::InteractionRecord;
use crate::graph::{HeteroGraph, NodeRef};
use crate::rng::substream_indexed;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("k must be >= 1")]
    ZeroK,
    #[error("duplicate candidate {video} for user {user}")]
    DuplicateCandidate { user: String, video: String },
    #[error("user {0} has no held-out labeled records")]
    NoCandidates(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Candidates of one user in ranked order (descending score, ties by video
/// id ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub user_id: String,
    pub videos: Vec<String>,
    pub scores: Vec<f64>,
    pub relevant: Vec<bool>,
}

impl RankedList {
    /// Sorts `(video, score, relevant)` triples into a ranking. NaN scores
    /// sort last.
    pub fn from_scores(
        user_id: impl Into<String>,
        mut items: Vec<(String, f64, bool)>,
    ) -> Result<Self> {
        let user_id = user_id.into();
        let mut seen = BTreeSet::new();
        for (v, _, _) in &items {
            if !seen.insert(v.clone()) {
                return Err(EvalError::DuplicateCandidate {
                    user: user_id,
                    video: v.clone(),
                });
            }
        }
        let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
        items.sort_by(|a, b| key(b.1).total_cmp(&key(a.1)).then_with(|| a.0.cmp(&b.0)));
        Ok(Self {
            user_id,
            videos: items.iter().map(|i| i.0.clone()).collect(),
            scores: items.iter().map(|i| i.1).collect(),
            relevant: items.iter().map(|i| i.2).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }
}

/// Relevant items among the top `k`, divided by `min(k, len)`.
pub fn precision_at_k(r: &RankedList, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let n = k.min(r.len());
    if n == 0 {
        return Ok(0.0);
    }
    let hits = r.relevant[..n].iter().filter(|&&x| x).count();
    Ok(hits as f64 / n as f64)
}

/// DCG@k with gain `rel_i / log2(i + 1)` (ranks from 1) over the ideal DCG@k.
pub fn ndcg_at_k(r: &RankedList, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let n = k.min(r.len());
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = (0..n).filter(|&i| r.relevant[i]).map(discount).sum();
    let total_relevant = r.relevant.iter().filter(|&&x| x).count();
    let ideal: f64 = (0..n.min(total_relevant)).map(discount).sum();
    if ideal == 0.0 {
        return Ok(0.0);
    }
    Ok(dcg / ideal)
}

/// Mean freshness of the correctly recommended videos: each video's
/// freshness is the mean of `t_uv - t0` over the users who interacted with
/// it in `g`. `None` when nothing relevant reaches the top `k` (or no such
/// video has interactions in `g`).
pub fn c_timeliness_at_k(
    rs: &[RankedList],
    g: &HeteroGraph,
    k: usize,
    t0: i64,
) -> Result<Option<f64>> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let mut correct = BTreeSet::new();
    for r in rs {
        for i in 0..k.min(r.len()) {
            if r.relevant[i] {
                correct.insert(r.videos[i].as_str());
            }
        }
    }
    let mut per_video = Vec::new();
    for v in correct {
        let Some(id) = g.id(&NodeRef::video(v)) else {
            continue;
        };
        let times = g.interaction_times(id);
        if times.is_empty() {
            continue;
        }
        let sum: f64 = times.values().map(|&t| (t - t0) as f64).sum();
        per_video.push(sum / times.len() as f64);
    }
    if per_video.is_empty() {
        return Ok(None);
    }
    Ok(Some(per_video.iter().sum::<f64>() / per_video.len() as f64))
}

/// Labeled candidates of one user: up to `n` distinct videos from the
/// held-out records, relevant when any held-out record of that video is
/// positive. Sampling uses the `candidates:<user>` substream of `seed`.
pub fn build_candidates(
    user: &str,
    heldout: &[InteractionRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<(String, bool)>> {
    let mut labels: BTreeMap<&str, bool> = BTreeMap::new();
    for r in heldout.iter().filter(|r| r.user_id == user) {
        if r.kind == crate::data::InteractionKind::Produce {
            continue;
        }
        *labels.entry(&r.video_id).or_insert(false) |= r.kind.is_positive();
    }
    if labels.is_empty() {
        return Err(EvalError::NoCandidates(user.to_string()));
    }
    let all: Vec<(String, bool)> = labels
        .into_iter()
        .map(|(v, l)| (v.to_string(), l))
        .collect();
    if all.len() <= n {
        return Ok(all);
    }
    let mut rng = substream_indexed(seed, &format!("candidates:{user}"), 0);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, all.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| all[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Random,
    Popularity,
}

/// Number of distinct users with a positive interaction, per video id.
pub fn popularity(g: &HeteroGraph) -> HashMap<String, usize> {
    g.positive_counts()
        .into_iter()
        .map(|(id, c)| (g.node(id).id.clone(), c))
        .collect()
}

/// Ranks candidates without a model: a seeded shuffle, or descending
/// popularity.
pub fn baseline_rank(
    user: &str,
    candidates: &[(String, bool)],
    strategy: Baseline,
    counts: &HashMap<String, usize>,
    seed: u64,
) -> Result<RankedList> {
    let items = match strategy {
        Baseline::Random => {
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.shuffle(&mut substream_indexed(seed, &format!("random:{user}"), 0));
            order
                .into_iter()
                .enumerate()
                .map(|(rank, i)| (candidates[i].0.clone(), -(rank as f64), candidates[i].1))
                .collect()
        }
        Baseline::Popularity => candidates
            .iter()
            .map(|(v, l)| (v.clone(), counts.get(v).copied().unwrap_or(0) as f64, *l))
            .collect(),
    };
    RankedList::from_scores(user, items)
}

/// Metrics at one cutoff, averaged over users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub k: usize,
    pub precision: f64,
    pub ndcg: f64,
    pub c_timeliness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStats {
    pub users: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: Vec<MetricRow>,
    pub candidates: CandidateStats,
    pub t0: i64,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<&MetricRow> {
        self.metrics.iter().find(|m| m.k == k)
    }
}

/// Mean Precision@k and NDCG@k over `lists` and C-Timeliness@k against `g`.
pub fn evaluate_lists(
    lists: &[RankedList],
    g: &HeteroGraph,
    ks: &[usize],
    t0: i64,
) -> Result<EvalReport> {
    let mut metrics = Vec::with_capacity(ks.len());
    for &k in ks {
        let n = lists.len().max(1) as f64;
        let mut p = 0.0;
        let mut d = 0.0;
        for r in lists {
            p += precision_at_k(r, k)?;
            d += ndcg_at_k(r, k)?;
        }
        metrics.push(MetricRow {
            k,
            precision: p / n,
            ndcg: d / n,
            c_timeliness: c_timeliness_at_k(lists, g, k, t0)?,
        });
    }
    let sizes: Vec<usize> = lists.iter().map(RankedList::len).collect();
    let candidates = CandidateStats {
        users: lists.len(),
        min: sizes.iter().copied().min().unwrap_or(0),
        max: sizes.iter().copied().max().unwrap_or(0),
        mean: if sizes.is_empty() {
            0.0
        } else {
            sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
        },
    };
    Ok(EvalReport {
        metrics,
        candidates,
        t0,
    })
}

/// Writes `dataset,metric,value` rows.
pub fn write_table<W: Write>(rows: &[(String, String, Option<f64>)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "metric", "value"])?;
    for (dataset, metric, value) in rows {
        let v = value.map_or_else(|| "null".to_string(), |x| format!("{x:.6}"));
        w.write_record([dataset.as_str(), metric.as_str(), v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
