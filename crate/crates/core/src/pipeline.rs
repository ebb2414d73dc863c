//! End-to-end glue: split a dataset, build the training graph, train, rank
//! test candidates and score them.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{split_users, temporal_holdout, DataError, Dataset, InteractionRecord};
use crate::eval::{
    self, baseline_rank, build_candidates, Baseline, EvalError, EvalReport, RankedList,
};
use crate::graph::{build_global, GraphConfig, HeteroGraph, NodeRef};
use crate::model::{embed_all, Model, ModelError, UserSessions};
use crate::train::{train, EpochRecord, TrainConfig, TrainError, TrainReport, TrainSet};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no test user can be evaluated")]
    NoTestUsers,
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// A dataset split into visible history and held-out labels, with users
/// partitioned into training and test sets.
pub struct Prepared {
    pub full: Dataset,
    /// Held-out labeled records per user.
    pub heldout: BTreeMap<String, Vec<InteractionRecord>>,
    /// Graph over the visible records only; the model sees nothing else.
    pub graph: HeteroGraph,
    /// Graph over every record; used for C-Timeliness.
    pub full_graph: HeteroGraph,
    pub train_users: Vec<String>,
    pub test_users: Vec<String>,
}

pub fn prepare(
    full: Dataset,
    train_rate: f64,
    holdout_fraction: f64,
    seed: u64,
) -> Result<Prepared> {
    let (train_users, test_users) = split_users(&full, train_rate, seed)?;
    let holdout = temporal_holdout(&full, holdout_fraction);
    Ok(Prepared {
        graph: build_global(&holdout.visible),
        full_graph: build_global(&full),
        heldout: holdout.heldout,
        full,
        train_users,
        test_users,
    })
}

/// Training run result.
pub struct Trained {
    pub model: Model,
    pub report: TrainReport,
    pub users: usize,
    pub skipped: Vec<(String, String)>,
}

pub fn train_model<F>(p: &Prepared, cfg: &TrainConfig, on_epoch: F) -> Result<Trained>
where
    F: FnMut(&EpochRecord, &Model) -> std::result::Result<(), TrainError>,
{
    cfg.validate()?;
    let set = TrainSet::build(
        &p.graph,
        &p.full,
        &p.heldout,
        &p.train_users,
        &cfg.graph,
        cfg.model.hash_buckets,
    );
    let (model, report) = train(&set, cfg, on_epoch)?;
    Ok(Trained {
        model,
        report,
        users: set.users.len(),
        skipped: set.skipped,
    })
}

/// Candidate lists of every test user that has held-out labels and enough
/// history in the graph to be represented.
pub fn test_candidates(
    p: &Prepared,
    graph_cfg: &GraphConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<(String, Vec<(String, bool)>)>> {
    let mut out = Vec::new();
    for u in &p.test_users {
        let Some(records) = p.heldout.get(u) else {
            continue;
        };
        if UserSessions::build(&p.graph, &NodeRef::user(u.clone()), graph_cfg).is_err() {
            continue;
        }
        match build_candidates(u, records, n, seed) {
            Ok(c) => out.push((u.clone(), c)),
            Err(EvalError::NoCandidates(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    if out.is_empty() {
        return Err(PipelineError::NoTestUsers);
    }
    Ok(out)
}

/// Ranks every candidate list with `model`. Candidates the model cannot
/// score go last.
pub fn rank_with_model(
    model: &Model,
    g: &HeteroGraph,
    candidates: &[(String, Vec<(String, bool)>)],
    threads: usize,
) -> Result<Vec<RankedList>> {
    let embeddings = embed_all(&model.params, g, &model.vocab)?;
    let rank_one = |(user, cands): &(String, Vec<(String, bool)>)| -> Result<RankedList> {
        let refs: Vec<NodeRef> = cands
            .iter()
            .map(|(v, _)| NodeRef::video(v.clone()))
            .collect();
        let scores = model.score_candidates(g, &embeddings, &NodeRef::user(user.clone()), &refs)?;
        let items = cands
            .iter()
            .zip(scores)
            .map(|((v, l), s)| (v.clone(), s.unwrap_or(f64::NEG_INFINITY), *l))
            .collect();
        Ok(RankedList::from_scores(user.clone(), items)?)
    };
    if threads <= 1 {
        return candidates.iter().map(rank_one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    pool.install(|| candidates.par_iter().map(rank_one).collect())
}

pub fn rank_baseline(
    g: &HeteroGraph,
    candidates: &[(String, Vec<(String, bool)>)],
    strategy: Baseline,
    seed: u64,
) -> Result<Vec<RankedList>> {
    let counts: HashMap<String, usize> = match strategy {
        Baseline::Popularity => eval::popularity(g),
        Baseline::Random => HashMap::new(),
    };
    candidates
        .iter()
        .map(|(u, c)| Ok(baseline_rank(u, c, strategy, &counts, seed)?))
        .collect()
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub candidates: usize,
    pub t0: i64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 10],
            candidates: 100,
            t0: 0,
        }
    }
}

pub fn evaluate(p: &Prepared, lists: &[RankedList], cfg: &EvalConfig) -> Result<EvalReport> {
    Ok(eval::evaluate_lists(lists, &p.full_graph, &cfg.ks, cfg.t0)?)
}
