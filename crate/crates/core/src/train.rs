//! Pairwise ranking training: Xavier initialization, negative sampling,
//! the regularized objective and mini-batch Adam.
//!
//! Each batch fans out over users; every user gets its own tape and the
//! per-user gradients are summed in user order, so results do not depend on
//! the thread count.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, InteractionRecord};
use crate::graph::{GraphConfig, HeteroGraph, NodeId, NodeRef, Relation};
use crate::model::{
    layout, represent_user, rhmp_relation, sample_embed, sample_neighbors, score, Bound, Model,
    ModelConfig, ModelError, NodeTable, Params, UserSessions, Vocabulary,
};
use crate::numerics::{Matrix, Tensor};
use crate::rng::{substream, substream_indexed};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("user {user}: {available} negative candidates, {needed} requested")]
    NoNegatives {
        user: String,
        available: usize,
        needed: usize,
    },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("no user can be trained")]
    NoTrainableUsers,
    #[error("training diverged at epoch {epoch}: parameter {param} is not finite")]
    Diverged { epoch: usize, param: String },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    LossNotFinite { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// Users per mini-batch.
    pub batch_size: usize,
    /// Weight of the cross-hop relation smoothness term.
    pub beta: f64,
    /// Weight of the squared Frobenius norm of all parameters.
    pub eta: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    /// Positives drawn per user and epoch; 0 uses all of them.
    pub positives_per_user: usize,
    pub seed: u64,
    pub threads: usize,
    pub graph: GraphConfig,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            batch_size: 64,
            beta: 0.2,
            eta: 0.01,
            epochs: 20,
            negatives_per_positive: 1,
            positives_per_user: 0,
            seed: 0,
            threads: 1,
            graph: GraphConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return fail("lr must be a finite number >= 0");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if !(self.beta >= 0.0) || !(self.eta >= 0.0) {
            return fail("beta and eta must be >= 0");
        }
        if self.negatives_per_positive == 0 {
            return fail("negatives_per_positive must be >= 1");
        }
        if self.threads == 0 {
            return fail("threads must be >= 1");
        }
        self.graph
            .validate()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        self.model.validate()?;
        if self.model.layers != self.graph.layers {
            return fail("model and graph layer counts differ");
        }
        Ok(())
    }
}

/// Uniform Xavier initializer: entries in ±sqrt(6 / (rows + cols)).
pub fn xavier_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Matrix::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

/// Every parameter of the layout, Xavier-initialized from the `init`
/// substream of `seed`.
pub fn init_params(cfg: &ModelConfig, vocab: &Vocabulary, seed: u64) -> Params {
    let mut rng = substream(seed, "init");
    let mut params = Params::new();
    for (name, (r, c)) in layout(cfg, vocab) {
        params.insert(name, xavier_uniform(r, c, &mut rng));
    }
    params
}

/// Negative candidates of one user: explicit negatives first, any video
/// without a positive interaction as the fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativePool<T> {
    pub explicit: Vec<T>,
    pub unseen: Vec<T>,
}

impl<T: Clone> NegativePool<T> {
    /// `k` distinct candidates, uniform without replacement.
    pub fn sample<R: Rng>(&self, user: &str, k: usize, rng: &mut R) -> Result<Vec<T>> {
        let pool = if self.explicit.len() >= k {
            &self.explicit
        } else {
            &self.unseen
        };
        if pool.len() < k || k == 0 {
            return Err(TrainError::NoNegatives {
                user: user.to_string(),
                available: pool.len(),
                needed: k,
            });
        }
        Ok(rand::seq::index::sample(rng, pool.len(), k)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect())
    }
}

impl NegativePool<String> {
    pub fn for_user(user: &str, d: &Dataset) -> Self {
        let positives = d.positive_videos(user);
        let explicit = d
            .explicit_negatives(user)
            .into_iter()
            .filter(|v| !positives.contains(v))
            .map(str::to_string)
            .collect();
        let unseen = d
            .videos()
            .iter()
            .filter(|v| !positives.contains(v.as_str()))
            .cloned()
            .collect();
        Self { explicit, unseen }
    }
}

/// `k` negative videos for `user` drawn from `d`.
pub fn sample_negatives<R: Rng>(
    user: &str,
    d: &Dataset,
    k: usize,
    rng: &mut R,
) -> Result<Vec<String>> {
    NegativePool::for_user(user, d).sample(user, k, rng)
}

/// One trainable user: sessions, held-out positives and negative pool, all
/// resolved against the training graph.
#[derive(Debug, Clone)]
pub struct TrainUser {
    pub name: String,
    pub sessions: UserSessions,
    pub positives: Vec<NodeId>,
    pub negatives: NegativePool<NodeId>,
}

/// Training graph, feature vocabulary and users.
pub struct TrainSet<'g> {
    pub graph: &'g HeteroGraph,
    pub vocab: Vocabulary,
    pub users: Vec<TrainUser>,
    /// Users left out, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl<'g> TrainSet<'g> {
    /// Positives are the held-out positive records of each user; negatives
    /// come from the full dataset. Users without a full session, without
    /// positives in the graph or without negatives are skipped.
    pub fn build(
        graph: &'g HeteroGraph,
        full: &Dataset,
        heldout: &BTreeMap<String, Vec<InteractionRecord>>,
        users: &[String],
        graph_cfg: &GraphConfig,
        hash_buckets: usize,
    ) -> Self {
        let vocab = Vocabulary::from_graph(graph, hash_buckets);
        let mut out = Vec::new();
        let mut skipped = Vec::new();
        for name in users {
            let sessions = match UserSessions::build(graph, &NodeRef::user(name.clone()), graph_cfg)
            {
                Ok(s) => s,
                Err(e) => {
                    skipped.push((name.clone(), e.to_string()));
                    continue;
                }
            };
            let in_graph = |v: &str| graph.id(&NodeRef::video(v.to_string()));
            let positives: BTreeSet<NodeId> = heldout
                .get(name)
                .into_iter()
                .flatten()
                .filter(|r| r.kind.is_positive())
                .filter_map(|r| in_graph(&r.video_id))
                .collect();
            if positives.is_empty() {
                skipped.push((name.clone(), "no held-out positives".into()));
                continue;
            }
            let pool = NegativePool::for_user(name, full);
            let negatives = NegativePool {
                explicit: pool.explicit.iter().filter_map(|v| in_graph(v)).collect(),
                unseen: pool.unseen.iter().filter_map(|v| in_graph(v)).collect(),
            };
            if negatives.unseen.is_empty() {
                skipped.push((name.clone(), "no negative candidates".into()));
                continue;
            }
            out.push(TrainUser {
                name: name.clone(),
                sessions,
                positives: positives.into_iter().collect(),
                negatives,
            });
        }
        Self {
            graph,
            vocab,
            users: out,
            skipped,
        }
    }
}

/// Training pairs `(positive, negative)` of one user in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPairs {
    /// Index into [`TrainSet::users`].
    pub user: usize,
    pub pairs: Vec<(NodeId, NodeId)>,
}

/// Draws the pairs of `user` for `epoch`.
pub fn draw_pairs(
    set: &TrainSet,
    user: usize,
    epoch: usize,
    cfg: &TrainConfig,
) -> Result<UserPairs> {
    let u = &set.users[user];
    let mut rng = substream_indexed(cfg.seed, &format!("negatives:{}", u.name), epoch as u64);
    let mut positives = u.positives.clone();
    positives.shuffle(&mut rng);
    if cfg.positives_per_user > 0 {
        positives.truncate(cfg.positives_per_user);
    }
    let mut pairs = Vec::new();
    for p in positives {
        for n in u
            .negatives
            .sample(&u.name, cfg.negatives_per_positive, &mut rng)?
        {
            pairs.push((p, n));
        }
    }
    Ok(UserPairs { user, pairs })
}

/// Objective of one batch, split into its terms (already weighted).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub bpr: f64,
    pub relation: f64,
    pub l2: f64,
    pub pairs: usize,
    pub skipped_pairs: usize,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.bpr + self.relation + self.l2
    }
}

struct UserOutcome {
    loss: f64,
    pairs: usize,
    skipped: usize,
    grads: Vec<Option<Matrix>>,
}

fn has_sample_neighbors(g: &HeteroGraph, video: NodeId, target: NodeId) -> bool {
    g.adjacent(video).iter().any(|a| a.dst != target)
}

/// `scale · Σ_pairs −ln σ(score(pos) − score(neg))` for one user.
fn user_objective(
    params: &Params,
    set: &TrainSet,
    cfg: &ModelConfig,
    up: &UserPairs,
    scale: f64,
    want_grads: bool,
) -> std::result::Result<UserOutcome, ModelError> {
    let u = &set.users[up.user];
    let g = set.graph;
    let target = u.sessions.user;
    let valid: Vec<(NodeId, NodeId)> = up
        .pairs
        .iter()
        .copied()
        .filter(|&(p, n)| has_sample_neighbors(g, p, target) && has_sample_neighbors(g, n, target))
        .collect();
    let skipped = up.pairs.len() - valid.len();
    if valid.is_empty() {
        return Ok(UserOutcome {
            loss: 0.0,
            pairs: 0,
            skipped,
            grads: vec![None; params.len()],
        });
    }
    let mut b = Bound::new(params, want_grads);
    let mut nodes = u.sessions.nodes(&cfg.flags, cfg.layers);
    let mut candidates: Vec<NodeId> = valid.iter().flat_map(|&(p, n)| [p, n]).collect();
    candidates.sort();
    candidates.dedup();
    for &c in &candidates {
        nodes.extend(sample_neighbors(g, c, target));
    }
    let table = NodeTable::embed(&mut b, g, &set.vocab, &nodes)?;
    let repr = represent_user(&mut b, &u.sessions, &table, cfg)?;
    let mut scores: BTreeMap<NodeId, Tensor> = BTreeMap::new();
    for c in candidates {
        let z = sample_embed(&mut b, g, &table, c, target)?;
        scores.insert(c, score(&mut b, repr.user, &repr.videos, z)?);
    }
    let mut total: Option<Tensor> = None;
    for (p, n) in &valid {
        let diff = b.tape.sub(scores[p], scores[n])?;
        let term = b.tape.log_sigmoid(diff);
        total = Some(match total {
            None => term,
            Some(t) => b.tape.add(t, term)?,
        });
    }
    let loss = b.tape.scale(total.expect("at least one pair"), -scale);
    let value = b.tape.item(loss);
    let grads = if want_grads && b.tape.requires_grad(loss) {
        b.tape.backward(loss)?;
        b.grads()
    } else {
        vec![None; params.len()]
    };
    Ok(UserOutcome {
        loss: value,
        pairs: valid.len(),
        skipped,
        grads,
    })
}

/// Weighted smoothness and norm terms with their gradients.
fn regularizer(
    params: &Params,
    cfg: &ModelConfig,
    beta: f64,
    eta: f64,
    want_grads: bool,
) -> std::result::Result<(f64, f64, Vec<Option<Matrix>>), ModelError> {
    if beta == 0.0 && eta == 0.0 {
        return Ok((0.0, 0.0, vec![None; params.len()]));
    }
    let mut b = Bound::new(params, true);
    let mut terms = Vec::new();
    let mut relation = None;
    if beta > 0.0 {
        let mut parts = Vec::new();
        for r in Relation::ALL {
            for hop in 1..cfg.layers {
                let next = b.p(&rhmp_relation(r, hop + 1))?;
                let cur = b.p(&rhmp_relation(r, hop))?;
                let diff = b.tape.sub(next, cur)?;
                parts.push(b.tape.squared_norm(diff));
            }
        }
        if !parts.is_empty() {
            let stacked = b.tape.vstack(&parts)?;
            let sum = b.tape.sum(stacked);
            let weighted = b.tape.scale(sum, beta);
            relation = Some(weighted);
            terms.push(weighted);
        }
    }
    let mut l2 = None;
    if eta > 0.0 {
        let mut parts = Vec::with_capacity(params.len());
        for name in params.names() {
            let t = b.p(name)?;
            parts.push(b.tape.squared_norm(t));
        }
        let stacked = b.tape.vstack(&parts)?;
        let sum = b.tape.sum(stacked);
        let weighted = b.tape.scale(sum, eta);
        l2 = Some(weighted);
        terms.push(weighted);
    }
    let relation_value = relation.map_or(0.0, |t| b.tape.item(t));
    let l2_value = l2.map_or(0.0, |t| b.tape.item(t));
    let mut grads = vec![None; params.len()];
    if want_grads && !terms.is_empty() {
        let stacked = b.tape.vstack(&terms)?;
        let total = b.tape.sum(stacked);
        b.tape.backward(total)?;
        grads = b.grads();
    }
    Ok((relation_value, l2_value, grads))
}

/// Unweighted relation smoothness: squared distance between the matrices of
/// each relation at consecutive hops, summed.
pub fn relation_smoothness(
    params: &Params,
    cfg: &ModelConfig,
) -> std::result::Result<f64, ModelError> {
    let mut total = 0.0;
    for r in Relation::ALL {
        for hop in 1..cfg.layers {
            let diff =
                params.get(&rhmp_relation(r, hop + 1))? - params.get(&rhmp_relation(r, hop))?;
            total += diff.iter().map(|x| x * x).sum::<f64>();
        }
    }
    Ok(total)
}

fn accumulate(into: &mut [Option<Matrix>], from: Vec<Option<Matrix>>) {
    for (slot, g) in into.iter_mut().zip(from) {
        if let Some(g) = g {
            match slot {
                Some(acc) => *acc += &g,
                None => *slot = Some(g),
            }
        }
    }
}

/// Loss of one batch and (optionally) its gradient with respect to every
/// parameter. The ranking term is averaged over the users of the batch.
pub fn batch_objective(
    params: &Params,
    set: &TrainSet,
    cfg: &TrainConfig,
    batch: &[UserPairs],
    want_grads: bool,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(LossParts, Vec<Option<Matrix>>)> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let scale = 1.0 / batch.len() as f64;
    let run = || {
        batch
            .par_iter()
            .map(|up| user_objective(params, set, &cfg.model, up, scale, want_grads))
            .collect::<Vec<_>>()
    };
    let outcomes = match pool {
        Some(p) => p.install(run),
        None => batch
            .iter()
            .map(|up| user_objective(params, set, &cfg.model, up, scale, want_grads))
            .collect(),
    };
    let mut parts = LossParts::default();
    let mut grads = vec![None; params.len()];
    for o in outcomes {
        let o = o?;
        parts.bpr += o.loss;
        parts.pairs += o.pairs;
        parts.skipped_pairs += o.skipped;
        accumulate(&mut grads, o.grads);
    }
    let (relation, l2, reg_grads) = regularizer(params, &cfg.model, cfg.beta, cfg.eta, want_grads)?;
    parts.relation = relation;
    parts.l2 = l2;
    accumulate(&mut grads, reg_grads);
    Ok((parts, grads))
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &Params, lr: f64) -> Self {
        let zeros: Vec<Matrix> = params
            .values()
            .iter()
            .map(|p| Matrix::zeros(p.dim()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update; parameters without a gradient are treated as having a
    /// zero gradient.
    pub fn step(&mut self, params: &mut Params, grads: &[Option<Matrix>]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (i, p) in params.values_mut().iter_mut().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            match &grads[i] {
                Some(g) => {
                    ndarray::Zip::from(&mut *m)
                        .and(&mut *v)
                        .and(g)
                        .for_each(|m, v, &g| {
                            *m = b1 * *m + (1.0 - b1) * g;
                            *v = b2 * *v + (1.0 - b2) * g * g;
                        });
                }
                None => {
                    m.mapv_inplace(|x| b1 * x);
                    v.mapv_inplace(|x| b2 * x);
                }
            }
            ndarray::Zip::from(p)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &m, &v| {
                    *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
                });
        }
    }
}

/// One line of the training report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub seed: u64,
    pub loss: f64,
    pub bpr: f64,
    pub relation: f64,
    pub l2: f64,
    pub batches: usize,
    pub pairs: usize,
    pub skipped_pairs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Wall-clock seconds per epoch; kept apart from the deterministic records.
    pub wall_seconds: Vec<f64>,
}

fn check_finite(params: &Params, grads: &[Option<Matrix>], epoch: usize) -> Result<()> {
    for (i, (name, value)) in params.iter().enumerate() {
        let bad_grad = grads[i]
            .as_ref()
            .is_some_and(|g| g.iter().any(|x| !x.is_finite()));
        if bad_grad || value.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::Diverged {
                epoch,
                param: name.to_string(),
            });
        }
    }
    Ok(())
}

/// Trains from a fresh initialization. `on_epoch` runs after every epoch
/// with the current model (e.g. to write a checkpoint).
pub fn train<F>(set: &TrainSet, cfg: &TrainConfig, mut on_epoch: F) -> Result<(Model, TrainReport)>
where
    F: FnMut(&EpochRecord, &Model) -> Result<()>,
{
    cfg.validate()?;
    let params = init_params(&cfg.model, &set.vocab, cfg.seed);
    train_from(set, cfg, params, &mut on_epoch)
}

/// Trains starting from `params`.
pub fn train_from<F>(
    set: &TrainSet,
    cfg: &TrainConfig,
    params: Params,
    on_epoch: &mut F,
) -> Result<(Model, TrainReport)>
where
    F: FnMut(&EpochRecord, &Model) -> Result<()>,
{
    if set.users.is_empty() {
        return Err(TrainError::NoTrainableUsers);
    }
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| TrainError::Pool(e.to_string()))?,
        )
    } else {
        None
    };
    let mut model = Model {
        config: cfg.model.clone(),
        graph: cfg.graph,
        vocab: set.vocab.clone(),
        params,
    };
    let mut adam = Adam::new(&model.params, cfg.lr);
    let mut report = TrainReport::default();
    for epoch in 1..=cfg.epochs {
        let started = std::time::Instant::now();
        let mut order: Vec<usize> = (0..set.users.len()).collect();
        order.shuffle(&mut substream_indexed(cfg.seed, "epoch", epoch as u64));
        let mut sums = LossParts::default();
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = chunk
                .iter()
                .map(|&u| draw_pairs(set, u, epoch, cfg))
                .collect::<Result<Vec<_>>>()?;
            let (parts, grads) =
                batch_objective(&model.params, set, cfg, &batch, true, pool.as_ref())?;
            if !parts.total().is_finite() {
                check_finite(&model.params, &grads, epoch)?;
                return Err(TrainError::LossNotFinite { epoch });
            }
            check_finite(&model.params, &grads, epoch)?;
            adam.step(&mut model.params, &grads);
            check_finite(&model.params, &grads, epoch)?;
            sums.bpr += parts.bpr;
            sums.relation += parts.relation;
            sums.l2 += parts.l2;
            sums.pairs += parts.pairs;
            sums.skipped_pairs += parts.skipped_pairs;
            loss_sum += parts.total();
            batches += 1;
        }
        let n = batches as f64;
        let record = EpochRecord {
            epoch,
            seed: cfg.seed,
            loss: loss_sum / n,
            bpr: sums.bpr / n,
            relation: sums.relation / n,
            l2: sums.l2 / n,
            batches,
            pairs: sums.pairs,
            skipped_pairs: sums.skipped_pairs,
        };
        log::info!(
            "epoch {epoch}: loss {:.6} (bpr {:.6}, relation {:.6}, l2 {:.6}), {} pairs",
            record.loss,
            record.bpr,
            record.relation,
            record.l2,
            record.pairs
        );
        on_epoch(&record, &model)?;
        report.epochs.push(record);
        report.wall_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok((model, report))
}

/// Analytic-versus-numeric comparison for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub name: String,
    pub entries: usize,
    /// Largest relative error over entries with |analytic| > 1e-8.
    pub max_relative_error: f64,
    /// Largest |numeric| over entries with |analytic| <= 1e-8.
    pub max_residual: f64,
}

/// Central finite differences of the full batch objective for every entry
/// of every parameter, compared with the analytic gradient.
pub fn gradient_check(
    params: &Params,
    set: &TrainSet,
    cfg: &TrainConfig,
    batch: &[UserPairs],
    step: f64,
) -> Result<Vec<GradientCheck>> {
    let (_, grads) = batch_objective(params, set, cfg, batch, true, None)?;
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(params.len());
    let names: Vec<String> = params.names().to_vec();
    for (i, name) in names.iter().enumerate() {
        let shape = params.values()[i].dim();
        let analytic = grads[i].clone().unwrap_or_else(|| Matrix::zeros(shape));
        let mut check = GradientCheck {
            name: name.clone(),
            entries: analytic.len(),
            max_relative_error: 0.0,
            max_residual: 0.0,
        };
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = params.values()[i][[r, c]];
                probe.get_mut(name)?[[r, c]] = orig + step;
                let up = batch_objective(&probe, set, cfg, batch, false, None)?
                    .0
                    .total();
                probe.get_mut(name)?[[r, c]] = orig - step;
                let down = batch_objective(&probe, set, cfg, batch, false, None)?
                    .0
                    .total();
                probe.get_mut(name)?[[r, c]] = orig;
                let numeric = (up - down) / (2.0 * step);
                let a = analytic[[r, c]];
                if a.abs() > 1e-8 {
                    let err = crate::numerics::relative_error(a, numeric);
                    check.max_relative_error = check.max_relative_error.max(err);
                } else {
                    check.max_residual = check.max_residual.max(numeric.abs());
                }
            }
        }
        out.push(check);
    }
    Ok(out)
}
