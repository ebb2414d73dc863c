//! Learnable components: node feature networks, relational and attention
//! message passing over session subgraphs, session aggregation, session
//! attention, neighbor-average candidate embeddings and the ranking score.
//!
//! All forward functions record onto a [`Bound`] tape, so the same code
//! serves training (trainable parameters) and inference (constants).

mod checkpoint;
mod params;

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest, ParamShape};
pub use params::{
    ahmp_query, ahmp_self, ffn_hidden, ffn_out, layout, lstm_param, rhmp_relation, rhmp_self,
    Bound, Params, Vocabulary, AHMP_SHARED_QUERY, LSTM_GATES, SESSION_PROJECTION,
};

use crate::graph::{
    build_local, split_sessions, GraphConfig, GraphError, HeteroGraph, LayerLinks, NodeId, NodeRef,
    Relation, SessionSubgraph,
};
use crate::numerics::{Matrix, NumericsError, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {0} is not registered")]
    MissingParam(String),
    #[error("no feature vocabulary for node type {0}")]
    UnknownNodeType(String),
    #[error("node {0} has no primitive embedding in this pass")]
    MissingNode(String),
    #[error("video {0} has no neighbors to sample from")]
    IsolatedNode(String),
    #[error("{0} needs at least one input")]
    Empty(&'static str),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Switches that remove or replace one mechanism each.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub no_historical: bool,
    pub no_relation: bool,
    pub no_attention: bool,
    pub single_attention: bool,
    pub mean_instead_of_lstm: bool,
}

/// The six model variants compared by the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    NoHistorical,
    NoRelation,
    NoAttention,
    LstmToMean,
    SingleAttention,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::NoHistorical,
        Variant::NoRelation,
        Variant::NoAttention,
        Variant::LstmToMean,
        Variant::SingleAttention,
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NoHistorical => "no_historical",
            Self::NoRelation => "no_relation",
            Self::NoAttention => "no_attention",
            Self::LstmToMean => "lstm_to_mean",
            Self::SingleAttention => "single_attention",
            Self::Full => "full",
        }
    }

    pub fn flags(self) -> Ablation {
        let mut f = Ablation::default();
        match self {
            Self::NoHistorical => f.no_historical = true,
            Self::NoRelation => f.no_relation = true,
            Self::NoAttention => f.no_attention = true,
            Self::LstmToMean => f.mean_instead_of_lstm = true,
            Self::SingleAttention => f.single_attention = true,
            Self::Full => {}
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding width d; fused embeddings have width 2d.
    pub dim: usize,
    /// Hidden width of the per-type feature networks.
    pub hidden: usize,
    /// Message-passing hops h.
    pub layers: usize,
    pub leaky_slope: f64,
    /// Guard for the session-attention denominator.
    pub epsilon: f64,
    /// Extra feature columns for ids outside the vocabulary.
    pub hash_buckets: usize,
    pub flags: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 8,
            hidden: 16,
            layers: 2,
            leaky_slope: 0.01,
            epsilon: 1e-8,
            hash_buckets: 16,
            flags: Ablation::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.dim % 2 != 0 {
            return Err(ModelError::Config("dim must be even and >= 2".into()));
        }
        if self.hidden == 0 {
            return Err(ModelError::Config("hidden must be >= 1".into()));
        }
        if self.layers == 0 {
            return Err(ModelError::Config("layers must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(ModelError::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Primitive embeddings of the nodes touched by one forward pass.
pub struct NodeTable {
    matrix: Tensor,
    /// `None` means row `i` belongs to `NodeId(i)`.
    rows: Option<HashMap<NodeId, usize>>,
}

impl NodeTable {
    /// Runs the feature networks for `nodes` on the tape.
    pub fn embed(
        b: &mut Bound,
        g: &HeteroGraph,
        vocab: &Vocabulary,
        nodes: &[NodeId],
    ) -> Result<Self> {
        let mut by_type: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for &n in nodes {
            if seen.insert(n) {
                by_type
                    .entry(g.node(n).node_type.name())
                    .or_default()
                    .push(n);
            }
        }
        let mut rows = HashMap::new();
        let mut parts = Vec::new();
        for (ty, ids) in by_type {
            let features = ids
                .iter()
                .map(|&n| vocab.feature(g.node(n)))
                .collect::<Result<Vec<_>>>()?;
            let wh = b.p(&ffn_hidden(ty))?;
            let wo = b.p(&ffn_out(ty))?;
            let hidden = b.tape.sparse_matmul(features, wh)?;
            let hidden = b.tape.relu(hidden);
            parts.push(b.tape.matmul(hidden, wo)?);
            for n in ids {
                let next = rows.len();
                rows.insert(n, next);
            }
        }
        if parts.is_empty() {
            return Err(ModelError::Empty("node table"));
        }
        let matrix = b.tape.vstack(&parts)?;
        Ok(Self {
            matrix,
            rows: Some(rows),
        })
    }

    /// Wraps precomputed embeddings of every node of a graph, row = node id.
    pub fn full(b: &mut Bound, all: &Matrix) -> Self {
        Self {
            matrix: b.tape.constant(all.clone()),
            rows: None,
        }
    }

    pub fn row(&self, n: NodeId) -> Result<usize> {
        match &self.rows {
            None => Ok(n.index()),
            Some(map) => map
                .get(&n)
                .copied()
                .ok_or_else(|| ModelError::MissingNode(format!("{n:?}"))),
        }
    }

    pub fn gather(&self, b: &mut Bound, nodes: &[NodeId]) -> Result<Tensor> {
        let idx = nodes
            .iter()
            .map(|&n| self.row(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(b.tape.select_rows(self.matrix, &idx)?)
    }
}

/// Primitive embeddings of every node of `g`, one row per node id.
pub fn embed_all(params: &Params, g: &HeteroGraph, vocab: &Vocabulary) -> Result<Matrix> {
    let mut b = Bound::new(params, false);
    let ids: Vec<NodeId> = g.nodes().map(|(id, _)| id).collect();
    let table = NodeTable::embed(&mut b, g, vocab, &ids)?;
    let src = b.tape.value(table.matrix);
    let mut out = Array2::zeros((ids.len(), src.ncols()));
    for id in ids {
        out.row_mut(id.index()).assign(&src.row(table.row(id)?));
    }
    Ok(out)
}

/// FFN embedding of one dense raw feature row.
pub fn init_embedding(b: &mut Bound, node_type: &str, raw: &Matrix) -> Result<Tensor> {
    let name = ffn_hidden(node_type);
    let expected = b.params().get(&name)?.nrows();
    if raw.nrows() != 1 || raw.ncols() != expected {
        return Err(ModelError::Shape {
            name,
            expected: (1, expected),
            found: raw.dim(),
        });
    }
    let wh = b.p(&name)?;
    let wo = b.p(&ffn_out(node_type))?;
    let x = b.tape.constant(raw.clone());
    let h = b.tape.matmul(x, wh)?;
    let h = b.tape.relu(h);
    Ok(b.tape.matmul(h, wo)?)
}

fn relational_messages(
    b: &mut Bound,
    n_parents: usize,
    child: Tensor,
    links: &LayerLinks,
    hop: usize,
) -> Result<Tensor> {
    let n_child = b.tape.shape(child).0;
    let mut adjacency: BTreeMap<Relation, Matrix> = BTreeMap::new();
    for (i, kids) in links.iter().enumerate() {
        for &(c, r) in kids {
            adjacency
                .entry(r)
                .or_insert_with(|| Array2::zeros((n_parents, n_child)))[[i, c]] += 1.0;
        }
    }
    let mut total = None;
    for (r, a) in adjacency {
        let a = b.tape.constant(a);
        let gathered = b.tape.matmul(a, child)?;
        let w = b.p(&rhmp_relation(r, hop))?;
        let m = b.tape.matmul(gathered, w)?;
        total = Some(match total {
            None => m,
            Some(t) => b.tape.add(t, m)?,
        });
    }
    total.ok_or(ModelError::Empty("relational messages"))
}

fn attention_messages(
    b: &mut Bound,
    parents: Tensor,
    child: Tensor,
    links: &LayerLinks,
    hop: usize,
    cfg: &ModelConfig,
) -> Result<Tensor> {
    let d = cfg.dim;
    let n_parents = b.tape.shape(parents).0;
    let mut from = Vec::new();
    let mut to = Vec::new();
    for (i, kids) in links.iter().enumerate() {
        for &(c, _) in kids {
            from.push(i);
            to.push(c);
        }
    }
    let q = if cfg.flags.single_attention {
        b.p(AHMP_SHARED_QUERY)?
    } else {
        b.p(&ahmp_query(hop))?
    };
    let q_center = b.tape.slice_cols(q, 0, d)?;
    let q_center = b.tape.transpose(q_center);
    let q_neighbor = b.tape.slice_cols(q, d, 2 * d)?;
    let q_neighbor = b.tape.transpose(q_neighbor);
    let center_part = b.tape.matmul(parents, q_center)?;
    let neighbor_part = b.tape.matmul(child, q_neighbor)?;
    let center_part = b.tape.select_rows(center_part, &from)?;
    let neighbor_part = b.tape.select_rows(neighbor_part, &to)?;
    let logits = b.tape.add(center_part, neighbor_part)?;
    let logits = b.tape.leaky_relu(logits, cfg.leaky_slope);
    let alpha = b.tape.segment_softmax(logits, &from)?;
    let neighbors = b.tape.select_rows(child, &to)?;
    let weighted = b.tape.scale_rows(neighbors, alpha)?;
    let mut scatter = Array2::zeros((n_parents, from.len()));
    for (k, &p) in from.iter().enumerate() {
        scatter[[p, k]] = 1.0;
    }
    let scatter = b.tape.constant(scatter);
    Ok(b.tape.matmul(scatter, weighted)?)
}

fn propagate(
    b: &mut Bound,
    view: &SessionSubgraph,
    table: &NodeTable,
    cfg: &ModelConfig,
    attention: bool,
) -> Result<Tensor> {
    let h = cfg.layers;
    let mut states: Vec<Option<Tensor>> = Vec::with_capacity(h + 1);
    for l in 0..=h {
        states.push(match view.layers.get(l) {
            Some(nodes) if !nodes.is_empty() => Some(table.gather(b, nodes)?),
            _ => None,
        });
    }
    for hop in 1..=h {
        let w0 = b.p(&if attention {
            ahmp_self(hop)
        } else {
            rhmp_self(hop)
        })?;
        let mut next = Vec::with_capacity(h - hop + 1);
        for l in 0..=(h - hop) {
            let Some(cur) = states[l] else {
                next.push(None);
                continue;
            };
            let mut acc = b.tape.matmul(cur, w0)?;
            let links = view
                .links
                .get(l)
                .filter(|ls| ls.iter().any(|k| !k.is_empty()));
            if let (Some(child), Some(links)) = (states[l + 1], links) {
                let msg = if attention {
                    attention_messages(b, cur, child, links, hop, cfg)?
                } else {
                    let n_parents = b.tape.shape(cur).0;
                    relational_messages(b, n_parents, child, links, hop)?
                };
                acc = b.tape.add(acc, msg)?;
            }
            next.push(Some(acc));
        }
        states = next;
    }
    states[0].ok_or(ModelError::Empty("message passing root"))
}

/// Relational message passing from the root of `view`; returns its 1×d
/// embedding after `cfg.layers` hops.
pub fn rhmp(
    b: &mut Bound,
    view: &SessionSubgraph,
    table: &NodeTable,
    cfg: &ModelConfig,
) -> Result<Tensor> {
    propagate(b, view, table, cfg, false)
}

/// Attention message passing from the root of `view`.
pub fn ahmp(
    b: &mut Bound,
    view: &SessionSubgraph,
    table: &NodeTable,
    cfg: &ModelConfig,
) -> Result<Tensor> {
    propagate(b, view, table, cfg, true)
}

/// Concatenates the two center embeddings, zeroing the ablated side.
pub fn fuse(b: &mut Bound, x: Tensor, y: Tensor, flags: &Ablation) -> Result<Tensor> {
    let x = if flags.no_relation {
        let shape = b.tape.shape(x);
        b.tape.zeros(shape.0, shape.1)
    } else {
        x
    };
    let y = if flags.no_attention {
        let shape = b.tape.shape(y);
        b.tape.zeros(shape.0, shape.1)
    } else {
        y
    };
    Ok(b.tape.concat(x, y)?)
}

fn center_embedding(
    b: &mut Bound,
    view: &SessionSubgraph,
    table: &NodeTable,
    cfg: &ModelConfig,
) -> Result<Tensor> {
    let d = cfg.dim;
    let x = if cfg.flags.no_relation {
        b.tape.zeros(1, d)
    } else {
        rhmp(b, view, table, cfg)?
    };
    let y = if cfg.flags.no_attention {
        b.tape.zeros(1, d)
    } else {
        ahmp(b, view, table, cfg)?
    };
    fuse(b, x, y, &cfg.flags)
}

/// Embeddings of one session: the user and each contained video, 1×2d each.
pub struct SessionEmbeddings {
    pub user: Tensor,
    pub videos: Vec<Tensor>,
}

/// Embeds the session root, then re-centers on each contained video by
/// reversing its user→video edge.
pub fn session_embeddings(
    b: &mut Bound,
    sub: &SessionSubgraph,
    table: &NodeTable,
    cfg: &ModelConfig,
) -> Result<SessionEmbeddings> {
    let user = center_embedding(b, sub, table, cfg)?;
    let mut videos = Vec::with_capacity(sub.contained_videos.len());
    for v in sub.videos() {
        let view = sub.reverse_center(v)?;
        videos.push(center_embedding(b, &view, table, cfg)?);
    }
    Ok(SessionEmbeddings { user, videos })
}

/// Summarizes a session's video embeddings (in time order) into one 1×2d
/// vector: the mean of LSTM hidden outputs, or the plain mean.
pub fn aggregate_session(b: &mut Bound, videos: &[Tensor], cfg: &ModelConfig) -> Result<Tensor> {
    if videos.is_empty() {
        return Err(ModelError::Empty("session aggregation"));
    }
    if cfg.flags.mean_instead_of_lstm {
        let stacked = b.tape.stack_rows(videos)?;
        return Ok(b.tape.mean_rows(stacked)?);
    }
    let width = b.tape.shape(videos[0]).1;
    let mut gates = Vec::with_capacity(4);
    for gate in LSTM_GATES {
        gates.push((
            b.p(&lstm_param(gate, "w"))?,
            b.p(&lstm_param(gate, "u"))?,
            b.p(&lstm_param(gate, "b"))?,
        ));
    }
    let mut h = b.tape.zeros(1, width);
    let mut c = b.tape.zeros(1, width);
    let mut outputs = Vec::with_capacity(videos.len());
    for &x in videos {
        let mut pre = Vec::with_capacity(4);
        for &(w, u, bias) in &gates {
            let xw = b.tape.matmul(x, w)?;
            let hu = b.tape.matmul(h, u)?;
            let s = b.tape.add(xw, hu)?;
            pre.push(b.tape.add(s, bias)?);
        }
        let input = b.tape.sigmoid(pre[0]);
        let forget = b.tape.sigmoid(pre[1]);
        let candidate = b.tape.tanh(pre[2]);
        let output = b.tape.sigmoid(pre[3]);
        let kept = b.tape.mul(forget, c)?;
        let added = b.tape.mul(input, candidate)?;
        c = b.tape.add(kept, added)?;
        let squashed = b.tape.tanh(c);
        h = b.tape.mul(output, squashed)?;
        outputs.push(h);
    }
    let stacked = b.tape.stack_rows(&outputs)?;
    Ok(b.tape.mean_rows(stacked)?)
}

/// Latest-session embeddings after fusing in the historical sessions.
pub struct Attended {
    pub user: Tensor,
    pub videos: Vec<Tensor>,
}

fn similarity_average(
    b: &mut Bound,
    query: Tensor,
    keys: Tensor,
    projected: Tensor,
    eps: f64,
) -> Result<Tensor> {
    let keys_t = b.tape.transpose(keys);
    let sims = b.tape.matmul(query, keys_t)?;
    let weighted = b.tape.matmul(sims, projected)?;
    let total = b.tape.sum(sims);
    let total = b.tape.guard(total, eps);
    Ok(b.tape.div_by(weighted, total)?)
}

/// Similarity-weighted average of projected historical summaries.
///
/// `history` holds `(user embedding, session summary)` per historical
/// session. With no history (or `no_historical`) the latest embeddings are
/// only projected.
pub fn session_attention(
    b: &mut Bound,
    latest: &SessionEmbeddings,
    history: &[(Tensor, Tensor)],
    cfg: &ModelConfig,
) -> Result<Attended> {
    let w = b.p(SESSION_PROJECTION)?;
    if cfg.flags.no_historical || history.is_empty() {
        let user = b.tape.matmul(latest.user, w)?;
        let videos = latest
            .videos
            .iter()
            .map(|&v| Ok(b.tape.matmul(v, w)?))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Attended { user, videos });
    }
    let users: Vec<Tensor> = history.iter().map(|h| h.0).collect();
    let summaries: Vec<Tensor> = history.iter().map(|h| h.1).collect();
    let users = b.tape.stack_rows(&users)?;
    let summaries = b.tape.stack_rows(&summaries)?;
    let users_proj = b.tape.matmul(users, w)?;
    let summaries_proj = b.tape.matmul(summaries, w)?;
    let mut videos = Vec::with_capacity(latest.videos.len());
    for &v in &latest.videos {
        videos.push(similarity_average(
            b,
            v,
            summaries,
            summaries_proj,
            cfg.epsilon,
        )?);
    }
    let user = similarity_average(b, latest.user, users, users_proj, cfg.epsilon)?;
    Ok(Attended { user, videos })
}

/// Candidate embedding from the mean primitive embedding of each neighbor
/// type (the target user excluded), averaged over types and duplicated to
/// width 2d.
pub fn sample_embed(
    b: &mut Bound,
    g: &HeteroGraph,
    table: &NodeTable,
    video: NodeId,
    target: NodeId,
) -> Result<Tensor> {
    let groups = g.neighbors_by_type(video, Some(target));
    let mut means = Vec::with_capacity(groups.len());
    for ids in groups.values() {
        let rows = table.gather(b, ids)?;
        means.push(b.tape.mean_rows(rows)?);
    }
    if means.is_empty() {
        return Err(ModelError::IsolatedNode(g.node(video).id.clone()));
    }
    let stacked = b.tape.stack_rows(&means)?;
    let z = b.tape.mean_rows(stacked)?;
    Ok(b.tape.concat(z, z)?)
}

/// Neighbors that [`sample_embed`] reads for `video`.
pub fn sample_neighbors(g: &HeteroGraph, video: NodeId, target: NodeId) -> Vec<NodeId> {
    g.neighbors_by_type(video, Some(target))
        .into_values()
        .flatten()
        .collect()
}

/// `⟨user, c⟩ + Σ_v ⟨video_v, c⟩`.
pub fn score(b: &mut Bound, user: Tensor, videos: &[Tensor], candidate: Tensor) -> Result<Tensor> {
    let mut total = user;
    for &v in videos {
        total = b.tape.add(total, v)?;
    }
    Ok(b.tape.dot(total, candidate)?)
}

/// Sessions of one target user, oldest first.
#[derive(Debug, Clone)]
pub struct UserSessions {
    pub user: NodeId,
    pub sessions: Vec<SessionSubgraph>,
}

impl UserSessions {
    pub fn build(g: &HeteroGraph, user: &NodeRef, cfg: &GraphConfig) -> Result<Self> {
        let local = build_local(g, user, cfg)?;
        let sessions = split_sessions(&local, cfg)?;
        Ok(Self {
            user: local.root,
            sessions,
        })
    }

    /// Sessions a forward pass under `flags` reads.
    pub fn used(&self, flags: &Ablation) -> &[SessionSubgraph] {
        if flags.no_historical {
            &self.sessions[self.sessions.len() - 1..]
        } else {
            &self.sessions
        }
    }

    /// Every node appearing in a used session, up to `layers` hops.
    pub fn nodes(&self, flags: &Ablation, layers: usize) -> Vec<NodeId> {
        let mut out = Vec::new();
        for s in self.used(flags) {
            for layer in s.layers.iter().take(layers + 1) {
                out.extend_from_slice(layer);
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Full user representation: session embeddings of every used session,
/// aggregation of the historical ones and session attention.
pub fn represent_user(
    b: &mut Bound,
    user: &UserSessions,
    table: &NodeTable,
    cfg: &ModelConfig,
) -> Result<Attended> {
    let used = user.used(&cfg.flags);
    let (latest, past) = used
        .split_last()
        .ok_or(ModelError::Empty("user sessions"))?;
    let mut history = Vec::with_capacity(past.len());
    for s in past {
        let e = session_embeddings(b, s, table, cfg)?;
        let summary = aggregate_session(b, &e.videos, cfg)?;
        history.push((e.user, summary));
    }
    let latest = session_embeddings(b, latest, table, cfg)?;
    session_attention(b, &latest, &history, cfg)
}

/// A trained model: configuration, feature vocabulary and parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub graph: GraphConfig,
    pub vocab: Vocabulary,
    pub params: Params,
}

impl Model {
    /// Scores `candidates` for `user`. Candidates absent from `g` or without
    /// neighbors score `None`.
    pub fn score_candidates(
        &self,
        g: &HeteroGraph,
        embeddings: &Matrix,
        user: &NodeRef,
        candidates: &[NodeRef],
    ) -> Result<Vec<Option<f64>>> {
        let sessions = UserSessions::build(g, user, &self.graph)?;
        let mut b = Bound::new(&self.params, false);
        let table = NodeTable::full(&mut b, embeddings);
        let repr = represent_user(&mut b, &sessions, &table, &self.config)?;
        let mut out = Vec::with_capacity(candidates.len());
        for c in candidates {
            let Some(v) = g.id(c) else {
                out.push(None);
                continue;
            };
            match sample_embed(&mut b, g, &table, v, sessions.user) {
                Ok(z) => {
                    let s = score(&mut b, repr.user, &repr.videos, z)?;
                    out.push(Some(b.tape.item(s)));
                }
                Err(ModelError::IsolatedNode(_)) => out.push(None),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Fused center embedding width of every view of every session of
    /// `user`, for shape checks.
    pub fn fused_widths(&self, g: &HeteroGraph, user: &NodeRef) -> Result<Vec<usize>> {
        let sessions = UserSessions::build(g, user, &self.graph)?;
        let embeddings = embed_all(&self.params, g, &self.vocab)?;
        let mut b = Bound::new(&self.params, false);
        let table = NodeTable::full(&mut b, &embeddings);
        let mut widths = Vec::new();
        for s in sessions.used(&self.config.flags) {
            let e = session_embeddings(&mut b, s, &table, &self.config)?;
            widths.push(b.tape.shape(e.user).1);
            widths.extend(e.videos.iter().map(|&v| b.tape.shape(v).1));
        }
        Ok(widths)
    }
}
