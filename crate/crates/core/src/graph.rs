//! Heterogeneous interaction graph, per-user time-warped local graphs and
//! their session subgraphs.
//!
//! The global graph holds one node per user, video and attribute value with
//! typed, directed edges in both directions. A local graph is grown
//! breadth-first from a target user: layer 1 holds the user's most recent
//! positively interacted videos in time order, deeper layers add each node's
//! attributes and its `m'` most recent interaction partners. The local graph
//! is then cut into sessions of `m` consecutive layer-1 videos, each carrying
//! the branches hanging below its videos.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::data::{AttrType, Dataset, InteractionKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeRef),
    #[error("user {user} has {found} positive interactions, at least {needed} required")]
    InsufficientHistory {
        user: String,
        found: usize,
        needed: usize,
    },
    #[error("local graph of {0} yields no full session")]
    NoSession(String),
    #[error("invalid graph config: {0}")]
    Config(String),
    #[error("{center} has no edge to {target} to reverse")]
    NoSuchEdge { center: String, target: String },
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    User,
    Video,
    Attr(AttrType),
}

impl NodeType {
    pub fn name(&self) -> &str {
        match self {
            Self::User => "user",
            Self::Video => "video",
            Self::Attr(a) => a.as_str(),
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub node_type: NodeType,
    pub id: String,
}

impl NodeRef {
    pub fn new(node_type: NodeType, id: impl Into<String>) -> Self {
        Self {
            node_type,
            id: id.into(),
        }
    }

    pub fn user(id: impl Into<String>) -> Self {
        Self::new(NodeType::User, id)
    }

    pub fn video(id: impl Into<String>) -> Self {
        Self::new(NodeType::Video, id)
    }

    pub fn attr(ty: AttrType, id: impl Into<String>) -> Self {
        Self::new(NodeType::Attr(ty), id)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node_type, self.id)
    }
}

/// Edge labels. Every relation has a reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    LikeV2u,
    LikeU2v,
    FinishV2u,
    FinishU2v,
    ProduceU2v,
    ProduceV2u,
    AttrA2v,
    AttrV2a,
}

impl Relation {
    pub const ALL: [Relation; 8] = [
        Relation::LikeV2u,
        Relation::LikeU2v,
        Relation::FinishV2u,
        Relation::FinishU2v,
        Relation::ProduceU2v,
        Relation::ProduceV2u,
        Relation::AttrA2v,
        Relation::AttrV2a,
    ];

    pub fn reverse(self) -> Self {
        match self {
            Self::LikeV2u => Self::LikeU2v,
            Self::LikeU2v => Self::LikeV2u,
            Self::FinishV2u => Self::FinishU2v,
            Self::FinishU2v => Self::FinishV2u,
            Self::ProduceU2v => Self::ProduceV2u,
            Self::ProduceV2u => Self::ProduceU2v,
            Self::AttrA2v => Self::AttrV2a,
            Self::AttrV2a => Self::AttrA2v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LikeV2u => "like_v2u",
            Self::LikeU2v => "like_u2v",
            Self::FinishV2u => "finish_v2u",
            Self::FinishU2v => "finish_u2v",
            Self::ProduceU2v => "produce_u2v",
            Self::ProduceV2u => "produce_v2u",
            Self::AttrA2v => "attr_a2v",
            Self::AttrV2a => "attr_v2a",
        }
    }

    /// Relation pair (user→video, video→user) for an interaction kind, if
    /// the kind produces graph edges.
    pub fn for_kind(kind: InteractionKind) -> Option<(Self, Self)> {
        match kind {
            InteractionKind::Like => Some((Self::LikeU2v, Self::LikeV2u)),
            InteractionKind::Finish => Some((Self::FinishU2v, Self::FinishV2u)),
            InteractionKind::Produce => Some((Self::ProduceU2v, Self::ProduceV2u)),
            InteractionKind::NonInteraction => None,
        }
    }

    fn is_positive_u2v(self) -> bool {
        matches!(self, Self::LikeU2v | Self::FinishU2v)
    }

    fn is_u2v(self) -> bool {
        matches!(self, Self::LikeU2v | Self::FinishU2v | Self::ProduceU2v)
    }

    fn is_v2u(self) -> bool {
        matches!(self, Self::LikeV2u | Self::FinishV2u | Self::ProduceV2u)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense index of a node inside a [`HeteroGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacent {
    pub dst: NodeId,
    pub relation: Relation,
    /// Interaction time for user↔video edges, `None` for attribute edges.
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: Relation,
    pub timestamp: Option<i64>,
}

/// Global multi-relational directed graph.
#[derive(Debug, Clone, Default)]
pub struct HeteroGraph {
    nodes: Vec<NodeRef>,
    index: HashMap<NodeRef, NodeId>,
    adjacency: Vec<Vec<Adjacent>>,
}

impl HeteroGraph {
    fn intern(&mut self, node: NodeRef) -> NodeId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.index.insert(node.clone(), id);
        self.nodes.push(node);
        self.adjacency.push(Vec::new());
        id
    }

    fn add_edge(&mut self, src: NodeId, dst: NodeId, relation: Relation, timestamp: Option<i64>) {
        self.adjacency[src.index()].push(Adjacent {
            dst,
            relation,
            timestamp,
        });
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn node(&self, id: NodeId) -> &NodeRef {
        &self.nodes[id.index()]
    }

    pub fn id(&self, node: &NodeRef) -> Option<NodeId> {
        self.index.get(node).copied()
    }

    pub fn require(&self, node: &NodeRef) -> Result<NodeId> {
        self.id(node)
            .ok_or_else(|| GraphError::UnknownNode(node.clone()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeRef)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn count_of_type(&self, ty: &NodeType) -> usize {
        self.nodes.iter().filter(|n| &n.node_type == ty).count()
    }

    pub fn adjacent(&self, id: NodeId) -> &[Adjacent] {
        &self.adjacency[id.index()]
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(s, adj)| {
            adj.iter().map(move |a| Edge {
                src: NodeId(s as u32),
                dst: a.dst,
                relation: a.relation,
                timestamp: a.timestamp,
            })
        })
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId, relation: Relation) -> bool {
        self.adjacent(src)
            .iter()
            .any(|a| a.dst == dst && a.relation == relation)
    }

    /// One-hop neighbors of `node` grouped by node type, deduplicated and
    /// sorted, with `exclude` removed.
    pub fn neighbors_by_type(
        &self,
        node: NodeId,
        exclude: Option<NodeId>,
    ) -> BTreeMap<NodeType, Vec<NodeId>> {
        let mut groups: BTreeMap<NodeType, Vec<NodeId>> = BTreeMap::new();
        for a in self.adjacent(node) {
            if Some(a.dst) == exclude {
                continue;
            }
            groups
                .entry(self.node(a.dst).node_type.clone())
                .or_default()
                .push(a.dst);
        }
        for ids in groups.values_mut() {
            ids.sort();
            ids.dedup();
        }
        groups
    }

    /// Latest positive interaction time of every user adjacent to `video`.
    pub fn interaction_times(&self, video: NodeId) -> BTreeMap<NodeId, i64> {
        let mut out: BTreeMap<NodeId, i64> = BTreeMap::new();
        for a in self.adjacent(video) {
            if !matches!(a.relation, Relation::LikeV2u | Relation::FinishV2u) {
                continue;
            }
            if let Some(ts) = a.timestamp {
                let e = out.entry(a.dst).or_insert(ts);
                *e = (*e).max(ts);
            }
        }
        out
    }

    /// Number of distinct users with a positive edge to each video.
    pub fn positive_counts(&self) -> HashMap<NodeId, usize> {
        let mut out = HashMap::new();
        for (id, node) in self.nodes() {
            if node.node_type != NodeType::Video {
                continue;
            }
            let users: HashSet<NodeId> = self
                .adjacent(id)
                .iter()
                .filter(|a| matches!(a.relation, Relation::LikeV2u | Relation::FinishV2u))
                .map(|a| a.dst)
                .collect();
            out.insert(id, users.len());
        }
        out
    }

    /// Writes every edge as one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_edges_jsonl(self, self.edges(), out)
    }
}

#[derive(Serialize)]
struct EdgeLine<'a> {
    src_type: &'a str,
    src_id: &'a str,
    dst_type: &'a str,
    dst_id: &'a str,
    relation: Relation,
    timestamp: Option<i64>,
}

/// Dumps `edges` (resolved against `g`) as JSON lines.
pub fn write_edges_jsonl<W: Write>(
    g: &HeteroGraph,
    edges: impl IntoIterator<Item = Edge>,
    mut out: W,
) -> std::io::Result<()> {
    for e in edges {
        let (s, d) = (g.node(e.src), g.node(e.dst));
        let line = EdgeLine {
            src_type: s.node_type.name(),
            src_id: &s.id,
            dst_type: d.node_type.name(),
            dst_id: &d.id,
            relation: e.relation,
            timestamp: e.timestamp,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Builds the global graph. NonInteraction records add no edges: the
/// relation vocabulary has no label for them.
pub fn build_global(d: &Dataset) -> HeteroGraph {
    let mut g = HeteroGraph::default();
    for u in d.users() {
        g.intern(NodeRef::user(u.clone()));
    }
    for v in d.videos() {
        g.intern(NodeRef::video(v.clone()));
    }
    for a in d.attributes() {
        g.intern(NodeRef::attr(a.attr_type.clone(), a.attr_id.clone()));
    }
    for r in d.interactions() {
        let Some((u2v, v2u)) = Relation::for_kind(r.kind) else {
            continue;
        };
        let u = g.index[&NodeRef::user(r.user_id.clone())];
        let v = g.index[&NodeRef::video(r.video_id.clone())];
        g.add_edge(u, v, u2v, Some(r.timestamp));
        g.add_edge(v, u, v2u, Some(r.timestamp));
    }
    for a in d.attributes() {
        let v = g.index[&NodeRef::video(a.video_id.clone())];
        let at = g.index[&NodeRef::attr(a.attr_type.clone(), a.attr_id.clone())];
        g.add_edge(v, at, Relation::AttrV2a, None);
        g.add_edge(at, v, Relation::AttrA2v, None);
    }
    g
}

/// Sizes of local graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct GraphConfig {
    /// Maximum selected history length per user.
    pub max_history: usize,
    /// Videos per session.
    pub session_len: usize,
    /// Neighbors sampled per node.
    pub neighbors: usize,
    /// Number of layers.
    pub layers: usize,
    /// Maximum number of sessions kept.
    pub max_sessions: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            max_history: 12,
            session_len: 4,
            neighbors: 3,
            layers: 2,
            max_sessions: 3,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(GraphError::Config(m.to_string()));
        if self.session_len < 1 {
            return fail("session_len must be >= 1");
        }
        if self.neighbors < 1 {
            return fail("neighbors must be >= 1");
        }
        if self.layers < 2 {
            return fail("layers must be >= 2");
        }
        if self.max_sessions < 1 {
            return fail("max_sessions must be >= 1");
        }
        if self.session_len * self.max_sessions > self.max_history {
            return fail("session_len * max_sessions must not exceed max_history");
        }
        Ok(())
    }
}

/// Local time-warped graph of one target user.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGraph {
    pub root: NodeId,
    /// Layers 0..=h, each deduplicated in insertion order.
    pub layers: Vec<Vec<NodeId>>,
    /// Directed edges, deduplicated, in construction order.
    pub edges: Vec<Edge>,
    /// Layer-1 videos with their interaction times, ascending.
    pub history: Vec<(NodeId, i64)>,
}

fn latest_partners(
    g: &HeteroGraph,
    node: NodeId,
    keep: impl Fn(Relation) -> bool,
    exclude: NodeId,
    limit: usize,
) -> Vec<Adjacent> {
    let mut best: HashMap<NodeId, Adjacent> = HashMap::new();
    for a in g.adjacent(node) {
        if !keep(a.relation) || a.dst == exclude {
            continue;
        }
        let ts = a.timestamp.unwrap_or(i64::MIN);
        best.entry(a.dst)
            .and_modify(|cur| {
                let cts = cur.timestamp.unwrap_or(i64::MIN);
                if ts > cts || (ts == cts && a.relation < cur.relation) {
                    *cur = *a;
                }
            })
            .or_insert(*a);
    }
    let mut picked: Vec<Adjacent> = best.into_values().collect();
    picked.sort_by(|a, b| {
        b.timestamp
            .cmp(&a.timestamp)
            .then_with(|| g.node(a.dst).cmp(g.node(b.dst)))
    });
    picked.truncate(limit);
    picked
}

/// Grows the local graph of `user` breadth-first, keeping the most recent
/// edges at every step.
pub fn build_local(g: &HeteroGraph, user: &NodeRef, cfg: &GraphConfig) -> Result<LocalGraph> {
    cfg.validate()?;
    let root = g.require(user)?;

    // Layer 1: most recent positively interacted videos, one edge per video.
    let mut per_video: HashMap<NodeId, Adjacent> = HashMap::new();
    for a in g
        .adjacent(root)
        .iter()
        .filter(|a| a.relation.is_positive_u2v())
    {
        per_video
            .entry(a.dst)
            .and_modify(|cur| {
                if a.timestamp > cur.timestamp
                    || (a.timestamp == cur.timestamp && a.relation < cur.relation)
                {
                    *cur = *a;
                }
            })
            .or_insert(*a);
    }
    if per_video.len() < cfg.session_len {
        return Err(GraphError::InsufficientHistory {
            user: user.id.clone(),
            found: per_video.len(),
            needed: cfg.session_len,
        });
    }
    let mut timeline: Vec<Adjacent> = per_video.into_values().collect();
    timeline.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| g.node(a.dst).id.cmp(&g.node(b.dst).id))
    });
    let start = timeline.len().saturating_sub(cfg.max_history);
    let timeline = &timeline[start..];

    let mut edges = Vec::new();
    let mut seen_edges = HashSet::new();
    let mut push_edge = |e: Edge, edges: &mut Vec<Edge>| {
        if seen_edges.insert(e) {
            edges.push(e);
        }
    };
    let mut layers = vec![vec![root]];
    let mut first = Vec::with_capacity(timeline.len());
    for a in timeline {
        first.push(a.dst);
        push_edge(
            Edge {
                src: root,
                dst: a.dst,
                relation: a.relation,
                timestamp: a.timestamp,
            },
            &mut edges,
        );
    }
    let history = timeline
        .iter()
        .map(|a| (a.dst, a.timestamp.unwrap_or_default()))
        .collect();
    layers.push(first);

    for l in 2..=cfg.layers {
        let mut next = Vec::new();
        let mut in_next = HashSet::new();
        for &n in &layers[l - 1] {
            let mut found: Vec<Adjacent> = Vec::new();
            match g.node(n).node_type {
                NodeType::Video => {
                    let mut attrs: Vec<Adjacent> = g
                        .adjacent(n)
                        .iter()
                        .filter(|a| a.relation == Relation::AttrV2a)
                        .copied()
                        .collect();
                    attrs.sort_by(|a, b| g.node(a.dst).cmp(g.node(b.dst)));
                    attrs.dedup_by_key(|a| a.dst);
                    found.extend(attrs);
                    found.extend(latest_partners(g, n, Relation::is_v2u, root, cfg.neighbors));
                }
                NodeType::User => {
                    found.extend(latest_partners(g, n, Relation::is_u2v, root, cfg.neighbors));
                }
                NodeType::Attr(_) => {}
            }
            for a in found {
                push_edge(
                    Edge {
                        src: n,
                        dst: a.dst,
                        relation: a.relation,
                        timestamp: a.timestamp,
                    },
                    &mut edges,
                );
                if in_next.insert(a.dst) {
                    next.push(a.dst);
                }
            }
        }
        layers.push(next);
    }
    Ok(LocalGraph {
        root,
        layers,
        edges,
        history,
    })
}

/// Directed edge inside a session subgraph (timestamps are not needed past
/// construction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: Relation,
}

/// Child links of one layer: `children[i]` lists `(index in next layer,
/// relation)` for node `i`.
pub type LayerLinks = Vec<Vec<(usize, Relation)>>;

/// One rooted, layered session subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSubgraph {
    pub root: NodeId,
    pub session_index: usize,
    /// The session's videos with interaction times, ascending.
    pub contained_videos: Vec<(NodeId, i64)>,
    /// Sorted, deduplicated edge set.
    pub edges: Vec<SubEdge>,
    pub depth: usize,
    /// Layers 0..=depth as reached from `root`.
    pub layers: Vec<Vec<NodeId>>,
    /// `links[l][i]`: children of `layers[l][i]` inside `layers[l + 1]`.
    pub links: Vec<LayerLinks>,
}

impl SessionSubgraph {
    /// Builds the layered view of `edges` seen from `root`.
    pub fn new(
        root: NodeId,
        session_index: usize,
        contained_videos: Vec<(NodeId, i64)>,
        mut edges: Vec<SubEdge>,
        depth: usize,
    ) -> Self {
        edges.sort();
        edges.dedup();
        let mut out_edges: HashMap<NodeId, Vec<&SubEdge>> = HashMap::new();
        for e in &edges {
            out_edges.entry(e.src).or_default().push(e);
        }
        let mut layers = vec![vec![root]];
        let mut links = Vec::with_capacity(depth);
        for l in 0..depth {
            let mut next: Vec<NodeId> = Vec::new();
            let mut pos: HashMap<NodeId, usize> = HashMap::new();
            let mut layer_links = Vec::with_capacity(layers[l].len());
            for n in &layers[l] {
                let mut kids = Vec::new();
                for e in out_edges.get(n).map(Vec::as_slice).unwrap_or_default() {
                    let idx = *pos.entry(e.dst).or_insert_with(|| {
                        next.push(e.dst);
                        next.len() - 1
                    });
                    kids.push((idx, e.relation));
                }
                layer_links.push(kids);
            }
            links.push(layer_links);
            layers.push(next);
        }
        Self {
            root,
            session_index,
            contained_videos,
            edges,
            depth,
            layers,
            links,
        }
    }

    pub fn videos(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.contained_videos.iter().map(|(v, _)| *v)
    }

    /// Re-rooting: replaces the edge `root → target` by
    /// `target → root` carrying the reverse relation and makes `target` the
    /// new center.
    pub fn reverse_center(&self, target: NodeId) -> Result<Self> {
        let pos = self
            .edges
            .iter()
            .position(|e| e.src == self.root && e.dst == target)
            .ok_or_else(|| GraphError::NoSuchEdge {
                center: format!("{:?}", self.root),
                target: format!("{target:?}"),
            })?;
        let mut edges = self.edges.clone();
        let e = edges[pos];
        edges[pos] = SubEdge {
            src: target,
            dst: self.root,
            relation: e.relation.reverse(),
        };
        Ok(Self::new(
            target,
            self.session_index,
            self.contained_videos.clone(),
            edges,
            self.depth,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

/// Cuts a local graph into sessions of `session_len` consecutive layer-1 videos.
///
/// Sessions are aligned to the newest end: a partial group of the oldest
/// videos is dropped, and only the newest `max_sessions` sessions are kept.
/// The last returned session is the latest one.
pub fn split_sessions(local: &LocalGraph, cfg: &GraphConfig) -> Result<Vec<SessionSubgraph>> {
    let m = cfg.session_len;
    let total = local.history.len();
    let count = total / m;
    if count == 0 {
        return Err(GraphError::NoSession(format!("{:?}", local.root)));
    }
    let kept = count.min(cfg.max_sessions);
    let offset = total - kept * m;

    let mut out_edges: HashMap<NodeId, Vec<&Edge>> = HashMap::new();
    for e in &local.edges {
        out_edges.entry(e.src).or_default().push(e);
    }

    let mut sessions = Vec::with_capacity(kept);
    for i in 0..kept {
        let videos = &local.history[offset + i * m..offset + (i + 1) * m];
        let chosen: HashSet<NodeId> = videos.iter().map(|(v, _)| *v).collect();
        let mut edges = Vec::new();
        let mut frontier: Vec<NodeId> = vec![local.root];
        for depth in 0..cfg.layers {
            let mut next = Vec::new();
            let mut seen = HashSet::new();
            for n in &frontier {
                for e in out_edges.get(n).map(Vec::as_slice).unwrap_or_default() {
                    if depth == 0 && !chosen.contains(&e.dst) {
                        continue;
                    }
                    if *n == local.root && depth > 0 {
                        continue;
                    }
                    edges.push(SubEdge {
                        src: e.src,
                        dst: e.dst,
                        relation: e.relation,
                    });
                    if seen.insert(e.dst) {
                        next.push(e.dst);
                    }
                }
            }
            frontier = next;
        }
        sessions.push(SessionSubgraph::new(
            local.root,
            i,
            videos.to_vec(),
            edges,
            cfg.layers,
        ));
    }
    Ok(sessions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AttributeRecord, InteractionRecord};

    fn like(u: &str, v: &str, ts: i64) -> InteractionRecord {
        InteractionRecord::new(u, v, InteractionKind::Like, ts)
    }

    #[test]
    fn global_graph_single_like() {
        let (d, _) = Dataset::from_records(vec![like("u", "v", 1)], vec![]);
        let g = build_global(&d);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 2);
        let u = g.id(&NodeRef::user("u")).unwrap();
        let v = g.id(&NodeRef::video("v")).unwrap();
        assert!(g.has_edge(u, v, Relation::LikeU2v));
        assert!(g.has_edge(v, u, Relation::LikeV2u));
    }

    #[test]
    fn global_graph_attribute_edges() {
        let (d, _) = Dataset::from_records(
            vec![],
            vec![
                AttributeRecord::new("v", AttrType::Tag, "a"),
                AttributeRecord::new("v", AttrType::Tag, "b"),
            ],
        );
        let g = build_global(&d);
        assert_eq!(g.edge_count(), 4);
        assert!(g.edges().all(|e| e.timestamp.is_none()));
    }

    #[test]
    fn noninteraction_adds_no_edges() {
        let (d, _) = Dataset::from_records(
            vec![InteractionRecord::new(
                "u",
                "v",
                InteractionKind::NonInteraction,
                1,
            )],
            vec![],
        );
        let g = build_global(&d);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn relation_reverse_is_involution() {
        for r in Relation::ALL {
            assert_eq!(r.reverse().reverse(), r);
            assert_ne!(r.reverse(), r);
        }
    }

    fn chain_user(n: usize) -> (HeteroGraph, NodeRef) {
        let recs = (0..n)
            .map(|i| like("u", &format!("v{i:02}"), i as i64 * 10))
            .collect();
        let (d, _) = Dataset::from_records(recs, vec![]);
        (build_global(&d), NodeRef::user("u"))
    }

    fn cfg(m: usize, pi: usize, max_history: usize) -> GraphConfig {
        GraphConfig {
            max_history,
            session_len: m,
            neighbors: 1,
            layers: 2,
            max_sessions: pi,
        }
    }

    #[test]
    fn session_counts_follow_floor() {
        let (g, u) = chain_user(6);
        let local = build_local(&g, &u, &cfg(2, 10, 20)).unwrap();
        let s = split_sessions(&local, &cfg(2, 10, 20)).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2].contained_videos.last().unwrap().1, 50);

        let (g, u) = chain_user(7);
        let local = build_local(&g, &u, &cfg(2, 10, 20)).unwrap();
        let s = split_sessions(&local, &cfg(2, 10, 20)).unwrap();
        assert_eq!(s.len(), 3);
        let covered: Vec<i64> = s
            .iter()
            .flat_map(|x| x.contained_videos.iter().map(|p| p.1))
            .collect();
        assert_eq!(covered, vec![10, 20, 30, 40, 50, 60]);
    }

    #[test]
    fn session_cap_keeps_newest() {
        let (g, u) = chain_user(10);
        let c = cfg(2, 3, 10);
        let local = build_local(&g, &u, &c).unwrap();
        let s = split_sessions(&local, &c).unwrap();
        // Oracle: enumerate all sessions over the full history, drop the oldest.
        let all: Vec<Vec<i64>> = (0..5).map(|i| vec![i * 20, i * 20 + 10]).collect();
        let expected: Vec<i64> = all[2..].iter().flatten().copied().collect();
        let kept: Vec<i64> = s
            .iter()
            .flat_map(|x| x.contained_videos.iter().map(|p| p.1))
            .collect();
        assert_eq!(kept, expected);
    }

    #[test]
    fn insufficient_history_is_an_error() {
        let (g, u) = chain_user(1);
        assert!(matches!(
            build_local(&g, &u, &cfg(2, 1, 4)),
            Err(GraphError::InsufficientHistory {
                found: 1,
                needed: 2,
                ..
            })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2, 3, 6).validate().is_ok());
        assert!(cfg(2, 4, 6).validate().is_err());
        let mut c = cfg(2, 3, 6);
        c.layers = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn reversal_is_an_involution() {
        let (g, u) = chain_user(4);
        let c = cfg(2, 2, 4);
        let local = build_local(&g, &u, &c).unwrap();
        let s = &split_sessions(&local, &c).unwrap()[1];
        let v = s.contained_videos[0].0;
        let r = s.reverse_center(v).unwrap();
        assert_eq!(r.root, v);
        assert_ne!(r.edges, s.edges);
        let back = r.reverse_center(s.root).unwrap();
        assert_eq!(back, *s);
    }

    #[test]
    fn jsonl_dump_has_one_line_per_edge() {
        let (d, _) = Dataset::from_records(
            vec![like("u", "v", 7)],
            vec![AttributeRecord::new("v", AttrType::Audio, "s1")],
        );
        let g = build_global(&d);
        let mut buf = Vec::new();
        g.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["src_type"], "user");
        assert_eq!(first["relation"], "like_u2v");
        assert_eq!(first["timestamp"], 7);
    }
}
