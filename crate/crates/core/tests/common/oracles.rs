//! Literal, loop-based reference implementations. They share nothing with
//! the library beyond parameter names and plain data, so agreement is an
//! independent check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hgrec_core::graph::{NodeId, SubEdge};
use hgrec_core::model::{
    ahmp_query, ahmp_self, rhmp_relation, rhmp_self, Params, AHMP_SHARED_QUERY,
};
use hgrec_core::numerics::Matrix;

pub type Vector = Vec<f64>;

pub fn row(m: &Matrix, i: usize) -> Vector {
    (0..m.ncols()).map(|j| m[[i, j]]).collect()
}

/// `x · W` for a row vector `x`.
pub fn vec_mat(x: &[f64], w: &Matrix) -> Vector {
    assert_eq!(x.len(), w.nrows());
    (0..w.ncols())
        .map(|j| (0..x.len()).map(|i| x[i] * w[[i, j]]).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn add_into(acc: &mut [f64], x: &[f64], scale: f64) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}

fn out_edges(edges: &[SubEdge], node: NodeId) -> Vec<SubEdge> {
    edges.iter().filter(|e| e.src == node).copied().collect()
}

fn dedup_edges(edges: &[SubEdge]) -> Vec<SubEdge> {
    let mut e = edges.to_vec();
    e.sort();
    e.dedup();
    e
}

/// Relational propagation: after `k` hops a node is its own previous state
/// times the hop's self matrix plus, for every out-edge, the neighbor's
/// previous state times the hop's matrix for that edge's relation.
pub fn rhmp(prim: &Matrix, edges: &[SubEdge], root: NodeId, hops: usize, p: &Params) -> Vector {
    fn go(prim: &Matrix, edges: &[SubEdge], n: NodeId, k: usize, p: &Params) -> Vector {
        if k == 0 {
            return row(prim, n.index());
        }
        let mut out = vec_mat(&go(prim, edges, n, k - 1, p), p.get(&rhmp_self(k)).unwrap());
        for e in out_edges(edges, n) {
            let child = go(prim, edges, e.dst, k - 1, p);
            add_into(
                &mut out,
                &vec_mat(&child, p.get(&rhmp_relation(e.relation, k)).unwrap()),
                1.0,
            );
        }
        out
    }
    go(prim, &dedup_edges(edges), root, hops, p)
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Attention propagation: the self term uses the hop's self matrix, the
/// neighbor term is a softmax-weighted sum of neighbor states with logits
/// `leaky(q_center · self + q_neighbor · neighbor)`.
pub fn ahmp(
    prim: &Matrix,
    edges: &[SubEdge],
    root: NodeId,
    hops: usize,
    p: &Params,
    slope: f64,
    shared_query: bool,
) -> Vector {
    fn go(
        prim: &Matrix,
        edges: &[SubEdge],
        n: NodeId,
        k: usize,
        p: &Params,
        slope: f64,
        shared: bool,
    ) -> Vector {
        if k == 0 {
            return row(prim, n.index());
        }
        let prev = go(prim, edges, n, k - 1, p, slope, shared);
        let mut out = vec_mat(&prev, p.get(&ahmp_self(k)).unwrap());
        let kids: Vec<Vector> = out_edges(edges, n)
            .iter()
            .map(|e| go(prim, edges, e.dst, k - 1, p, slope, shared))
            .collect();
        if kids.is_empty() {
            return out;
        }
        let q = if shared {
            p.get(AHMP_SHARED_QUERY).unwrap()
        } else {
            p.get(&ahmp_query(k)).unwrap()
        };
        let d = prev.len();
        let qc: Vector = (0..d).map(|j| q[[0, j]]).collect();
        let qn: Vector = (0..d).map(|j| q[[0, d + j]]).collect();
        let logits: Vector = kids
            .iter()
            .map(|c| leaky(dot(&qc, &prev) + dot(&qn, c), slope))
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vector = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (c, e) in kids.iter().zip(&exps) {
            add_into(&mut out, c, e / z);
        }
        out
    }
    go(
        prim,
        &dedup_edges(edges),
        root,
        hops,
        p,
        slope,
        shared_query,
    )
}

/// Weighted average `Σ_i (q · k_i) (k_i W) / Σ_i (q · k_i)`, with the
/// denominator pushed away from zero to magnitude `eps`.
pub fn similarity_average(query: &[f64], keys: &[Vector], w: &Matrix, eps: f64) -> Vector {
    let sims: Vector = keys.iter().map(|k| dot(query, k)).collect();
    let mut total: f64 = sims.iter().sum();
    if total.abs() < eps {
        total = if total < 0.0 { -eps } else { eps };
    }
    let mut out = vec![0.0; w.ncols()];
    for (k, s) in keys.iter().zip(&sims) {
        add_into(&mut out, &vec_mat(k, w), s / total);
    }
    out
}

/// Session attention over `(user, summary)` pairs of historical sessions.
pub fn session_attention(
    latest_user: &[f64],
    latest_videos: &[Vector],
    history: &[(Vector, Vector)],
    w: &Matrix,
    eps: f64,
) -> (Vector, Vec<Vector>) {
    if history.is_empty() {
        return (
            vec_mat(latest_user, w),
            latest_videos.iter().map(|v| vec_mat(v, w)).collect(),
        );
    }
    let users: Vec<Vector> = history.iter().map(|h| h.0.clone()).collect();
    let summaries: Vec<Vector> = history.iter().map(|h| h.1.clone()).collect();
    (
        similarity_average(latest_user, &users, w, eps),
        latest_videos
            .iter()
            .map(|v| similarity_average(v, &summaries, w, eps))
            .collect(),
    )
}

/// Candidate embedding: mean over neighbor types of the mean neighbor
/// embedding of that type, written twice side by side.
pub fn sample(groups: &BTreeMap<String, Vec<Vector>>) -> Vector {
    let d = groups.values().next().unwrap()[0].len();
    let mut z = vec![0.0; d];
    for members in groups.values() {
        for m in members {
            add_into(&mut z, m, 1.0 / (members.len() * groups.len()) as f64);
        }
    }
    let mut out = z.clone();
    out.extend(z);
    out
}

/// `⟨user, c⟩ + Σ_v ⟨v, c⟩`.
pub fn score(user: &[f64], videos: &[Vector], candidate: &[f64]) -> f64 {
    dot(user, candidate) + videos.iter().map(|v| dot(v, candidate)).sum::<f64>()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean of the hidden outputs of a textbook LSTM run over `xs`.
pub fn lstm_mean(xs: &[Vector], gates: &[(Matrix, Matrix, Matrix); 4]) -> Vector {
    let d = xs[0].len();
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for x in xs {
        let pre: Vec<Vector> = gates
            .iter()
            .map(|(w, u, b)| {
                let xw = vec_mat(x, w);
                let hu = vec_mat(&h, u);
                (0..d).map(|j| xw[j] + hu[j] + b[[0, j]]).collect()
            })
            .collect();
        for j in 0..d {
            let i = sigmoid(pre[0][j]);
            let f = sigmoid(pre[1][j]);
            let g = pre[2][j].tanh();
            let o = sigmoid(pre[3][j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        add_into(&mut acc, &h, 1.0 / xs.len() as f64);
    }
    acc
}

/// Relevant items among the first `min(k, n)` positions over `min(k, n)`.
pub fn precision(relevant: &[bool], k: usize) -> f64 {
    let n = k.min(relevant.len());
    if n == 0 {
        return 0.0;
    }
    let mut hits = 0;
    for r in relevant.iter().take(n) {
        if *r {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

/// DCG over ideal DCG, rank `i` (from 1) discounted by `log2(i + 1)`.
pub fn ndcg(relevant: &[bool], k: usize) -> f64 {
    let n = k.min(relevant.len());
    let mut dcg = 0.0;
    for i in 1..=n {
        if relevant[i - 1] {
            dcg += 1.0 / ((i + 1) as f64).log2();
        }
    }
    let mut ideal_order = relevant.to_vec();
    ideal_order.sort_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for i in 1..=n {
        if ideal_order[i - 1] {
            idcg += 1.0 / ((i + 1) as f64).log2();
        }
    }
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Mean over correctly recommended videos (union over lists) of the mean
/// `t - t0` over that video's interactions. Videos are visited in id order
/// so that the floating-point sum is reproducible.
pub fn c_timeliness(
    lists: &[(Vec<String>, Vec<bool>)],
    times: &BTreeMap<String, Vec<i64>>,
    k: usize,
    t0: i64,
) -> Option<f64> {
    let mut hit: Vec<&String> = Vec::new();
    for (videos, rel) in lists {
        for i in 0..k.min(videos.len()) {
            if rel[i] && !hit.contains(&&videos[i]) {
                hit.push(&videos[i]);
            }
        }
    }
    hit.sort();
    let mut fresh = Vec::new();
    for v in hit {
        if let Some(ts) = times.get(v).filter(|t| !t.is_empty()) {
            fresh.push(ts.iter().map(|t| (t - t0) as f64).sum::<f64>() / ts.len() as f64);
        }
    }
    if fresh.is_empty() {
        None
    } else {
        Some(fresh.iter().sum::<f64>() / fresh.len() as f64)
    }
}
