//! Randomized agreement checks between the library and the loop oracles,
//! plus hand-built fixtures. Each check returns a measured quantity so that
//! callers choose their own tolerance and reporting.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use hgrec_core::data::{
    density_from_counts, AttrType, AttributeRecord, Dataset, InteractionKind, InteractionRecord,
};
use hgrec_core::eval::{c_timeliness_at_k, ndcg_at_k, precision_at_k, RankedList};
use hgrec_core::graph::SessionSubgraph;
use hgrec_core::graph::{
    build_global, build_local, split_sessions, GraphConfig, HeteroGraph, NodeId, NodeRef, Relation,
    SubEdge,
};
use hgrec_core::model::{
    aggregate_session, ahmp, ahmp_query, ahmp_self, lstm_param, rhmp, rhmp_relation, rhmp_self,
    sample_embed, score, session_attention, Ablation, Bound, ModelConfig, NodeTable, Params,
    SessionEmbeddings, Variant, AHMP_SHARED_QUERY, LSTM_GATES, SESSION_PROJECTION,
};
use hgrec_core::numerics::Matrix;
use hgrec_core::train::{
    draw_pairs, gradient_check, init_params, GradientCheck, TrainConfig, TrainSet,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracles;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "width mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn to_vec(m: &Matrix) -> Vec<f64> {
    assert_eq!(m.nrows(), 1);
    m.iter().copied().collect()
}

fn message_params(rng: &mut ChaCha8Rng, d: usize, hops: usize) -> Params {
    let mut p = Params::new();
    for hop in 1..=hops {
        p.insert(rhmp_self(hop), random_matrix(rng, d, d));
        p.insert(ahmp_self(hop), random_matrix(rng, d, d));
        p.insert(ahmp_query(hop), random_matrix(rng, 1, 2 * d));
        for r in Relation::ALL {
            p.insert(rhmp_relation(r, hop), random_matrix(rng, d, d));
        }
    }
    p.insert(AHMP_SHARED_QUERY, random_matrix(rng, 1, 2 * d));
    p
}

fn random_edges(rng: &mut ChaCha8Rng, nodes: usize) -> Vec<SubEdge> {
    let count = rng.gen_range(1..=2 * nodes);
    (0..count)
        .map(|_| SubEdge {
            src: NodeId(rng.gen_range(0..nodes) as u32),
            dst: NodeId(rng.gen_range(0..nodes) as u32),
            relation: *Relation::ALL.choose(rng).unwrap(),
        })
        .collect()
}

/// Largest deviation of relational and attention message passing (both
/// query modes) from the oracles over `toys` random graphs.
pub fn message_passing(toys: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_r, mut worst_a) = (0.0f64, 0.0f64);
    for _ in 0..toys {
        let d = rng.gen_range(1..=4);
        let hops = rng.gen_range(2..=3);
        let n = rng.gen_range(1..=8);
        let p = message_params(&mut rng, d, hops);
        let prim = random_matrix(&mut rng, n, d);
        let edges = random_edges(&mut rng, n);
        let root = NodeId(rng.gen_range(0..n) as u32);
        let view = SessionSubgraph::new(root, 0, vec![], edges.clone(), hops);
        for shared in [false, true] {
            let mut cfg = ModelConfig {
                dim: d,
                layers: hops,
                leaky_slope: rng.gen_range(0.0..0.3),
                ..ModelConfig::default()
            };
            cfg.flags.single_attention = shared;
            let mut b = Bound::new(&p, false);
            let table = NodeTable::full(&mut b, &prim);
            let x = rhmp(&mut b, &view, &table, &cfg).unwrap();
            let y = ahmp(&mut b, &view, &table, &cfg).unwrap();
            let expect_x = oracles::rhmp(&prim, &edges, root, hops, &p);
            let expect_y = oracles::ahmp(&prim, &edges, root, hops, &p, cfg.leaky_slope, shared);
            worst_r = worst_r.max(max_abs_diff(&to_vec(b.tape.value(x)), &expect_x));
            worst_a = worst_a.max(max_abs_diff(&to_vec(b.tape.value(y)), &expect_y));
        }
    }
    (worst_r, worst_a)
}

/// Largest deviation of session attention from the oracle, with and
/// without history.
pub fn attention(toys: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..toys {
        let w = rng.gen_range(1..=6);
        let n_videos = rng.gen_range(1..=4);
        let n_hist = rng.gen_range(0..=3);
        let mut p = Params::new();
        p.insert(SESSION_PROJECTION, random_matrix(&mut rng, w, w));
        let cfg = ModelConfig::default();
        let user = random_matrix(&mut rng, 1, w);
        let videos: Vec<Matrix> = (0..n_videos)
            .map(|_| random_matrix(&mut rng, 1, w))
            .collect();
        let history: Vec<(Matrix, Matrix)> = (0..n_hist)
            .map(|_| (random_matrix(&mut rng, 1, w), random_matrix(&mut rng, 1, w)))
            .collect();

        let mut b = Bound::new(&p, false);
        let latest = SessionEmbeddings {
            user: b.tape.constant(user.clone()),
            videos: videos.iter().map(|v| b.tape.constant(v.clone())).collect(),
        };
        let hist: Vec<_> = history
            .iter()
            .map(|(u, s)| (b.tape.constant(u.clone()), b.tape.constant(s.clone())))
            .collect();
        let out = session_attention(&mut b, &latest, &hist, &cfg).unwrap();

        let hist_vecs: Vec<_> = history
            .iter()
            .map(|(u, s)| (to_vec(u), to_vec(s)))
            .collect();
        let video_vecs: Vec<_> = videos.iter().map(to_vec).collect();
        let (eu, ev) = oracles::session_attention(
            &to_vec(&user),
            &video_vecs,
            &hist_vecs,
            p.get(SESSION_PROJECTION).unwrap(),
            cfg.epsilon,
        );
        worst = worst.max(max_abs_diff(&to_vec(b.tape.value(out.user)), &eu));
        for (t, e) in out.videos.iter().zip(&ev) {
            worst = worst.max(max_abs_diff(&to_vec(b.tape.value(*t)), e));
        }
    }
    worst
}

/// Largest deviation of the LSTM session summary from the oracle.
pub fn lstm(toys: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..toys {
        let w = rng.gen_range(1..=6);
        let mut p = Params::new();
        for gate in LSTM_GATES {
            p.insert(lstm_param(gate, "w"), random_matrix(&mut rng, w, w));
            p.insert(lstm_param(gate, "u"), random_matrix(&mut rng, w, w));
            p.insert(lstm_param(gate, "b"), random_matrix(&mut rng, 1, w));
        }
        let xs: Vec<Matrix> = (0..rng.gen_range(1..=5))
            .map(|_| random_matrix(&mut rng, 1, w))
            .collect();
        let mut b = Bound::new(&p, false);
        let ts: Vec<_> = xs.iter().map(|x| b.tape.constant(x.clone())).collect();
        let out = aggregate_session(&mut b, &ts, &ModelConfig::default()).unwrap();
        let get = |g: &str, part: &str| p.get(&lstm_param(g, part)).unwrap().clone();
        let gates = LSTM_GATES.map(|g| (get(g, "w"), get(g, "u"), get(g, "b")));
        let expect = oracles::lstm_mean(&xs.iter().map(to_vec).collect::<Vec<_>>(), &gates);
        worst = worst.max(max_abs_diff(&to_vec(b.tape.value(out)), &expect));
    }
    worst
}

/// A random small dataset with users, videos, producers and attributes.
pub fn random_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let users = rng.gen_range(2..=5);
    let videos = rng.gen_range(2..=6);
    let kinds = [
        InteractionKind::Like,
        InteractionKind::Finish,
        InteractionKind::NonInteraction,
        InteractionKind::Produce,
    ];
    let mut inter = Vec::new();
    for _ in 0..rng.gen_range(3..=20) {
        inter.push(InteractionRecord::new(
            format!("u{}", rng.gen_range(0..users)),
            format!("v{}", rng.gen_range(0..videos)),
            *kinds.choose(rng).unwrap(),
            rng.gen_range(0..1000),
        ));
    }
    let types = [AttrType::Tag, AttrType::Title, AttrType::Audio];
    let mut attrs = Vec::new();
    for _ in 0..rng.gen_range(0..=8) {
        attrs.push(AttributeRecord::new(
            format!("v{}", rng.gen_range(0..videos)),
            types.choose(rng).unwrap().clone(),
            format!("a{}", rng.gen_range(0..4)),
        ));
    }
    Dataset::from_records(inter, attrs).0
}

/// Largest deviation of candidate sampling from the oracle. The oracle
/// reads neighbors straight from the records rather than the graph.
pub fn sampling(toys: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < toys {
        let d = random_dataset(&mut rng);
        let g = build_global(&d);
        let dim = rng.gen_range(1..=4);
        let prim = random_matrix(&mut rng, g.node_count(), dim);
        let video = d
            .videos()
            .iter()
            .nth(rng.gen_range(0..d.videos().len()))
            .unwrap()
            .clone();
        let target = d
            .users()
            .iter()
            .nth(rng.gen_range(0..d.users().len()))
            .unwrap()
            .clone();
        let (Some(vid), Some(tid)) = (
            g.id(&NodeRef::video(video.clone())),
            g.id(&NodeRef::user(target.clone())),
        ) else {
            continue;
        };

        let mut groups: BTreeMap<String, BTreeSet<NodeId>> = BTreeMap::new();
        for r in d.interactions() {
            if r.video_id == video
                && r.user_id != target
                && r.kind != InteractionKind::NonInteraction
            {
                let id = g.id(&NodeRef::user(r.user_id.clone())).unwrap();
                groups.entry("user".into()).or_default().insert(id);
            }
        }
        for a in d.attributes() {
            if a.video_id == video {
                let node = NodeRef::attr(a.attr_type.clone(), a.attr_id.clone());
                groups
                    .entry(format!("attr:{}", a.attr_type.as_str()))
                    .or_default()
                    .insert(g.id(&node).unwrap());
            }
        }

        let p = Params::new();
        let mut b = Bound::new(&p, false);
        let table = NodeTable::full(&mut b, &prim);
        match sample_embed(&mut b, &g, &table, vid, tid) {
            Ok(z) => {
                assert!(
                    !groups.is_empty(),
                    "library embedded a video the oracle finds isolated"
                );
                let vecs: BTreeMap<String, Vec<Vec<f64>>> = groups
                    .into_iter()
                    .map(|(k, ids)| {
                        (
                            k,
                            ids.into_iter()
                                .map(|i| oracles::row(&prim, i.index()))
                                .collect(),
                        )
                    })
                    .collect();
                let expect = oracles::sample(&vecs);
                worst = worst.max(max_abs_diff(&to_vec(b.tape.value(z)), &expect));
            }
            Err(_) => assert!(groups.is_empty(), "library rejected a video with neighbors"),
        }
        checked += 1;
    }
    (worst, checked)
}

/// Largest deviation of the ranking score from the oracle.
pub fn scoring(toys: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..toys {
        let w = rng.gen_range(1..=8);
        let user = random_matrix(&mut rng, 1, w);
        let videos: Vec<Matrix> = (0..rng.gen_range(0..=4))
            .map(|_| random_matrix(&mut rng, 1, w))
            .collect();
        let cand = random_matrix(&mut rng, 1, w);
        let p = Params::new();
        let mut b = Bound::new(&p, false);
        let u = b.tape.constant(user.clone());
        let vs: Vec<_> = videos.iter().map(|v| b.tape.constant(v.clone())).collect();
        let c = b.tape.constant(cand.clone());
        let s = score(&mut b, u, &vs, c).unwrap();
        let expect = oracles::score(
            &to_vec(&user),
            &videos.iter().map(to_vec).collect::<Vec<_>>(),
            &to_vec(&cand),
        );
        worst = worst.max((b.tape.item(s) - expect).abs());
    }
    worst
}

/// Random ranked lists with distinct ids and random relevance.
pub fn random_lists(rng: &mut ChaCha8Rng, count: usize) -> Vec<RankedList> {
    (0..count)
        .map(|u| {
            let n = rng.gen_range(0..=30);
            let mut ids: Vec<usize> = (0..40).collect();
            ids.shuffle(rng);
            let items = ids[..n]
                .iter()
                .map(|&i| (format!("v{i}"), rng.gen_range(-3.0..3.0), rng.gen_bool(0.3)))
                .collect();
            RankedList::from_scores(format!("u{u}"), items).unwrap()
        })
        .collect()
}

/// Largest deviation of Precision@K, NDCG@K and C-Timeliness@K from the
/// brute-force definitions over `lists` random lists.
pub fn metrics(lists: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inter = Vec::new();
    for v in 0..40 {
        for u in 0..rng.gen_range(0..4) {
            let kind = if rng.gen_bool(0.5) {
                InteractionKind::Like
            } else {
                InteractionKind::Finish
            };
            inter.push(InteractionRecord::new(
                format!("w{u}"),
                format!("v{v}"),
                kind,
                rng.gen_range(0..100_000),
            ));
        }
    }
    let (d, _) = Dataset::from_records(inter, vec![]);
    let g = build_global(&d);
    let mut times: BTreeMap<String, BTreeMap<String, i64>> = BTreeMap::new();
    for r in d.interactions() {
        let e = times
            .entry(r.video_id.clone())
            .or_default()
            .entry(r.user_id.clone())
            .or_insert(r.timestamp);
        *e = (*e).max(r.timestamp);
    }
    let times: BTreeMap<String, Vec<i64>> = times
        .into_iter()
        .map(|(v, m)| (v, m.into_values().collect()))
        .collect();

    let all = random_lists(&mut rng, lists);
    let mut worst = 0.0f64;
    for r in &all {
        for k in [1, 3, 5, 10, 20, 50] {
            worst = worst
                .max((precision_at_k(r, k).unwrap() - oracles::precision(&r.relevant, k)).abs());
            worst = worst.max((ndcg_at_k(r, k).unwrap() - oracles::ndcg(&r.relevant, k)).abs());
        }
    }
    for chunk in all.chunks(10) {
        let plain: Vec<_> = chunk
            .iter()
            .map(|r| (r.videos.clone(), r.relevant.clone()))
            .collect();
        for k in [1, 5, 10] {
            let t0 = rng.gen_range(0..50_000);
            let got = c_timeliness_at_k(chunk, &g, k, t0).unwrap();
            let expect = oracles::c_timeliness(&plain, &times, k, t0);
            match (got, expect) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => return f64::INFINITY,
            }
        }
    }
    worst
}

/// NDCG@K of every perfectly ordered random list (relevant first).
pub fn perfect_ndcg(lists: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for r in random_lists(&mut rng, lists) {
        if !r.relevant.iter().any(|&x| x) {
            continue;
        }
        let items = r
            .videos
            .iter()
            .zip(&r.relevant)
            .map(|(v, &rel)| (v.clone(), if rel { 1.0 } else { 0.0 }, rel))
            .collect();
        let sorted = RankedList::from_scores(r.user_id.clone(), items).unwrap();
        for k in [1, 5, 10, 30] {
            worst = worst.max((ndcg_at_k(&sorted, k).unwrap() - 1.0).abs());
        }
    }
    worst
}

/// Densities (as percentages) from the published dataset counts, rounded to
/// three decimals.
pub fn published_densities() -> (f64, f64) {
    let round = |x: f64| (x * 100.0 * 1000.0).round() / 1000.0;
    let tiktok = density_from_counts(95_426, 1_434, 29_662).unwrap();
    let movielens = density_from_counts(1_000_209, 6_040, 3_884).unwrap();
    (round(tiktok), round(movielens))
}

/// The hand-traced toy: users u1 (target), u2, u3; videos v1..v4; tags on
/// v1 and v2.
///
/// u1 likes v1@1, finishes v2@2, likes v3@3, likes v4@4. u2 likes v1@5 and
/// v3@1. u3 finishes v1@2 and likes v2@6. u2 skips v2 (no edge). With
/// max_history 4, session_len 2, one neighbor per node and two layers:
///
/// * layer 1: v1, v2, v3, v4 (ascending time);
/// * layer 2: t1 and u2 from v1 (u2@5 is newer than u3@2), t2 and u3 from
///   v2, u2 from v3, nothing from v4.
pub struct Toy {
    pub dataset: Dataset,
    pub graph: HeteroGraph,
    pub cfg: GraphConfig,
}

pub fn hand_traced_toy() -> Toy {
    use InteractionKind::*;
    let rec = |u: &str, v: &str, k, t| InteractionRecord::new(u, v, k, t);
    let inter = vec![
        rec("u1", "v1", Like, 1),
        rec("u1", "v2", Finish, 2),
        rec("u1", "v3", Like, 3),
        rec("u1", "v4", Like, 4),
        rec("u2", "v1", Like, 5),
        rec("u2", "v3", Like, 1),
        rec("u2", "v2", NonInteraction, 7),
        rec("u3", "v1", Finish, 2),
        rec("u3", "v2", Like, 6),
    ];
    let attrs = vec![
        AttributeRecord::new("v1", AttrType::Tag, "t1"),
        AttributeRecord::new("v2", AttrType::Tag, "t2"),
    ];
    let (dataset, _) = Dataset::from_records(inter, attrs);
    let graph = build_global(&dataset);
    let cfg = GraphConfig {
        max_history: 4,
        session_len: 2,
        neighbors: 1,
        layers: 2,
        max_sessions: 2,
    };
    Toy {
        dataset,
        graph,
        cfg,
    }
}

type NamedEdge = (String, String, Relation);

fn name(g: &HeteroGraph, n: NodeId) -> String {
    g.node(n).id.clone()
}

/// Compares the toy's local graph and sessions with the hand trace;
/// returns a description of the first mismatch.
pub fn check_hand_traced() -> Result<(), String> {
    use Relation::*;
    let toy = hand_traced_toy();
    let g = &toy.graph;
    if g.node_count() != 9 {
        return Err(format!(
            "global graph has {} nodes, expected 9",
            g.node_count()
        ));
    }
    // 8 interaction edges (the skip adds none) in both directions plus 2
    // attribute links in both directions.
    if g.edge_count() != 20 {
        return Err(format!(
            "global graph has {} edges, expected 20",
            g.edge_count()
        ));
    }
    let local = build_local(g, &NodeRef::user("u1"), &toy.cfg).map_err(|e| e.to_string())?;
    let names = |ids: &[NodeId]| ids.iter().map(|&n| name(g, n)).collect::<Vec<_>>();
    let layers: Vec<Vec<String>> = local.layers.iter().map(|l| names(l)).collect();
    let expected_layers = vec![
        vec!["u1".to_string()],
        vec!["v1".into(), "v2".into(), "v3".into(), "v4".into()],
        vec!["t1".into(), "u2".into(), "t2".into(), "u3".into()],
    ];
    if layers != expected_layers {
        return Err(format!("layers {layers:?}, expected {expected_layers:?}"));
    }
    let edge_set: BTreeSet<NamedEdge> = local
        .edges
        .iter()
        .map(|e| (name(g, e.src), name(g, e.dst), e.relation))
        .collect();
    let e = |a: &str, b: &str, r| (a.to_string(), b.to_string(), r);
    let expected_edges: BTreeSet<NamedEdge> = [
        e("u1", "v1", LikeU2v),
        e("u1", "v2", FinishU2v),
        e("u1", "v3", LikeU2v),
        e("u1", "v4", LikeU2v),
        e("v1", "t1", AttrV2a),
        e("v1", "u2", LikeV2u),
        e("v2", "t2", AttrV2a),
        e("v2", "u3", LikeV2u),
        e("v3", "u2", LikeV2u),
    ]
    .into_iter()
    .collect();
    if edge_set != expected_edges {
        return Err(format!("edges {edge_set:?}, expected {expected_edges:?}"));
    }

    let sessions = split_sessions(&local, &toy.cfg).map_err(|e| e.to_string())?;
    let expected_count = local.history.len() / toy.cfg.session_len;
    if sessions.len() != expected_count || expected_count != 2 {
        return Err(format!(
            "{} sessions, expected floor(4 / 2) = 2",
            sessions.len()
        ));
    }
    let session_videos: Vec<Vec<String>> = sessions
        .iter()
        .map(|s| s.videos().map(|v| name(g, v)).collect())
        .collect();
    if session_videos != vec![vec!["v1", "v2"], vec!["v3", "v4"]] {
        return Err(format!("session videos {session_videos:?}"));
    }
    let first: BTreeSet<NamedEdge> = sessions[0]
        .edges
        .iter()
        .map(|x| (name(g, x.src), name(g, x.dst), x.relation))
        .collect();
    let expected_first: BTreeSet<NamedEdge> = [
        e("u1", "v1", LikeU2v),
        e("u1", "v2", FinishU2v),
        e("v1", "t1", AttrV2a),
        e("v1", "u2", LikeV2u),
        e("v2", "t2", AttrV2a),
        e("v2", "u3", LikeV2u),
    ]
    .into_iter()
    .collect();
    if first != expected_first {
        return Err(format!(
            "first session edges {first:?}, expected {expected_first:?}"
        ));
    }
    let second: BTreeSet<NamedEdge> = sessions[1]
        .edges
        .iter()
        .map(|x| (name(g, x.src), name(g, x.dst), x.relation))
        .collect();
    let expected_second: BTreeSet<NamedEdge> = [
        e("u1", "v3", LikeU2v),
        e("u1", "v4", LikeU2v),
        e("v3", "u2", LikeV2u),
    ]
    .into_iter()
    .collect();
    if second != expected_second {
        return Err(format!(
            "second session edges {second:?}, expected {expected_second:?}"
        ));
    }
    check_session_order(&sessions)
}

/// Sessions must be internally ascending in time, pairwise disjoint and
/// ordered oldest to newest.
pub fn check_session_order(sessions: &[SessionSubgraph]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    let mut last = i64::MIN;
    for s in sessions {
        for &(v, t) in &s.contained_videos {
            if t < last {
                return Err("session timestamps are not monotone".into());
            }
            last = t;
            if !seen.insert(v) {
                return Err(format!("video {v:?} appears in two sessions"));
            }
        }
    }
    Ok(())
}

/// Checks floor-count, monotonicity and disjointness of sessions on random
/// datasets; returns how many users were checked.
pub fn session_properties(toys: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..toys {
        let d = random_dataset(&mut rng);
        let g = build_global(&d);
        let m = rng.gen_range(1..=3);
        let cfg = GraphConfig {
            max_history: 6,
            session_len: m,
            neighbors: rng.gen_range(1..=3),
            layers: 2,
            max_sessions: 6 / m,
        };
        for u in d.users() {
            let Ok(local) = build_local(&g, &NodeRef::user(u.clone()), &cfg) else {
                continue;
            };
            let sessions = split_sessions(&local, &cfg).map_err(|e| e.to_string())?;
            let expect = (local.history.len() / m).min(cfg.max_sessions);
            if sessions.len() != expect {
                return Err(format!(
                    "user {u}: {} sessions, expected {expect}",
                    sessions.len()
                ));
            }
            check_session_order(&sessions)?;
            checked += 1;
        }
    }
    Ok(checked)
}

/// Flags of every variant are independent switches.
pub fn all_flags() -> Vec<Ablation> {
    Variant::ALL.iter().map(|v| v.flags()).collect()
}

/// Gradient-check fixture: one training user `u` with two sessions of two
/// videos each and one held-out positive; every session subgraph has at
/// most eight nodes.
///
/// u: a@1, b@2 (finish), e@3, f@4, held-out c@10. w: a@5, c@6 (finish), d@7.
/// Tags: t on d, s on e.
pub fn gradient_fixture() -> (
    Dataset,
    Dataset,
    BTreeMap<String, Vec<InteractionRecord>>,
    TrainConfig,
) {
    use InteractionKind::*;
    let rec = |u: &str, v: &str, k, t| InteractionRecord::new(u, v, k, t);
    let visible = vec![
        rec("u", "a", Like, 1),
        rec("u", "b", Finish, 2),
        rec("u", "e", Like, 3),
        rec("u", "f", Like, 4),
        rec("w", "a", Like, 5),
        rec("w", "c", Finish, 6),
        rec("w", "d", Like, 7),
    ];
    let held = rec("u", "c", Like, 10);
    let attrs = vec![
        AttributeRecord::new("d", AttrType::Tag, "t"),
        AttributeRecord::new("e", AttrType::Tag, "s"),
    ];
    let mut all = visible.clone();
    all.push(held.clone());
    let (full, _) = Dataset::from_records(all, attrs.clone());
    let (visible, _) = Dataset::from_records(visible, attrs);
    let heldout = BTreeMap::from([("u".to_string(), vec![held])]);
    let cfg = TrainConfig {
        beta: 0.5,
        eta: 0.01,
        seed: 11,
        graph: GraphConfig {
            max_history: 4,
            session_len: 2,
            neighbors: 1,
            layers: 2,
            max_sessions: 2,
        },
        model: ModelConfig {
            dim: 2,
            hidden: 3,
            layers: 2,
            hash_buckets: 2,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    (visible, full, heldout, cfg)
}

/// Finite-difference check of every parameter under `variant` at random
/// (Xavier) parameters drawn from `seed`. Also returns the largest session
/// subgraph size.
pub fn gradient_check_fixture(variant: Variant, seed: u64) -> (Vec<GradientCheck>, usize) {
    let (visible, full, heldout, mut cfg) = gradient_fixture();
    cfg.model.flags = variant.flags();
    cfg.seed = seed;
    let g = build_global(&visible);
    let set = TrainSet::build(
        &g,
        &full,
        &heldout,
        &["u".to_string()],
        &cfg.graph,
        cfg.model.hash_buckets,
    );
    assert_eq!(
        set.users.len(),
        1,
        "fixture user was skipped: {:?}",
        set.skipped
    );
    let largest = set.users[0]
        .sessions
        .sessions
        .iter()
        .map(|s| s.node_count())
        .max()
        .unwrap();
    let params = init_params(&cfg.model, &set.vocab, seed);
    let batch = vec![draw_pairs(&set, 0, 1, &cfg).unwrap()];
    let checks = gradient_check(&params, &set, &cfg, &batch, 1e-5).unwrap();
    (checks, largest)
}
