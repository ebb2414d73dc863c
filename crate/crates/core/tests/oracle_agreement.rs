#[path = "common/checks.rs"]
mod checks;
#[path = "common/oracles.rs"]
mod oracles;

use hgrec_core::eval::{ndcg_at_k, precision_at_k, RankedList};
use hgrec_core::model::{
    score, session_attention, Bound, ModelConfig, Params, SessionEmbeddings, SESSION_PROJECTION,
};
use hgrec_core::numerics::Matrix;
use proptest::prelude::*;

const TOYS: usize = 100;

#[test]
fn message_passing_matches_oracle() {
    let (rhmp, ahmp) = checks::message_passing(TOYS, 1);
    assert!(rhmp <= 1e-10, "relational propagation off by {rhmp}");
    assert!(ahmp <= 1e-10, "attention propagation off by {ahmp}");
}

#[test]
fn session_attention_matches_oracle() {
    let err = checks::attention(TOYS, 2);
    assert!(err <= 1e-10, "off by {err}");
}

#[test]
fn lstm_summary_matches_oracle() {
    let err = checks::lstm(TOYS, 3);
    assert!(err <= 1e-10, "off by {err}");
}

#[test]
fn candidate_sampling_matches_oracle() {
    let (err, n) = checks::sampling(TOYS, 4);
    assert_eq!(n, TOYS);
    assert!(err <= 1e-10, "off by {err}");
}

#[test]
fn score_matches_oracle() {
    let err = checks::scoring(TOYS, 5);
    assert!(err <= 1e-10, "off by {err}");
}

#[test]
fn metrics_match_brute_force() {
    let err = checks::metrics(1000, 6);
    assert!(err <= 1e-12, "off by {err}");
}

#[test]
fn perfect_ranking_has_unit_ndcg() {
    assert!(checks::perfect_ndcg(1000, 7) <= 1e-12);
}

#[test]
fn published_densities_reproduce() {
    assert_eq!(checks::published_densities(), (0.224, 4.264));
}

fn list_from(scores: &[f64], relevant: &[bool]) -> RankedList {
    let items = scores
        .iter()
        .zip(relevant)
        .enumerate()
        .map(|(i, (&s, &r))| (format!("v{i:03}"), s, r))
        .collect();
    RankedList::from_scores("u", items).unwrap()
}

fn one_row(rng: &mut impl FnMut() -> f64, w: usize) -> Matrix {
    Matrix::from_shape_fn((1, w), |_| rng())
}

proptest! {
    #[test]
    fn ranking_metrics_depend_only_on_order(
        items in prop::collection::vec((-50i32..50, any::<bool>()), 1..40),
        k in 1usize..45,
        shift in -5.0f64..5.0,
        stretch in 0.1f64..10.0,
    ) {
        let scores: Vec<f64> = items.iter().map(|(s, _)| *s as f64).collect();
        let relevant: Vec<bool> = items.iter().map(|(_, r)| *r).collect();
        let base = list_from(&scores, &relevant);
        let transforms: [&dyn Fn(f64) -> f64; 3] = [
            &|x| stretch * x + shift,
            &|x| x.powi(3),
            &|x| (x / 10.0).exp(),
        ];
        for f in transforms {
            let moved: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
            let other = list_from(&moved, &relevant);
            prop_assert_eq!(&other.videos, &base.videos);
            prop_assert_eq!(precision_at_k(&other, k).unwrap(), precision_at_k(&base, k).unwrap());
            prop_assert_eq!(ndcg_at_k(&other, k).unwrap(), ndcg_at_k(&base, k).unwrap());
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval(
        items in prop::collection::vec((-1.0f64..1.0, any::<bool>()), 0..30),
        k in 1usize..40,
    ) {
        let scores: Vec<f64> = items.iter().map(|(s, _)| *s).collect();
        let relevant: Vec<bool> = items.iter().map(|(_, r)| *r).collect();
        let r = list_from(&scores, &relevant);
        let p = precision_at_k(&r, k).unwrap();
        let n = ndcg_at_k(&r, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
    }

    #[test]
    fn unit_ndcg_iff_relevant_items_lead(
        relevant in prop::collection::vec(any::<bool>(), 1..25),
        k in 1usize..30,
    ) {
        let scores: Vec<f64> = (0..relevant.len()).map(|i| -(i as f64)).collect();
        let r = list_from(&scores, &relevant);
        let hits = relevant.iter().filter(|&&x| x).count();
        prop_assume!(hits > 0);
        let top = k.min(hits);
        let leads = relevant[..top].iter().all(|&x| x);
        let n = ndcg_at_k(&r, k).unwrap();
        prop_assert_eq!((n - 1.0).abs() <= 1e-12, leads);
    }

    #[test]
    fn scaling_similarities_leaves_attention_unchanged(
        seed in any::<u64>(),
        w in 1usize..6,
        hist in 1usize..4,
        power in -3i32..4,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.gen_range(-1.0..1.0);
        let mut p = Params::new();
        p.insert(SESSION_PROJECTION, Matrix::from_shape_fn((w, w), |_| draw()));
        let video = one_row(&mut draw, w);
        let user = one_row(&mut draw, w);
        let history: Vec<(Matrix, Matrix)> = (0..hist).map(|_| (one_row(&mut draw, w), one_row(&mut draw, w))).collect();
        // A power of two scales every similarity exactly.
        let c = 2f64.powi(power);
        let run = |query: &Matrix| {
            let mut b = Bound::new(&p, false);
            let latest = SessionEmbeddings {
                user: b.tape.constant(user.clone()),
                videos: vec![b.tape.constant(query.clone())],
            };
            let h: Vec<_> = history.iter().map(|(u, s)| (b.tape.constant(u.clone()), b.tape.constant(s.clone()))).collect();
            let out = session_attention(&mut b, &latest, &h, &ModelConfig::default()).unwrap();
            b.tape.value(out.videos[0]).clone()
        };
        let plain = run(&video);
        let total: f64 = history.iter().map(|(_, s)| (&video * s).sum()).sum();
        prop_assume!(total.abs() > 1e-6 && (c * total).abs() > 1e-6);
        prop_assert_eq!(run(&(&video * c)), plain);
    }

    #[test]
    fn score_is_linear_in_the_candidate(
        seed in any::<u64>(),
        w in 1usize..8,
        videos in 0usize..4,
        power in -4i32..5,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.gen_range(-1.0..1.0);
        let user = one_row(&mut draw, w);
        let vs: Vec<Matrix> = (0..videos).map(|_| one_row(&mut draw, w)).collect();
        let cand = one_row(&mut draw, w);
        let c = 2f64.powi(power);
        let p = Params::new();
        let run = |z: &Matrix| {
            let mut b = Bound::new(&p, false);
            let u = b.tape.constant(user.clone());
            let v: Vec<_> = vs.iter().map(|m| b.tape.constant(m.clone())).collect();
            let z = b.tape.constant(z.clone());
            let s = score(&mut b, u, &v, z).unwrap();
            b.tape.item(s)
        };
        prop_assert_eq!(run(&(&cand * c)), c * run(&cand));
    }
}
