//! Synthetic interaction logs with known structure, for smoke runs and
//! directional experiments.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{
    AttrType, AttributeRecord, Dataset, IngestReport, InteractionKind, InteractionRecord, RawRating,
};
use crate::rng::substream;

/// An interaction log plus video attributes.
#[derive(Debug, Clone, Default)]
pub struct Synthetic {
    pub interactions: Vec<InteractionRecord>,
    pub attributes: Vec<AttributeRecord>,
}

impl Synthetic {
    pub fn dataset(&self) -> (Dataset, IngestReport) {
        Dataset::from_records(self.interactions.clone(), self.attributes.clone())
    }
}

/// First timestamp of generated logs.
const EPOCH: i64 = 60_000_000;

/// Two groups of 25 videos and 20 users, half in each group. Every user
/// likes all videos of their own group and skips all videos of the other,
/// in an alternating random order. Tag and audio identify the group, the
/// title is unique per video.
pub fn planted(seed: u64) -> Synthetic {
    let mut rng = substream(seed, "planted");
    let mut s = Synthetic::default();
    let group_videos = |g: usize| (0..25).map(move |j| format!("g{g}v{j:02}"));
    for g in 0..2 {
        for (j, v) in group_videos(g).enumerate() {
            s.attributes.push(AttributeRecord::new(
                &v,
                AttrType::Tag,
                format!("g{g}tag{}", j % 3),
            ));
            s.attributes.push(AttributeRecord::new(
                &v,
                AttrType::Audio,
                format!("g{g}audio"),
            ));
            s.attributes.push(AttributeRecord::new(
                &v,
                AttrType::Title,
                format!("title-{v}"),
            ));
        }
    }
    for u in 0..20 {
        let g = u % 2;
        let mut liked: Vec<String> = group_videos(g).collect();
        let mut skipped: Vec<String> = group_videos(1 - g).collect();
        liked.shuffle(&mut rng);
        skipped.shuffle(&mut rng);
        let user = format!("u{u:02}");
        for (k, (l, n)) in liked.iter().zip(&skipped).enumerate() {
            let t = EPOCH + 100 * u as i64 + 2 * k as i64;
            s.interactions
                .push(InteractionRecord::new(&user, l, InteractionKind::Like, t));
            s.interactions.push(InteractionRecord::new(
                &user,
                n,
                InteractionKind::NonInteraction,
                t + 1,
            ));
        }
    }
    s
}

/// Shape of [`relation_signal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSignal {
    pub users: usize,
    pub groups: usize,
    pub videos_per_group: usize,
    /// Likes among the early (history) records of each user.
    pub early_likes: usize,
    /// Finishes among the early records, all in one other group.
    pub finishes: usize,
    /// Likes among the late records.
    pub late_likes: usize,
    /// Skips among the late records; always outside the user's group.
    pub skips: usize,
    pub producers: usize,
}

impl Default for RelationSignal {
    fn default() -> Self {
        Self {
            users: 120,
            groups: 4,
            videos_per_group: 20,
            early_likes: 8,
            finishes: 8,
            late_likes: 8,
            skips: 10,
            producers: 4,
        }
    }
}

/// Users and videos in groups, where likes reflect preference and finishes
/// do not. Each user first mixes likes of their own group with finishes of
/// one other group picked at random, then mixes more own-group likes with
/// skips of other groups. Tags reveal the group of a video.
pub fn relation_signal(cfg: &RelationSignal, seed: u64) -> Synthetic {
    let mut rng = substream(seed, "relation-signal");
    let mut s = Synthetic::default();
    let n = cfg.videos_per_group;
    let video = |g: usize, j: usize| format!("g{g}v{j:02}");
    let all: Vec<String> = (0..cfg.groups)
        .flat_map(|g| (0..n).map(move |j| (g, j)))
        .map(|(g, j)| video(g, j))
        .collect();
    for (i, v) in all.iter().enumerate() {
        let group = &v[..v.find('v').unwrap_or(0)];
        s.attributes.push(AttributeRecord::new(
            v,
            AttrType::Tag,
            format!("{group}tag{}", i % 3),
        ));
        s.attributes.push(AttributeRecord::new(
            v,
            AttrType::Audio,
            format!("audio{}", i % 7),
        ));
        s.attributes.push(AttributeRecord::new(
            v,
            AttrType::Title,
            format!("title-{v}"),
        ));
        let producer = format!("creator{}", i % cfg.producers.max(1));
        s.interactions.push(InteractionRecord::new(
            producer,
            v,
            InteractionKind::Produce,
            EPOCH,
        ));
    }
    for u in 0..cfg.users {
        let g = u % cfg.groups;
        let user = format!("u{u:03}");
        let own_prefix = format!("g{g}v");
        let mut own: Vec<String> = all
            .iter()
            .filter(|v| v.starts_with(&own_prefix))
            .cloned()
            .collect();
        own.shuffle(&mut rng);
        let late_likes = own.split_off(cfg.early_likes.min(own.len()));
        let early_likes = own;
        let late_likes: Vec<String> = late_likes.into_iter().take(cfg.late_likes).collect();
        let finish_group = (g + rng.gen_range(1..cfg.groups.max(2))) % cfg.groups.max(2);
        let finish_prefix = format!("g{finish_group}v");
        let mut finished: Vec<String> = all
            .iter()
            .filter(|v| v.starts_with(&finish_prefix))
            .cloned()
            .collect();
        finished.shuffle(&mut rng);
        finished.truncate(cfg.finishes);
        let mut skipped: Vec<String> = all
            .iter()
            .filter(|v| !v.starts_with(&own_prefix) && !finished.contains(v))
            .cloned()
            .collect();
        skipped.shuffle(&mut rng);
        skipped.truncate(cfg.skips);
        let tag = |vs: Vec<String>, kind: InteractionKind| vs.into_iter().map(move |v| (v, kind));
        let mut early: Vec<(String, InteractionKind)> = tag(early_likes, InteractionKind::Like)
            .chain(tag(finished, InteractionKind::Finish))
            .collect();
        let mut late: Vec<(String, InteractionKind)> = tag(late_likes, InteractionKind::Like)
            .chain(tag(skipped, InteractionKind::NonInteraction))
            .collect();
        early.shuffle(&mut rng);
        late.shuffle(&mut rng);
        for (k, (v, kind)) in early.into_iter().chain(late).enumerate() {
            let t = EPOCH + 1 + 1000 * u as i64 + k as i64;
            s.interactions
                .push(InteractionRecord::new(&user, v, kind, t));
        }
    }
    s
}

/// Shape of [`movielens_like`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieLensLike {
    pub users: usize,
    pub movies: usize,
    pub clusters: usize,
    pub genres: usize,
    pub min_ratings: usize,
    pub max_ratings: usize,
    /// Weight of a movie's global appeal relative to personal taste.
    pub popularity_weight: f64,
    /// Exposure multiplier of movies in the user's taste cluster.
    pub taste_exposure: f64,
    pub noise: f64,
}

impl Default for MovieLensLike {
    fn default() -> Self {
        Self {
            users: 1000,
            movies: 400,
            clusters: 6,
            genres: 18,
            min_ratings: 40,
            max_ratings: 120,
            popularity_weight: 1.2,
            taste_exposure: 3.0,
            noise: 0.5,
        }
    }
}

/// Explicit 0..=5 ratings from a clustered taste model plus a global appeal
/// term, with exposure skewed toward appealing movies and the user's taste.
/// Genres correlate with the taste cluster of a movie.
pub fn movielens_like(cfg: &MovieLensLike, seed: u64) -> (Vec<RawRating>, Vec<AttributeRecord>) {
    let mut rng = substream(seed, "movielens-like");
    let noise = Normal::new(0.0, cfg.noise).expect("noise is finite and >= 0");
    let movie_cluster: Vec<usize> = (0..cfg.movies)
        .map(|_| rng.gen_range(0..cfg.clusters))
        .collect();
    let appeal: Vec<f64> = (0..cfg.movies).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut attrs = Vec::new();
    let genres_per_cluster = (cfg.genres / cfg.clusters).max(1);
    for (m, &c) in movie_cluster.iter().enumerate() {
        let movie = format!("m{m}");
        let mut genres = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let genre = if rng.gen_bool(0.8) {
                (c * genres_per_cluster + rng.gen_range(0..genres_per_cluster)) % cfg.genres
            } else {
                rng.gen_range(0..cfg.genres)
            };
            if !genres.contains(&genre) {
                genres.push(genre);
                attrs.push(AttributeRecord::new(
                    &movie,
                    AttrType::Tag,
                    format!("genre{genre}"),
                ));
            }
        }
    }
    let exposure: Vec<f64> = appeal.iter().map(|a| (1.5 * a).exp()).collect();
    let mut ratings = Vec::new();
    for u in 0..cfg.users {
        let taste = rng.gen_range(0..cfg.clusters);
        let count = rng
            .gen_range(cfg.min_ratings..=cfg.max_ratings)
            .min(cfg.movies);
        let idx: Vec<usize> = (0..cfg.movies).collect();
        let seen: Vec<usize> = idx
            .choose_multiple_weighted(&mut rng, count, |&m| {
                exposure[m]
                    * if movie_cluster[m] == taste {
                        cfg.taste_exposure
                    } else {
                        1.0
                    }
            })
            .expect("weights are positive")
            .copied()
            .collect();
        let mut t = EPOCH + 10_000 * u as i64;
        for m in seen {
            let affinity = if movie_cluster[m] == taste { 1.5 } else { -0.5 };
            let raw = 3.0 + affinity + cfg.popularity_weight * appeal[m] + noise.sample(&mut rng);
            t += rng.gen_range(1..100);
            ratings.push(RawRating {
                user_id: format!("user{u}"),
                item_id: format!("m{m}"),
                rating: raw.round().clamp(0.0, 5.0) as i64,
                timestamp: t,
            });
        }
    }
    (ratings, attrs)
}
