//! Interaction logs, attribute tables and per-user histories.
//!
//! The single on-disk format is a pair of UTF-8 CSV files with headers
//! `user_id,video_id,kind,timestamp` and `video_id,attr_type,attr_id`.
//! Other log layouts are normalized into it by the converters in
//! [`convert`].

pub mod convert;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub const INTERACTIONS_HEADER: [&str; 4] = ["user_id", "video_id", "kind", "timestamp"];
pub const ATTRIBUTES_HEADER: [&str; 3] = ["video_id", "attr_type", "attr_id"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: bad header {found:?}, expected {expected:?}")]
    Header {
        file: String,
        found: Vec<String>,
        expected: Vec<String>,
    },
    #[error("{file}:{line}: {message}")]
    Row {
        file: String,
        line: u64,
        message: String,
    },
    #[error("unknown interaction kind {0:?}")]
    UnknownKind(String),
    #[error("rating {rating} outside 0..=5")]
    RatingOutOfRange { rating: i64 },
    #[error("threshold {0} outside 1..=5")]
    BadThreshold(i64),
    #[error("density undefined: {users} users, {videos} videos")]
    EmptyIdSet { users: usize, videos: usize },
    #[error("train rate {rate} over {users} users leaves one side empty")]
    DegenerateSplit { rate: f64, users: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Kind of a user↔video event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Like,
    Finish,
    NonInteraction,
    Produce,
}

impl InteractionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Like => "like",
            Self::Finish => "finish",
            Self::NonInteraction => "noninteraction",
            Self::Produce => "produce",
        }
    }

    /// Like and Finish count as positive. Produce is authorship, not preference.
    pub fn is_positive(self) -> bool {
        matches!(self, Self::Like | Self::Finish)
    }
}

impl FromStr for InteractionKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "like" => Ok(Self::Like),
            "finish" => Ok(Self::Finish),
            "noninteraction" => Ok(Self::NonInteraction),
            "produce" => Ok(Self::Produce),
            other => Err(DataError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Attribute family of a video. Open-ended: unknown names become `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttrType {
    Tag,
    Title,
    Audio,
    Other(String),
}

impl AttrType {
    pub fn parse(s: &str) -> Self {
        match s {
            "tag" => Self::Tag,
            "title" => Self::Title,
            "audio" => Self::Audio,
            other => Self::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Self::Tag => "tag",
            Self::Title => "title",
            Self::Audio => "audio",
            Self::Other(s) => s,
        }
    }
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InteractionRecord {
    pub user_id: String,
    pub video_id: String,
    pub kind: InteractionKind,
    pub timestamp: i64,
}

impl InteractionRecord {
    pub fn new(
        user: impl Into<String>,
        video: impl Into<String>,
        kind: InteractionKind,
        ts: i64,
    ) -> Self {
        Self {
            user_id: user.into(),
            video_id: video.into(),
            kind,
            timestamp: ts,
        }
    }

    /// Key of the canonical per-user order: timestamp, then video id.
    fn timeline_key(&self) -> (i64, &str, InteractionKind) {
        (self.timestamp, self.video_id.as_str(), self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttributeRecord {
    pub video_id: String,
    pub attr_type: AttrType,
    pub attr_id: String,
}

impl AttributeRecord {
    pub fn new(video: impl Into<String>, attr_type: AttrType, attr: impl Into<String>) -> Self {
        Self {
            video_id: video.into(),
            attr_type,
            attr_id: attr.into(),
        }
    }
}

/// Counts emitted by ingestion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub duplicates_dropped: usize,
    pub errors: Vec<String>,
}

/// Immutable interaction data with per-user timelines.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    users: BTreeSet<String>,
    videos: BTreeSet<String>,
    interactions: Vec<InteractionRecord>,
    attributes: Vec<AttributeRecord>,
    /// Indices into `interactions`, ascending by (timestamp, video_id).
    histories: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset, dropping exact duplicates.
    pub fn from_records(
        interactions: Vec<InteractionRecord>,
        attributes: Vec<AttributeRecord>,
    ) -> (Self, IngestReport) {
        let rows_read = interactions.len() + attributes.len();
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(interactions.len());
        let mut dropped = 0;
        for r in interactions {
            if seen.insert(r.clone()) {
                kept.push(r);
            } else {
                log::debug!("duplicate interaction dropped: {r:?}");
                dropped += 1;
            }
        }
        let mut attr_seen = HashSet::new();
        let mut attrs = Vec::with_capacity(attributes.len());
        for a in attributes {
            if attr_seen.insert(a.clone()) {
                attrs.push(a);
            } else {
                log::debug!("duplicate attribute dropped: {a:?}");
                dropped += 1;
            }
        }
        if dropped > 0 {
            log::info!("{dropped} duplicate rows dropped");
        }

        kept.sort_by(|a, b| {
            (a.user_id.as_str(), a.timeline_key()).cmp(&(b.user_id.as_str(), b.timeline_key()))
        });
        attrs.sort();

        let mut users = BTreeSet::new();
        let mut videos = BTreeSet::new();
        let mut histories: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in kept.iter().enumerate() {
            users.insert(r.user_id.clone());
            videos.insert(r.video_id.clone());
            histories.entry(r.user_id.clone()).or_default().push(i);
        }
        for a in &attrs {
            videos.insert(a.video_id.clone());
        }
        let rows_kept = kept.len() + attrs.len();
        let report = IngestReport {
            rows_read,
            rows_kept,
            duplicates_dropped: dropped,
            errors: Vec::new(),
        };
        (
            Self {
                users,
                videos,
                interactions: kept,
                attributes: attrs,
                histories,
            },
            report,
        )
    }

    pub fn users(&self) -> &BTreeSet<String> {
        &self.users
    }

    pub fn videos(&self) -> &BTreeSet<String> {
        &self.videos
    }

    pub fn interactions(&self) -> &[InteractionRecord] {
        &self.interactions
    }

    pub fn attributes(&self) -> &[AttributeRecord] {
        &self.attributes
    }

    /// All records of `user`, ascending by timestamp then video id.
    pub fn history(&self, user: &str) -> impl Iterator<Item = &InteractionRecord> + '_ {
        self.histories
            .get(user)
            .into_iter()
            .flatten()
            .map(move |&i| &self.interactions[i])
    }

    /// Positively interacted records of `user` (the V^u timeline).
    pub fn positive_history(&self, user: &str) -> impl Iterator<Item = &InteractionRecord> + '_ {
        self.history(user).filter(|r| r.kind.is_positive())
    }

    /// Videos `user` liked or finished.
    pub fn positive_videos(&self, user: &str) -> BTreeSet<&str> {
        self.positive_history(user)
            .map(|r| r.video_id.as_str())
            .collect()
    }

    /// Videos with a NonInteraction record and no positive record from `user`.
    pub fn explicit_negatives(&self, user: &str) -> BTreeSet<&str> {
        let pos = self.positive_videos(user);
        self.history(user)
            .filter(|r| r.kind == InteractionKind::NonInteraction)
            .map(|r| r.video_id.as_str())
            .filter(|v| !pos.contains(v))
            .collect()
    }

    /// Keeps only the interactions selected by `keep`; id sets and
    /// attributes are preserved so that every id stays resolvable.
    pub fn filter_interactions<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&InteractionRecord) -> bool,
    {
        let interactions: Vec<_> = self
            .interactions
            .iter()
            .filter(|r| keep(r))
            .cloned()
            .collect();
        let (mut d, _) = Self::from_records(interactions, self.attributes.clone());
        d.users.extend(self.users.iter().cloned());
        d.videos.extend(self.videos.iter().cloned());
        d
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_header(file: &str, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<String> = headers.iter().map(str::to_string).collect();
    if found != expected {
        return Err(DataError::Header {
            file: file.to_string(),
            found,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

/// Parses `interactions.csv` content.
pub fn read_interactions<R: Read>(name: &str, reader: R) -> Result<Vec<InteractionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    check_header(name, rdr.headers()?, &INTERACTIONS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Row {
            file: name.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message: String| DataError::Row {
            file: name.to_string(),
            line,
            message,
        };
        if rec.len() != 4 {
            return Err(row_err(format!("expected 4 fields, found {}", rec.len())));
        }
        let (user, video) = (&rec[0], &rec[1]);
        if user.is_empty() || video.is_empty() {
            return Err(row_err("empty id".into()));
        }
        let kind = rec[2]
            .parse::<InteractionKind>()
            .map_err(|e| row_err(e.to_string()))?;
        let ts = rec[3]
            .parse::<i64>()
            .map_err(|e| row_err(format!("bad timestamp {:?}: {e}", &rec[3])))?;
        out.push(InteractionRecord::new(user, video, kind, ts));
    }
    Ok(out)
}

/// Parses `attributes.csv` content.
pub fn read_attributes<R: Read>(name: &str, reader: R) -> Result<Vec<AttributeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    check_header(name, rdr.headers()?, &ATTRIBUTES_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Row {
            file: name.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 || rec.iter().any(str::is_empty) {
            return Err(DataError::Row {
                file: name.to_string(),
                line,
                message: "expected 3 non-empty fields".into(),
            });
        }
        out.push(AttributeRecord::new(
            &rec[0],
            AttrType::parse(&rec[1]),
            &rec[2],
        ));
    }
    Ok(out)
}

/// Reads both CSV files into a [`Dataset`].
pub fn ingest(interactions: &Path, attributes: Option<&Path>) -> Result<(Dataset, IngestReport)> {
    let records = read_interactions(&interactions.display().to_string(), open(interactions)?)?;
    let attrs = match attributes {
        Some(p) => read_attributes(&p.display().to_string(), open(p)?)?,
        None => Vec::new(),
    };
    let (d, report) = Dataset::from_records(records, attrs);
    log::info!(
        "ingested {} users, {} videos, {} interactions ({} duplicates dropped)",
        d.users.len(),
        d.videos.len(),
        d.interactions.len(),
        report.duplicates_dropped
    );
    Ok((d, report))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Writes the dataset in canonical order (sorted by every column).
pub fn export(d: &Dataset, interactions: &Path, attributes: &Path) -> Result<()> {
    let mut rows: Vec<&InteractionRecord> = d.interactions.iter().collect();
    rows.sort();
    let mut w = csv::WriterBuilder::new().from_writer(create(interactions)?);
    w.write_record(INTERACTIONS_HEADER)?;
    for r in rows {
        w.write_record([
            r.user_id.as_str(),
            r.video_id.as_str(),
            r.kind.as_str(),
            &r.timestamp.to_string(),
        ])?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: interactions.display().to_string(),
        source,
    })?;

    let mut w = csv::WriterBuilder::new().from_writer(create(attributes)?);
    w.write_record(ATTRIBUTES_HEADER)?;
    for a in &d.attributes {
        w.write_record([
            a.video_id.as_str(),
            a.attr_type.as_str(),
            a.attr_id.as_str(),
        ])?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: attributes.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Writes an ingest report as pretty JSON.
pub fn write_report<W: Write>(report: &IngestReport, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)
}

/// A raw explicit rating before implicit-feedback mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRating {
    pub user_id: String,
    pub item_id: String,
    pub rating: i64,
    pub timestamp: i64,
}

/// Maps explicit ratings to implicit interactions: above the threshold is a
/// Like, below is a NonInteraction, equal is dropped as undecided.
pub fn map_ratings(raw: &[RawRating], threshold: i64) -> Result<Vec<InteractionRecord>> {
    if !(1..=5).contains(&threshold) {
        return Err(DataError::BadThreshold(threshold));
    }
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        if !(0..=5).contains(&r.rating) {
            return Err(DataError::RatingOutOfRange { rating: r.rating });
        }
        let kind = match r.rating.cmp(&threshold) {
            std::cmp::Ordering::Greater => InteractionKind::Like,
            std::cmp::Ordering::Equal => continue,
            std::cmp::Ordering::Less => InteractionKind::NonInteraction,
        };
        out.push(InteractionRecord::new(
            &r.user_id,
            &r.item_id,
            kind,
            r.timestamp,
        ));
    }
    Ok(out)
}

/// `interactions / (users * videos)`.
pub fn density_from_counts(interactions: usize, users: usize, videos: usize) -> Result<f64> {
    if users == 0 || videos == 0 {
        return Err(DataError::EmptyIdSet { users, videos });
    }
    Ok(interactions as f64 / (users as f64 * videos as f64))
}

pub fn density(d: &Dataset) -> Result<f64> {
    density_from_counts(d.interactions.len(), d.users.len(), d.videos.len())
}

/// Random user partition with `round(rate * |U|)` training users.
pub fn split_users(d: &Dataset, train_rate: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let n = d.users.len();
    let n_train = (train_rate * n as f64).round() as usize;
    if !(train_rate > 0.0 && train_rate < 1.0) || n_train == 0 || n_train >= n {
        return Err(DataError::DegenerateSplit {
            rate: train_rate,
            users: n,
        });
    }
    let mut users: Vec<String> = d.users.iter().cloned().collect();
    users.shuffle(&mut rng::substream(seed, "split"));
    let test = users.split_off(n_train);
    users.sort();
    let mut test = test;
    test.sort();
    Ok((users, test))
}

/// Per-user temporal holdout: the latest `fraction` of each user's
/// non-authorship records is held out as labels, the rest stays visible.
#[derive(Debug, Clone)]
pub struct Holdout {
    /// Records that feed the graph (history parts plus all Produce records).
    pub visible: Dataset,
    /// Held-out labeled records per user, ascending by time.
    pub heldout: BTreeMap<String, Vec<InteractionRecord>>,
}

pub fn temporal_holdout(d: &Dataset, fraction: f64) -> Holdout {
    let mut heldout: BTreeMap<String, Vec<InteractionRecord>> = BTreeMap::new();
    let mut hidden: HashSet<&InteractionRecord> = HashSet::new();
    for user in &d.users {
        let labeled: Vec<&InteractionRecord> = d
            .history(user)
            .filter(|r| r.kind != InteractionKind::Produce)
            .collect();
        let n_hold = ((labeled.len() as f64) * fraction).round() as usize;
        let n_hold = n_hold.min(labeled.len());
        let tail = &labeled[labeled.len() - n_hold..];
        if !tail.is_empty() {
            heldout.insert(user.clone(), tail.iter().map(|r| (*r).clone()).collect());
            hidden.extend(tail.iter().copied());
        }
    }
    let visible = d.filter_interactions(|r| !hidden.contains(r));
    Holdout { visible, heldout }
}
