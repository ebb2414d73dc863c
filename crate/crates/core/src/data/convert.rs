//! Converters from public log layouts into the canonical CSV records.
//!
//! * MovieLens 1M: `ratings.dat` (`UserID::MovieID::Rating::Timestamp`) and
//!   `movies.dat` (`MovieID::Title::Genre|Genre`). Ratings go through
//!   [`map_ratings`]; genres become `tag` attributes and titles `title`.
//! * TikTok short-video logs (tab separated `uid, user_city, item_id,
//!   author_id, item_city, channel, finish, like, music_id, device, time,
//!   duration`). `like`/`finish` flags become Like/Finish records, rows with
//!   neither become NonInteraction, the author becomes a Produce record from a
//!   `a<author_id>` user, and `music_id` becomes an `audio` attribute.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};

use super::{
    map_ratings, AttrType, AttributeRecord, DataError, InteractionKind, InteractionRecord,
    RawRating, Result,
};

fn row_err(file: &str, line: usize, message: impl Into<String>) -> DataError {
    DataError::Row {
        file: file.to_string(),
        line: line as u64,
        message: message.into(),
    }
}

fn parse_int(file: &str, line: usize, field: &str) -> Result<i64> {
    field
        .trim()
        .parse()
        .map_err(|_| row_err(file, line, format!("bad integer {field:?}")))
}

pub fn movielens_ratings<R: Read>(reader: R) -> Result<Vec<RawRating>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: "ratings.dat".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() != 4 {
            return Err(row_err(
                "ratings.dat",
                i + 1,
                "expected 4 '::'-separated fields",
            ));
        }
        out.push(RawRating {
            user_id: parts[0].to_string(),
            item_id: parts[1].to_string(),
            rating: parse_int("ratings.dat", i + 1, parts[2])?,
            timestamp: parse_int("ratings.dat", i + 1, parts[3])?,
        });
    }
    Ok(out)
}

pub fn movielens_movies<R: Read>(reader: R) -> Result<Vec<AttributeRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: "movies.dat".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() != 3 {
            return Err(row_err(
                "movies.dat",
                i + 1,
                "expected 3 '::'-separated fields",
            ));
        }
        let movie = parts[0];
        out.push(AttributeRecord::new(movie, AttrType::Title, parts[1]));
        for genre in parts[2].split('|').filter(|g| !g.is_empty()) {
            out.push(AttributeRecord::new(movie, AttrType::Tag, genre));
        }
    }
    Ok(out)
}

/// MovieLens ratings and movies mapped with the rating threshold rule.
pub fn movielens<R1: Read, R2: Read>(
    ratings: R1,
    movies: R2,
    threshold: i64,
) -> Result<(Vec<InteractionRecord>, Vec<AttributeRecord>)> {
    let raw = movielens_ratings(ratings)?;
    let interactions = map_ratings(&raw, threshold)?;
    Ok((interactions, movielens_movies(movies)?))
}

pub fn tiktok<R: Read>(reader: R) -> Result<(Vec<InteractionRecord>, Vec<AttributeRecord>)> {
    let mut interactions = Vec::new();
    let mut attributes = BTreeSet::new();
    let mut authored = BTreeSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: "tiktok log".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() < 11 {
            return Err(row_err(
                "tiktok log",
                i + 1,
                format!("expected >= 11 fields, found {}", f.len()),
            ));
        }
        let (user, video, author) = (f[0], f[2], f[3]);
        let finish = parse_int("tiktok log", i + 1, f[6])? == 1;
        let like = parse_int("tiktok log", i + 1, f[7])? == 1;
        let ts = parse_int("tiktok log", i + 1, f[10])?;
        if like {
            interactions.push(InteractionRecord::new(
                user,
                video,
                InteractionKind::Like,
                ts,
            ));
        }
        if finish {
            interactions.push(InteractionRecord::new(
                user,
                video,
                InteractionKind::Finish,
                ts,
            ));
        }
        if !like && !finish {
            interactions.push(InteractionRecord::new(
                user,
                video,
                InteractionKind::NonInteraction,
                ts,
            ));
        }
        if author != "-1" && authored.insert(video.to_string()) {
            interactions.push(InteractionRecord::new(
                format!("a{author}"),
                video,
                InteractionKind::Produce,
                ts,
            ));
        }
        if f[8] != "-1" {
            attributes.insert(AttributeRecord::new(video, AttrType::Audio, f[8]));
        }
    }
    Ok((interactions, attributes.into_iter().collect()))
}
