//! Flat run configuration read from a TOML file. Every key is optional;
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use hgrec_core::graph::GraphConfig;
use hgrec_core::model::{ModelConfig, Variant};
use hgrec_core::pipeline::EvalConfig;
use hgrec_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// Input layout understood by `ingest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    Csv,
    Movielens,
    Tiktok,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Canonical interactions CSV (or raw log for `ingest`).
    pub interactions: Option<PathBuf>,
    /// Canonical attributes CSV (or `movies.dat` for MovieLens).
    pub attributes: Option<PathBuf>,
    pub format: InputFormat,
    pub rating_threshold: i64,

    pub seed: u64,
    pub threads: usize,
    pub train_rate: f64,
    pub holdout_fraction: f64,

    pub max_history: usize,
    pub session_len: usize,
    pub neighbors: usize,
    pub layers: usize,
    pub max_sessions: usize,

    pub dim: usize,
    pub hidden: usize,
    pub leaky_slope: f64,
    pub epsilon: f64,
    pub hash_buckets: usize,
    pub variant: Variant,

    pub lr: f64,
    pub batch_size: usize,
    pub beta: f64,
    pub eta: f64,
    pub epochs: usize,
    pub negatives_per_positive: usize,
    pub positives_per_user: usize,

    pub ks: Vec<usize>,
    pub candidates: usize,
    pub t0: i64,
    /// Cutoff of the ablation table.
    pub ablate_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GraphConfig::default();
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let e = EvalConfig::default();
        Self {
            interactions: None,
            attributes: None,
            format: InputFormat::Csv,
            rating_threshold: 4,
            seed: t.seed,
            threads: t.threads,
            train_rate: 0.8,
            holdout_fraction: 0.5,
            max_history: g.max_history,
            session_len: g.session_len,
            neighbors: g.neighbors,
            layers: g.layers,
            max_sessions: g.max_sessions,
            dim: m.dim,
            hidden: m.hidden,
            leaky_slope: m.leaky_slope,
            epsilon: m.epsilon,
            hash_buckets: m.hash_buckets,
            variant: Variant::Full,
            lr: t.lr,
            batch_size: t.batch_size,
            beta: t.beta,
            eta: t.eta,
            epochs: t.epochs,
            negatives_per_positive: t.negatives_per_positive,
            positives_per_user: t.positives_per_user,
            ks: e.ks,
            candidates: e.candidates,
            t0: e.t0,
            ablate_k: 10,
        }
    }
}

/// A configuration problem, tagged with the key at fault.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config key `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl RunConfig {
    /// Parses `text`; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let from_span = e.span().map(|s| {
                let line_start = text[..s.start].rfind('\n').map_or(0, |i| i + 1);
                let line = text[line_start..].lines().next().unwrap_or("");
                line.split('=').next().unwrap_or("").trim().to_string()
            });
            let key = from_span
                .filter(|k| !k.is_empty())
                .or_else(|| message.split('`').nth(1).map(str::to_string))
                .unwrap_or_default();
            ConfigError { key, message }
        })?;
        for p in [&mut cfg.interactions, &mut cfg.attributes]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("threads", self.threads),
            ("max_history", self.max_history),
            ("session_len", self.session_len),
            ("neighbors", self.neighbors),
            ("max_sessions", self.max_sessions),
            ("dim", self.dim),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
            ("negatives_per_positive", self.negatives_per_positive),
            ("candidates", self.candidates),
            ("ablate_k", self.ablate_k),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(ConfigError::new(key, "must be >= 1"));
            }
        }
        if self.layers < 2 {
            return Err(ConfigError::new("layers", "must be >= 2"));
        }
        if self.session_len * self.max_sessions > self.max_history {
            return Err(ConfigError::new(
                "max_sessions",
                "session_len * max_sessions must not exceed max_history",
            ));
        }
        if !(self.train_rate > 0.0 && self.train_rate < 1.0) {
            return Err(ConfigError::new("train_rate", "must lie in (0, 1)"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(ConfigError::new("holdout_fraction", "must lie in (0, 1)"));
        }
        if !(1..=5).contains(&self.rating_threshold) {
            return Err(ConfigError::new("rating_threshold", "must lie in 1..=5"));
        }
        for (key, v) in [
            ("lr", self.lr),
            ("beta", self.beta),
            ("eta", self.eta),
            ("epsilon", self.epsilon),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::new(key, "must be a finite number >= 0"));
            }
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(ConfigError::new("leaky_slope", "must lie in [0, 1)"));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(ConfigError::new(
                "ks",
                "must be a non-empty list of integers >= 1",
            ));
        }
        Ok(())
    }

    pub fn graph(&self) -> GraphConfig {
        GraphConfig {
            max_history: self.max_history,
            session_len: self.session_len,
            neighbors: self.neighbors,
            layers: self.layers,
            max_sessions: self.max_sessions,
        }
    }

    pub fn model(&self, variant: Variant) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            hidden: self.hidden,
            layers: self.layers,
            leaky_slope: self.leaky_slope,
            epsilon: self.epsilon,
            hash_buckets: self.hash_buckets,
            flags: variant.flags(),
        }
    }

    pub fn train(&self, variant: Variant) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            beta: self.beta,
            eta: self.eta,
            epochs: self.epochs,
            negatives_per_positive: self.negatives_per_positive,
            positives_per_user: self.positives_per_user,
            seed: self.seed,
            threads: self.threads,
            graph: self.graph(),
            model: self.model(variant),
        }
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            ks: self.ks.clone(),
            candidates: self.candidates,
            t0: self.t0,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
