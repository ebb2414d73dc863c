//! Command-line driver: ingest logs, train, evaluate, export
//! recommendations and run the ablation table.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hgrec_core::data::{self, convert, Dataset, IngestReport};
use hgrec_core::eval::{Baseline, EvalReport, RankedList};
use hgrec_core::graph::NodeRef;
use hgrec_core::model::{load_checkpoint, save_checkpoint, Model, Variant};
use hgrec_core::pipeline::{self, PipelineError, Prepared};
use hgrec_core::synth;
use hgrec_core::train::EpochRecord;
use serde::Serialize;

pub use config::{ConfigError, InputFormat, RunConfig};

pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Debug, Parser)]
#[command(
    name = "hgrec",
    version,
    about = "Session-based micro-video recommender"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; every key is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the config file.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Planted,
    RelationSignal,
    MovielensLike,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a raw log into the canonical CSV files.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint and the two baselines on the test users.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint directory; defaults to `<out>/checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated cutoffs; overrides `ks`.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// Export the top-ranked candidates of every test user.
    Recommend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Rows per user.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Train and evaluate all six model variants.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic dataset as canonical CSV.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Failure of a command: a bad configuration (exit 2) or a runtime error
/// tagged with the module that raised it (exit 1).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("[{module}] {message}")]
    Runtime {
        module: &'static str,
        message: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime { .. } => 1,
        }
    }

    fn runtime(module: &'static str, e: impl std::fmt::Display) -> Self {
        Self::Runtime {
            module,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let module = match &e {
            PipelineError::Data(_) => "data",
            PipelineError::Train(_) => "train",
            PipelineError::Model(_) => "model",
            PipelineError::Eval(_) | PipelineError::NoTestUsers => "eval",
            PipelineError::Pool(_) => "pipeline",
        };
        Self::runtime(module, e)
    }
}

impl From<data::DataError> for CliError {
    fn from(e: data::DataError) -> Self {
        Self::runtime("data", e)
    }
}

impl From<hgrec_core::model::ModelError> for CliError {
    fn from(e: hgrec_core::model::ModelError) -> Self {
        Self::runtime("model", e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::runtime("io", format!("{}: {e}", path.display()))
}

/// Resolved configuration: file values, then flag overrides, validated.
pub fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| {
        ConfigError {
            key: key.to_string(),
            message: "required by this command".into(),
        }
        .into()
    })
}

/// Loads the canonical CSV files named by the configuration.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let inter = required(&cfg.interactions, "interactions")?;
    let (d, report) = data::ingest(inter, cfg.attributes.as_deref())?;
    if !report.errors.is_empty() {
        log::warn!(
            "{} rows rejected while loading {}",
            report.errors.len(),
            inter.display()
        );
    }
    Ok(d)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct IngestOutput<'a> {
    config: &'a RunConfig,
    seed: u64,
    users: usize,
    videos: usize,
    interactions: usize,
    density: Option<f64>,
    report: &'a IngestReport,
}

pub fn cmd_ingest(common: &Common) -> Result<()> {
    let cfg = resolve(common)?;
    let inter = required(&cfg.interactions, "interactions")?;
    let (d, report) = match cfg.format {
        InputFormat::Csv => data::ingest(inter, cfg.attributes.as_deref())?,
        InputFormat::Movielens => {
            let movies = required(&cfg.attributes, "attributes")?;
            let (i, a) = convert::movielens(open(inter)?, open(movies)?, cfg.rating_threshold)?;
            Dataset::from_records(i, a)
        }
        InputFormat::Tiktok => {
            let (i, a) = convert::tiktok(open(inter)?)?;
            Dataset::from_records(i, a)
        }
    };
    create_dir(&common.out)?;
    data::export(
        &d,
        &common.out.join("interactions.csv"),
        &common.out.join("attributes.csv"),
    )?;
    write_json(
        &common.out.join("ingest_report.json"),
        &IngestOutput {
            config: &cfg,
            seed: cfg.seed,
            users: d.users().len(),
            videos: d.videos().len(),
            interactions: d.interactions().len(),
            density: data::density(&d).ok(),
            report: &report,
        },
    )
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let d = load_dataset(cfg)?;
    Ok(pipeline::prepare(
        d,
        cfg.train_rate,
        cfg.holdout_fraction,
        cfg.seed,
    )?)
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    config: &'a RunConfig,
    seed: u64,
    variant: Variant,
    trained_users: usize,
    skipped_users: &'a [(String, String)],
    epochs: &'a [EpochRecord],
}

#[derive(Serialize)]
struct Timing {
    epoch: usize,
    wall_seconds: f64,
}

fn train_variant(cfg: &RunConfig, p: &Prepared, variant: Variant) -> Result<pipeline::Trained> {
    let tc = cfg.train(variant);
    Ok(pipeline::train_model(
        p,
        &tc,
        |_: &EpochRecord, _: &Model| Ok(()),
    )?)
}

pub fn cmd_train(common: &Common) -> Result<()> {
    let cfg = resolve(common)?;
    let p = prepare(&cfg)?;
    let trained = train_variant(&cfg, &p, cfg.variant)?;
    create_dir(&common.out)?;
    save_checkpoint(
        &common.out.join(CHECKPOINT_DIR),
        &trained.model,
        cfg.seed,
        &cfg.to_json(),
    )?;
    write_json(
        &common.out.join("train_report.json"),
        &TrainOutput {
            config: &cfg,
            seed: cfg.seed,
            variant: cfg.variant,
            trained_users: trained.users,
            skipped_users: &trained.skipped,
            epochs: &trained.report.epochs,
        },
    )?;
    // Wall-clock times live apart from the report so that reports stay
    // byte-identical across runs.
    let path = common.out.join("train_timing.jsonl");
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
    for (i, s) in trained.report.wall_seconds.iter().enumerate() {
        let line = serde_json::to_string(&Timing {
            epoch: i + 1,
            wall_seconds: *s,
        })
        .map_err(|e| io_err(&path, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

/// Candidate lists of the test users and their model ranking, exactly as
/// `evaluate` and `recommend` see them.
pub fn model_rankings(cfg: &RunConfig, p: &Prepared, model: &Model) -> Result<Vec<RankedList>> {
    let candidates = pipeline::test_candidates(p, &model.graph, cfg.candidates, cfg.seed)?;
    Ok(pipeline::rank_with_model(
        model,
        &p.graph,
        &candidates,
        cfg.threads,
    )?)
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: &'a RunConfig,
    seed: u64,
    checkpoint_seed: u64,
    model: EvalReport,
    popularity: EvalReport,
    random: EvalReport,
}

fn checkpoint_dir(common: &Common, explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| common.out.join(CHECKPOINT_DIR))
}

fn table_rows(method: &str, r: &EvalReport) -> Vec<(String, String, Option<f64>)> {
    let mut rows = Vec::new();
    for m in &r.metrics {
        rows.push((
            method.to_string(),
            format!("precision@{}", m.k),
            Some(m.precision),
        ));
        rows.push((method.to_string(), format!("ndcg@{}", m.k), Some(m.ndcg)));
        rows.push((
            method.to_string(),
            format!("c_timeliness@{}", m.k),
            m.c_timeliness,
        ));
    }
    rows
}

pub fn cmd_evaluate(
    common: &Common,
    checkpoint: &Option<PathBuf>,
    ks: &Option<Vec<usize>>,
) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(ks) = ks {
        cfg.ks = ks.clone();
        cfg.validate()?;
    }
    let (model, manifest) = load_checkpoint(&checkpoint_dir(common, checkpoint))?;
    let p = prepare(&cfg)?;
    let ecfg = cfg.eval();
    let lists = model_rankings(&cfg, &p, &model)?;
    let candidates = pipeline::test_candidates(&p, &model.graph, cfg.candidates, cfg.seed)?;
    let baseline = |b: Baseline| -> Result<EvalReport> {
        let lists = pipeline::rank_baseline(&p.graph, &candidates, b, cfg.seed)?;
        Ok(pipeline::evaluate(&p, &lists, &ecfg)?)
    };
    let out = EvalOutput {
        config: &cfg,
        seed: cfg.seed,
        checkpoint_seed: manifest.seed,
        model: pipeline::evaluate(&p, &lists, &ecfg)?,
        popularity: baseline(Baseline::Popularity)?,
        random: baseline(Baseline::Random)?,
    };
    create_dir(&common.out)?;
    write_json(&common.out.join("eval_report.json"), &out)?;
    let mut rows = table_rows("model", &out.model);
    rows.extend(table_rows("popularity", &out.popularity));
    rows.extend(table_rows("random", &out.random));
    write_table(&common.out.join("eval_metrics.csv"), &rows)
}

fn write_table(path: &Path, rows: &[(String, String, Option<f64>)]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    hgrec_core::eval::write_table(rows, BufWriter::new(file)).map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct RecommendOutput<'a> {
    config: &'a RunConfig,
    seed: u64,
    top: usize,
    users: usize,
}

pub fn cmd_recommend(common: &Common, checkpoint: &Option<PathBuf>, top: usize) -> Result<()> {
    let cfg = resolve(common)?;
    let (model, _) = load_checkpoint(&checkpoint_dir(common, checkpoint))?;
    let p = prepare(&cfg)?;
    let lists = model_rankings(&cfg, &p, &model)?;
    create_dir(&common.out)?;
    let path = common.out.join("recommendations.csv");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| io_err(&path, e);
    w.write_record(["user_id", "rank", "video_id", "score"])
        .map_err(csv_err)?;
    for l in &lists {
        for (i, (v, s)) in l.videos.iter().zip(&l.scores).take(top).enumerate() {
            w.write_record([
                l.user_id.as_str(),
                &(i + 1).to_string(),
                v.as_str(),
                &s.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    write_json(
        &common.out.join("recommend_report.json"),
        &RecommendOutput {
            config: &cfg,
            seed: cfg.seed,
            top,
            users: lists.len(),
        },
    )
}

/// One row of the ablation table.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub precision: f64,
    pub ndcg: f64,
    pub c_timeliness: Option<f64>,
    /// Widths of every fused center embedding of the first test user.
    pub fused_widths: Vec<usize>,
    pub report: EvalReport,
}

#[derive(Serialize)]
struct AblationOutput<'a> {
    config: &'a RunConfig,
    seed: u64,
    k: usize,
    rows: &'a [AblationRow],
}

/// Trains and evaluates every variant on one split.
pub fn run_ablation(cfg: &RunConfig, p: &Prepared) -> Result<Vec<AblationRow>> {
    let mut ecfg = cfg.eval();
    if !ecfg.ks.contains(&cfg.ablate_k) {
        ecfg.ks.push(cfg.ablate_k);
    }
    let mut rows = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        log::info!("ablation variant {}", variant.name());
        let trained = train_variant(cfg, p, variant)?;
        let lists = model_rankings(cfg, p, &trained.model)?;
        let report = pipeline::evaluate(p, &lists, &ecfg)?;
        let at = report
            .at(cfg.ablate_k)
            .cloned()
            .expect("ablate_k is evaluated");
        let first = &lists[0].user_id;
        let fused_widths = trained
            .model
            .fused_widths(&p.graph, &NodeRef::user(first.clone()))?;
        rows.push(AblationRow {
            variant,
            precision: at.precision,
            ndcg: at.ndcg,
            c_timeliness: at.c_timeliness,
            fused_widths,
            report,
        });
    }
    Ok(rows)
}

pub fn cmd_ablate(common: &Common) -> Result<()> {
    let cfg = resolve(common)?;
    let p = prepare(&cfg)?;
    let rows = run_ablation(&cfg, &p)?;
    create_dir(&common.out)?;
    write_json(
        &common.out.join("ablation_report.json"),
        &AblationOutput {
            config: &cfg,
            seed: cfg.seed,
            k: cfg.ablate_k,
            rows: &rows,
        },
    )?;
    let path = common.out.join("ablation.csv");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let k = cfg.ablate_k;
    let header = [
        "variant".to_string(),
        format!("precision@{k}"),
        format!("ndcg@{k}"),
        format!("c_timeliness@{k}"),
    ];
    w.write_record(&header).map_err(|e| io_err(&path, e))?;
    for r in &rows {
        let ct = r
            .c_timeliness
            .map_or_else(|| "null".to_string(), |c| format!("{c:.6}"));
        w.write_record([
            r.variant.name().to_string(),
            format!("{:.6}", r.precision),
            format!("{:.6}", r.ndcg),
            ct,
        ])
        .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

pub fn cmd_synth(kind: SynthKind, seed: u64, out: &Path) -> Result<()> {
    let (d, _) = match kind {
        SynthKind::Planted => synth::planted(seed).dataset(),
        SynthKind::RelationSignal => synth::relation_signal(&Default::default(), seed).dataset(),
        SynthKind::MovielensLike => {
            let (ratings, attrs) = synth::movielens_like(&Default::default(), seed);
            Dataset::from_records(data::map_ratings(&ratings, 4)?, attrs)
        }
    };
    create_dir(out)?;
    data::export(
        &d,
        &out.join("interactions.csv"),
        &out.join("attributes.csv"),
    )?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { common } => cmd_ingest(&common),
        Command::Train { common } => cmd_train(&common),
        Command::Evaluate {
            common,
            checkpoint,
            k,
        } => cmd_evaluate(&common, &checkpoint, &k),
        Command::Recommend {
            common,
            checkpoint,
            top,
        } => cmd_recommend(&common, &checkpoint, top),
        Command::Ablate { common } => cmd_ablate(&common),
        Command::Synth { kind, seed, out } => cmd_synth(kind, seed, &out),
    }
}
