//! The `coca` pipeline: corpus generation, augmentation, graph building,
//! contrastive pretraining, classifier training, detection, explanation and
//! evaluation, each stage reading the previous stage's JSON-lines artifact.

pub mod artifact;
pub mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use coca_core::codegraph::{build_graph, CodeGraph, Label};
use coca_core::derive_seed;
use coca_core::encoders::{Classifier, Detector};
use coca_core::evalkit::{
    detection_metrics, generate_corpus, split_indices, vtp_metrics, DetectionMetrics, MetricError, VtpMetrics,
};
use coca_core::explainer::{explain, ExplainError, ExplainMode, StatementScore};
use coca_core::minic::{parse, pretty_print, FrontendError, Function};
use coca_core::training::{
    pretrain_encoder, predict_graph, train_classifier, ClassifierReport, LossMode, Pretrained, Sample, TrainError,
};
use coca_core::transforms::{augment, AugmentConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifact::{read_jsonl, ArtifactWriter, Header};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
            CliError::Frontend(_) => "parse",
            CliError::Train(_) => "train",
            CliError::Explain(_) => "explain",
            CliError::Metric(_) => "metric",
        }
    }

    /// Single-line machine-readable form for stderr.
    pub fn record(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Records

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One function of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub code: String,
    /// 1 for vulnerable, 0 for benign.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    /// 1-based ground-truth lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vuln_lines: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    pub id: String,
    pub code: String,
    pub variant: String,
    /// Applied operators as `OP@path`, in application order.
    pub applied: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    pub graph: CodeGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorArtifact {
    pub detector: Detector,
    pub report: ClassifierReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub label: u8,
    /// Probability of the vulnerable class.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub id: String,
    pub predicted: u8,
    pub statements: Vec<StatementScore>,
    pub kept_edges: Vec<usize>,
    pub factual_check: bool,
    pub counterfactual_check: bool,
    pub degenerate: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub predictions: usize,
    pub detection: DetectionMetrics,
    pub explanations: usize,
    /// Over explained records that are truly vulnerable and carry ground truth.
    pub vtp: Option<VtpMetrics>,
}

fn label_of(code: u8, id: &str) -> Result<Label> {
    match code {
        0 => Ok(Label::Benign),
        1 => Ok(Label::Vulnerable),
        _ => Err(CliError::Data(format!("record {id}: label must be 0 or 1"))),
    }
}

fn label_code(l: Label) -> u8 {
    l.as_class() as u8
}

/// A dataset record with its parsed function.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub record: DatasetRecord,
    pub ast: Function,
    pub split: Split,
}

impl Loaded {
    fn label(&self) -> Result<Option<Label>> {
        self.record.label.map(|c| label_of(c, &self.record.id)).transpose()
    }

    fn sample(&self) -> Result<Sample> {
        let label = self
            .label()?
            .ok_or_else(|| CliError::Data(format!("record {} has no label", self.record.id)))?;
        Ok(Sample {
            id: self.record.id.clone(),
            ast: self.ast.clone(),
            label,
        })
    }
}

/// Reads, validates and sorts a dataset by id. Records without a `split`
/// field are assigned one from the run seed.
pub fn load_dataset(path: &Path, seed: u64) -> Result<Vec<Loaded>> {
    let (_, mut records): (_, Vec<DatasetRecord>) = read_jsonl(path)?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    for w in records.windows(2) {
        if w[0].id == w[1].id {
            return Err(CliError::Data(format!("duplicate record id {}", w[0].id)));
        }
    }
    let mut assigned = vec![Split::Train; records.len()];
    if records.iter().any(|r| r.split.is_none()) {
        let (_, val, test) = split_indices(records.len(), seed);
        for i in val {
            assigned[i] = Split::Val;
        }
        for i in test {
            assigned[i] = Split::Test;
        }
    }
    let mut out = Vec::with_capacity(records.len());
    for (record, fallback) in records.into_iter().zip(assigned) {
        let ast = parse(&record.code).map_err(|e| CliError::Data(format!("record {}: {e}", record.id)))?;
        if let Some(c) = record.label {
            label_of(c, &record.id)?;
        }
        if let Some(lines) = &record.vuln_lines {
            let n = record.code.lines().count() as u32;
            if let Some(bad) = lines.iter().find(|&&l| l == 0 || l > n) {
                return Err(CliError::Data(format!("record {}: vuln line {bad} outside 1..={n}", record.id)));
            }
        }
        let split = record.split.unwrap_or(fallback);
        out.push(Loaded { record, ast, split });
    }
    Ok(out)
}

fn samples_of(data: &[Loaded], split: Split) -> Result<Vec<Sample>> {
    data.iter().filter(|l| l.split == split).map(Loaded::sample).collect()
}

fn select(data: &[Loaded], split: Option<Split>) -> impl Iterator<Item = &Loaded> {
    data.iter().filter(move |l| split.map_or(true, |s| l.split == s))
}

/// The first record after the header of a single-object artifact.
fn read_single<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let (_, mut recs): (_, Vec<T>) = read_jsonl(path)?;
    match recs.len() {
        1 => Ok(recs.remove(0)),
        n => Err(CliError::Data(format!("{}: expected one record, found {n}", path.display()))),
    }
}

// ---------------------------------------------------------------------------
// Stages

pub fn gen_corpus(cfg: &RunConfig, out: &Path) -> Result<()> {
    let corpus = generate_corpus(&cfg.corpus_spec());
    let (_, val, test) = split_indices(corpus.len(), cfg.seed);
    let mut split = vec![Split::Train; corpus.len()];
    for i in val {
        split[i] = Split::Val;
    }
    for i in test {
        split[i] = Split::Test;
    }
    let mut w = ArtifactWriter::create(out, &Header::new("gen-corpus", cfg))?;
    for (r, s) in corpus.iter().zip(split) {
        w.record(&DatasetRecord {
            id: r.id.clone(),
            code: r.source.clone(),
            label: Some(label_code(r.label)),
            vuln_lines: Some(r.vuln_lines.iter().copied().collect()),
            split: Some(s),
        })?;
    }
    w.finish()
}

pub fn augment_dataset(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let data = load_dataset(input, cfg.seed)?;
    let mut w = ArtifactWriter::create(out, &Header::new("augment", cfg))?;
    for l in &data {
        let acfg = AugmentConfig {
            per_op_probability: cfg.augment_probability,
            ..AugmentConfig::default().with_seed(derive_seed(cfg.seed, &l.record.id))
        };
        let a = augment(&l.ast, &acfg);
        w.record(&AugmentedRecord {
            id: l.record.id.clone(),
            code: l.record.code.clone(),
            variant: pretty_print(&a.ast),
            applied: a.applied.iter().map(|t| format!("{}@{}", t.op, t.path)).collect(),
        })?;
    }
    w.finish()
}

pub fn build_graphs(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let data = load_dataset(input, cfg.seed)?;
    let mut w = ArtifactWriter::create(out, &Header::new("build-graphs", cfg))?;
    for l in &data {
        w.record(&GraphRecord {
            id: l.record.id.clone(),
            graph: build_graph(&l.ast, l.label()?, cfg.feature_dim),
        })?;
    }
    w.finish()
}

pub fn pretrain(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let data = load_dataset(input, cfg.seed)?;
    let train = samples_of(&data, Split::Train)?;
    let val = samples_of(&data, Split::Val)?;
    let pre = pretrain_encoder(&train, &val, &cfg.train_config())?;
    for warning in &pre.warnings {
        eprintln!("{}", serde_json::json!({ "warning": warning }));
    }
    let mut w = ArtifactWriter::create(out, &Header::new("pretrain", cfg))?;
    w.record(&pre)?;
    w.finish()
}

pub fn train_classifier_stage(cfg: &RunConfig, input: &Path, encoder: &Path, out: &Path) -> Result<()> {
    let data = load_dataset(input, cfg.seed)?;
    let pre: Pretrained = read_single(encoder)?;
    let train = samples_of(&data, Split::Train)?;
    let val = samples_of(&data, Split::Val)?;
    let (classifier, report): (Classifier, ClassifierReport) = train_classifier(&pre.encoder, &train, &val, &cfg.train_config())?;
    let mut w = ArtifactWriter::create(out, &Header::new("train-classifier", cfg))?;
    w.record(&DetectorArtifact {
        detector: Detector {
            encoder: pre.encoder,
            classifier,
        },
        report,
    })?;
    w.finish()
}

fn load_detector(path: &Path) -> Result<Detector> {
    Ok(read_single::<DetectorArtifact>(path)?.detector)
}

fn graph_for(det: &Detector, l: &Loaded) -> CodeGraph {
    build_graph(&l.ast, None, det.encoder.config.input_dim)
}

pub fn detect_stage(cfg: &RunConfig, input: &Path, model: &Path, out: &Path, split: Option<Split>) -> Result<()> {
    let data = load_dataset(input, cfg.seed)?;
    let det = load_detector(model)?;
    let mut w = ArtifactWriter::create(out, &Header::new("detect", cfg))?;
    for l in select(&data, split) {
        let p = predict_graph(&det, &graph_for(&det, l))?;
        w.record(&PredictionRecord {
            id: l.record.id.clone(),
            label: label_code(p.label),
            probability: p.probability,
        })?;
    }
    w.finish()
}

pub fn explain_stage(cfg: &RunConfig, input: &Path, model: &Path, out: &Path, split: Option<Split>) -> Result<()> {
    let data = load_dataset(input, cfg.seed)?;
    let det = load_detector(model)?;
    let ecfg = cfg.explainer_config();
    let mut w = ArtifactWriter::create(out, &Header::new("explain", cfg))?;
    for l in select(&data, split) {
        let g = graph_for(&det, l);
        let p = predict_graph(&det, &g)?;
        if p.label != Label::Vulnerable {
            eprintln!(
                "{}",
                serde_json::json!({ "skipped": l.record.id, "reason": "predicted benign" })
            );
            continue;
        }
        let r = explain(&det, &g, &ecfg)?;
        w.record(&ExplanationRecord {
            id: l.record.id.clone(),
            predicted: label_code(r.predicted),
            statements: r.statements,
            kept_edges: r.kept_edges,
            factual_check: r.factual_check,
            counterfactual_check: r.counterfactual_check,
            degenerate: r.degenerate,
            objective: r.objective,
        })?;
    }
    w.finish()
}

pub fn evaluate_stage(
    cfg: &RunConfig,
    input: &Path,
    predictions: &Path,
    explanations: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let data = load_dataset(input, cfg.seed)?;
    let by_id: BTreeMap<&str, &Loaded> = data.iter().map(|l| (l.record.id.as_str(), l)).collect();
    let lookup = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| CliError::Data(format!("record {id} not in dataset")))
    };

    let (_, mut preds): (_, Vec<PredictionRecord>) = read_jsonl(predictions)?;
    preds.sort_by(|a, b| a.id.cmp(&b.id));
    let (mut predicted, mut actual) = (Vec::new(), Vec::new());
    for p in &preds {
        let l = lookup(&p.id)?;
        let truth = l
            .label()?
            .ok_or_else(|| CliError::Data(format!("record {} has no label", p.id)))?;
        predicted.push(label_of(p.label, &p.id)?);
        actual.push(truth);
    }
    let detection = detection_metrics(&predicted, &actual)?;

    let mut explained = 0;
    let mut vtp = None;
    if let Some(path) = explanations {
        let (_, mut recs): (_, Vec<ExplanationRecord>) = read_jsonl(path)?;
        recs.sort_by(|a, b| a.id.cmp(&b.id));
        explained = recs.len();
        let (mut se, mut sp) = (Vec::new(), Vec::new());
        for r in &recs {
            let l = lookup(&r.id)?;
            let truth: BTreeSet<u32> = l.record.vuln_lines.iter().flatten().copied().collect();
            if l.label()? == Some(Label::Vulnerable) && !truth.is_empty() {
                se.push(r.statements.iter().map(|s| s.line).collect());
                sp.push(truth);
            }
        }
        if !se.is_empty() {
            vtp = Some(vtp_metrics(&se, &sp)?);
        }
    }
    let mut w = ArtifactWriter::create(out, &Header::new("evaluate", cfg))?;
    w.record(&MetricSummary {
        predictions: preds.len(),
        detection,
        explanations: explained,
        vtp,
    })?;
    w.finish()
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "coca", version, about = "Contrastive GNN vulnerability detection and explanation for MiniC")]
pub struct Cli {
    /// Flat TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic labeled corpus.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair every record with a semantics-preserving variant.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serialize the code graph of every record.
    BuildGraphs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contrastive pretraining of the encoder on the train split.
    Pretrain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_loss)]
        loss: Option<LossMode>,
    },
    /// Fit the classifier on frozen embeddings.
    TrainClassifier {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output of `pretrain`.
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_loss)]
        loss: Option<LossMode>,
    },
    /// Predict every record (or one split).
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output of `train-classifier`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        split: Option<Split>,
    },
    /// Explain records predicted vulnerable.
    Explain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        split: Option<Split>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ExplainMode>,
    },
    /// Detection and statement-level metrics against the dataset labels.
    Evaluate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        explanations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_loss(s: &str) -> std::result::Result<LossMode, String> {
    s.parse()
}

fn parse_mode(s: &str) -> std::result::Result<ExplainMode, String> {
    s.parse()
}

/// Effective configuration for a parsed command line.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Pretrain { loss: Some(l), .. } | Command::TrainClassifier { loss: Some(l), .. } => cfg.loss = *l,
        Command::Explain { mode: Some(m), .. } => cfg.mode = *m,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::GenCorpus { out } => gen_corpus(&cfg, out),
        Command::Augment { input, out } => augment_dataset(&cfg, input, out),
        Command::BuildGraphs { input, out } => build_graphs(&cfg, input, out),
        Command::Pretrain { input, out, .. } => pretrain(&cfg, input, out),
        Command::TrainClassifier {
            input, encoder, out, ..
        } => train_classifier_stage(&cfg, input, encoder, out),
        Command::Detect {
            input,
            model,
            out,
            split,
        } => detect_stage(&cfg, input, model, out, *split),
        Command::Explain {
            input,
            model,
            out,
            split,
            ..
        } => explain_stage(&cfg, input, model, out, *split),
        Command::Evaluate {
            input,
            predictions,
            explanations,
            out,
        } => evaluate_stage(&cfg, input, predictions, explanations.as_deref(), out),
    }
}
