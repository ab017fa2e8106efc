//! End-to-end experiment pipeline: generate a corpus, train the tagger,
//! parse the held-out split with each engine, and write comparable
//! reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::crf::{self, CrfModel, TrainConfig};
use crate::evaluate::{compute_metrics, judge, render_report, ExpectedCounts, MetricsReport};
use crate::gencorpus::{self, GeneratedRecord, NoiseConfig, StyleTemplate};
use crate::model::{assemble_fields, ParsedReference, ParsedReferenceJson};
use crate::rules;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Crf,
    Rules,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Crf => "crf",
            Engine::Rules => "rules",
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("engine crf was requested with no training data and no model file")]
    MissingModel,
    #[error(transparent)]
    Style(#[from] gencorpus::StyleError),
    #[error(transparent)]
    Crf(#[from] crf::CrfError),
    #[error(transparent)]
    ModelIo(#[from] crf::ModelIoError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Everything one experiment run needs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub train_size: usize,
    pub test_size: usize,
    pub styles: Vec<StyleTemplate>,
    pub noise: NoiseConfig,
    pub engines: Vec<Engine>,
    pub train: TrainConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Out-of-the-box model to compare against the freshly trained one.
    pub default_model: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            train_size: 1000,
            test_size: 500,
            styles: gencorpus::builtin_styles(),
            noise: NoiseConfig::clean(0),
            engines: vec![Engine::Crf, Engine::Rules],
            train: TrainConfig::default(),
            seed: 0,
            out_dir: out_dir.into(),
            default_model: None,
        }
    }

    /// Splits `n` records 67/33 into train and test sizes.
    pub fn split_total(mut self, n: usize) -> Self {
        self.train_size = n * 67 / 100;
        self.test_size = n - self.train_size;
        self
    }
}

/// Metrics per engine variant plus the files written.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub crf_report: Option<MetricsReport>,
    pub rules_report: Option<MetricsReport>,
    pub default_report: Option<MetricsReport>,
    pub trained_model: Option<CrfModel>,
    pub files: Vec<PathBuf>,
    /// Corrupted records whose field values no longer match the truth.
    pub degraded_records: usize,
}

fn write_file(files: &mut Vec<PathBuf>, path: PathBuf, contents: &str) -> Result<(), ExperimentError> {
    std::fs::write(&path, contents).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

fn evaluate_predictions(
    predictions: &[ParsedReference],
    truths: &[ParsedReference],
) -> MetricsReport {
    let mut judgments = Vec::new();
    for (id, (pred, truth)) in predictions.iter().zip(truths).enumerate() {
        judgments.extend(judge(pred, truth, id));
    }
    let expected = ExpectedCounts::from_truths(truths);
    compute_metrics(&judgments, &expected)
}

fn parse_with_model(model: &CrfModel, strings: &[String]) -> Vec<ParsedReference> {
    strings
        .iter()
        .map(|s| match model.tag(s) {
            Ok(seq) => assemble_fields(&seq),
            Err(_) => ParsedReference::default(),
        })
        .collect()
}

/// Runs the full pipeline. All outputs under `cfg.out_dir` are
/// deterministic functions of the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let wants_crf = cfg.engines.contains(&Engine::Crf);
    if wants_crf && cfg.train_size == 0 && cfg.default_model.is_none() {
        return Err(ExperimentError::MissingModel);
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| ExperimentError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;

    let total = cfg.train_size + cfg.test_size;
    let records = gencorpus::generate_corpus(total, &cfg.styles, &cfg.noise, cfg.seed)?;
    let (train_records, test_records) = records.split_at(cfg.train_size);
    let degraded_records = records.iter().filter(|r| r.degraded).count();

    let mut files = Vec::new();
    write_corpus_outputs(&mut files, &cfg.out_dir, train_records, test_records)?;

    let test_strings: Vec<String> = test_records
        .iter()
        .map(|r| r.reference_string.clone())
        .collect();
    let test_truths: Vec<ParsedReference> = test_records.iter().map(|r| r.truth.clone()).collect();

    let mut outcome = ExperimentOutcome {
        crf_report: None,
        rules_report: None,
        default_report: None,
        trained_model: None,
        files: Vec::new(),
        degraded_records,
    };

    if wants_crf && cfg.train_size > 0 {
        let corpus: Vec<crate::model::LabeledSequence> = train_records
            .iter()
            .map(|r| r.annotation.derived.clone())
            .collect();
        let model = crf::train(&corpus, &cfg.train)?;
        let model_path = cfg.out_dir.join("model.json");
        crf::save_model_to_path(&model, &model_path)?;
        files.push(model_path);

        let predictions = parse_with_model(&model, &test_strings);
        let report = evaluate_predictions(&predictions, &test_truths);
        write_report(&mut files, &cfg.out_dir, "crf", &report)?;
        outcome.crf_report = Some(report);
        outcome.trained_model = Some(model);
    }

    if let Some(path) = &cfg.default_model {
        let model = crf::load_model_from_path(path)?;
        let predictions = parse_with_model(&model, &test_strings);
        let report = evaluate_predictions(&predictions, &test_truths);
        write_report(&mut files, &cfg.out_dir, "default", &report)?;
        outcome.default_report = Some(report);
    }

    if cfg.engines.contains(&Engine::Rules) {
        let predictions: Vec<ParsedReference> =
            test_strings.iter().map(|s| rules::rule_parse(s)).collect();
        let report = evaluate_predictions(&predictions, &test_truths);
        write_report(&mut files, &cfg.out_dir, "rules", &report)?;
        outcome.rules_report = Some(report);
    }

    let comparison = comparison_table(&outcome);
    write_file(&mut files, cfg.out_dir.join("comparison.tsv"), &comparison)?;

    outcome.files = files;
    Ok(outcome)
}

fn write_corpus_outputs(
    files: &mut Vec<PathBuf>,
    out_dir: &Path,
    train: &[GeneratedRecord],
    test: &[GeneratedRecord],
) -> Result<(), ExperimentError> {
    let (train_xml, train_jsonl) = gencorpus::corpus_files(train);
    write_file(files, out_dir.join("train.xml"), &train_xml)?;
    write_file(files, out_dir.join("train.jsonl"), &train_jsonl)?;

    let mut test_txt = String::new();
    for rec in test {
        test_txt.push_str(&rec.reference_string);
        test_txt.push('\n');
    }
    write_file(files, out_dir.join("test.txt"), &test_txt)?;
    let mut test_jsonl = String::new();
    for rec in test {
        let json = ParsedReferenceJson::from(&rec.truth);
        test_jsonl.push_str(&serde_json::to_string(&json).expect("serializable"));
        test_jsonl.push('\n');
    }
    write_file(files, out_dir.join("test.jsonl"), &test_jsonl)?;
    Ok(())
}

fn write_report(
    files: &mut Vec<PathBuf>,
    out_dir: &Path,
    engine: &str,
    report: &MetricsReport,
) -> Result<(), ExperimentError> {
    let rendered = render_report(report);
    write_file(files, out_dir.join(format!("{engine}_report.tsv")), &rendered.tsv)?;
    write_file(files, out_dir.join(format!("{engine}_report.txt")), &rendered.text)?;
    Ok(())
}

/// Side-by-side micro precision/recall/F1 for every produced variant.
fn comparison_table(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("engine\tprecision\trecall\tf1\n");
    let mut push = |name: &str, report: &Option<MetricsReport>| {
        if let Some(r) = report {
            let m = &r.overall_micro;
            let _ = writeln!(out, "{name}\t{}\t{}\t{}", m.precision, m.recall, m.f1);
        }
    };
    push("crf_default", &outcome.default_report);
    push("crf_retrained", &outcome.crf_report);
    push("rules", &outcome.rules_report);
    out
}
