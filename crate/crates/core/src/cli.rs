//! Command-line front ends. The binaries only parse arguments and call
//! [`run_eval`] / [`run_meta`].

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    pairwise_analysis, window_analysis, write_csv, write_json, DEFAULT_WINDOW, PAIRWISE_HEADER,
    WINDOW_HEADER,
};
use crate::config::{EvalConfig, MetricId};
use crate::dataset::{load_meta_dataset, read_aligned, read_sentences, MetaDataset};
use crate::error::{Error, Result};
use crate::meta_eval::{
    corr_sentence, corr_system, expected_wins, human_system_scores, metric_judgments,
    sentence_pair_counts, trueskill_rank, Aggregation, CorrResult, SystemCorrOptions,
};
use crate::runner::{corpus_scores, score_systems, sentence_scores, SystemScore};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "gecmetrics-eval",
    version,
    about = "Score GEC system outputs with one metric"
)]
pub struct EvalArgs {
    /// Source sentences, one per line.
    #[arg(long)]
    pub src: PathBuf,
    /// One file per system.
    #[arg(long, num_args = 1.., required = true)]
    pub hyps: Vec<PathBuf>,
    /// One file per reference set.
    #[arg(long, num_args = 1..)]
    pub refs: Vec<PathBuf>,
    /// Metric id; overrides `metric` in the config.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path, `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    System,
    Sentence,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    None,
    Window,
    Pairwise,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricAggregation {
    /// Corpus-level metric scores.
    None,
    ExpectedWins,
    Trueskill,
}

#[derive(Debug, Parser)]
#[command(
    name = "gecmetrics-meta",
    version,
    about = "Meta-evaluate a metric against human judgments"
)]
pub struct MetaArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub level: Level,
    /// Human system scores: the dataset's gold, or recomputed from judgments.
    #[arg(long, default_value = "average", value_parser = ["average", "expected_wins", "trueskill"])]
    pub aggregation: String,
    /// Metric system scores: corpus scores, or pairwise aggregation of sentence scores.
    #[arg(long, value_enum, default_value = "none")]
    pub metric_aggregation: MetricAggregation,
    #[arg(long, value_enum, default_value = "none")]
    pub analysis: AnalysisKind,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Directory for analysis tables.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// JSON summary path, `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
}

pub fn load_config(path: Option<&Path>, metric: Option<&str>) -> Result<EvalConfig> {
    let cfg = match path {
        Some(p) => EvalConfig::load(p)?,
        None => EvalConfig::default(),
    };
    let metric = metric.map(str::parse::<MetricId>).transpose()?;
    cfg.resolve(metric)
}

fn emit(out: &str, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))
    } else {
        std::fs::write(out, text + "\n").map_err(|e| Error::io(out, e))
    }
}

fn system_names(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    let mut sorted = stems.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() == stems.len() {
        stems
    } else {
        paths.iter().map(|p| p.display().to_string()).collect()
    }
}

fn metadata(cfg: &EvalConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), json!("gec-metrics"));
    m.insert("version".into(), json!(VERSION));
    m.insert("metric".into(), json!(cfg.metric.as_str()));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert(
        "config".into(),
        serde_json::to_value(cfg).expect("config serializes"),
    );
    m
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.metric.as_deref())?;
    let sources = read_sentences(&args.src)?;
    let hyps = read_aligned(&args.hyps, sources.len(), &args.src)?;
    let systems: Vec<(String, Vec<_>)> = system_names(&args.hyps).into_iter().zip(hyps).collect();
    let refs_paths = &args.refs;
    let scores = score_systems(&cfg, &sources, &systems, || {
        if refs_paths.is_empty() {
            return Err(Error::usage("no --refs given"));
        }
        read_aligned(refs_paths, sources.len(), &args.src)
    })?;
    let mut out = metadata(&cfg);
    out.insert(
        "results".into(),
        serde_json::to_value(&scores).expect("scores serialize"),
    );
    emit(&args.out, &Value::Object(out))
}

fn degenerate_to_none(
    r: Result<CorrResult>,
    what: &str,
    warnings: &mut Vec<String>,
) -> Result<Option<CorrResult>> {
    match r {
        Ok(c) => Ok(Some(c)),
        Err(Error::Degenerate(m)) => {
            warnings.push(format!("{what}: {m}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn metric_system_scores(
    kind: MetricAggregation,
    scores: &[SystemScore],
    cfg: &EvalConfig,
    judgments: &crate::meta_eval::JudgmentSet,
) -> Result<std::collections::BTreeMap<String, f64>> {
    if kind == MetricAggregation::None {
        return Ok(corpus_scores(scores));
    }
    let mj = metric_judgments(&sentence_scores(scores), judgments, cfg.higher_is_better)?;
    Ok(match kind {
        MetricAggregation::ExpectedWins => expected_wins(&mj)?
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect(),
        _ => trueskill_rank(&mj, &cfg.trueskill_params())?
            .ratings
            .into_iter()
            .map(|(k, r)| (k, r.mu))
            .collect(),
    })
}

/// Everything [`meta_report`] needs besides the config and the dataset.
#[derive(Debug, Clone)]
pub struct MetaOptions {
    pub level: Level,
    pub aggregation: Aggregation,
    pub metric_aggregation: MetricAggregation,
    pub analysis: AnalysisKind,
    pub window: usize,
    /// Where analysis tables go as CSV and JSON; rows are embedded in the
    /// report either way.
    pub out_dir: Option<PathBuf>,
}

impl Default for MetaOptions {
    fn default() -> Self {
        MetaOptions {
            level: Level::Both,
            aggregation: Aggregation::Average,
            metric_aggregation: MetricAggregation::None,
            analysis: AnalysisKind::None,
            window: DEFAULT_WINDOW,
            out_dir: None,
        }
    }
}

/// Scores every system of the dataset and correlates the metric with the
/// human judgments. Degenerate correlations become `null` plus a warning.
pub fn meta_report(cfg: &EvalConfig, data: &MetaDataset, o: &MetaOptions) -> Result<Value> {
    let systems: Vec<(String, Vec<_>)> = data
        .systems
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let scores = score_systems(cfg, &data.sources, &systems, || data.references())?;
    let j = &data.judgments;
    let mut warnings = Vec::new();

    // metric scores fed through an aggregation are oriented higher-is-better already
    let metric_sys = metric_system_scores(o.metric_aggregation, &scores, cfg, j)?;
    let higher = cfg.higher_is_better || o.metric_aggregation != MetricAggregation::None;
    let opts = SystemCorrOptions {
        aggregation: o.aggregation,
        higher_is_better: higher,
        trueskill: cfg.trueskill_params(),
    };
    let human = human_system_scores(j, o.aggregation, &opts.trueskill)?;
    let sent = sentence_scores(&scores);

    let system_level = if matches!(o.level, Level::System | Level::Both) {
        degenerate_to_none(
            corr_system(&metric_sys, j, &opts),
            "system level",
            &mut warnings,
        )?
    } else {
        None
    };
    let (sentence_level, pair_counts) = if matches!(o.level, Level::Sentence | Level::Both) {
        let counts = sentence_pair_counts(&sent, j, cfg.higher_is_better)?;
        let c = corr_sentence(&sent, j, cfg.meta.tie_policy, cfg.higher_is_better);
        (
            degenerate_to_none(c, "sentence level", &mut warnings)?,
            Some(counts),
        )
    } else {
        (None, None)
    };

    let mut analysis = serde_json::Map::new();
    if matches!(o.analysis, AnalysisKind::Window | AnalysisKind::Both) {
        let paired = metric_sys.keys().filter(|k| human.contains_key(*k)).count();
        let mut window = o.window;
        if window > paired && paired >= 2 {
            warnings.push(format!(
                "window {window} exceeds the {paired} scored systems; using {paired}"
            ));
            window = paired;
        }
        let rows = window_analysis(&metric_sys, &human, window, higher)?;
        analysis.insert(
            "window".into(),
            tables(o.out_dir.as_deref(), "window", &WINDOW_HEADER, &rows)?,
        );
    }
    if matches!(o.analysis, AnalysisKind::Pairwise | AnalysisKind::Both) {
        let cells = pairwise_analysis(&sent, j, cfg.higher_is_better)?;
        analysis.insert(
            "pairwise".into(),
            tables(o.out_dir.as_deref(), "pairwise", &PAIRWISE_HEADER, &cells)?,
        );
    }

    let mut out = metadata(cfg);
    out.insert("dataset".into(), json!(data.manifest.name));
    out.insert("label".into(), json!(data.manifest.label));
    out.insert("level".into(), json!(o.level));
    out.insert("aggregation".into(), json!(o.aggregation));
    out.insert("metric_aggregation".into(), json!(o.metric_aggregation));
    out.insert("system_level".into(), json!(system_level));
    out.insert("sentence_level".into(), json!(sentence_level));
    out.insert("pair_counts".into(), json!(pair_counts));
    out.insert("metric_system_scores".into(), json!(metric_sys));
    out.insert("human_system_scores".into(), json!(human));
    out.insert("analysis".into(), Value::Object(analysis));
    out.insert("warnings".into(), json!(warnings));
    Ok(Value::Object(out))
}

pub fn run_meta(args: &MetaArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.metric.as_deref())?;
    let opts = MetaOptions {
        level: args.level,
        aggregation: args.aggregation.parse()?,
        metric_aggregation: args.metric_aggregation,
        analysis: args.analysis,
        window: args.window,
        out_dir: Some(args.out_dir.clone()),
    };
    let data = load_meta_dataset(&args.dataset)?;
    emit(&args.out, &meta_report(&cfg, &data, &opts)?)
}

fn tables<T: Serialize>(
    dir: Option<&Path>,
    stem: &str,
    header: &[&str],
    rows: &[T],
) -> Result<Value> {
    let mut v = json!({ "rows": rows });
    if let Some(dir) = dir {
        let files = write_tables(dir, stem, header, rows)?;
        v["csv"] = files["csv"].clone();
        v["json"] = files["json"].clone();
    }
    Ok(v)
}

fn write_tables<T: Serialize>(
    dir: &Path,
    stem: &str,
    header: &[&str],
    rows: &[T],
) -> Result<Value> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_csv(std::io::BufWriter::new(f), header, rows)?;
    let f = std::fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    write_json(std::io::BufWriter::new(f), rows)?;
    Ok(json!({
        "csv": csv_path.display().to_string(),
        "json": json_path.display().to_string(),
    }))
}

/// Maps an outcome to a process exit status, printing the error.
pub fn exit_status(r: Result<()>) -> i32 {
    match r {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
