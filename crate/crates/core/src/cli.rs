//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or I/O error, 3 validation failure,
//! 4 quality target missed (or training diverged).
//!
//! Results go to stdout or the `-o` file; diagnostics go to stderr only.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::align::{attribute_words, count_unattributed, flatten_stream, group_turns, AlignConfig, Turn};
use crate::error::Error;
use crate::fusion::{
    generate_dataset, train_toy, write_checkpoint, FusionConfig, Sample, SyntheticSpec, TrainConfig,
};
use crate::ingest::{
    parse_embedding, parse_hypothesis, parse_reference, parse_rttm, parse_turns, parse_words,
    to_json_string, write_turns, EmotionLabel, FloatStyle,
};
use crate::metrics::{
    classification_report, compute_steer, compute_teer, match_labels, ClassificationReport,
    LabeledInterval, TeerBreakdown,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_QUALITY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "emoalign", version, about = "Align ASR words with diarization, score emotion timelines, train the fusion demo")]
pub struct Cli {
    /// JSON config file with defaults for any subcommand; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build speaker-attributed turns from word timestamps and RTTM segments.
    Align(AlignArgs),
    /// Score a hypothesis emotion timeline against a reference.
    Score(ScoreArgs),
    /// Train the fusion classifier on synthetic (or supplied) embeddings.
    FuseDemo(FuseDemoArgs),
    /// Pretty-print a turns document.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Word-transcript document(s); paired in order with --rttm.
    #[arg(long, required = true, num_args = 1..)]
    pub words: Vec<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    pub rttm: Vec<PathBuf>,
    /// Pause threshold in seconds (default 1.5).
    #[arg(long)]
    pub pause: Option<f64>,
    /// Nearest-segment rescue window in seconds (default 0.5).
    #[arg(long)]
    pub rescue_window: Option<f64>,
    /// Keep words that match no speaker instead of dropping them.
    #[arg(long)]
    pub keep_unattributed: bool,
    /// Output file for a single session (default stdout).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    /// Output directory, required for several sessions. `x.words.json`
    /// becomes `x.turns.json`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads across sessions.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Teer,
    Steer,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// Hypothesis turns carrying predicted emotion labels.
    #[arg(long)]
    pub hypothesis: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<Metric>>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseDemoArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Training accuracy required for exit status 0.
    #[arg(long)]
    pub target: Option<f64>,
    /// Directory with `manifest.json` listing embedding files and labels.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Per-epoch report (default stdout).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "checkpoint.json")]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub turns: PathBuf,
    /// Also list each word with its attribution.
    #[arg(long)]
    pub words: bool,
}

/// Defaults loaded from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub align: AlignSection,
    pub score: ScoreSection,
    pub fusion: FusionSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct AlignSection {
    pub pause: Option<f64>,
    pub rescue_window: Option<f64>,
    pub keep_unattributed: Option<bool>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ScoreSection {
    pub metrics: Option<Vec<Metric>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct FusionSection {
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub heads: Option<usize>,
    pub lr: Option<f64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub target: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    Quality(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Quality(_) => EXIT_QUALITY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Quality(m) => m,
        }
    }
}

fn with_path(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |err| match err {
        Error::Io(e) => CliError::Usage(format!("{}: {e}", path.display())),
        Error::Training { .. } => CliError::Quality(format!("{}: {err}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("emoalign: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => serde_json::from_str::<ConfigFile>(&read_file(path)?)
            .map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Align(args) => run_align(&args, &config.align),
        Command::Score(args) => run_score(&args, &config.score),
        Command::FuseDemo(args) => run_fuse_demo(&args, &config.fusion),
        Command::Inspect(args) => run_inspect(&args),
    }
}

struct AlignResult {
    document: String,
    turns: usize,
    words: usize,
    dropped: usize,
}

fn align_session(words_path: &Path, rttm_path: &Path, config: &AlignConfig) -> Result<AlignResult, CliError> {
    let words_text = read_file(words_path)?;
    let rttm_text = read_file(rttm_path)?;
    let words = if words_text.trim().is_empty() {
        Vec::new()
    } else {
        parse_words(&words_text).map_err(with_path(words_path))?
    };
    let segments = parse_rttm(&rttm_text).map_err(with_path(rttm_path))?;
    let attributed = attribute_words(&words, &segments, config);
    let unattributed = count_unattributed(&attributed);
    let stream = flatten_stream(attributed, config);
    let turns = group_turns(stream, config).map_err(with_path(words_path))?;
    let document = write_turns(&turns).map_err(with_path(words_path))?;
    Ok(AlignResult {
        document,
        turns: turns.len(),
        words: words.len(),
        dropped: if config.drop_unattributed { unattributed } else { 0 },
    })
}


fn run_align(args: &AlignArgs, defaults: &AlignSection) -> Result<(), CliError> {
    let config = AlignConfig {
        pause_threshold: args.pause.or(defaults.pause).unwrap_or(1.5),
        rescue_window: args.rescue_window.or(defaults.rescue_window).unwrap_or(0.5),
        drop_unattributed: !(args.keep_unattributed || defaults.keep_unattributed.unwrap_or(false)),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.words.len() != args.rttm.len() {
        return Err(CliError::Usage(format!(
            "{} --words files but {} --rttm files",
            args.words.len(),
            args.rttm.len()
        )));
    }
    let multi = args.words.len() > 1;
    if multi && args.out_dir.is_none() {
        return Err(CliError::Usage("several sessions need --out-dir".into()));
    }
    if multi && args.output.is_some() {
        return Err(CliError::Usage("-o takes a single session; use --out-dir".into()));
    }
    let jobs = if args.jobs == 1 { defaults.jobs.unwrap_or(1) } else { args.jobs };
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }

    let pairs: Vec<(&PathBuf, &PathBuf)> = args.words.iter().zip(&args.rttm).collect();
    let results = run_parallel(&pairs, jobs, |(w, r)| align_session(w, r, &config));

    for ((words_path, _), result) in pairs.iter().zip(results) {
        let res = result?;
        eprintln!(
            "{}: {} turns from {} words, {} dropped",
            words_path.display(),
            res.turns,
            res.words,
            res.dropped
        );
        match &args.out_dir {
            Some(dir) => {
                let stem = words_path.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
                let stem = stem.strip_suffix(".words").unwrap_or(stem);
                let target = dir.join(format!("{stem}.turns.json"));
                write_output(Some(&target), &res.document)?;
            }
            None => write_output(args.output.as_deref(), &res.document)?,
        }
    }
    Ok(())
}

/// Run `f` over `items` on up to `jobs` threads; results keep input order.
fn run_parallel<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

#[derive(Serialize)]
struct RateReport {
    #[serde(flatten)]
    breakdown: TeerBreakdown,
    percent: String,
}

#[derive(Serialize)]
struct F1Row {
    emotion: EmotionLabel,
    f1: f64,
}

#[derive(Serialize)]
struct ScoreReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    teer: Option<RateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steer: Option<RateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<ClassificationReport>,
    /// Per-class F1 in the order happy, angry, sad, neutral.
    #[serde(skip_serializing_if = "Option::is_none")]
    f1_table: Option<Vec<F1Row>>,
}

const F1_TABLE_ORDER: [EmotionLabel; 4] = [
    EmotionLabel::Happy,
    EmotionLabel::Angry,
    EmotionLabel::Sad,
    EmotionLabel::Neutral,
];

fn percent(rate: f64) -> String {
    format!("{:.2}%", rate * 100.0)
}

fn run_score(args: &ScoreArgs, defaults: &ScoreSection) -> Result<(), CliError> {
    let metrics = args
        .metrics
        .clone()
        .or_else(|| defaults.metrics.clone())
        .unwrap_or_else(|| vec![Metric::Teer, Metric::Steer, Metric::Classification]);
    if metrics.is_empty() {
        return Err(CliError::Usage("--metrics selects nothing".into()));
    }

    let reference = parse_reference(&read_file(&args.reference)?).map_err(with_path(&args.reference))?;
    let hypothesis = parse_hypothesis(&read_file(&args.hypothesis)?).map_err(with_path(&args.hypothesis))?;
    let ref_intervals: Vec<LabeledInterval> = reference.iter().map(LabeledInterval::from).collect();

    let wants = |m: Metric| metrics.contains(&m);
    let as_rate = |b: TeerBreakdown| RateReport {
        percent: percent(b.rate),
        breakdown: b,
    };
    let to_cli = |e: Error| CliError::Validation(e.to_string());

    let teer = if wants(Metric::Teer) {
        Some(as_rate(compute_teer(&ref_intervals, &hypothesis).map_err(to_cli)?))
    } else {
        None
    };
    let steer = if wants(Metric::Steer) {
        Some(as_rate(compute_steer(&ref_intervals, &hypothesis).map_err(to_cli)?))
    } else {
        None
    };
    let classification = if wants(Metric::Classification) {
        Some(classification_report(&match_labels(&reference, &hypothesis)).map_err(to_cli)?)
    } else {
        None
    };
    let f1_table = classification.as_ref().map(|c| {
        F1_TABLE_ORDER
            .iter()
            .map(|&e| F1Row {
                emotion: e,
                f1: c.class(e).f1,
            })
            .collect()
    });
    let report = ScoreReport {
        teer,
        steer,
        classification,
        f1_table,
    };

    let rendered = match args.format {
        ReportFormat::Json => to_json_string(&report, FloatStyle::Shortest, true),
        ReportFormat::Text => render_score_text(&report),
    };
    write_output(args.output.as_deref(), &rendered)
}

fn render_score_text(report: &ScoreReport) -> String {
    let mut out = String::new();
    for (name, rate) in [("TEER", &report.teer), ("sTEER", &report.steer)] {
        if let Some(r) = rate {
            let b = &r.breakdown;
            let _ = writeln!(
                out,
                "{name} {}  (ms={:.3}s fa={:.3}s conf={:.3}s total={:.3}s)",
                r.percent, b.ms, b.fa, b.conf, b.total
            );
        }
    }
    if let Some(c) = &report.classification {
        let _ = writeln!(out, "Accuracy (WAR) {}  (n={})", percent(c.accuracy), c.samples);
        let _ = writeln!(out, "Weighted F1 {}", percent(c.weighted_f1));
        let _ = writeln!(out, "Macro F1 {}", percent(c.macro_f1));
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<10}{:>10}{:>11}{:>8}{:>9}", "Emotion", "F1-score", "Precision", "Recall", "Support");
        for e in F1_TABLE_ORDER {
            let m = c.class(e);
            let _ = writeln!(
                out,
                "{:<10}{:>10.2}{:>11.2}{:>8.2}{:>9}",
                e.as_str(),
                m.f1,
                m.precision,
                m.recall,
                m.support
            );
        }
    }
    out
}

#[derive(Deserialize)]
struct Manifest {
    samples: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct ManifestEntry {
    text: PathBuf,
    audio: PathBuf,
    label: String,
}

fn load_manifest(dir: &Path) -> Result<Vec<Sample>, CliError> {
    let path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(&read_file(&path)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    manifest
        .samples
        .into_iter()
        .map(|entry| {
            let text_path = dir.join(&entry.text);
            let audio_path = dir.join(&entry.audio);
            Ok(Sample {
                text: parse_embedding(&text_path).map_err(with_path(&text_path))?,
                audio: parse_embedding(&audio_path).map_err(with_path(&audio_path))?,
                label: entry.label.parse().map_err(with_path(&path))?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct FuseReport<'a> {
    config: &'a FusionConfig,
    learning_rate: f64,
    steps: usize,
    samples: usize,
    epochs: &'a [crate::fusion::EpochStats],
    final_accuracy: f64,
    target: f64,
    reached: bool,
}

fn run_fuse_demo(args: &FuseDemoArgs, defaults: &FusionSection) -> Result<(), CliError> {
    let seed = args.seed.or(defaults.seed).unwrap_or(7);
    let heads = args.heads.or(defaults.heads).unwrap_or(1);
    let train = TrainConfig {
        learning_rate: args.lr.or(defaults.lr).unwrap_or(TrainConfig::default().learning_rate),
        steps: args.steps.or(defaults.steps).unwrap_or(TrainConfig::default().steps),
    };
    let target = args.target.or(defaults.target).unwrap_or(0.95);
    if !(train.learning_rate >= 0.0 && train.learning_rate.is_finite()) {
        return Err(CliError::Usage(format!("--lr must be >= 0, got {}", train.learning_rate)));
    }

    let data = match &args.data_dir {
        Some(dir) => load_manifest(dir)?,
        None => {
            let spec = SyntheticSpec {
                samples: args.samples.or(defaults.samples).unwrap_or(200),
                dim: args.dim.or(defaults.dim).unwrap_or(8),
                seed,
                ..SyntheticSpec::default()
            };
            generate_dataset(&spec).map_err(|e| CliError::Usage(e.to_string()))?
        }
    };
    let Some(first) = data.first() else {
        return Err(CliError::Validation("training set is empty".into()));
    };
    let config = FusionConfig {
        dim: first.text.dim(),
        heads,
        seed,
        ..FusionConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let outcome = match train_toy(&data, &config, &train) {
        Ok(o) => o,
        Err(e @ Error::Training { .. }) => return Err(CliError::Quality(e.to_string())),
        Err(e) => return Err(CliError::Validation(e.to_string())),
    };
    let reached = outcome.final_accuracy >= target;
    let report = FuseReport {
        config: &config,
        learning_rate: train.learning_rate,
        steps: train.steps,
        samples: data.len(),
        epochs: &outcome.trace,
        final_accuracy: outcome.final_accuracy,
        target,
        reached,
    };
    write_output(args.output.as_deref(), &to_json_string(&report, FloatStyle::Shortest, true))?;
    let checkpoint = write_checkpoint(&config, &outcome.params).map_err(|e| CliError::Validation(e.to_string()))?;
    write_output(Some(&args.checkpoint), &checkpoint)?;
    eprintln!(
        "fuse-demo: final training accuracy {:.4} after {} steps (target {target})",
        outcome.final_accuracy, train.steps
    );
    if reached {
        Ok(())
    } else {
        Err(CliError::Quality(format!(
            "accuracy {:.4} below target {target}",
            outcome.final_accuracy
        )))
    }
}

fn render_turn(out: &mut String, turn: &Turn, words: bool) {
    let emotion = turn.emotion.map(|e| format!(" ({e})")).unwrap_or_default();
    let _ = writeln!(
        out,
        "[{:>9.3}s → {:>9.3}s] {}{emotion}: {}",
        turn.start, turn.end, turn.speaker, turn.text
    );
    if words {
        for w in &turn.words {
            let note = if w.rescued {
                "rescued".to_string()
            } else {
                format!("overlap {:.3}s", w.overlap)
            };
            let _ = writeln!(out, "    [{:>9.3}s → {:>9.3}s] {:?} {note}", w.word.start, w.word.end, w.word.text);
        }
    }
}

fn run_inspect(args: &InspectArgs) -> Result<(), CliError> {
    let turns = parse_turns(&read_file(&args.turns)?).map_err(with_path(&args.turns))?;
    let mut out = String::new();
    for t in &turns {
        render_turn(&mut out, t, args.words);
    }
    let speakers: std::collections::BTreeSet<&str> = turns.iter().map(|t| t.speaker.as_str()).collect();
    let _ = writeln!(out, "{} turns, {} speakers", turns.len(), speakers.len());
    write_output(None, &out)
}
