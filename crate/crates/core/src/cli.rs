//! The `remixit` command-line tool.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 missing
//! teacher or checkpoint, 4 divergence, 5 bad corpus, 6 analysis failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    bracket_analysis, decomposition_trace, mean_student_sweep, write_bracket_csv, write_decomposition_csv,
    write_sweep_csv, SweepConfig, SweepMetric, DEFAULT_BRACKET_EDGES, POOR_TEACHER_DB,
};
use crate::config::{DataSource, RunConfig};
use crate::data::{load_manifest, write_corpus, Corpus};
use crate::error::Error;
use crate::model::{load_checkpoint, MaskNetParams};
use crate::seed::derive_seed;
use crate::selftrain::{
    evaluate, pretrain_teacher, run_remixit, zero_shot_adapt, EvalMetrics, Regime, TrainOutcome, FINAL_CHECKPOINT,
};

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_ARTIFACT: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_BAD_CORPUS: i32 = 5;
pub const EXIT_ANALYSIS: i32 = 6;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "REMIXIT_THREADS";

/// Summary written next to the training artifacts when a test set exists.
pub const METRICS_FILE: &str = "metrics.json";

const PRETRAIN_STREAM: u64 = 0x7EAC;

#[derive(Debug, Parser)]
#[command(
    name = "remixit",
    version,
    about = "Self-training speech enhancement via bootstrapped remixing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpora named in a run config.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to `<paths.out_dir>/data`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model as configured.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `paths.out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `paths.teacher`.
        #[arg(long)]
        teacher: Option<PathBuf>,
        /// Overrides the run seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a checkpoint on a paired corpus.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        test_manifest: PathBuf,
        /// Also write the metrics JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Teacher/student analyses on a paired corpus.
    Analyze {
        #[arg(long, value_enum)]
        mode: AnalysisMode,
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        student: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated bootstrap counts for the sweep.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        b_values: Vec<usize>,
        /// Comma-separated bracket edges in dB.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        edges: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sweep probes only items whose teacher score is below this (dB).
        #[arg(long, default_value_t = POOR_TEACHER_DB, allow_negative_numbers = true)]
        poor_below_db: f64,
        /// Sweep probes every item.
        #[arg(long)]
        all_items: bool,
        #[arg(long, value_enum, default_value_t = MetricArg::Snr)]
        metric: MetricArg,
        /// Decomposition on unit-norm signals.
        #[arg(long)]
        unit_norm: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisMode {
    Bracket,
    Sweep,
    Decomp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Snr,
    SiSdr,
}

/// An error tagged with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Exit code for a library error raised outside the analysis command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::MixitRequiresThreeSources(_) => EXIT_CONFIG,
        Error::NotACheckpoint | Error::CheckpointVersion(_) | Error::CorruptCheckpoint(_) => EXIT_MISSING_ARTIFACT,
        Error::Diverged | Error::NonFiniteGradient | Error::TeacherDivergence => EXIT_DIVERGED,
        Error::EmptyCorpus
        | Error::CorpusTooSmall { .. }
        | Error::BatchTooLarge { .. }
        | Error::MissingRole(_)
        | Error::UnpairedCorpus
        | Error::SampleRateMismatch(..)
        | Error::LengthMismatch(..)
        | Error::UnsupportedWav { .. }
        | Error::Wav(_) => EXIT_BAD_CORPUS,
        _ => EXIT_OTHER,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self::new(exit_code(&err), err.to_string())
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {}", e.message);
        return e.code;
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::new(
            EXIT_CONFIG,
            format!("{THREADS_ENV} must be a positive integer, got {value:?}"),
        )
    })?;
    // A pool built earlier in the same process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData { config, out } => cmd_gen_data(&config, out.as_deref()),
        Command::Train {
            config,
            out,
            teacher,
            seed,
        } => cmd_train(&config, out, teacher, seed),
        Command::Eval {
            ckpt,
            test_manifest,
            out,
        } => cmd_eval(&ckpt, &test_manifest, out.as_deref()),
        Command::Analyze {
            mode,
            teacher,
            student,
            manifest,
            out,
            b_values,
            edges,
            seed,
            poor_below_db,
            all_items,
            metric,
            unit_norm,
        } => {
            let sweep = SweepConfig {
                b_values,
                seed,
                poor_teacher_below_db: (!all_items).then_some(poor_below_db),
                metric: match metric {
                    MetricArg::Snr => SweepMetric::Snr,
                    MetricArg::SiSdr => SweepMetric::SiSdr,
                },
            };
            let edges = edges.unwrap_or_else(|| DEFAULT_BRACKET_EDGES.to_vec());
            cmd_analyze(mode, &teacher, &student, &manifest, &out, &sweep, &edges, unit_norm)
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::from_file(path).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<MaskNetParams<f32>, CliError> {
    if !path.is_file() {
        return Err(CliError::new(
            EXIT_MISSING_ARTIFACT,
            format!("checkpoint {} not found", path.display()),
        ));
    }
    load_checkpoint(path).map_err(|e| CliError::new(EXIT_MISSING_ARTIFACT, format!("{}: {e}", path.display())))
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::new(EXIT_OTHER, format!("{}: {e}", path.display())))
}

/// Writes every synthetic corpus of the config: the training source to
/// `out`, the noise and test sources to `out/noise` and `out/test`, and the
/// teacher's training source to `out/pretrain`.
pub fn cmd_gen_data(config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let out = out.map_or_else(|| cfg.paths.out_dir.join("data"), Path::to_path_buf);
    let mut written = 0;
    let mut emit = |corpus: Corpus, dir: PathBuf| -> Result<(), CliError> {
        write_corpus(&corpus, &dir)?;
        written += 1;
        Ok(())
    };
    if matches!(cfg.data.source, DataSource::Synth { .. }) {
        emit(cfg.data.load_source(cfg.seed)?, out.clone())?;
    }
    if let Some(DataSource::Synth { .. }) = &cfg.data.test {
        emit(cfg.data.load_test(cfg.seed)?.expect("test source"), out.join("test"))?;
    }
    if let Some(p) = &cfg.pretrain {
        if matches!(p.data.source, DataSource::Synth { .. }) {
            emit(p.data.load_source(pretrain_seed(cfg.seed))?, out.join("pretrain"))?;
        }
    }
    if written == 0 {
        return Err(CliError::new(EXIT_CONFIG, "config names no synthetic corpus"));
    }
    Ok(())
}

fn pretrain_seed(seed: u64) -> u64 {
    derive_seed(seed, PRETRAIN_STREAM)
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    model: Option<EvalMetrics>,
    teacher: Option<EvalMetrics>,
}

pub fn cmd_train(
    config: &Path,
    out: Option<PathBuf>,
    teacher: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg = load_config(config)?;
    if let Some(out) = out {
        cfg.paths.out_dir = out;
    }
    if let Some(teacher) = teacher {
        cfg.paths.teacher = Some(teacher);
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let out_dir = cfg.paths.out_dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| CliError::new(EXIT_OTHER, format!("{}: {e}", out_dir.display())))?;
    let train = cfg.train_config();

    let outcome: TrainOutcome;
    let test: Option<Corpus>;
    match cfg.train.regime {
        Regime::Supervised | Regime::Mixit => {
            let (split, t) = cfg.load_data()?;
            outcome = pretrain_teacher(&train, &split, t.as_ref(), Some(&out_dir))?;
            test = t;
        }
        Regime::Remixit | Regime::Adapt => {
            let teacher = obtain_teacher(&cfg)?;
            let (split, t) = cfg.load_data()?;
            let mixtures = split.mixtures.ok_or_else(|| Error::MissingRole("mixture".into()))?;
            outcome = if cfg.train.regime == Regime::Adapt {
                zero_shot_adapt(&teacher, &mixtures, &train, t.as_ref(), Some(&out_dir))?
            } else {
                run_remixit(&train, &teacher, &mixtures, t.as_ref(), Some(&out_dir))?
            };
            test = t;
        }
    }

    if let Some(test) = &test {
        let summary = TrainSummary {
            model: Some(evaluate(&outcome.model, test)?),
            teacher: outcome.teacher.as_ref().map(|t| evaluate(t, test)).transpose()?,
        };
        write_json(&summary, &out_dir.join(METRICS_FILE))?;
    }
    Ok(())
}

/// Loads the configured teacher checkpoint, or trains one from the
/// `pretrain` section into `<out_dir>/teacher`.
fn obtain_teacher(cfg: &RunConfig) -> Result<MaskNetParams<f32>, CliError> {
    if let Some(path) = &cfg.paths.teacher {
        return load_model(path);
    }
    let Some(pre) = &cfg.pretrain else {
        return Err(CliError::new(
            EXIT_MISSING_ARTIFACT,
            format!(
                "regime {:?} needs a teacher: pass --teacher, set paths.teacher or add a pretrain section",
                cfg.train.regime
            ),
        ));
    };
    let seed = pretrain_seed(cfg.seed);
    let (split, test) = pre.data.load(pre.train.regime, seed)?;
    let dir = cfg.teacher_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::new(EXIT_OTHER, format!("{}: {e}", dir.display())))?;
    let outcome = pretrain_teacher(&pre.train_config(cfg.seed), &split, test.as_ref(), Some(&dir))?;
    debug_assert!(dir.join(FINAL_CHECKPOINT).is_file());
    Ok(outcome.model)
}

pub fn cmd_eval(ckpt: &Path, test_manifest: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let model = load_model(ckpt)?;
    let corpus = load_manifest(test_manifest)?;
    let metrics = evaluate(&model, &corpus)?;
    let text = serde_json::to_string_pretty(&metrics).map_err(Error::from)?;
    println!("{text}");
    if let Some(out) = out {
        write_json(&metrics, out)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_analyze(
    mode: AnalysisMode,
    teacher: &Path,
    student: &Path,
    manifest: &Path,
    out: &Path,
    sweep: &SweepConfig,
    edges: &[f64],
    unit_norm: bool,
) -> Result<(), CliError> {
    let teacher = load_model(teacher)?;
    let student = load_model(student)?;
    let corpus = load_manifest(manifest)?;
    let analysis = |e: Error| CliError::new(EXIT_ANALYSIS, format!("analysis failed: {e}"));
    match mode {
        AnalysisMode::Bracket => {
            let report = bracket_analysis(&teacher, &student, &corpus, edges).map_err(analysis)?;
            write_bracket_csv(&report, out)?;
        }
        AnalysisMode::Sweep => {
            let result = mean_student_sweep(&teacher, &student, &corpus, sweep).map_err(analysis)?;
            write_sweep_csv(&result, out)?;
        }
        AnalysisMode::Decomp => {
            let rows = decomposition_trace(&teacher, &student, &corpus, unit_norm, sweep.seed).map_err(analysis)?;
            write_decomposition_csv(&rows, out)?;
        }
    }
    Ok(())
}
