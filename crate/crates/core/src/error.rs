use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate source: zero-energy signal cannot be mixed at a target SNR")]
    DegenerateSource,
    #[error("zero-energy reference")]
    ZeroEnergyReference,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("not a checkpoint (bad magic bytes)")]
    NotACheckpoint,
    #[error("unsupported checkpoint format version {0}")]
    CheckpointVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("incompatible shapes for EMA")]
    IncompatibleEma,
    #[error("teacher divergence: teacher produced non-finite estimates")]
    TeacherDivergence,
    #[error("diverged: non-finite training loss")]
    Diverged,
    #[error("MixIT requires M=3 output sources, got M={0}")]
    MixitRequiresThreeSources(usize),

    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus too small: {have} items, need at least {need}")]
    CorpusTooSmall { have: usize, need: usize },
    #[error("batch size {batch} exceeds corpus size {corpus}")]
    BatchTooLarge { batch: usize, corpus: usize },
    #[error("missing corpus role: {0}")]
    MissingRole(String),
    #[error("unpaired corpus: ground-truth speech is required")]
    UnpairedCorpus,
    #[error("not enough distinct noise estimates: requested {requested}, available {available}")]
    NotEnoughNoiseEstimates { requested: usize, available: usize },
    #[error("no probe items: no teacher estimate falls below {0} dB")]
    NoProbeItems(f64),

    #[error("unsupported wav file {path}: {reason}")]
    UnsupportedWav { path: PathBuf, reason: String },
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
