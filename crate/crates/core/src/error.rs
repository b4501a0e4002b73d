use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: parallel line must contain exactly one tab separator, found {found}")]
    MalformedParallelLine { line: usize, found: usize },
    #[error("invalid tag {0:?}: a tag is a single token of the form <...>")]
    InvalidTag(String),
    #[error("upsample ratio must be at least 1")]
    InvalidUpsample,
    #[error("pair {0} has an empty side")]
    EmptySide(usize),
    #[error("training mix contains no parallel data")]
    NoParallelData,
    #[error("dataset {0:?} is monolingual and cannot enter a training mix")]
    MonolingualInMix(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("sentence has no tokens after removing tags")]
    EmptySentence,
    #[error("vocabulary size {requested} is smaller than the character inventory ({chars})")]
    VocabTooSmall { requested: usize, chars: usize },
    #[error("n-gram order must be between 1 and {max}, got {got}")]
    InvalidOrder { got: usize, max: usize },
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("interpolation weight {0} is outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("iteration count must be at least 1")]
    InvalidIterations,
    #[error("n-best size must be at least 1")]
    InvalidNBest,
    #[error("beam width must be at least 1")]
    InvalidBeam,
    #[error("reordering window {0} exceeds the supported maximum of 31")]
    InvalidWindow(usize),
    #[error("hypothesis length {target} does not match source length {source_len}")]
    LengthMismatch { source_len: usize, target: usize },
    #[error("no admissible alignment within window {0}")]
    NoAlignment(usize),
    #[error("score is not finite")]
    NonFiniteScore,
    #[error("noisy-channel weight {0} is outside [0, 3]")]
    WeightOutOfRange(f64),
    #[error("direction mismatch: expected a {expected} model, got {found}")]
    DirectionMismatch { expected: &'static str, found: &'static str },
    #[error("search dimension {0:?} has no values")]
    EmptyDimension(&'static str),
    #[error("cannot select top {k} of {available} trial results")]
    TopKTooLarge { k: usize, available: usize },
    #[error("ensemble needs at least one member")]
    EmptyEnsemble,
    #[error("ensemble members disagree on translation direction")]
    MixedDirections,
    #[error("{hyps} hypotheses but {refs} references")]
    CorpusLengthMismatch { hyps: usize, refs: usize },
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("trial {index} ({config}) failed: {source}")]
    Trial { index: usize, config: String, source: Box<Error> },
}
