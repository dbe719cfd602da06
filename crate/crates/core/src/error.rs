use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty utterance")]
    EmptyUtterance,

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("effect amount {amount} exceeds upper bound {bound} for {effect}")]
    BoundViolation {
        effect: String,
        amount: f64,
        bound: f64,
    },

    #[error("unknown flanger type {0} (expected 1..=5)")]
    UnknownFlanger(u8),

    #[error("unknown effect slot {0}")]
    UnknownEffectSlot(usize),

    #[error("unknown slider index {0}")]
    UnknownSlider(usize),

    #[error("position {0} is not on the slider grid")]
    OffGrid(f64),

    #[error("chain for stimulus {0} is complete")]
    ChainComplete(String),

    #[error("experiment is complete")]
    ExperimentComplete,

    #[error("unknown trial {0}")]
    UnknownTrial(u64),

    #[error("participant {0} reached the trial cap")]
    ParticipantCap(String),

    #[error("participant {participant} already responded to {target}")]
    DuplicateResponse { participant: String, target: String },

    #[error("no open slot available")]
    NoOpenSlot,

    #[error("participant {0} holds no claim on this trial")]
    NotClaimed(String),

    #[error("expected {expected} responses, got {got}")]
    WrongResponseCount { expected: usize, got: usize },

    #[error("current node has not been aggregated")]
    NotAggregated,

    #[error("participant {0} is not the slot holder")]
    NotSlotHolder(String),

    #[error("malformed tag {0:?}")]
    MalformedTag(String),

    #[error("tag {0:?} does not exist or was removed")]
    TagNotVisible(String),

    #[error("tag {0:?} is already visible")]
    TagExists(String),

    #[error("participant {participant} already flagged {tag:?}")]
    DuplicateFlag { participant: String, tag: String },

    #[error("star rating {0} outside 1..=5")]
    InvalidStars(u8),

    #[error("rating value {0} outside 1..=5")]
    InvalidRating(u8),

    #[error("unknown dimension label {0:?}")]
    UnknownDimension(String),

    #[error("unknown stimulus {0:?}")]
    UnknownStimulus(String),

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("all pairs tied")]
    AllTied,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("stimulus sets disagree")]
    StimulusMismatch,

    #[error("target is missing dimensions: {0:?}")]
    MissingDimensions(Vec<String>),

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("invalid data: {0}")]
    Invalid(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Invalid(e.to_string())
    }
}

impl From<hound::Error> for Error {
    fn from(e: hound::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
