use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("time regression in session {session} of student {student} at line {line}")]
    TimeRegression {
        student: String,
        session: String,
        line: usize,
    },

    #[error("skill net cycle: {0}")]
    Cycle(String),

    #[error("edge references unknown skill '{0}'")]
    DanglingEdge(String),

    #[error("duplicate skill id '{0}'")]
    DuplicateSkill(String),

    #[error("game '{0}' binds no skills")]
    EmptyGameBinding(String),

    #[error("unknown skill '{0}'")]
    UnknownSkill(String),

    #[error("net has {n} skills; exact inference is limited to {max} (use the factored update)")]
    NetTooLarge { n: usize, max: usize },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("state sets differ: {0} vs {1}")]
    StateSetMismatch(String, String),

    #[error("cannot step a word that is already done: {0}")]
    WordDone(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown subgroup {0}")]
    UnknownSubgroup(usize),

    #[error("feature '{got}' out of order: expected '{expected}'")]
    OutOfOrderFeature { expected: String, got: String },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("unknown report kind '{got}'; known kinds: {known}")]
    UnknownReportKind { got: String, known: String },
}

pub type Result<T> = std::result::Result<T, Error>;
