use thiserror::Error;

/// Errors raised by model construction and the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("automata are defined over different alphabets")]
    AlphabetMismatch,
    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),
    #[error("string `{0}` is not generated by the plant")]
    NotInLanguage(String),
    #[error("transition {0} does not exist")]
    UnknownTransition(String),
    #[error("invalid attack policy: {0}")]
    InvalidPolicy(String),
    #[error("attack context automaton does not accept observation `{witness}` of the plant")]
    ContextNotCovering { witness: String },
    #[error("not a sub-automaton: {0}")]
    NotSubautomaton(String),
    #[error("unsupported supervisor: {0}")]
    UnsupportedSupervisor(String),
    #[error("supervisors are built on different observers")]
    ObserverMismatch,
    #[error("{line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid model: {0}")]
    Model(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
