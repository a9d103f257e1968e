use thiserror::Error;

/// Errors raised by the library. Infeasibility of an optimization is not an
/// error: solvers report it through the `feasible` flag on their outcome.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet `{0}` has no symbols")]
    EmptyAlphabet(String),
    #[error("alphabet `{alphabet}` repeats symbol `{symbol}`")]
    DuplicateSymbol { alphabet: String, symbol: String },
    #[error("negative probability {value} in `{context}`")]
    NegativeProbability { context: String, value: f64 },
    #[error("probabilities in `{context}` sum to {sum}, expected 1")]
    NotNormalized { context: String, sum: f64 },
    #[error("non-finite value in `{0}`")]
    NonFinite(String),
    #[error("shape mismatch in `{context}`: expected {expected} entries, got {got}")]
    ShapeMismatch {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is already defined")]
    DuplicateVariable(String),
    #[error("variable sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("conditioning variable `{0}` has not been introduced by an earlier factor")]
    DanglingCondition(String),
    #[error("factor introduces no new variable")]
    EmptyFactor,
    #[error("empty variable set")]
    EmptyVariableSet,
    #[error("parameter `{name}` = {value} is outside {range}")]
    OutOfRange { name: String, value: f64, range: String },
    #[error("cardinality cap for `{name}` is {requested}, which exceeds the bound {bound}")]
    CardinalityCap {
        name: String,
        requested: usize,
        bound: usize,
    },
    #[error("problem is invalid: {0}")]
    InvalidProblem(String),
    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },
    #[error("no feasible point among {evaluated} evaluated candidates")]
    EmptyFeasibleSet { evaluated: u64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
