use std::fmt;

use thiserror::Error;

/// Why an expression could not be evaluated (or differentiated) at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DomainKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of a non-positive number")]
    LogOfNonPositive,
    #[error("square root of a negative number")]
    SqrtOfNegative,
    #[error("non-integer power of a non-positive base")]
    NonPositiveBase,
    #[error("overflow to a non-finite value")]
    NonFinite,
    #[error("not differentiable at this point")]
    NotDifferentiable,
}

/// A domain failure attributed to one equation of a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("equation {equation}: {kind}")]
pub struct EvalError {
    pub equation: usize,
    pub kind: DomainKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken { expected: String, found: String },
    UnknownFunction(String),
    UnknownIdentifier(String),
    Arity { function: String, expected: usize, found: usize },
    DuplicateVariable(String),
    NonConstantExponent,
    InvalidNumber(String),
    InvalidDomain(String),
    EmptySystem,
    NotSquare { equations: usize, variables: usize },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            Self::UnexpectedToken { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            Self::UnknownFunction(name) => write!(f, "unknown function `{name}`"),
            Self::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            Self::Arity {
                function,
                expected,
                found,
            } => write!(
                f,
                "function `{function}` takes {expected} argument(s), {found} given"
            ),
            Self::DuplicateVariable(name) => write!(f, "variable `{name}` declared twice"),
            Self::NonConstantExponent => write!(f, "exponent must be a numeric constant"),
            Self::InvalidNumber(s) => write!(f, "invalid number literal `{s}`"),
            Self::InvalidDomain(msg) => write!(f, "invalid domain: {msg}"),
            Self::EmptySystem => write!(f, "no equations given"),
            Self::NotSquare {
                equations,
                variables,
            } => write!(
                f,
                "{equations} equation(s) but {variables} variable(s); the system must be square"
            ),
        }
    }
}

/// Parse failure with a 1-based source location.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite loss at collocation point {point} (t = {t}), equation {equation:?}")]
    NonFiniteLoss {
        point: usize,
        t: f64,
        equation: Option<usize>,
    },
    #[error("domain error at collocation point {point} (t = {t}): {error}")]
    LossDomain { point: usize, t: f64, error: EvalError },
    #[error("network produced a non-finite value")]
    NonFiniteNetwork,
    #[error("inadmissible anchor: {0}")]
    InadmissibleAnchor(EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("malformed parameter snapshot: {0}")]
    Snapshot(String),
    #[error("anchor solve failed: residual {0:e} above tolerance")]
    AnchorSolve(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
