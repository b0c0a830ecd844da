use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    CompositeModulus(u64),

    #[error("field of size {q} cannot hold {needed} distinct nonzero constants (need q > {needed})")]
    FieldTooSmall { q: u64, needed: u64 },

    #[error("division by zero in F_{0}")]
    DivisionByZero(u64),

    #[error("no admissible ({k}, {r}) MDS code: {reason}")]
    InfeasibleCode { k: u64, r: u64, reason: String },

    #[error("index {index} out of range for {bound} items")]
    BadIndex { index: usize, bound: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("decoding system is singular")]
    SingularSystem,

    #[error("null-shaper set has {got} databases, expected {expected}")]
    BadNullSet { expected: usize, got: usize },

    #[error("degenerate homogeneous input: {0}")]
    DegenerateHomogeneous(String),

    #[error("infeasible allocation: {0}")]
    InfeasibleAllocation(String),

    #[error("storage constraint {mu} outside the achievable range [{lo}, {hi}]")]
    OutOfRange { mu: String, lo: String, hi: String },

    #[error("L = {given} does not fit the plan; the smallest valid L is {minimal}")]
    IndivisibleL { given: u64, minimal: u64 },

    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),

    #[error("malformed plan: {0}")]
    Plan(String),

    #[error("malformed frame: {0}")]
    Frame(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
