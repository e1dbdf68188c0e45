use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("m = {0} is not a squarefree positive integer")]
    NotSquarefree(i64),
    #[error("d = {d} is not a squarefree positive divisor of |d_K| = {disc}")]
    InvalidDivisor { d: i64, disc: i64 },
    #[error("d = {d} does not divide m = {m}")]
    NotDividingM { d: i64, m: i64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("element is not integral: {0}")]
    NonIntegral(String),
    #[error("ideal generator list is empty or all zero")]
    ZeroIdeal,
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not positive definite (pivot {index} is {pivot})")]
    NotPositiveDefinite { index: usize, pivot: String },
    #[error("malformed lattice: {0}")]
    MalformedLattice(String),
    #[error("not a theta lattice: {0}")]
    NotThetaLattice(String),
    #[error("no admissible (alpha, beta) for m = {0}")]
    NoConstruction(i64),
    #[error("matrix is not in Lambda(2, O_K): {0}")]
    NotHermIndex(String),
    #[error("index is not positive semidefinite: {0}")]
    NotSemidefinite(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("incompatible tables: {0}")]
    IncompatibleTables(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("missing generator value for {0}")]
    MissingValue(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
