use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("non-generic parameters: the monomial {monomial} equals 1")]
    NonGenericParameters { monomial: String },
    #[error("|q| = {abs_q} is not inside the unit disc")]
    DegenerateModulus { abs_q: f64 },
    #[error("no generic parameter set found after {attempts} attempts")]
    GenericityExhausted { attempts: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("pochhammer pole: a denominator factor 1 - x q^{exponent} vanishes")]
    PochhammerPole { exponent: i64 },
    #[error("theta evaluated at a zero square root")]
    ZeroArgument,
    #[error("theta factor in a denominator vanishes: {context}")]
    DivisionByZeroTheta { context: String },
    #[error("symmetrization denominator vanishes at level {level}")]
    SymmetrizationPole { level: usize },
    #[error("diagonal restriction of {perm} vanishes")]
    ZeroDiagonal { perm: String },
    #[error("coincident coordinates {i} and {j} in a Macdonald coefficient")]
    CoincidentCoordinates { i: usize, j: usize },
    #[error("series tail {relative_tail:e} exceeds the budget {budget:e}")]
    TailTooLarge { relative_tail: f64, budget: f64 },
    #[error("not implemented: {0}")]
    OutOfScope(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
