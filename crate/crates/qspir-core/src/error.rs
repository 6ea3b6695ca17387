use alloc::string::String;
use core::fmt;

use crate::field::FieldError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    Field(FieldError),
    /// The canonical evaluation points do not fit in F_q.
    FieldTooSmall { q: u64, needed: u64 },
    /// No regime of the selected theorem admits the parameters.
    Infeasible(String),
    /// The rate formula is positive but the code layout would need a negative width.
    Unrealizable(String),
    InvalidConfig(String),
    /// A threat set exceeds its configured bound.
    SetTooLarge {
        set: &'static str,
        size: usize,
        bound: usize,
    },
    NotSso,
    /// Enumeration would exceed the state budget.
    BudgetExceeded { states: u128, budget: u128 },
    NotAffine,
    /// No Byzantine candidate set explains the check symbols.
    DecodeFailure,
}

impl From<FieldError> for Error {
    fn from(e: FieldError) -> Self {
        Error::Field(e)
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Field(e) => write!(f, "{e}"),
            Error::FieldTooSmall { q, needed } => {
                write!(f, "field size {q} too small, need at least {needed}")
            }
            Error::Infeasible(s) => write!(f, "infeasible parameters: {s}"),
            Error::Unrealizable(s) => write!(f, "unrealizable layout: {s}"),
            Error::InvalidConfig(s) => write!(f, "invalid configuration: {s}"),
            Error::SetTooLarge { set, size, bound } => {
                write!(f, "{set} set has {size} servers, bound is {bound}")
            }
            Error::NotSso => write!(f, "generator pair is not strongly self-orthogonal"),
            Error::BudgetExceeded { states, budget } => {
                write!(f, "enumeration needs {states} states, budget is {budget}")
            }
            Error::NotAffine => write!(f, "view map is not affine in the noise"),
            Error::DecodeFailure => write!(f, "no consistent Byzantine candidate set"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
