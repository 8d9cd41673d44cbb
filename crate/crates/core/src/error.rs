use core::fmt;

/// Errors raised by the core computations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside of its documented domain.
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// A lottery violates one of its structural invariants.
    InvalidLottery(&'static str),
    /// A CPT partial derivative needs `c^(γ-1)` at a non-positive grid value.
    SingularPartial { grid_value: f64, gamma: f64 },
    /// The barrier constraint has a zero normal and a positive offset.
    Infeasible { b: f64 },
    /// The simulation was asked to start inside the perceived-unsafe set.
    UnsafeStart { h: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            expected,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter {
                name,
                value,
                expected,
            } => write!(f, "invalid `{name}` = {value}: expected {expected}"),
            Error::InvalidLottery(why) => write!(f, "invalid lottery: {why}"),
            Error::SingularPartial { grid_value, gamma } => write!(
                f,
                "CPT partial undefined: grid value {grid_value} <= 0 with gamma = {gamma} < 1"
            ),
            Error::Infeasible { b } => {
                write!(f, "infeasible barrier constraint: a = 0 and b = {b} > 0")
            }
            Error::UnsafeStart { h } => {
                write!(f, "initial state is not perceived safe (h = {h})")
            }
        }
    }
}

impl core::error::Error for Error {}
