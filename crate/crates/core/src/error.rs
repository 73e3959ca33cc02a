use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong in the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands live over different base dimensions.
    DimensionMismatch { expected: usize, found: usize },
    /// A vector or matrix does not have the shape an operation needs.
    ShapeMismatch(&'static str),
    /// A 1-indexed tensor axis outside `1..=order`.
    AxisOutOfRange { axis: usize, order: usize },
    /// The supplied axis list is not a permutation of `1..=order`.
    InvalidPermutation,
    /// A time interval not contained in `[0, 1]` or with `s > t`.
    InvalidInterval { start: f64, end: f64 },
    /// A sequence with no samples.
    EmptySamples,
    /// A path breakpoint list that is not strictly increasing from 0 to 1.
    InvalidBreakpoints,
    /// A stop index outside `1..=T`.
    StopIndexOutOfRange { index: usize, len: usize },
    /// The adaptive integrator could not satisfy the tolerance.
    StepSizeUnderflow { t: f64, step: f64 },
    /// A derivative tower is too short for the requested order.
    OrderExhausted { needed: usize, available: usize },
    /// A word letter outside `1..=alphabet`.
    LetterOutOfRange { letter: usize, alphabet: usize },
    /// The weight-norm radius condition required by a closed-form constant fails.
    RadiusCondition { norm: f64, radius: f64 },
    /// A scalar argument outside its admissible range.
    InvalidArgument(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::AxisOutOfRange { axis, order } => {
                write!(f, "axis {axis} out of range for a tensor of order {order}")
            }
            Error::InvalidPermutation => f.write_str("axis list is not a permutation"),
            Error::InvalidInterval { start, end } => {
                write!(f, "invalid interval [{start}, {end}] (must satisfy 0 <= s <= t <= 1)")
            }
            Error::EmptySamples => f.write_str("sequence has no samples"),
            Error::InvalidBreakpoints => {
                f.write_str("breakpoints must increase strictly from 0 to 1")
            }
            Error::StopIndexOutOfRange { index, len } => {
                write!(f, "stop index {index} outside 1..={len}")
            }
            Error::StepSizeUnderflow { t, step } => {
                write!(f, "step size underflow at t = {t} (h = {step:e})")
            }
            Error::OrderExhausted { needed, available } => write!(
                f,
                "derivative tower exhausted: order {needed} needed, {available} available"
            ),
            Error::LetterOutOfRange { letter, alphabet } => {
                write!(f, "word letter {letter} outside 1..={alphabet}")
            }
            Error::RadiusCondition { norm, radius } => write!(
                f,
                "weight norm {norm} violates the radius condition (< {radius})"
            ),
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for Error {}
