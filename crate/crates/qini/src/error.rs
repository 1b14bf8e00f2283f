//! Crate-wide error type for input validation failures.

use std::fmt;

/// Validation and domain errors.
///
/// Every constructor and operation that can reject its inputs returns one of
/// these variants; computations that cannot fail on validated inputs return
/// plain values.
#[derive(Debug, Clone, PartialEq)]
pub enum QiniError {
    /// Matrix/vector dimensions disagree.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A treatment-arm cost contrast is zero, negative, or non-finite.
    InvalidCost { unit: usize, arm: usize, value: f64 },
    /// An effect estimate or evaluation score is NaN or infinite.
    NonFinite {
        what: &'static str,
        unit: usize,
        arm: usize,
    },
    /// A unit weight is zero, negative, or non-finite.
    InvalidWeight { unit: usize, value: f64 },
    /// A budget argument is zero, negative, or non-finite.
    InvalidBudget { value: f64 },
    /// A threshold or interpolation argument is out of range.
    InvalidThreshold { what: &'static str, value: f64 },
    /// Treatment probabilities are malformed (wrong length, non-positive
    /// entries, or not summing to one).
    InvalidProbabilities { reason: String },
    /// A propensity estimate violates the overlap floor or exceeds one.
    PropensityOutOfRange { unit: usize, arm: usize, value: f64 },
    /// Nuisance estimates are malformed.
    InvalidNuisance { reason: String },
    /// A treatment label is outside {0, ..., K}.
    TreatmentOutOfRange { unit: usize, value: u32, max: u32 },
    /// Fold construction or validation failed.
    InvalidFolds { reason: String },
    /// Too few bootstrap replicates.
    TooFewReplicates { got: usize, min: usize },
    /// A spend grid must have at least one point.
    EmptyGrid,
    /// Too few units for the requested operation.
    TooFewUnits { got: usize, min: usize },
    /// An arm-subset mask is empty or names an unknown arm.
    InvalidArmMask { reason: String },
}

impl fmt::Display for QiniError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(f, "{what}: expected length {expected}, got {got}"),
            Self::InvalidCost { unit, arm, value } => write!(
                f,
                "cost for unit {unit}, arm {arm} must be positive and finite, got {value}"
            ),
            Self::NonFinite { what, unit, arm } => {
                write!(f, "{what} for unit {unit}, arm {arm} is not finite")
            }
            Self::InvalidWeight { unit, value } => write!(
                f,
                "weight for unit {unit} must be positive and finite, got {value}"
            ),
            Self::InvalidBudget { value } => {
                write!(f, "budget must be positive and finite, got {value}")
            }
            Self::InvalidThreshold { what, value } => {
                write!(f, "{what} out of range: {value}")
            }
            Self::InvalidProbabilities { reason } => {
                write!(f, "invalid treatment probabilities: {reason}")
            }
            Self::PropensityOutOfRange { unit, arm, value } => write!(
                f,
                "propensity for unit {unit}, arm {arm} outside (1e-6, 1): {value}"
            ),
            Self::InvalidNuisance { reason } => write!(f, "invalid nuisance estimates: {reason}"),
            Self::TreatmentOutOfRange { unit, value, max } => write!(
                f,
                "treatment for unit {unit} is {value}, outside 0..={max}"
            ),
            Self::InvalidFolds { reason } => write!(f, "invalid folds: {reason}"),
            Self::TooFewReplicates { got, min } => {
                write!(f, "need at least {min} bootstrap replicates, got {got}")
            }
            Self::EmptyGrid => write!(f, "spend grid needs at least one point"),
            Self::TooFewUnits { got, min } => {
                write!(f, "need at least {min} units, got {got}")
            }
            Self::InvalidArmMask { reason } => write!(f, "invalid arm subset: {reason}"),
        }
    }
}

impl std::error::Error for QiniError {}
