//! Crate-wide error type.

use num_bigint::BigInt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("syntax error at byte {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },

    /// Generalized polynomials vanish at n = 0, so constant subexpressions
    /// are rejected at parse time.
    #[error("constant subexpression not allowed: {what}")]
    ConstantTerm { what: String },

    #[error("nearest-integer bracket undecidable at {max_bits} bits for {context} (n = {n})")]
    TieUndecidable {
        context: String,
        n: i64,
        max_bits: u32,
    },

    #[error("cannot separate {context} from zero at {max_bits} bits")]
    UndecidableZero { context: String, max_bits: u32 },

    #[error("comparison undecidable at {max_bits} bits: {context}")]
    Undecidable { context: String, max_bits: u32 },

    #[error("not an integer-valued generalized polynomial: {context}")]
    NotGp { context: String },

    #[error("not in special (bracketed L-form) normal shape: {context}")]
    NotSgp { context: String },

    #[error("shift {m} is not good for {context}")]
    NotGoodShift { m: BigInt, context: String },

    #[error("shift spacing violated at index {index}: |{k}| must exceed {required}")]
    SpacingViolation {
        index: usize,
        k: BigInt,
        required: String,
    },

    #[error("weight vector failed to descend: {context}")]
    DescentFailure { context: String },

    #[error("window [{lo}, {hi}] exceeds cap {cap}")]
    WindowTooLarge { lo: i64, hi: i64, cap: i64 },

    #[error("block level {level} exceeds cap {cap}")]
    LevelTooLarge { level: u32, cap: u32 },

    #[error("resolution too fine: {context}")]
    ResolutionTooFine { context: String },

    #[error("precondition violated: {context}")]
    Precondition { context: String },
}

pub type Result<T> = std::result::Result<T, GpError>;
