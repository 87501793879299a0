//! Bracket algebra, shift calculus and desk-scale recurrence experiments
//! for integer-valued generalized polynomials.
//!
//! The crate provides:
//!
//! - exact coefficient arithmetic and certified interval evaluation of
//!   generalized polynomial expressions, with the nearest-integer bracket
//!   resolved provably (ties toward the smaller integer);
//! - a normal form for "simple" integer-valued expressions (integer
//!   combinations of bracketed L-form products), with degrees, leading
//!   coefficient sums, the equivalence used for complexity weights, and
//!   non-degeneracy checks;
//! - the shift calculus: reduction to normal form on a fractional-part
//!   constraint set, good-shift tests, the shift expansion
//!   h(n+m) = h(n) + h(m) + Σ⌈q(n)⌉, the discrete derivative and the
//!   weight-descent construction;
//! - integer-set machinery: constraint sets C(ε, g₁..g_t), window
//!   enumeration and syndetic/thick classification;
//! - concrete symbolic systems (Chacon subshift, full shift, circle
//!   rotation) with orbit-tuple density and hitting-time reports.
//!
//! Window scans parallelize with rayon when the default `parallel` feature
//! is enabled; disabling it yields a sequential fallback with identical
//! results.

pub mod calculus;
pub mod coeff;
pub mod dynamics;
pub mod error;
pub mod eval;
mod exec;
pub mod expr;
pub mod interval;
pub mod parse;
pub mod sets;
pub mod sgp;
pub mod structure;

pub use coeff::Coefficient;
pub use error::{GpError, Result};
pub use eval::{eval, nearest_integer, signed_frac, CertifiedReal, Value};
pub use expr::GpExpr;
pub use interval::{Precision, RealInterval};
pub use parse::parse;
pub use sgp::{Hat, SgpSum, SgpTerm};
