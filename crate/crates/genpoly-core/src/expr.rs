//! Symbolic AST for generalized polynomials over the integer variable n.

use std::fmt;

use num_bigint::BigInt;

use crate::coeff::Coefficient;

/// A generalized polynomial expression. Built from monomials in n by sums,
/// products, scalar multiples and the nearest-integer bracket. Constant
/// subexpressions are rejected at construction/parse time, so every
/// expression vanishes at n = 0.
#[derive(Clone, Debug, PartialEq)]
pub enum GpExpr {
    /// coeff · n^power, power >= 1.
    Monomial { coeff: Coefficient, power: u32 },
    /// Nearest-integer bracket of the child.
    Bracket(Box<GpExpr>),
    /// Constant multiple of a non-monomial child.
    Scale { coeff: Coefficient, child: Box<GpExpr> },
    /// At least two summands.
    Sum(Vec<GpExpr>),
    /// At least two factors.
    Product(Vec<GpExpr>),
}

impl GpExpr {
    pub fn var() -> Self {
        GpExpr::Monomial {
            coeff: Coefficient::one(),
            power: 1,
        }
    }

    pub fn monomial(coeff: Coefficient, power: u32) -> Self {
        assert!(power >= 1, "monomial power must be positive");
        GpExpr::Monomial { coeff, power }
    }

    pub fn bracket(child: GpExpr) -> Self {
        GpExpr::Bracket(Box::new(child))
    }

    /// Canonical scalar multiple: folds into monomials and nested scales.
    pub fn scale(coeff: Coefficient, child: GpExpr) -> Self {
        if let Some(q) = coeff.as_rational() {
            if q == num_rational::BigRational::from(BigInt::from(1)) {
                return child;
            }
        }
        match child {
            GpExpr::Monomial { coeff: c, power } => GpExpr::Monomial {
                coeff: coeff.mul(&c),
                power,
            },
            GpExpr::Scale { coeff: c, child } => GpExpr::Scale {
                coeff: coeff.mul(&c),
                child,
            },
            other => GpExpr::Scale {
                coeff,
                child: Box::new(other),
            },
        }
    }

    pub fn sum(children: Vec<GpExpr>) -> Self {
        assert!(children.len() >= 2, "sum needs at least two children");
        GpExpr::Sum(children)
    }

    pub fn product(children: Vec<GpExpr>) -> Self {
        assert!(children.len() >= 2, "product needs at least two children");
        GpExpr::Product(children)
    }

    pub fn negate(self) -> Self {
        GpExpr::scale(Coefficient::from_int(-1), self)
    }

    /// Structurally integer-valued: integral coefficients everywhere
    /// outside brackets. Such expressions take integer values at every n.
    pub fn is_integer_clean(&self) -> bool {
        match self {
            GpExpr::Monomial { coeff, .. } => coeff.as_integer().is_some(),
            GpExpr::Bracket(_) => true,
            GpExpr::Scale { coeff, child } => {
                coeff.as_integer().is_some() && child.is_integer_clean()
            }
            GpExpr::Sum(cs) | GpExpr::Product(cs) => cs.iter().all(GpExpr::is_integer_clean),
        }
    }

    /// The expression p(k·n): every n^j picks up a factor k^j.
    pub fn substitute_scale(&self, k: u64) -> GpExpr {
        let kb = BigInt::from(k);
        match self {
            GpExpr::Monomial { coeff, power } => GpExpr::Monomial {
                coeff: coeff.mul_bigint(&kb.pow(*power)),
                power: *power,
            },
            GpExpr::Bracket(c) => GpExpr::Bracket(Box::new(c.substitute_scale(k))),
            GpExpr::Scale { coeff, child } => GpExpr::Scale {
                coeff: coeff.clone(),
                child: Box::new(child.substitute_scale(k)),
            },
            GpExpr::Sum(cs) => GpExpr::Sum(cs.iter().map(|c| c.substitute_scale(k)).collect()),
            GpExpr::Product(cs) => {
                GpExpr::Product(cs.iter().map(|c| c.substitute_scale(k)).collect())
            }
        }
    }

    /// Canonical text form; `parse` inverts this exactly.
    pub fn format(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GpExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GpExpr::Monomial { coeff, power } => {
                let var = if *power == 1 {
                    "n".to_string()
                } else {
                    format!("n^{power}")
                };
                if coeff == &Coefficient::one() {
                    write!(f, "{var}")
                } else {
                    write!(f, "({coeff} * {var})")
                }
            }
            GpExpr::Bracket(c) => write!(f, "[| {c} |]"),
            GpExpr::Scale { coeff, child } => write!(f, "({coeff} * {child})"),
            GpExpr::Sum(cs) => {
                write!(f, "(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            GpExpr::Product(cs) => {
                write!(f, "(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl serde::Serialize for GpExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
