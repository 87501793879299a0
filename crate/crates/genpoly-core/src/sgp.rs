//! Normal form for "simple" integer-valued generalized polynomials:
//! integer combinations of bracketed products
//!
//!     c · ⌈ a·n^j · ⌈h₁(n)⌉ ⌈h₂(n)⌉ ... ⌉
//!
//! where each hᵢ has the same shape recursively. Nested L-forms
//! a₁n^{j₁}⌈a₂n^{j₂}⌈...⌉⌉ are the single-bracket chains of this shape;
//! products of such chains are the general case.
//!
//! Canonical shape: bracket children with an integral head coefficient are
//! dissolved into their parent (the bracket of an integer is itself), and
//! integral heads of a term's own product are pulled into the term's
//! integer coefficient. Terms of a sum are kept verbatim — identical
//! products with opposite signs are *not* cancelled here, because leading
//! coefficient sums must see both. Cancellation happens only in
//! [`SgpSum::difference`] and [`SgpSum::merged`].

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::coeff::Coefficient;
use crate::error::{GpError, Result};
use crate::eval::{nearest_int_value, Value};
use crate::expr::GpExpr;
use crate::interval::{Precision, RealInterval};

/// A product a·n^j·∏⌈bᵢ⌉ with real head coefficient a and bracketed
/// children bᵢ of the same shape.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hat {
    coeff: Coefficient,
    power: u32,
    brackets: Vec<Hat>,
}

impl Hat {
    /// Canonical constructor. Children must already be canonical.
    pub fn new(coeff: Coefficient, power: u32, brackets: Vec<Hat>) -> Hat {
        let mut coeff = coeff;
        let mut power = power;
        let mut out: Vec<Hat> = Vec::with_capacity(brackets.len());
        let mut queue: Vec<Hat> = brackets;
        while let Some(b) = queue.pop() {
            if let Some(k) = b.coeff.as_integer() {
                // ⌈k·n^j·∏⌈..⌉⌉ is the integer k·n^j·∏⌈..⌉ itself.
                coeff = coeff.mul_bigint(&k);
                power += b.power;
                queue.extend(b.brackets);
            } else {
                out.push(b);
            }
        }
        out.sort();
        Hat {
            coeff,
            power,
            brackets: out,
        }
    }

    pub fn monomial(coeff: Coefficient, power: u32) -> Hat {
        Hat::new(coeff, power, Vec::new())
    }

    /// Nested chain a₁n^{j₁}⌈a₂n^{j₂}⌈...⌉⌉ from outermost level first.
    pub fn chain(levels: &[(Coefficient, u32)]) -> Hat {
        assert!(!levels.is_empty());
        let mut it = levels.iter().rev();
        let (c, p) = it.next().unwrap();
        let mut acc = Hat::monomial(c.clone(), *p);
        for (c, p) in it {
            acc = Hat::new(c.clone(), *p, vec![acc]);
        }
        acc
    }

    pub fn coeff(&self) -> &Coefficient {
        &self.coeff
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn brackets(&self) -> &[Hat] {
        &self.brackets
    }

    /// Total degree: head power plus degrees of all bracket children.
    pub fn degree(&self) -> u32 {
        self.power + self.brackets.iter().map(Hat::degree).sum::<u32>()
    }

    /// Product of the head coefficient and, recursively, all children's
    /// coefficient products. This is the "coefficient" of the component in
    /// leading-sum computations.
    pub fn coeff_product(&self) -> Coefficient {
        let mut acc = self.coeff.clone();
        for b in &self.brackets {
            acc = acc.mul(&b.coeff_product());
        }
        acc
    }

    /// Product of two hats (values multiply, brackets concatenate).
    pub fn product(&self, other: &Hat) -> Hat {
        let mut brackets = self.brackets.clone();
        brackets.extend(other.brackets.iter().cloned());
        Hat::new(
            self.coeff.mul(&other.coeff),
            self.power + other.power,
            brackets,
        )
    }

    pub fn scale_coeff(&self, c: &Coefficient) -> Hat {
        Hat::new(self.coeff.mul(c), self.power, self.brackets.clone())
    }

    pub fn mul_power(&self, extra: u32) -> Hat {
        Hat::new(self.coeff.clone(), self.power + extra, self.brackets.clone())
    }

    /// Convert to an evaluable expression.
    pub fn to_expr(&self) -> GpExpr {
        let mut factors: Vec<GpExpr> = Vec::new();
        if self.power >= 1 {
            factors.push(GpExpr::monomial(self.coeff.clone(), self.power));
        }
        for b in &self.brackets {
            factors.push(GpExpr::bracket(b.to_expr()));
        }
        let body = match factors.len() {
            0 => panic!("degree-0 hat has no expression form"),
            1 => factors.pop().unwrap(),
            _ => GpExpr::product(factors),
        };
        if self.power >= 1 {
            body
        } else {
            GpExpr::scale(self.coeff.clone(), body)
        }
    }

    /// Exact symbolic value at an integer argument: brackets of children
    /// are resolved to integers by certified rounding.
    pub fn value_at(&self, m: &BigInt, prec: &Precision) -> Result<Coefficient> {
        let mut acc = self.coeff.mul_bigint(&m.pow(self.power));
        for b in &self.brackets {
            let k = b.bracket_value_at(m, prec)?;
            acc = acc.mul_bigint(&k);
        }
        Ok(acc)
    }

    /// ⌈value at m⌉ as a certified integer.
    pub fn bracket_value_at(&self, m: &BigInt, prec: &Precision) -> Result<BigInt> {
        let v = self.value_at(m, prec)?;
        coeff_nearest_int(&v, prec).ok_or_else(|| GpError::TieUndecidable {
            context: format!("{} at {}", self.to_expr(), m),
            n: 0,
            max_bits: prec.cap_bits,
        })
    }

    /// True when the value is an integer for every n.
    pub fn is_integer_clean(&self) -> bool {
        self.coeff.as_integer().is_some()
    }
}

/// Nearest integer of an exact coefficient, escalating precision for
/// irrational values. `None` when the cap is reached undecided.
pub fn coeff_nearest_int(c: &Coefficient, prec: &Precision) -> Option<BigInt> {
    if let Some(q) = c.as_rational() {
        return Some(crate::eval::nearest_int_rational(&q));
    }
    for bits in prec.ladder() {
        let iv = c.eval(bits);
        if let Some(m) = nearest_int_value(&Value::Approx(iv)) {
            return Some(m);
        }
    }
    None
}

/// Signed fractional part of an exact coefficient as a certified value.
pub fn coeff_signed_frac(c: &Coefficient, prec: &Precision) -> Result<Value> {
    if let Some(q) = c.as_rational() {
        let m = crate::eval::nearest_int_rational(&q);
        return Ok(Value::Exact(q - BigRational::from(m)));
    }
    for bits in prec.ladder() {
        let iv = c.eval(bits);
        if let Some(m) = nearest_int_value(&Value::Approx(iv.clone())) {
            return Ok(Value::Approx(
                iv.sub(&RealInterval::point(BigRational::from(m))),
            ));
        }
    }
    Err(GpError::TieUndecidable {
        context: c.to_string(),
        n: 0,
        max_bits: prec.cap_bits,
    })
}

impl fmt::Display for Hat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

/// One term c·⌈hat⌉ of a normal-form sum.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SgpTerm {
    pub coeff: BigInt,
    pub hat: Hat,
}

impl SgpTerm {
    /// Canonical term: integral hat heads fold into the integer coefficient
    /// (the outer bracket of an integer-headed product is vacuous).
    pub fn new(coeff: BigInt, hat: Hat) -> Option<SgpTerm> {
        if coeff.is_zero() {
            return None;
        }
        match hat.coeff.as_integer() {
            Some(k) if k.is_zero() => None,
            Some(k) => Some(SgpTerm {
                coeff: coeff * k,
                hat: Hat {
                    coeff: Coefficient::one(),
                    power: hat.power,
                    brackets: hat.brackets,
                },
            }),
            None => Some(SgpTerm { coeff, hat }),
        }
    }

    pub fn degree(&self) -> u32 {
        self.hat.degree()
    }

    /// Contribution to a leading-coefficient sum.
    pub fn component_coeff(&self) -> Coefficient {
        self.hat.coeff_product().mul_bigint(&self.coeff)
    }

    pub fn to_expr(&self) -> GpExpr {
        let inner = if self.hat.is_integer_clean() {
            self.hat.to_expr()
        } else {
            GpExpr::bracket(self.hat.to_expr())
        };
        if self.coeff.is_one() {
            inner
        } else {
            GpExpr::scale(Coefficient::from_bigint(&self.coeff), inner)
        }
    }

    /// Exact integer value at m.
    pub fn value_at(&self, m: &BigInt, prec: &Precision) -> Result<BigInt> {
        Ok(&self.coeff * self.hat.bracket_value_at(m, prec)?)
    }
}

/// A normal-form sum Σ cᵢ·⌈hatᵢ⌉. Terms are kept in construction order and
/// never merged implicitly.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SgpSum {
    terms: Vec<SgpTerm>,
}

impl SgpSum {
    pub fn zero() -> SgpSum {
        SgpSum::default()
    }

    pub fn from_terms(terms: Vec<SgpTerm>) -> SgpSum {
        SgpSum { terms }
    }

    pub fn from_parts(parts: impl IntoIterator<Item = (BigInt, Hat)>) -> SgpSum {
        SgpSum {
            terms: parts
                .into_iter()
                .filter_map(|(c, h)| SgpTerm::new(c, h))
                .collect(),
        }
    }

    pub fn terms(&self) -> &[SgpTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: SgpTerm) {
        self.terms.push(term);
    }

    pub fn extend(&mut self, other: &SgpSum) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn neg(&self) -> SgpSum {
        SgpSum {
            terms: self
                .terms
                .iter()
                .map(|t| SgpTerm {
                    coeff: -t.coeff.clone(),
                    hat: t.hat.clone(),
                })
                .collect(),
        }
    }

    /// Merge identical products, summing integer coefficients and dropping
    /// zeros. This is the syntactic cancellation used by degrees and
    /// differences; leading sums operate on the unmerged terms.
    pub fn merged(&self) -> SgpSum {
        let mut map: std::collections::BTreeMap<Hat, BigInt> = Default::default();
        for t in &self.terms {
            let e = map.entry(t.hat.clone()).or_insert_with(BigInt::zero);
            *e += &t.coeff;
        }
        SgpSum {
            terms: map
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|(hat, coeff)| SgpTerm { coeff, hat })
                .collect(),
        }
    }

    /// Syntactic difference self − other with cancellation of identical
    /// products.
    pub fn difference(&self, other: &SgpSum) -> SgpSum {
        let mut all = self.clone();
        all.extend(&other.neg());
        all.merged()
    }

    /// Degree after syntactic cancellation; `None` for the zero sum.
    pub fn degree(&self) -> Option<u32> {
        self.merged().terms.iter().map(SgpTerm::degree).max()
    }

    /// Largest degree among the terms as written (no cancellation).
    pub fn syntactic_degree(&self) -> Option<u32> {
        self.terms.iter().map(SgpTerm::degree).max()
    }

    /// Sum of the coefficients of the maximal-degree components, taken on
    /// the terms as written: a +q and a −q component both contribute.
    pub fn leading_sum(&self) -> Coefficient {
        let Some(d) = self.syntactic_degree() else {
            return Coefficient::zero();
        };
        let mut acc = Coefficient::zero();
        for t in &self.terms {
            if t.degree() == d {
                acc = acc.add(&t.component_coeff());
            }
        }
        acc
    }

    pub fn to_expr(&self) -> Option<GpExpr> {
        let mut parts: Vec<GpExpr> = self.terms.iter().map(SgpTerm::to_expr).collect();
        match parts.len() {
            0 => None,
            1 => Some(parts.pop().unwrap()),
            _ => Some(GpExpr::sum(parts)),
        }
    }

    /// Exact integer value at m.
    pub fn value_at(&self, m: &BigInt, prec: &Precision) -> Result<BigInt> {
        let mut acc = BigInt::zero();
        for t in &self.terms {
            acc += t.value_at(m, prec)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for SgpSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_expr() {
            Some(e) => write!(f, "{e}"),
            None => write!(f, "0"),
        }
    }
}

impl serde::Serialize for SgpSum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(k: i64) -> Coefficient {
        Coefficient::from_int(k)
    }

    fn sqrt(k: u64) -> Coefficient {
        Coefficient::sqrt_int(k)
    }

    #[test]
    fn integral_brackets_dissolve() {
        // ⌈3n²⌉ = 3n², and the integer head folds into the term coefficient.
        let hat = Hat::new(c(1), 0, vec![Hat::monomial(c(3), 2)]);
        assert_eq!(hat.power(), 2);
        assert!(hat.brackets().is_empty());
        let t = SgpTerm::new(BigInt::from(2), hat).unwrap();
        assert_eq!(t.coeff, BigInt::from(6));
        assert_eq!(t.hat.coeff(), &Coefficient::one());
    }

    #[test]
    fn chain_degree_and_coeff_product() {
        // b·n³·⌈c·n⌉ has degree 4 and coefficient product b·c.
        let hat = Hat::chain(&[(sqrt(3), 3), (sqrt(5), 1)]);
        assert_eq!(hat.degree(), 4);
        assert_eq!(hat.coeff_product(), sqrt(3).mul(&sqrt(5)));
    }

    #[test]
    fn leading_sum_keeps_sign_pairs() {
        // n⌈2πn²⌉ − n⌈2πn²⌉ + n⌈√2 n⌉: leading sum 0 at syntactic degree 3,
        // degree 2 after cancellation.
        let two_pi = Coefficient::pi().mul_rational(&BigRational::from(BigInt::from(2)));
        let h1 = Hat::new(c(1), 1, vec![Hat::monomial(two_pi.clone(), 2)]);
        let h3 = Hat::new(c(1), 1, vec![Hat::monomial(sqrt(2), 1)]);
        let sum = SgpSum::from_parts(vec![
            (BigInt::one(), h1.clone()),
            (BigInt::from(-1), h1),
            (BigInt::one(), h3),
        ]);
        assert_eq!(sum.syntactic_degree(), Some(3));
        assert_eq!(sum.degree(), Some(2));
        assert!(sum.leading_sum().is_zero());
    }

    #[test]
    fn value_at_integer() {
        let prec = Precision::default();
        // 2·⌈√2 n⌉ at n = 5: 2·⌈7.071⌉ = 14.
        let hat = Hat::monomial(sqrt(2), 1);
        let t = SgpTerm::new(BigInt::from(2), hat).unwrap();
        assert_eq!(t.value_at(&BigInt::from(5), &prec).unwrap(), BigInt::from(14));
    }

    #[test]
    fn difference_cancels() {
        let h = Hat::monomial(c(1), 4);
        let a = SgpSum::from_parts(vec![(BigInt::from(4), h.clone())]);
        let mut b = SgpSum::from_parts(vec![(BigInt::from(4), h)]);
        b.push(SgpTerm::new(BigInt::one(), Hat::monomial(c(1), 3)).unwrap());
        let d = a.difference(&b);
        assert_eq!(d.degree(), Some(3));
        assert_eq!(d.terms().len(), 1);
    }
}
