//! Structural analysis of normal-form expressions: degrees, leading
//! coefficient sums, the same-degree equivalence, complexity weight
//! vectors with their well-ordering, non-degeneracy of tuples, and the
//! certified "much greater" / "comparable" predicates.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::coeff::Coefficient;
use crate::error::{GpError, Result};
use crate::interval::{Precision, RealInterval};
use crate::sgp::SgpSum;

/// Degree after syntactic cancellation. Errors on the zero sum.
pub fn degree(p: &SgpSum) -> Result<u32> {
    p.degree().ok_or_else(|| GpError::NotSgp {
        context: "degree of the zero expression".to_string(),
    })
}

/// Sum of the coefficients of the maximal-degree components, taken on the
/// terms as written (a component and its negation both contribute).
pub fn leading_sum(p: &SgpSum) -> Coefficient {
    p.leading_sum()
}

/// p ~ q: equal degree and the syntactic difference drops degree.
pub fn equivalent(p: &SgpSum, q: &SgpSum) -> Result<bool> {
    let dp = degree(p)?;
    let dq = degree(q)?;
    if dp != dq {
        return Ok(false);
    }
    let d = p.difference(q);
    Ok(match d.degree() {
        None => true,
        Some(dd) => dd < dp,
    })
}

/// Number of equivalence classes per degree, trailing zeros trimmed.
/// Index i (1-based) counts classes of degree-i elements.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<u64>);

impl WeightVector {
    pub fn at(&self, degree_index: usize) -> u64 {
        if degree_index == 0 || degree_index > self.0.len() {
            0
        } else {
            self.0[degree_index - 1]
        }
    }

    fn trim(mut self) -> Self {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
        self
    }
}

impl std::fmt::Display for WeightVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, ")")
    }
}

/// Weight vector of a finite system: partition the distinct elements of
/// each degree by the equivalence and count classes.
pub fn weight_vector(system: &[SgpSum]) -> Result<WeightVector> {
    if system.is_empty() {
        return Err(GpError::Precondition {
            context: "weight vector of an empty system".to_string(),
        });
    }
    // Dedup structurally identical elements first.
    let mut distinct: Vec<&SgpSum> = Vec::new();
    for p in system {
        if !distinct.iter().any(|q| *q == p) {
            distinct.push(p);
        }
    }
    let mut max_deg = 0u32;
    for p in &distinct {
        max_deg = max_deg.max(degree(p)?);
    }
    let mut counts = vec![0u64; max_deg as usize];
    for d in 1..=max_deg {
        let of_degree: Vec<&&SgpSum> = distinct
            .iter()
            .filter(|p| p.degree() == Some(d))
            .collect();
        let mut reps: Vec<&SgpSum> = Vec::new();
        for p in of_degree {
            let mut found = false;
            for r in &reps {
                if equivalent(p, r)? {
                    found = true;
                    break;
                }
            }
            if !found {
                reps.push(p);
            }
        }
        counts[(d - 1) as usize] = reps.len() as u64;
    }
    Ok(WeightVector(counts).trim())
}

/// Strict well-ordering on weight vectors: compare at the largest index
/// where they differ.
pub fn pet_less(u: &WeightVector, v: &WeightVector) -> bool {
    let len = u.0.len().max(v.0.len());
    for i in (1..=len).rev() {
        let a = u.at(i);
        let b = v.at(i);
        if a != b {
            return a < b;
        }
    }
    false
}

/// Outcome of a non-degeneracy check.
#[derive(Clone, Debug, Serialize)]
pub struct Nondegeneracy {
    pub ok: bool,
    /// Index of an element with vanishing leading sum, if any.
    pub zero_leading: Option<usize>,
    /// Pair whose difference has vanishing leading sum, if any.
    pub zero_pair: Option<(usize, usize)>,
}

/// A tuple is non-degenerate when every leading sum and every pairwise
/// difference's leading sum is nonzero. Zero tests are exact on the
/// coefficient normal form, with certified separation as a fallback.
pub fn nondegenerate(system: &[SgpSum], prec: &Precision) -> Result<Nondegeneracy> {
    for (i, p) in system.iter().enumerate() {
        if leading_sum(p).sign(prec)? == Ordering::Equal {
            return Ok(Nondegeneracy {
                ok: false,
                zero_leading: Some(i),
                zero_pair: None,
            });
        }
    }
    for i in 0..system.len() {
        for j in 0..system.len() {
            if i == j {
                continue;
            }
            let d = system[i].difference(&system[j]);
            if d.is_zero() || leading_sum(&d).sign(prec)? == Ordering::Equal {
                return Ok(Nondegeneracy {
                    ok: false,
                    zero_leading: None,
                    zero_pair: Some((i, j)),
                });
            }
        }
    }
    Ok(Nondegeneracy {
        ok: true,
        zero_leading: None,
        zero_pair: None,
    })
}

/// a ≫ b at threshold N: requires a > b > 0 and a > N·(b + 1), certified
/// from the enclosures.
pub fn much_greater(a: &RealInterval, b: &RealInterval, threshold: u64) -> Result<bool> {
    let n = BigRational::from(BigInt::from(threshold));
    let one = BigRational::from(BigInt::from(1));
    let rhs_hi = (b.hi() + &one) * &n;
    let rhs_lo = (b.lo() + &one) * &n;
    // Definitely holds: a > b > 0 and a > N(b+1) on the whole enclosure.
    if b.lo() > &BigRational::zero() && a.lo() > b.hi() && a.lo() > &rhs_hi {
        return Ok(true);
    }
    // Definitely fails: a <= N(b+1) or the ordering precondition fails.
    if a.hi() <= &rhs_lo || a.hi() <= b.lo() || b.hi() <= &BigRational::zero() {
        return Ok(false);
    }
    Err(GpError::Undecidable {
        context: format!(
            "much-greater at N = {threshold}: a in [{}, {}], b in [{}, {}]",
            a.lo(),
            a.hi(),
            b.lo(),
            b.hi()
        ),
        max_bits: 0,
    })
}

/// a ≈ b at threshold N: |a| ≫ |a − b| and |b| ≫ |a − b|.
pub fn approx_eq(a: &RealInterval, b: &RealInterval, threshold: u64) -> Result<bool> {
    let diff = a.sub(b).abs();
    Ok(much_greater(&a.abs(), &diff, threshold)? && much_greater(&b.abs(), &diff, threshold)?)
}

/// |c| ≫ 1 for an exact coefficient, escalating precision as needed.
pub fn magnitude_much_greater_one(
    c: &Coefficient,
    threshold: u64,
    prec: &Precision,
) -> Result<bool> {
    let one = RealInterval::point(BigRational::from(BigInt::from(1)));
    for bits in prec.ladder() {
        match much_greater(&c.magnitude(bits), &one, threshold) {
            Ok(v) => return Ok(v),
            Err(GpError::Undecidable { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(GpError::Undecidable {
        context: format!("|{c}| vs threshold {threshold}"),
        max_bits: prec.cap_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgp::{Hat, SgpTerm};
    use num_bigint::BigInt;

    fn c(k: i64) -> Coefficient {
        Coefficient::from_int(k)
    }

    fn sq(k: u64) -> Coefficient {
        Coefficient::sqrt_int(k)
    }

    fn term(k: i64, hat: Hat) -> SgpTerm {
        SgpTerm::new(BigInt::from(k), hat).unwrap()
    }

    fn poly(terms: Vec<SgpTerm>) -> SgpSum {
        SgpSum::from_terms(terms)
    }

    #[test]
    fn degree_of_mixed_chain_sum() {
        // ⌈b n³ ⌈c n⌉⌉ + ⌈e n³⌉ has degree 4.
        let p = poly(vec![
            term(1, Hat::chain(&[(sq(3), 3), (sq(5), 1)])),
            term(1, Hat::monomial(sq(7), 3)),
        ]);
        assert_eq!(degree(&p).unwrap(), 4);
        // 4n⁴ + n³ has degree 4.
        let q = poly(vec![
            term(4, Hat::monomial(c(1), 4)),
            term(1, Hat::monomial(c(1), 3)),
        ]);
        assert_eq!(degree(&q).unwrap(), 4);
        // n has degree 1.
        let n = poly(vec![term(1, Hat::monomial(c(1), 1))]);
        assert_eq!(degree(&n).unwrap(), 1);
    }

    #[test]
    fn equivalence_examples() {
        let p4 = poly(vec![term(4, Hat::monomial(c(1), 4))]);
        let p4b = poly(vec![
            term(4, Hat::monomial(c(1), 4)),
            term(1, Hat::monomial(c(1), 3)),
        ]);
        assert!(equivalent(&p4, &p4b).unwrap());
        let chain = poly(vec![
            term(1, Hat::chain(&[(sq(3), 3), (sq(5), 1)])),
            term(1, Hat::monomial(sq(7), 3)),
        ]);
        assert!(!equivalent(&p4, &chain).unwrap());
        assert!(equivalent(&p4, &p4).unwrap());
    }

    #[test]
    fn pet_order_examples() {
        let u = WeightVector(vec![1, 1, 0, 2]);
        let v = WeightVector(vec![5, 3, 0, 1]);
        assert!(pet_less(&v, &u));
        assert!(!pet_less(&u, &v));
        let w = WeightVector(vec![3]);
        assert!(!pet_less(&w, &w));
        // (1) < (0,1): largest differing index is 2.
        assert!(pet_less(&WeightVector(vec![1]), &WeightVector(vec![0, 1])));
    }

    #[test]
    fn much_greater_examples() {
        let a = RealInterval::point(BigRational::from(BigInt::from(10_000_000)));
        let b = RealInterval::point(BigRational::from(BigInt::from(1)));
        assert!(much_greater(&a, &b, 1000).unwrap());
        let a3 = RealInterval::point(BigRational::from(BigInt::from(3)));
        let b2 = RealInterval::point(BigRational::from(BigInt::from(2)));
        assert!(!much_greater(&a3, &b2, 1000).unwrap());
    }
}
