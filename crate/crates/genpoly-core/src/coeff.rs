//! Exact real coefficients: rationals extended by square roots of positive
//! integers and the constants pi and e.
//!
//! Every coefficient is kept in a canonical normal form, a finite sum
//! q₁·m₁ + q₂·m₂ + ... with rational qᵢ and distinct monomials mᵢ over the
//! atoms. Square roots are reduced to squarefree radicands (sqrt2·sqrt6 =
//! 2·sqrt3) and the golden ratio enters as (1 + sqrt5)/2, so zero tests and
//! rationality are structural. Distinct monomials in pi and e are treated
//! as independent; manufacturing hidden relations between them is out of
//! scope.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{GpError, Result};
use crate::interval::{atom_enclosure, with_escalation, Precision, RealInterval};

/// An atomic irrational constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// Square root of a squarefree integer >= 2.
    Sqrt(u64),
    Pi,
    E,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Sqrt(k) => write!(f, "sqrt{k}"),
            Atom::Pi => write!(f, "pi"),
            Atom::E => write!(f, "e"),
        }
    }
}

/// A product of atoms with positive exponents. Contains at most one Sqrt
/// atom (exponent 1) after reduction.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Monomial(BTreeMap<Atom, u32>);

impl Monomial {
    fn unit() -> Self {
        Monomial(BTreeMap::new())
    }

    fn atom(a: Atom) -> Self {
        let mut m = BTreeMap::new();
        m.insert(a, 1);
        Monomial(m)
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiply two monomials, reducing square roots. Returns the reduced
    /// monomial together with the rational factor extracted by the
    /// reduction (e.g. sqrt2 · sqrt2 = 2 · unit).
    fn mul(&self, other: &Monomial) -> (BigInt, Monomial) {
        let mut exps: BTreeMap<Atom, u32> = self.0.clone();
        for (a, e) in &other.0 {
            *exps.entry(*a).or_insert(0) += e;
        }
        let mut factor = BigInt::one();
        let mut radicand: u128 = 1;
        let mut reduced = BTreeMap::new();
        for (a, e) in exps {
            match a {
                Atom::Sqrt(k) => {
                    let whole = e / 2;
                    if whole > 0 {
                        factor *= BigInt::from(k).pow(whole);
                    }
                    if e % 2 == 1 {
                        radicand = radicand
                            .checked_mul(k as u128)
                            .expect("radicand overflow");
                    }
                }
                _ => {
                    reduced.insert(a, e);
                }
            }
        }
        if radicand > 1 {
            let (sq, free) = extract_square_part(radicand);
            factor *= BigInt::from(sq);
            if free > 1 {
                reduced.insert(Atom::Sqrt(free as u64), 1);
            }
        }
        (factor, Monomial(reduced))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, e) in &self.0 {
            for _ in 0..*e {
                if !first {
                    write!(f, " * ")?;
                }
                write!(f, "{a}")?;
                first = false;
            }
        }
        Ok(())
    }
}

/// Split n = s²·m with m squarefree; returns (s, m).
fn extract_square_part(n: u128) -> (u128, u128) {
    let mut s: u128 = 1;
    let mut m: u128 = 1;
    let mut rest = n;
    let mut p: u128 = 2;
    while p * p <= rest {
        if rest % p == 0 {
            let mut e = 0u32;
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            s *= p.pow(e / 2);
            if e % 2 == 1 {
                m *= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        m *= rest;
    }
    (s, m)
}

/// An exact real coefficient in normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Coefficient {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::default()
    }

    pub fn one() -> Self {
        Coefficient::from_rational(BigRational::one())
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(Monomial::unit(), q);
        }
        Coefficient { terms }
    }

    pub fn from_int(k: i64) -> Self {
        Coefficient::from_rational(BigRational::from(BigInt::from(k)))
    }

    pub fn from_bigint(k: &BigInt) -> Self {
        Coefficient::from_rational(BigRational::from(k.clone()))
    }

    /// sqrt(k) for any k >= 0, reduced: sqrt12 = 2·sqrt3, sqrt9 = 3.
    pub fn sqrt_int(k: u64) -> Self {
        if k == 0 {
            return Coefficient::zero();
        }
        let (sq, free) = extract_square_part(k as u128);
        let q = BigRational::from(BigInt::from(sq));
        if free == 1 {
            Coefficient::from_rational(q)
        } else {
            let mut terms = BTreeMap::new();
            terms.insert(Monomial::atom(Atom::Sqrt(free as u64)), q);
            Coefficient { terms }
        }
    }

    pub fn pi() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::atom(Atom::Pi), BigRational::one());
        Coefficient { terms }
    }

    pub fn euler() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::atom(Atom::E), BigRational::one());
        Coefficient { terms }
    }

    /// The golden ratio, normalized into the sqrt5 field: (1 + sqrt5)/2.
    pub fn golden() -> Self {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut c = Coefficient::from_rational(half.clone());
        c = c.add(&Coefficient::sqrt_int(5).mul_rational(&half));
        c
    }

    fn insert_term(terms: &mut BTreeMap<Monomial, BigRational>, m: Monomial, q: BigRational) {
        if q.is_zero() {
            return;
        }
        let entry = terms.entry(m).or_insert_with(BigRational::zero);
        *entry += q;
        if entry.is_zero() {
            // remove cancelled term; key equality means we can look it up again
            let dead: Vec<Monomial> = terms
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .collect();
            for k in dead {
                terms.remove(&k);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, q) in &other.terms {
            Self::insert_term(&mut terms, m.clone(), q.clone());
        }
        Coefficient { terms }
    }

    pub fn neg(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(m, q)| (m.clone(), -q.clone()))
            .collect();
        Coefficient { terms }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = BTreeMap::new();
        for (ma, qa) in &self.terms {
            for (mb, qb) in &other.terms {
                let (factor, m) = ma.mul(mb);
                let q = qa * qb * BigRational::from(factor);
                Self::insert_term(&mut terms, m, q);
            }
        }
        Coefficient { terms }
    }

    pub fn mul_rational(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Coefficient::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, v)| (m.clone(), v * q))
            .collect();
        Coefficient { terms }
    }

    pub fn mul_bigint(&self, k: &BigInt) -> Self {
        self.mul_rational(&BigRational::from(k.clone()))
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Coefficient::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the normal form carries no irrational monomial.
    pub fn is_rational(&self) -> bool {
        self.terms.keys().all(|m| m.is_unit())
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(q) = self.terms.get(&Monomial::unit()) {
                return Some(q.clone());
            }
        }
        None
    }

    pub fn as_integer(&self) -> Option<BigInt> {
        let q = self.as_rational()?;
        if q.is_integer() {
            Some(q.to_integer())
        } else {
            None
        }
    }

    /// Certified enclosure at the given precision. Exact for rationals.
    pub fn eval(&self, bits: u32) -> RealInterval {
        let mut acc = RealInterval::point(BigRational::zero());
        for (m, q) in &self.terms {
            let mut mono = RealInterval::point(BigRational::one());
            for (a, e) in &m.0 {
                mono = mono.mul(&atom_enclosure(*a, bits).pow(*e));
            }
            acc = acc.add(&mono.scale(q));
        }
        acc
    }

    /// Certified sign. Exact zero is structural; otherwise the enclosure is
    /// refined until it separates from zero.
    pub fn sign(&self, prec: &Precision) -> Result<std::cmp::Ordering> {
        if self.is_zero() {
            return Ok(std::cmp::Ordering::Equal);
        }
        if let Some(q) = self.as_rational() {
            return Ok(q.cmp(&BigRational::zero()));
        }
        let decided = with_escalation(prec, |bits| {
            let iv = self.eval(bits);
            if iv.is_strictly_positive() {
                Ok(Some(std::cmp::Ordering::Greater))
            } else if iv.is_strictly_negative() {
                Ok(Some(std::cmp::Ordering::Less))
            } else {
                Ok(None)
            }
        })?;
        decided.ok_or_else(|| GpError::UndecidableZero {
            context: self.to_string(),
            max_bits: prec.cap_bits,
        })
    }

    /// Enclosure of |self|.
    pub fn magnitude(&self, bits: u32) -> RealInterval {
        self.eval(bits).abs()
    }

    /// Crude f64 approximation, for report metadata only.
    pub fn approx_f64(&self) -> f64 {
        let iv = self.eval(64);
        let mid = (iv.lo() + iv.hi()) / BigRational::from(BigInt::from(2));
        rational_to_f64(&mid)
    }
}

pub(crate) fn rational_to_f64(q: &BigRational) -> f64 {
    let num = q.numer();
    let den = q.denom();
    // Scale into f64 range via string round-trip on a truncated quotient.
    let scaled = (num * BigInt::from(1u64 << 53)).div_floor(den);
    let s = scaled.to_string();
    s.parse::<f64>().map(|v| v / (1u64 << 53) as f64).unwrap_or(f64::NAN)
}

fn format_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.to_integer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Coefficient {
    /// Renders in the expression grammar (literals, sqrt<k>, pi, e, *, +).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, q)| {
                if m.is_unit() {
                    format_rational(q)
                } else if q.is_one() {
                    m.to_string()
                } else if (-q).is_one() {
                    format!("-{m}")
                } else {
                    format!("{} * {}", format_rational(q), m)
                }
            })
            .collect();
        if parts.len() == 1 {
            write!(f, "{}", parts[0])
        } else {
            write!(f, "({})", parts.join(" + "))
        }
    }
}

impl serde::Serialize for Coefficient {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
