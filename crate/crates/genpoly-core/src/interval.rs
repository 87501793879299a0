//! Certified interval arithmetic over arbitrary-precision rationals.
//!
//! Endpoint arithmetic on `BigRational` is exact, so the only interval
//! widening comes from the enclosures of irrational constants. Those are
//! produced here from integer square roots and alternating/factorial
//! series with explicit error accounting, at any requested bit precision.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::coeff::Atom;

/// Working-precision policy: start small, double on undecidable
/// comparisons, give up at the cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Precision {
    pub start_bits: u32,
    pub cap_bits: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            start_bits: 128,
            cap_bits: 4096,
        }
    }
}

impl Precision {
    pub fn new(start_bits: u32, cap_bits: u32) -> Self {
        Precision {
            start_bits: start_bits.max(8),
            cap_bits: cap_bits.max(start_bits),
        }
    }

    /// Escalation ladder: start, 2·start, ... up to (and including) the cap.
    pub fn ladder(&self) -> impl Iterator<Item = u32> {
        let cap = self.cap_bits;
        let mut bits = Some(self.start_bits.min(cap));
        std::iter::from_fn(move || {
            let cur = bits?;
            bits = if cur >= cap { None } else { Some((cur * 2).min(cap)) };
            Some(cur)
        })
    }
}

/// Run `f` at escalating precision until it reaches a decision.
///
/// `f` returns `Ok(Some(t))` when decided, `Ok(None)` to request more bits.
/// Returns `None` if the cap is exhausted without a decision.
pub fn with_escalation<T>(
    prec: &Precision,
    mut f: impl FnMut(u32) -> crate::error::Result<Option<T>>,
) -> crate::error::Result<Option<T>> {
    for bits in prec.ladder() {
        if let Some(t) = f(bits)? {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// A closed interval with rational endpoints, guaranteed to contain the
/// real value it encloses.
#[derive(Clone, Debug, PartialEq)]
pub struct RealInterval {
    lo: BigRational,
    hi: BigRational,
}

impl RealInterval {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        debug_assert!(lo <= hi);
        RealInterval { lo, hi }
    }

    pub fn point(v: BigRational) -> Self {
        RealInterval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn add(&self, other: &Self) -> Self {
        RealInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        RealInterval {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn neg(&self) -> Self {
        RealInterval {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cands = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let mut lo = cands[0].clone();
        let mut hi = cands[0].clone();
        for c in &cands[1..] {
            if *c < lo {
                lo = c.clone();
            }
            if *c > hi {
                hi = c.clone();
            }
        }
        RealInterval { lo, hi }
    }

    /// Multiply by an exact rational scalar.
    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_negative() {
            RealInterval {
                lo: &self.hi * q,
                hi: &self.lo * q,
            }
        } else {
            RealInterval {
                lo: &self.lo * q,
                hi: &self.hi * q,
            }
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = RealInterval::point(BigRational::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn abs(&self) -> Self {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            let hi = if -&self.lo > self.hi {
                -self.lo.clone()
            } else {
                self.hi.clone()
            };
            RealInterval {
                lo: BigRational::zero(),
                hi,
            }
        }
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.lo.is_positive()
    }

    pub fn is_strictly_negative(&self) -> bool {
        self.hi.is_negative()
    }

    /// Endpoint-wise max: a valid enclosure of max(x, y).
    pub fn max(&self, other: &Self) -> Self {
        RealInterval {
            lo: self.lo.clone().max(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    /// Endpoint-wise min: a valid enclosure of min(x, y).
    pub fn min(&self, other: &Self) -> Self {
        RealInterval {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().min(other.hi.clone()),
        }
    }

    /// Round endpoints outward onto the dyadic grid 2^-bits. Keeps
    /// denominators bounded after long products.
    pub fn round_out(&self, bits: u32) -> Self {
        let scale = BigInt::one() << bits;
        let lo = (&self.lo * BigRational::from(scale.clone())).floor();
        let hi = (&self.hi * BigRational::from(scale.clone())).ceil();
        let s = BigRational::from(scale);
        RealInterval {
            lo: lo / s.clone(),
            hi: hi / s,
        }
    }
}

fn pow2_inv(bits: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << bits)
}

/// Enclosure of sqrt(k) at roughly `bits` fractional bits.
fn sqrt_enclosure(k: u64, bits: u32) -> RealInterval {
    let scaled = BigInt::from(k) << (2 * bits);
    let s = scaled.sqrt(); // floor square root
    let unit = pow2_inv(bits);
    let lo = BigRational::from(s.clone()) * unit.clone();
    let hi = BigRational::from(s + BigInt::one()) * unit;
    RealInterval::new(lo, hi)
}

/// Enclosure of arctan(1/x) · 2^p as integers, by the alternating series.
/// Each floored term loses < 1, the tail is below the first omitted term.
fn arctan_inv_scaled(x: u64, p: u32) -> (BigInt, BigInt) {
    let x = BigInt::from(x);
    let xx = &x * &x;
    let mut denom = x.clone(); // x^(2i+1)
    let mut i: u64 = 0;
    let mut acc = BigInt::zero();
    let mut terms: u64 = 0;
    let top = BigInt::one() << p;
    loop {
        let term = (&top).div_floor(&(&denom * BigInt::from(2 * i + 1)));
        if term.is_zero() {
            break;
        }
        if i % 2 == 0 {
            acc += &term;
        } else {
            acc -= &term;
        }
        terms += 1;
        denom *= &xx;
        i += 1;
    }
    let slack = BigInt::from(terms + 1);
    (acc.clone() - &slack, acc + slack)
}

/// Enclosure of pi via 16·arctan(1/5) − 4·arctan(1/239).
fn pi_enclosure(bits: u32) -> RealInterval {
    let p = bits + 16;
    let (a_lo, a_hi) = arctan_inv_scaled(5, p);
    let (b_lo, b_hi) = arctan_inv_scaled(239, p);
    let lo = BigInt::from(16) * a_lo - BigInt::from(4) * b_hi;
    let hi = BigInt::from(16) * a_hi - BigInt::from(4) * b_lo;
    let unit = pow2_inv(p);
    RealInterval::new(
        BigRational::from(lo) * unit.clone(),
        BigRational::from(hi) * unit,
    )
}

/// Enclosure of e via the factorial series.
fn e_enclosure(bits: u32) -> RealInterval {
    let p = bits + 16;
    let mut term = BigInt::one() << p; // 2^p / i!
    let mut acc = term.clone(); // i = 0
    let mut i = BigInt::one();
    let mut terms: u64 = 1;
    while !term.is_zero() {
        term = term.div_floor(&i);
        acc += &term;
        i += BigInt::one();
        terms += 1;
    }
    // Each floor loses < 1; the tail after the last nonzero term is < 1 ulp.
    let unit = pow2_inv(p);
    let lo = BigRational::from(acc.clone()) * unit.clone();
    let hi = BigRational::from(acc + BigInt::from(terms + 2)) * unit;
    RealInterval::new(lo, hi)
}

fn atom_cache() -> &'static Mutex<HashMap<(Atom, u32), RealInterval>> {
    static CACHE: OnceLock<Mutex<HashMap<(Atom, u32), RealInterval>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Certified enclosure of an atomic constant at the given precision.
pub fn atom_enclosure(atom: Atom, bits: u32) -> RealInterval {
    if let Some(hit) = atom_cache().lock().unwrap().get(&(atom, bits)) {
        return hit.clone();
    }
    let fresh = match atom {
        Atom::Sqrt(k) => sqrt_enclosure(k, bits),
        Atom::Pi => pi_enclosure(bits),
        Atom::E => e_enclosure(bits),
    };
    atom_cache()
        .lock()
        .unwrap()
        .insert((atom, bits), fresh.clone());
    fresh
}
