//! Certified evaluation: brackets are resolved via nearest-integer
//! rounding with ties toward the smaller integer, so fractional parts land
//! in (-1/2, 1/2]. Rational subtrees are evaluated exactly; irrational
//! coefficients go through interval enclosures with precision escalation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{GpError, Result};
use crate::expr::GpExpr;
use crate::interval::{Precision, RealInterval};

/// An evaluation result: exact rational or a certified enclosure.
#[derive(Clone, Debug)]
pub enum Value {
    Exact(BigRational),
    Approx(RealInterval),
}

impl Value {
    pub fn add(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a + b),
            _ => Value::Approx(self.as_interval().add(&other.as_interval())),
        }
    }

    pub fn mul(&self, other: &Value) -> Value {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a * b),
            _ => Value::Approx(self.as_interval().mul(&other.as_interval())),
        }
    }

    pub fn sub_int(&self, k: &BigInt) -> Value {
        let q = BigRational::from(k.clone());
        match self {
            Value::Exact(a) => Value::Exact(a - q),
            Value::Approx(iv) => Value::Approx(iv.sub(&RealInterval::point(q))),
        }
    }

    pub fn as_interval(&self) -> RealInterval {
        match self {
            Value::Exact(q) => RealInterval::point(q.clone()),
            Value::Approx(iv) => iv.clone(),
        }
    }

    pub fn width(&self) -> BigRational {
        match self {
            Value::Exact(_) => BigRational::zero(),
            Value::Approx(iv) => iv.width(),
        }
    }
}

/// An interval enclosure together with the precision that produced it.
#[derive(Clone, Debug)]
pub struct CertifiedReal {
    pub lo: BigRational,
    pub hi: BigRational,
    pub precision_bits: u32,
    pub exact: bool,
}

impl CertifiedReal {
    pub fn from_value(v: &Value, bits: u32) -> Self {
        match v {
            Value::Exact(q) => CertifiedReal {
                lo: q.clone(),
                hi: q.clone(),
                precision_bits: bits,
                exact: true,
            },
            Value::Approx(iv) => CertifiedReal {
                lo: iv.lo().clone(),
                hi: iv.hi().clone(),
                precision_bits: bits,
                exact: false,
            },
        }
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn as_interval(&self) -> RealInterval {
        RealInterval::new(self.lo.clone(), self.hi.clone())
    }

    pub fn approx_f64(&self) -> f64 {
        let mid = (&self.lo + &self.hi) / BigRational::from(BigInt::from(2));
        crate::coeff::rational_to_f64(&mid)
    }
}

/// Nearest integer of an exact rational, ties toward the smaller integer:
/// the unique m with x - m in (-1/2, 1/2], i.e. m = ceil(x - 1/2).
pub fn nearest_int_rational(q: &BigRational) -> BigInt {
    let num = q.numer() * BigInt::from(2) - q.denom();
    let den = q.denom() * BigInt::from(2);
    num.div_ceil(&den)
}

/// Nearest integer of a value, if decidable at its current width.
pub fn nearest_int_value(v: &Value) -> Option<BigInt> {
    match v {
        Value::Exact(q) => Some(nearest_int_rational(q)),
        Value::Approx(iv) => {
            let m_lo = nearest_int_rational(iv.lo());
            let m_hi = nearest_int_rational(iv.hi());
            if m_lo == m_hi {
                Some(m_lo)
            } else {
                None
            }
        }
    }
}

/// Internal: evaluation at one fixed precision. A `Straddle` means a
/// bracket could not be decided and the caller should escalate.
struct Straddle {
    context: String,
}

fn eval_at(expr: &GpExpr, n: i64, bits: u32) -> std::result::Result<Value, Straddle> {
    match expr {
        GpExpr::Monomial { coeff, power } => {
            let np = BigRational::from(BigInt::from(n).pow(*power));
            match coeff.as_rational() {
                Some(q) => Ok(Value::Exact(q * np)),
                None => Ok(Value::Approx(coeff.eval(bits).scale(&np))),
            }
        }
        GpExpr::Scale { coeff, child } => {
            let v = eval_at(child, n, bits)?;
            match (coeff.as_rational(), v) {
                (Some(q), Value::Exact(a)) => Ok(Value::Exact(q * a)),
                (Some(q), Value::Approx(iv)) => Ok(Value::Approx(iv.scale(&q))),
                (None, v) => Ok(Value::Approx(coeff.eval(bits).mul(&v.as_interval()))),
            }
        }
        GpExpr::Sum(cs) => {
            let mut acc = Value::Exact(BigRational::zero());
            for c in cs {
                acc = acc.add(&eval_at(c, n, bits)?);
            }
            Ok(acc)
        }
        GpExpr::Product(cs) => {
            let mut acc = Value::Exact(BigRational::one());
            for c in cs {
                acc = acc.mul(&eval_at(c, n, bits)?);
            }
            Ok(acc)
        }
        GpExpr::Bracket(child) => {
            let v = eval_at(child, n, bits)?;
            match nearest_int_value(&v) {
                Some(m) => Ok(Value::Exact(BigRational::from(m))),
                None => Err(Straddle {
                    context: child.to_string(),
                }),
            }
        }
    }
}

fn width_ok(v: &Value, bits: u32) -> bool {
    match v {
        Value::Exact(_) => true,
        Value::Approx(iv) => {
            iv.width() < BigRational::new(BigInt::one(), BigInt::one() << (bits / 2))
        }
    }
}

/// Evaluate with escalating precision until all brackets are decided and
/// the enclosure is narrower than 2^(-bits/2).
pub fn eval_value(expr: &GpExpr, n: i64, prec: &Precision) -> Result<(Value, u32)> {
    let mut last_ctx = String::new();
    for bits in prec.ladder() {
        match eval_at(expr, n, bits) {
            Ok(v) => {
                if width_ok(&v, bits) {
                    return Ok((v, bits));
                }
                last_ctx = format!("enclosure too wide at {bits} bits");
            }
            Err(s) => last_ctx = s.context,
        }
    }
    Err(GpError::TieUndecidable {
        context: last_ctx,
        n,
        max_bits: prec.cap_bits,
    })
}

/// Certified enclosure of p(n).
pub fn eval(expr: &GpExpr, n: i64, prec: &Precision) -> Result<CertifiedReal> {
    let (v, bits) = eval_value(expr, n, prec)?;
    Ok(CertifiedReal::from_value(&v, bits))
}

/// Nearest integer of p(n) under the tie rule.
pub fn eval_nearest_int(expr: &GpExpr, n: i64, prec: &Precision) -> Result<BigInt> {
    for bits in prec.ladder() {
        if let Ok(v) = eval_at(expr, n, bits) {
            if let Some(m) = nearest_int_value(&v) {
                return Ok(m);
            }
        }
    }
    Err(GpError::TieUndecidable {
        context: expr.to_string(),
        n,
        max_bits: prec.cap_bits,
    })
}

/// Nearest integer of a certified enclosure (public entry point matching
/// the CertifiedReal interface).
pub fn nearest_integer(x: &CertifiedReal) -> Result<BigInt> {
    let v = if x.exact {
        Value::Exact(x.lo.clone())
    } else {
        Value::Approx(x.as_interval())
    };
    nearest_int_value(&v).ok_or_else(|| GpError::TieUndecidable {
        context: format!("[{}, {}]", x.lo, x.hi),
        n: 0,
        max_bits: x.precision_bits,
    })
}

/// Signed fractional part of p(n): p(n) minus its nearest integer, valued
/// in (-1/2, 1/2].
pub fn signed_frac(expr: &GpExpr, n: i64, prec: &Precision) -> Result<CertifiedReal> {
    let (v, bits) = frac_value(expr, n, prec)?;
    Ok(CertifiedReal::from_value(&v, bits))
}

/// Signed fractional part as a `Value` plus the bits used.
pub fn frac_value(expr: &GpExpr, n: i64, prec: &Precision) -> Result<(Value, u32)> {
    let mut last_ctx = String::new();
    for bits in prec.ladder() {
        match eval_at(expr, n, bits) {
            Ok(v) => match nearest_int_value(&v) {
                Some(m) => {
                    let f = v.sub_int(&m);
                    if width_ok(&f, bits) {
                        return Ok((f, bits));
                    }
                    last_ctx = format!("enclosure too wide at {bits} bits");
                }
                None => last_ctx = expr.to_string(),
            },
            Err(s) => last_ctx = s.context,
        }
    }
    Err(GpError::TieUndecidable {
        context: last_ctx,
        n,
        max_bits: prec.cap_bits,
    })
}
