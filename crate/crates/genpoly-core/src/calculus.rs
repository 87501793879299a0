//! The transformational calculus on normal forms.
//!
//! - reduction of a general integer-valued expression to a normal-form sum
//!   valid on a fractional-part constraint set;
//! - good shifts (no inner fractional part sits exactly at 1/2) and the
//!   constraint sets whose members are all good;
//! - the shift expansion h(n+m) = h(n) + h(m) + Σ⌈q(n)⌉ with the component
//!   bookkeeping that sizes the constraint δ;
//! - the discrete derivative D(h, m) with its leading-coefficient law;
//! - the spacing schedule r(n) and the weight-descent construction
//!   q_{i,j} = D(p_i, k_j) + p_i − p_1.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::coeff::Coefficient;
use crate::error::{GpError, Result};
use crate::expr::GpExpr;
use crate::interval::Precision;
use crate::sets::ConstraintSet;
use crate::sgp::{coeff_nearest_int, coeff_signed_frac, Hat, SgpSum, SgpTerm};
use crate::structure::{
    degree, leading_sum, magnitude_much_greater_one, pet_less, weight_vector, WeightVector,
};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k.min(n - k) {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

// ---------------------------------------------------------------------------
// Reduction to normal form
// ---------------------------------------------------------------------------

/// Result of reducing an integer-valued expression: a normal-form sum h
/// and a constraint set C with p(n) = h(n) for every n in C.
#[derive(Clone, Debug, Serialize)]
pub struct Reduction {
    pub h: SgpSum,
    pub constraint: ConstraintSet,
}

struct ReduceOut {
    /// value =_C Σ cᵢ·uᵢ over the constraint set accumulated so far
    terms: Vec<(BigInt, Hat)>,
    constraints: Vec<Hat>,
    /// the final δ must stay strictly below this
    delta_bound: Option<BigRational>,
}

fn merge_bound(a: Option<BigRational>, b: Option<BigRational>) -> Option<BigRational> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => Some(x.min(y)),
    }
}

fn reduce_real(e: &GpExpr) -> Result<ReduceOut> {
    match e {
        GpExpr::Monomial { coeff, power } => Ok(ReduceOut {
            terms: vec![(BigInt::one(), Hat::monomial(coeff.clone(), *power))],
            constraints: Vec::new(),
            delta_bound: None,
        }),
        GpExpr::Scale { coeff, child } => {
            let mut out = reduce_real(child)?;
            if let Some(k) = coeff.as_integer() {
                for (c, _) in &mut out.terms {
                    *c *= &k;
                }
            } else {
                for (_, u) in &mut out.terms {
                    *u = u.scale_coeff(coeff);
                }
            }
            Ok(out)
        }
        GpExpr::Sum(cs) => {
            let mut terms = Vec::new();
            let mut constraints = Vec::new();
            let mut delta_bound = None;
            for c in cs {
                let out = reduce_real(c)?;
                terms.extend(out.terms);
                constraints.extend(out.constraints);
                delta_bound = merge_bound(delta_bound, out.delta_bound);
            }
            Ok(ReduceOut {
                terms,
                constraints,
                delta_bound,
            })
        }
        GpExpr::Product(cs) => {
            let mut acc: Option<ReduceOut> = None;
            for c in cs {
                let out = reduce_real(c)?;
                acc = Some(match acc {
                    None => out,
                    Some(prev) => {
                        let mut terms = Vec::new();
                        for (ca, ua) in &prev.terms {
                            for (cb, ub) in &out.terms {
                                terms.push((ca * cb, ua.product(ub)));
                            }
                        }
                        let mut constraints = prev.constraints;
                        constraints.extend(out.constraints);
                        ReduceOut {
                            terms,
                            constraints,
                            delta_bound: merge_bound(prev.delta_bound, out.delta_bound),
                        }
                    }
                });
            }
            Ok(acc.expect("product has children"))
        }
        GpExpr::Bracket(child) => {
            let out = reduce_real(child)?;
            let mut clean = Vec::new();
            let mut rough = Vec::new();
            for (c, u) in out.terms {
                if u.is_integer_clean() {
                    clean.push((c, u));
                } else {
                    rough.push((c, u));
                }
            }
            if rough.is_empty() {
                // Bracket of an integer-valued sum is the sum itself.
                return Ok(ReduceOut {
                    terms: clean,
                    constraints: out.constraints,
                    delta_bound: out.delta_bound,
                });
            }
            // ⌈Σ clean + Σ rough⌉ = Σ clean + ⌈Σ rough⌉; the rough bracket
            // splits term by term once every fractional part is pinned
            // below δ with (Σ|cᵢ|)·δ < 1/2.
            let mut constraints = out.constraints;
            let mut delta_bound = out.delta_bound;
            let single_plain = rough.len() == 1 && rough[0].0.is_one();
            if !single_plain {
                let weight: BigInt = rough.iter().map(|(c, _)| c.abs()).sum();
                let site = BigRational::new(BigInt::one(), BigInt::from(2) * weight);
                delta_bound = merge_bound(delta_bound, Some(site));
                constraints.extend(rough.iter().map(|(_, u)| u.clone()));
            }
            let mut terms = clean;
            for (c, u) in rough {
                terms.push((c, Hat::new(Coefficient::one(), 0, vec![u])));
            }
            Ok(ReduceOut {
                terms,
                constraints,
                delta_bound,
            })
        }
    }
}

/// Reduce an integer-valued expression to normal form. The input must be
/// structurally integer-valued (brackets, integral monomials and integral
/// combinations of them); everything else is rejected.
pub fn normalize_to_sgp(p: &GpExpr) -> Result<Reduction> {
    let out = reduce_real(p)?;
    let mut sum = SgpSum::zero();
    for (c, u) in out.terms {
        if u.coeff().as_integer().is_none() {
            return Err(GpError::NotGp {
                context: format!("component {u} is not integer-valued"),
            });
        }
        if let Some(t) = SgpTerm::new(c, u) {
            sum.push(t);
        }
    }
    let delta = out
        .delta_bound
        .map(|b| b * rat(1, 2))
        .unwrap_or_else(|| rat(1, 4))
        .min(rat(1, 4));
    let exprs: BTreeSet<Hat> = out.constraints.into_iter().collect();
    let constraint = ConstraintSet::new(delta, exprs.iter().map(Hat::to_expr).collect());
    Ok(Reduction {
        h: sum,
        constraint,
    })
}

// ---------------------------------------------------------------------------
// Good shifts
// ---------------------------------------------------------------------------

/// The constant values whose fractional parts must avoid 1/2 for a shift
/// to be usable with this product: the product itself, the unbracketed
/// head when there are several factors, and recursively every bracketed
/// factor's chain.
fn good_components(hat: &Hat, out: &mut Vec<Hat>) {
    if !hat.is_integer_clean() {
        out.push(hat.clone());
    }
    if hat.brackets().len() >= 2 {
        let head = Hat::monomial(hat.coeff().clone(), hat.power());
        if !head.is_integer_clean() {
            out.push(head);
        }
    }
    for b in hat.brackets() {
        good_components(b, out);
    }
}

fn collect_good_components(p: &SgpSum) -> Vec<Hat> {
    let mut dedup: BTreeSet<Hat> = BTreeSet::new();
    for t in p.terms() {
        let mut v = Vec::new();
        good_components(&t.hat, &mut v);
        dedup.extend(v);
    }
    dedup.into_iter().collect()
}

/// Is {c} certifiably different from 1/2?
fn frac_ne_half(c: &Coefficient, prec: &Precision) -> Result<bool> {
    let half = rat(1, 2);
    if let Some(q) = c.as_rational() {
        let f = crate::sets::frac_of_rational(&q);
        return Ok(f != half);
    }
    for bits in prec.ladder() {
        let iv = c.eval(bits);
        if let Some(m) =
            crate::eval::nearest_int_value(&crate::eval::Value::Approx(iv.clone()))
        {
            let f = iv.sub(&crate::interval::RealInterval::point(BigRational::from(m)));
            if f.hi() < &half || f.lo() > &half {
                return Ok(true);
            }
        }
    }
    Err(GpError::Undecidable {
        context: format!("{{{c}}} vs 1/2"),
        max_bits: prec.cap_bits,
    })
}

/// m is good for p when no inner evaluation at m has fractional part
/// exactly 1/2, so every bracket taken at m is stable.
pub fn is_good_shift(m: &BigInt, p: &SgpSum, prec: &Precision) -> Result<bool> {
    if m.is_zero() {
        return Err(GpError::Precondition {
            context: "shift must be nonzero".to_string(),
        });
    }
    for hat in collect_good_components(p) {
        let v = hat.value_at(m, prec)?;
        if !frac_ne_half(&v, prec)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A constraint set all of whose members are good shifts for p: pin every
/// relevant component's fractional part inside (−δ, δ) with δ < 1/4.
pub fn good_shift_set(p: &SgpSum, delta: BigRational) -> Result<ConstraintSet> {
    if !delta.is_positive() || delta >= rat(1, 4) {
        return Err(GpError::Precondition {
            context: format!("good-shift δ must lie in (0, 1/4), got {delta}"),
        });
    }
    let comps = collect_good_components(p);
    Ok(ConstraintSet::new(
        delta,
        comps.iter().map(Hat::to_expr).collect(),
    ))
}

// ---------------------------------------------------------------------------
// Shift expansion
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct ExpPart {
    hat: Hat,
    /// coefficient product with rounded constants replaced by raw values
    ideal_cp: Coefficient,
    /// true when some bracketed factor was replaced by its rounded value
    has_fold: bool,
}

#[derive(Clone, Debug)]
struct DroppedPart {
    degree: u32,
    ideal_cp: Coefficient,
}

struct HatExpansion {
    /// n-dependent components of hat(n+m); contains hat itself
    parts: Vec<ExpPart>,
    /// exact value of the constant component, i.e. hat at m
    const_coeff: Coefficient,
    /// fractional parts to pin small (from child bracket splits)
    constraints: Vec<Hat>,
    /// constants whose |{·}| margins bound δ
    margins: Vec<Coefficient>,
    /// components whose rounded constant factor was 0
    dropped: Vec<DroppedPart>,
}

fn expand_hat(hat: &Hat, m: &BigInt, prec: &Precision) -> Result<HatExpansion> {
    let mut child_exps: Vec<HatExpansion> = Vec::new();
    let mut child_consts: Vec<(BigInt, Coefficient)> = Vec::new();
    let mut constraints: Vec<Hat> = Vec::new();
    let mut margins: Vec<Coefficient> = Vec::new();
    let mut dropped: Vec<DroppedPart> = Vec::new();

    for b in hat.brackets() {
        let e = expand_hat(b, m, prec)?;
        let k = coeff_nearest_int(&e.const_coeff, prec).ok_or_else(|| GpError::NotGoodShift {
            m: m.clone(),
            context: b.to_expr().to_string(),
        })?;
        constraints.extend(e.constraints.iter().cloned());
        constraints.extend(
            e.parts
                .iter()
                .filter(|p| !p.hat.is_integer_clean())
                .map(|p| p.hat.clone()),
        );
        margins.extend(e.margins.iter().cloned());
        margins.push(e.const_coeff.clone());
        dropped.extend(e.dropped.iter().cloned());
        child_consts.push((k, e.const_coeff.clone()));
        child_exps.push(e);
    }

    let j = hat.power();

    // All child choices: 0 = constant at m, i > 0 = cross part i−1.
    let sizes: Vec<usize> = child_exps.iter().map(|e| e.parts.len() + 1).collect();
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for s in &sizes {
        let mut next = Vec::with_capacity(combos.len() * s);
        for c in &combos {
            for choice in 0..*s {
                let mut cc = c.clone();
                cc.push(choice);
                next.push(cc);
            }
        }
        combos = next;
    }

    let mut parts: Vec<ExpPart> = Vec::new();
    let mut const_coeff: Option<Coefficient> = None;

    for combo in &combos {
        for s in 0..=j {
            let all_const = s == 0 && combo.iter().all(|&c| c == 0);
            let head = hat
                .coeff()
                .mul_bigint(&binomial(j, j - s))
                .mul_bigint(&m.pow(j - s));
            let mut coeff = head.clone();
            let mut ideal = head.clone();
            let mut brs: Vec<Hat> = Vec::new();
            let mut has_fold = false;
            let mut deg = s;
            for (ci, &choice) in combo.iter().enumerate() {
                if choice == 0 {
                    let (k, raw) = &child_consts[ci];
                    coeff = coeff.mul_bigint(k);
                    ideal = ideal.mul(raw);
                    has_fold = true;
                } else {
                    let part = &child_exps[ci].parts[choice - 1];
                    brs.push(part.hat.clone());
                    ideal = ideal.mul(&part.ideal_cp);
                    has_fold |= part.has_fold;
                    deg += part.hat.degree();
                }
            }
            if all_const {
                const_coeff = Some(coeff);
                continue;
            }
            if coeff.is_zero() {
                // a rounded constant factor was 0; the component vanishes
                dropped.push(DroppedPart {
                    degree: deg,
                    ideal_cp: ideal,
                });
                continue;
            }
            let built = Hat::new(coeff, s, brs);
            parts.push(ExpPart {
                hat: built,
                ideal_cp: ideal,
                has_fold,
            });
        }
    }

    Ok(HatExpansion {
        parts,
        const_coeff: const_coeff.expect("all-constant combo exists"),
        constraints,
        margins,
        dropped,
    })
}

/// Upper bound on |{c}|, certified; errors when {c} cannot be separated
/// from ±1/2 (the shift is then not good).
fn frac_abs_upper(c: &Coefficient, m: &BigInt, prec: &Precision) -> Result<BigRational> {
    let half = rat(1, 2);
    let v = coeff_signed_frac(c, prec)?;
    let iv = v.as_interval();
    let upper = iv.abs().hi().clone();
    if upper < half {
        return Ok(upper);
    }
    // An exact value of +1/2 (rational case) is a genuinely bad shift;
    // otherwise refine until the bound drops below 1/2.
    if let Some(q) = c.as_rational() {
        let f = crate::sets::frac_of_rational(&q);
        if f.abs() == half {
            return Err(GpError::NotGoodShift {
                m: m.clone(),
                context: format!("{{{c}}} = 1/2 exactly"),
            });
        }
        return Ok(f.abs());
    }
    for bits in prec.ladder() {
        let iv = c.eval(bits);
        if let Some(k) = crate::eval::nearest_int_value(&crate::eval::Value::Approx(iv.clone())) {
            let f = iv
                .sub(&crate::interval::RealInterval::point(BigRational::from(k)))
                .abs();
            if f.hi() < &half {
                return Ok(f.hi().clone());
            }
        }
    }
    Err(GpError::NotGoodShift {
        m: m.clone(),
        context: format!("|{{{c}}}| could not be bounded away from 1/2"),
    })
}

/// Component-count bound used to size δ: 2^deg for the own binomial
/// spread, plus the bounds of nested brackets.
fn count_bound(hat: &Hat) -> BigRational {
    let mut acc = BigRational::from(BigInt::from(2).pow(hat.degree().min(63)));
    for b in hat.brackets() {
        acc += count_bound(b);
    }
    acc
}

/// One shift's decomposition: h(n + shift) = h(n) + base_value + cross(n)
/// for every n in the accompanying constraint set.
#[derive(Clone, Debug, Serialize)]
pub struct ShiftDecomposition {
    #[serde(serialize_with = "ser_bigint")]
    pub shift: BigInt,
    /// h evaluated at the shift (an exact integer)
    #[serde(serialize_with = "ser_bigint")]
    pub base_value: BigInt,
    /// the lower-degree correction Σ c·⌈q(n)⌉
    pub cross: SgpSum,
}

fn ser_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftExpansion {
    pub per_shift: Vec<ShiftDecomposition>,
    pub constraint: ConstraintSet,
    #[serde(serialize_with = "ser_rat")]
    pub delta: BigRational,
}

fn ser_rat<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

/// Expand h(n + mᵢ) for each shift mᵢ. Every shift must be good for h.
/// ε controls how far fractional parts may drift: on the returned set,
/// {hat(n+m)} stays within ε of {hat(m)} for every bracketed component.
pub fn shift_expand(
    h: &SgpSum,
    shifts: &[BigInt],
    epsilon: &BigRational,
    prec: &Precision,
) -> Result<ShiftExpansion> {
    if shifts.is_empty() {
        return Err(GpError::Precondition {
            context: "no shifts given".to_string(),
        });
    }
    if !epsilon.is_positive() {
        return Err(GpError::Precondition {
            context: "ε must be positive".to_string(),
        });
    }
    for m in shifts {
        if !is_good_shift(m, h, prec)? {
            return Err(GpError::NotGoodShift {
                m: m.clone(),
                context: h.to_string(),
            });
        }
    }

    let mut all_constraints: BTreeSet<Hat> = BTreeSet::new();
    let mut delta: BigRational = rat(1, 4).min(epsilon * rat(1, 2));
    let mut per_shift = Vec::with_capacity(shifts.len());

    for m in shifts {
        let mut base_value = BigInt::zero();
        let mut cross = SgpSum::zero();
        for t in h.terms() {
            let exp = expand_hat(&t.hat, m, prec)?;
            let k = coeff_nearest_int(&exp.const_coeff, prec).ok_or_else(|| {
                GpError::NotGoodShift {
                    m: m.clone(),
                    context: t.hat.to_expr().to_string(),
                }
            })?;
            base_value += &t.coeff * k;

            // Margins: the term's own constant plus every nested one.
            let lb = count_bound(&t.hat);
            let mut margin = rat(1, 2);
            for c in exp.margins.iter().chain(std::iter::once(&exp.const_coeff)) {
                let upper = frac_abs_upper(c, m, prec)?;
                let room = rat(1, 2) - upper;
                if room < margin {
                    margin = room;
                }
            }
            if !margin.is_positive() {
                return Err(GpError::NotGoodShift {
                    m: m.clone(),
                    context: format!("no margin left for {}", t.hat.to_expr()),
                });
            }
            let bound = (margin.clone() / lb.clone()).min(epsilon / lb);
            if bound < delta {
                delta = bound;
            }

            // Constraints: nested splits plus the top-level components.
            all_constraints.extend(exp.constraints.iter().cloned());
            let mut self_seen = false;
            for p in &exp.parts {
                if !p.hat.is_integer_clean() {
                    all_constraints.insert(p.hat.clone());
                }
                if !self_seen && p.hat == t.hat {
                    self_seen = true;
                    continue;
                }
                if let Some(term) = SgpTerm::new(t.coeff.clone(), p.hat.clone()) {
                    cross.push(term);
                }
            }
            if !self_seen {
                return Err(GpError::DescentFailure {
                    context: format!(
                        "expansion of {} lost its own leading component",
                        t.hat.to_expr()
                    ),
                });
            }
        }
        per_shift.push(ShiftDecomposition {
            shift: m.clone(),
            base_value,
            cross,
        });
    }

    let constraint = ConstraintSet::new(
        delta.clone(),
        all_constraints.iter().map(Hat::to_expr).collect(),
    );
    Ok(ShiftExpansion {
        per_shift,
        constraint,
        delta,
    })
}

// ---------------------------------------------------------------------------
// Discrete derivative
// ---------------------------------------------------------------------------

/// Leading-coefficient law data for a derivative.
#[derive(Clone, Debug, Serialize)]
pub struct DerivativeLeading {
    /// leading sum of D at degree deg(h) − 1
    pub actual: Coefficient,
    /// deg(h)·m·A(h), the exact ideal value
    pub ideal: Coefficient,
    /// certified bound on |actual − ideal| from half-unit rounding
    #[serde(serialize_with = "ser_rat")]
    pub rounding_bound: BigRational,
}

/// D(h, m): the normal-form sum with
/// h(n+m) − h(n) − h(m) = D(n) for all n in the certification set,
/// of strictly smaller degree.
#[derive(Clone, Debug, Serialize)]
pub struct Derivative {
    pub source: SgpSum,
    #[serde(serialize_with = "ser_bigint")]
    pub shift: BigInt,
    pub d: SgpSum,
    #[serde(serialize_with = "ser_bigint")]
    pub source_at_shift: BigInt,
    pub certification: ConstraintSet,
    pub leading: DerivativeLeading,
    /// |head coefficient| approximations of the source, recorded because
    /// the leading law assumes they are large (not enforced)
    pub head_magnitudes: Vec<f64>,
}

fn leading_sum_at_degree(p: &SgpSum, d: u32) -> Coefficient {
    let mut acc = Coefficient::zero();
    for t in p.terms() {
        if t.degree() == d {
            acc = acc.add(&t.component_coeff());
        }
    }
    acc
}

/// Build the discrete derivative of h with respect to a nonzero good
/// shift. For degree-1 sources the derivative is the zero expression and
/// plain additivity holds on the certification set.
pub fn derivative(h: &SgpSum, m: &BigInt, prec: &Precision) -> Result<Derivative> {
    let deg_h = degree(h)?;
    let expansion = shift_expand(h, std::slice::from_ref(m), &rat(1, 8), prec)?;
    let decomp = &expansion.per_shift[0];

    // Rounding bound: every one-unit-drop component whose constant factor
    // was rounded contributes |actual − ideal|; a component rounded away
    // entirely contributes its ideal value.
    let mut bound = BigRational::zero();
    let target = deg_h.saturating_sub(1);
    for t in h.terms() {
        let exp = expand_hat(&t.hat, m, prec)?;
        let c_abs = BigRational::from(t.coeff.abs());
        for p in &exp.parts {
            if p.hat == t.hat || p.hat.degree() != target || !p.has_fold {
                continue;
            }
            let diff = p.hat.coeff_product().sub(&p.ideal_cp);
            bound += diff.magnitude(128).hi() * &c_abs;
        }
        for dp in &exp.dropped {
            if dp.degree == target {
                bound += dp.ideal_cp.magnitude(128).hi() * &c_abs;
            }
        }
    }

    let ideal = leading_sum(h)
        .mul_bigint(m)
        .mul_bigint(&BigInt::from(deg_h));
    let actual = leading_sum_at_degree(&decomp.cross, target);

    let mut head_magnitudes = Vec::new();
    for t in h.terms() {
        collect_head_magnitudes(&t.hat, &mut head_magnitudes);
    }

    Ok(Derivative {
        source: h.clone(),
        shift: m.clone(),
        d: decomp.cross.clone(),
        source_at_shift: decomp.base_value.clone(),
        certification: expansion.constraint,
        leading: DerivativeLeading {
            actual,
            ideal,
            rounding_bound: bound,
        },
        head_magnitudes,
    })
}

fn collect_head_magnitudes(hat: &Hat, out: &mut Vec<f64>) {
    out.push(hat.coeff().approx_f64().abs());
    for b in hat.brackets() {
        collect_head_magnitudes(b, out);
    }
}

// ---------------------------------------------------------------------------
// Spacing schedule and weight descent
// ---------------------------------------------------------------------------

/// The spacing schedule r(n) = 10¹⁰·M²/L²·(n+1) with M and L the extreme
/// magnitudes of {deg(pᵢ), |A(pᵢ)|, |A(pᵢ−pⱼ)|}. Computed with an upper
/// estimate of M and a lower estimate of L so spacing decisions are safe.
#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    #[serde(serialize_with = "ser_rat")]
    pub m_upper: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub l_lower: BigRational,
}

impl Schedule {
    /// Upper bound for r at the given argument.
    pub fn r_upper(&self, n: &BigInt) -> BigRational {
        let base = BigRational::from(BigInt::from(10_000_000_000u64));
        base * &self.m_upper * &self.m_upper / (&self.l_lower * &self.l_lower)
            * BigRational::from(n + BigInt::one())
    }

    /// Smallest admissible |k| strictly above r(n).
    pub fn min_abs_shift(&self, n: &BigInt) -> BigInt {
        let r = self.r_upper(n);
        r.floor().to_integer() + BigInt::one()
    }
}

/// Compute the schedule for a system of degree ≥ 2 normal forms.
pub fn r_schedule(system: &[SgpSum], prec: &Precision) -> Result<Schedule> {
    if system.is_empty() {
        return Err(GpError::Precondition {
            context: "empty system".to_string(),
        });
    }
    let mut mags: Vec<Coefficient> = Vec::new();
    for (i, p) in system.iter().enumerate() {
        let d = degree(p)?;
        if d < 2 {
            return Err(GpError::Precondition {
                context: format!("element {i} has degree {d} < 2"),
            });
        }
        mags.push(Coefficient::from_int(d as i64));
        mags.push(leading_sum(p));
        for (j, q) in system.iter().enumerate() {
            if i != j {
                let diff = p.difference(q);
                if !diff.is_zero() {
                    mags.push(leading_sum(&diff));
                }
            }
        }
    }
    for bits in prec.ladder() {
        let mut m_upper = BigRational::zero();
        let mut l_lower: Option<BigRational> = None;
        let mut ok = true;
        for c in &mags {
            let iv = c.magnitude(bits);
            if !iv.lo().is_positive() {
                ok = false;
                break;
            }
            if iv.hi() > &m_upper {
                m_upper = iv.hi().clone();
            }
            l_lower = Some(match l_lower {
                None => iv.lo().clone(),
                Some(cur) => cur.min(iv.lo().clone()),
            });
        }
        if ok {
            return Ok(Schedule {
                m_upper,
                l_lower: l_lower.unwrap(),
            });
        }
    }
    Err(GpError::UndecidableZero {
        context: "a leading sum could not be separated from zero".to_string(),
        max_bits: prec.cap_bits,
    })
}

/// Pick `count` shifts obeying the schedule spacing, scanning candidates
/// in increasing |k|, positive sign first, and keeping only shifts good
/// for every element.
pub fn select_shifts(
    system: &[SgpSum],
    schedule: &Schedule,
    count: usize,
    prec: &Precision,
) -> Result<Vec<BigInt>> {
    let mut out: Vec<BigInt> = Vec::with_capacity(count);
    let mut prev_abs = BigInt::zero();
    for idx in 0..count {
        let floor_abs = if idx == 0 {
            schedule.min_abs_shift(&BigInt::zero())
        } else {
            &prev_abs + schedule.min_abs_shift(&prev_abs)
        };
        let mut k_abs = floor_abs;
        let mut found: Option<BigInt> = None;
        for _ in 0..1000 {
            for k in [k_abs.clone(), -k_abs.clone()] {
                let mut good = true;
                for p in system {
                    if !is_good_shift(&k, p, prec)? {
                        good = false;
                        break;
                    }
                }
                if good {
                    found = Some(k);
                    break;
                }
            }
            if found.is_some() {
                break;
            }
            k_abs += BigInt::one();
        }
        let k = found.ok_or_else(|| GpError::Precondition {
            context: format!("no good shift found near index {idx}"),
        })?;
        prev_abs = k.abs();
        out.push(k);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct QijEntry {
    pub source_index: usize,
    pub shift_index: usize,
    #[serde(serialize_with = "ser_bigint")]
    pub shift: BigInt,
    pub q: SgpSum,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationFailure {
    pub left: (usize, usize),
    /// None for the single-entry magnitude check |A(q)| ≫ 1
    pub right: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QijReport {
    pub entries: Vec<QijEntry>,
    pub weight_before: WeightVector,
    pub weight_after: WeightVector,
    pub separation_ok: bool,
    pub failures: Vec<SeparationFailure>,
}

/// Build the descent system q_{i,j} = D(pᵢ, kⱼ) + pᵢ − p₁ and verify the
/// magnitude separations and the weight descent.
pub fn build_qij(
    system: &[SgpSum],
    shifts: &[BigInt],
    threshold: u64,
    prec: &Precision,
) -> Result<QijReport> {
    if system.is_empty() || shifts.is_empty() {
        return Err(GpError::Precondition {
            context: "q-matrix needs a system and shifts".to_string(),
        });
    }
    let schedule = r_schedule(system, prec)?;
    let mut prev_abs = BigInt::zero();
    for (idx, k) in shifts.iter().enumerate() {
        let min_abs = if idx == 0 {
            schedule.min_abs_shift(&BigInt::zero())
        } else {
            &prev_abs + schedule.min_abs_shift(&prev_abs)
        };
        if k.abs() < min_abs {
            return Err(GpError::SpacingViolation {
                index: idx,
                k: k.clone(),
                required: min_abs.to_string(),
            });
        }
        prev_abs = k.abs();
    }

    let p1 = &system[0];
    let mut entries = Vec::new();
    for (i, p) in system.iter().enumerate() {
        for (j, k) in shifts.iter().enumerate() {
            let d = derivative(p, k, prec)?;
            let mut q = d.d.clone();
            q.extend(p);
            q.extend(&p1.neg());
            let q = q.merged();
            entries.push(QijEntry {
                source_index: i,
                shift_index: j,
                shift: k.clone(),
                q,
            });
        }
    }

    let mut failures = Vec::new();
    for (a, e) in entries.iter().enumerate() {
        let mag = leading_sum(&e.q);
        if !magnitude_much_greater_one(&mag, threshold, prec)? {
            failures.push(SeparationFailure {
                left: (e.source_index, e.shift_index),
                right: None,
            });
        }
        for f in entries.iter().skip(a + 1) {
            let diff = e.q.difference(&f.q);
            if diff.is_zero() {
                continue;
            }
            let mag = leading_sum(&diff);
            if !magnitude_much_greater_one(&mag, threshold, prec)? {
                failures.push(SeparationFailure {
                    left: (e.source_index, e.shift_index),
                    right: Some((f.source_index, f.shift_index)),
                });
            }
        }
    }

    let weight_before = weight_vector(system)?;
    let q_system: Vec<SgpSum> = entries.iter().map(|e| e.q.clone()).collect();
    let weight_after = weight_vector(&q_system)?;
    if !pet_less(&weight_after, &weight_before) {
        return Err(GpError::DescentFailure {
            context: format!("{weight_after} does not precede {weight_before}"),
        });
    }

    Ok(QijReport {
        separation_ok: failures.is_empty(),
        entries,
        weight_before,
        weight_after,
        failures,
    })
}

/// Iterate the descent construction until every element has degree 1.
/// Returns the weight vector trace, strictly decreasing step by step.
#[derive(Clone, Debug, Serialize)]
pub struct DescentTrace {
    pub weights: Vec<WeightVector>,
    pub rounds: usize,
}

pub fn descend_to_linear(
    system: &[SgpSum],
    shifts_per_round: usize,
    threshold: u64,
    prec: &Precision,
    max_rounds: usize,
) -> Result<DescentTrace> {
    let mut current: Vec<SgpSum> = system.to_vec();
    let mut weights = vec![weight_vector(&current)?];
    for _round in 0..max_rounds {
        let max_deg = current
            .iter()
            .map(|p| degree(p))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(1);
        if max_deg <= 1 {
            return Ok(DescentTrace {
                rounds: weights.len() - 1,
                weights,
            });
        }
        // Sort by degree so the reference element has the lowest degree.
        current.sort_by_key(|p| p.degree().unwrap_or(0));
        let p1 = current[0].clone();
        let tail: Vec<SgpSum> = current
            .iter()
            .filter(|p| p.degree().unwrap_or(0) >= 2)
            .cloned()
            .collect();
        let schedule = r_schedule(&tail, prec)?;
        let shifts = select_shifts(&current, &schedule, shifts_per_round, prec)?;

        let mut next: Vec<SgpSum> = Vec::new();
        for p in &current {
            let d = degree(p)?;
            if d == 1 {
                let diff = p.difference(&p1);
                if !diff.is_zero() && !next.contains(&diff) {
                    next.push(diff);
                }
            } else {
                for k in &shifts {
                    let der = derivative(p, k, prec)?;
                    let mut q = der.d.clone();
                    q.extend(p);
                    q.extend(&p1.neg());
                    let q = q.merged();
                    if !q.is_zero() && !next.contains(&q) {
                        next.push(q);
                    }
                }
            }
        }
        if next.is_empty() {
            return Err(GpError::DescentFailure {
                context: "descent produced an empty system".to_string(),
            });
        }
        let w = weight_vector(&next)?;
        if !pet_less(&w, weights.last().unwrap()) {
            return Err(GpError::DescentFailure {
                context: format!("{w} does not precede {}", weights.last().unwrap()),
            });
        }
        weights.push(w);
        current = next;
        let _ = threshold;
    }
    Err(GpError::DescentFailure {
        context: format!("no degree-1 system within {max_rounds} rounds"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    fn prec() -> Precision {
        Precision::default()
    }

    fn sq(k: u64) -> Coefficient {
        Coefficient::sqrt_int(k)
    }

    #[test]
    fn reduce_base_case() {
        // ⌈α₁⌈β₁n⌉ + α₂⌈β₂n⌉⌉ → ⌈α₁⌈β₁n⌉⌉ + ⌈α₂⌈β₂n⌉⌉ with δ < 1/4.
        let p = parse("[| sqrt2 * [| sqrt3 * n |] + sqrt5 * [| sqrt7 * n |] |]").unwrap();
        let red = normalize_to_sgp(&p).unwrap();
        assert_eq!(red.h.terms().len(), 2);
        assert_eq!(red.constraint.constraints.len(), 2);
        let delta = red.constraint.min_eps().unwrap();
        assert!(delta < rat(1, 4) && delta.is_positive());
        // h is an integer combination of single brackets.
        for t in red.h.terms() {
            assert_eq!(t.hat.power(), 0);
            assert_eq!(t.hat.brackets().len(), 1);
        }
    }

    #[test]
    fn reduce_keeps_sign_pairs() {
        // n·⌈2πn² − ⌈2πn²⌉ + √2 n⌉ reduces to n⌈2πn²⌉ − n⌈2πn²⌉ + n⌈√2 n⌉.
        let p = parse("n * [| 2*pi*n^2 - [| 2*pi*n^2 |] + sqrt2*n |]").unwrap();
        let red = normalize_to_sgp(&p).unwrap();
        assert_eq!(red.h.terms().len(), 3);
        assert_eq!(red.h.syntactic_degree(), Some(3));
        assert_eq!(red.h.degree(), Some(2));
        assert!(leading_sum(&red.h).is_zero());
        // Constraints pin {2πn²} and {√2 n}.
        assert_eq!(red.constraint.constraints.len(), 2);
    }

    #[test]
    fn reduce_identity_on_normal_input() {
        let p = parse("[| sqrt2 * n |] + 3 * n^2").unwrap();
        let red = normalize_to_sgp(&p).unwrap();
        assert!(red.constraint.is_universal());
        assert_eq!(red.h.terms().len(), 2);
    }

    #[test]
    fn reduce_rejects_non_integer_valued() {
        let p = parse("sqrt2 * n").unwrap();
        assert!(matches!(normalize_to_sgp(&p), Err(GpError::NotGp { .. })));
    }

    #[test]
    fn good_shift_examples() {
        let prec = prec();
        // ⌈√2 n⌉ at m = 1: {√2} ≈ 0.414 ≠ 1/2 → good.
        let p = normalize_to_sgp(&parse("[| sqrt2 * n |]").unwrap()).unwrap().h;
        assert!(is_good_shift(&BigInt::one(), &p, &prec).unwrap());
        // ⌈n/2⌉ at m = 1: {1/2} = 1/2 → not good.
        let q = normalize_to_sgp(&parse("[| 1/2 * n |]").unwrap()).unwrap().h;
        assert!(!is_good_shift(&BigInt::one(), &q, &prec).unwrap());
    }

    #[test]
    fn good_shift_set_members_are_good() {
        let prec = prec();
        let p = normalize_to_sgp(&parse("[| sqrt2 * n * [| sqrt3 * n |] |]").unwrap())
            .unwrap()
            .h;
        let set = good_shift_set(&p, rat(1, 8)).unwrap();
        let members = set.enumerate(1, 2000, &prec).unwrap();
        assert!(!members.is_empty());
        for m in members {
            assert!(is_good_shift(&BigInt::from(m), &p, &prec).unwrap());
        }
    }

    #[test]
    fn expand_square_matches_golden() {
        // ⌈a n²⌉ with shift m: cross = {⌈2amn⌉}.
        let prec = prec();
        let h = SgpSum::from_parts(vec![(BigInt::one(), Hat::monomial(sq(2), 2))]);
        let m = BigInt::from(3);
        let exp = shift_expand(&h, &[m.clone()], &rat(1, 8), &prec).unwrap();
        let cross = &exp.per_shift[0].cross;
        assert_eq!(cross.terms().len(), 1);
        let expect = Hat::monomial(sq(2).mul_bigint(&BigInt::from(6)), 1);
        assert_eq!(cross.terms()[0].hat, expect);
        // identity: ⌈a(n+m)²⌉ = ⌈an²⌉ + ⌈am²⌉ + ⌈2amn⌉ on the set
        let members = exp
            .constraint
            .enumerate(-300, 300, &prec)
            .unwrap();
        assert!(!members.is_empty());
        for n in members {
            let n_big = BigInt::from(n);
            let lhs = h.value_at(&(&n_big + &m), &prec).unwrap();
            let rhs = h.value_at(&n_big, &prec).unwrap()
                + &exp.per_shift[0].base_value
                + cross.value_at(&n_big, &prec).unwrap();
            assert_eq!(lhs, rhs, "broken at n = {n}");
        }
    }

    #[test]
    fn expand_chain_constraint_shape() {
        // ⌈b n ⌈c n⌉⌉ with one shift: cross = {⌈bn⌈cm⌉⌉, ⌈bm⌈cn⌉⌉},
        // constraints pin {bn⌈cn⌉}, {bn⌈cm⌉}, {bm⌈cn⌉}, {cn}.
        let prec = prec();
        let h = SgpSum::from_parts(vec![(
            BigInt::one(),
            Hat::chain(&[(sq(2), 1), (sq(3), 1)]),
        )]);
        let m = BigInt::from(2);
        let exp = shift_expand(&h, &[m], &rat(1, 8), &prec).unwrap();
        assert_eq!(exp.per_shift[0].cross.terms().len(), 2);
        assert_eq!(exp.constraint.constraints.len(), 4);
    }

    #[test]
    fn derivative_of_bracket_product() {
        // D(⌈an⌉⌈bn⌉, m) = ⌈am⌉⌈bn⌉ + ⌈an⌉⌈bm⌉.
        let prec = prec();
        let hat = Hat::new(
            Coefficient::one(),
            0,
            vec![Hat::monomial(sq(2), 1), Hat::monomial(sq(3), 1)],
        );
        let h = SgpSum::from_parts(vec![(BigInt::one(), hat)]);
        let m = BigInt::from(4);
        let der = derivative(&h, &m, &prec).unwrap();
        assert_eq!(der.d.terms().len(), 2);
        // ⌈4√2⌉ = 6, ⌈4√3⌉ = 7: terms 6·⌈√3 n⌉ and 7·⌈√2 n⌉.
        let mut coeffs: Vec<BigInt> = der.d.terms().iter().map(|t| t.coeff.clone()).collect();
        coeffs.sort();
        assert_eq!(coeffs, vec![BigInt::from(6), BigInt::from(7)]);
        // law: |A(D) − 2·m·ab| ≤ bound
        let diff = der.leading.actual.sub(&der.leading.ideal);
        let mag = diff.magnitude(128);
        assert!(mag.hi() <= &der.leading.rounding_bound);
    }

    #[test]
    fn derivative_of_nested_chain_golden() {
        // D(⌈a n ⌈b n²⌉⌉, m) has four components and A(D) = 3abm exactly.
        let prec = prec();
        let h = SgpSum::from_parts(vec![(
            BigInt::one(),
            Hat::chain(&[(sq(2), 1), (sq(3), 2)]),
        )]);
        let m = BigInt::from(3);
        let der = derivative(&h, &m, &prec).unwrap();
        assert_eq!(der.d.terms().len(), 4);
        let ab = sq(2).mul(&sq(3));
        let expect = ab.mul_bigint(&BigInt::from(9)); // 3·m·ab with m = 3
        assert_eq!(der.leading.actual, expect);
        assert_eq!(der.leading.ideal, expect);
        assert!(der.leading.rounding_bound.is_zero());
        // the two leading components match the expected shapes
        let lead: Vec<&Hat> = der
            .d
            .terms()
            .iter()
            .filter(|t| t.degree() == 2)
            .map(|t| &t.hat)
            .collect();
        let want_a = Hat::chain(&[(sq(2), 1), (sq(3).mul_bigint(&BigInt::from(6)), 1)]);
        let want_b = Hat::chain(&[(sq(2).mul_bigint(&BigInt::from(3)), 0), (sq(3), 2)]);
        assert!(lead.contains(&&want_a));
        assert!(lead.contains(&&want_b));
    }

    #[test]
    fn derivative_identity_on_window() {
        let prec = prec();
        let h = SgpSum::from_parts(vec![(BigInt::one(), Hat::monomial(sq(2), 2))]);
        let m = BigInt::from(3);
        let der = derivative(&h, &m, &prec).unwrap();
        let members = der.certification.enumerate(-3000, 3000, &prec).unwrap();
        assert!(members.len() >= 2);
        for n in members {
            let n_big = BigInt::from(n);
            let lhs = h.value_at(&(&n_big + &m), &prec).unwrap()
                - h.value_at(&n_big, &prec).unwrap()
                - &der.source_at_shift;
            let rhs = der.d.value_at(&n_big, &prec).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn derivative_linear_on_shared_terms() {
        // h₁ ~ h₂ sharing the top term: D(h₁,m) − D(h₂,m) = D(h₁−h₂,m).
        let prec = prec();
        let top = Hat::monomial(sq(2), 2);
        let h1 = SgpSum::from_parts(vec![
            (BigInt::one(), top.clone()),
            (BigInt::one(), Hat::monomial(sq(3), 1)),
        ]);
        let h2 = SgpSum::from_parts(vec![
            (BigInt::one(), top),
            (BigInt::from(2), Hat::monomial(sq(5), 1)),
        ]);
        let m = BigInt::from(3);
        let d1 = derivative(&h1, &m, &prec).unwrap();
        let d2 = derivative(&h2, &m, &prec).unwrap();
        let d_diff = derivative(&h1.difference(&h2), &m, &prec);
        // h₁ − h₂ has degree 1, so its derivative is the zero expression;
        // and D(h₁) − D(h₂) must also be zero since degree-1 terms have
        // no cross components.
        assert!(d1.d.difference(&d2.d).is_zero());
        assert!(d_diff.unwrap().d.is_zero());
    }

    #[test]
    fn schedule_golden_values() {
        // M = L → r(0) = 10¹⁰; M = 2, L = 1 → r(3) = 1.6·10¹¹.
        let s = Schedule {
            m_upper: rat(1, 1),
            l_lower: rat(1, 1),
        };
        assert_eq!(s.r_upper(&BigInt::zero()), rat(10_000_000_000, 1));
        let s2 = Schedule {
            m_upper: rat(2, 1),
            l_lower: rat(1, 1),
        };
        assert_eq!(
            s2.r_upper(&BigInt::from(3)),
            rat(160_000_000_000, 1)
        );
    }

    #[test]
    fn qij_single_square_descends() {
        let prec = prec();
        let p = SgpSum::from_parts(vec![(BigInt::one(), Hat::monomial(sq(2), 2))]);
        let schedule = r_schedule(std::slice::from_ref(&p), &prec).unwrap();
        let shifts = select_shifts(std::slice::from_ref(&p), &schedule, 1, &prec).unwrap();
        let report = build_qij(std::slice::from_ref(&p), &shifts, 1000, &prec).unwrap();
        assert_eq!(report.weight_before, WeightVector(vec![0, 1]));
        assert_eq!(report.weight_after, WeightVector(vec![1]));
        assert!(report.separation_ok);
        assert!(pet_less(&report.weight_after, &report.weight_before));
    }

    #[test]
    fn descend_pair_to_linear() {
        let prec = prec();
        let p1 = SgpSum::from_parts(vec![
            (BigInt::one(), Hat::monomial(Coefficient::from_int(1), 2)),
            (BigInt::one(), Hat::monomial(Coefficient::from_int(1), 1)),
        ]);
        let p2 = SgpSum::from_parts(vec![
            (BigInt::one(), Hat::monomial(Coefficient::from_int(1), 2)),
            (BigInt::one(), Hat::monomial(sq(3), 1)),
        ]);
        let trace = descend_to_linear(&[p1, p2], 1, 1000, &prec, 16).unwrap();
        assert!(trace.rounds >= 1);
        for w in trace.weights.windows(2) {
            assert!(pet_less(&w[1], &w[0]));
        }
    }
}
