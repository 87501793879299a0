//! Integer-set machinery: fractional-part constraint sets, window
//! enumeration, and finite-window gap/run classification.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;

use crate::error::{GpError, Result};
use crate::eval::frac_value;
use crate::eval::Value;
use crate::exec;
use crate::expr::GpExpr;
use crate::interval::Precision;

pub const DEFAULT_WINDOW_CAP: i64 = 10_000_000;

/// One membership constraint: {g(n)} ∈ (−ε, ε).
#[derive(Clone, Debug, Serialize)]
pub struct Constraint {
    pub expr: GpExpr,
    #[serde(serialize_with = "ser_rat")]
    pub eps: BigRational,
}

fn ser_rat<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

/// Intersection of fractional-part constraints. The empty set of
/// constraints is all of the integers. Internally each expression keeps
/// its own ε, so intersections stay exact.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    /// All of the integers.
    pub fn universal() -> Self {
        ConstraintSet::default()
    }

    /// Sugar: one shared ε for a list of expressions.
    pub fn new(eps: BigRational, exprs: Vec<GpExpr>) -> Self {
        assert!(eps.is_positive());
        ConstraintSet {
            constraints: exprs
                .into_iter()
                .map(|expr| Constraint {
                    expr,
                    eps: eps.clone(),
                })
                .collect(),
        }
    }

    pub fn is_universal(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Smallest ε among the constraints, if any.
    pub fn min_eps(&self) -> Option<BigRational> {
        self.constraints.iter().map(|c| c.eps.clone()).min()
    }

    /// Exact intersection: concatenate constraints, keeping each ε.
    pub fn intersect(&self, other: &ConstraintSet) -> ConstraintSet {
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        ConstraintSet { constraints }
    }

    /// Certified membership test.
    pub fn member(&self, n: i64, prec: &Precision) -> Result<bool> {
        for c in &self.constraints {
            if !frac_inside(&c.expr, n, &c.eps, prec)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All members of [lo, hi], in order.
    pub fn enumerate(&self, lo: i64, hi: i64, prec: &Precision) -> Result<Vec<i64>> {
        self.enumerate_capped(lo, hi, prec, DEFAULT_WINDOW_CAP, false)
    }

    /// Sequential variant (identical output; used as the comparison lane
    /// for benchmarks and as a belt-and-braces oracle in tests).
    pub fn enumerate_seq(&self, lo: i64, hi: i64, prec: &Precision) -> Result<Vec<i64>> {
        self.enumerate_capped(lo, hi, prec, DEFAULT_WINDOW_CAP, true)
    }

    pub fn enumerate_capped(
        &self,
        lo: i64,
        hi: i64,
        prec: &Precision,
        cap: i64,
        sequential: bool,
    ) -> Result<Vec<i64>> {
        if lo > hi {
            return Err(GpError::Precondition {
                context: format!("window [{lo}, {hi}] is empty"),
            });
        }
        if hi - lo > cap {
            return Err(GpError::WindowTooLarge { lo, hi, cap });
        }
        let flags = exec::try_map_window(lo, hi, sequential, |n| self.member(n, prec))?;
        Ok(flags
            .into_iter()
            .zip(lo..=hi)
            .filter_map(|(m, n)| if m { Some(n) } else { None })
            .collect())
    }
}

/// Does {g(n)} lie strictly inside (−ε, ε)? Boundary-straddling
/// enclosures escalate inside `frac_value`; exact rational fracs decide
/// boundary cases exactly.
fn frac_inside(expr: &GpExpr, n: i64, eps: &BigRational, prec: &Precision) -> Result<bool> {
    // A single evaluation at the default ladder usually decides; if the
    // enclosure brushes ±ε, re-evaluate at higher floors.
    let mut floor = prec.start_bits;
    loop {
        let local = Precision::new(floor, prec.cap_bits);
        let (v, bits) = frac_value(expr, n, &local)?;
        match &v {
            Value::Exact(q) => return Ok(q.abs() < *eps),
            Value::Approx(iv) => {
                let neg = -eps.clone();
                if iv.lo() > &neg && iv.hi() < eps {
                    return Ok(true);
                }
                if iv.lo() >= eps || iv.hi() <= &neg {
                    return Ok(false);
                }
                if bits >= prec.cap_bits {
                    return Err(GpError::Undecidable {
                        context: format!("{{{expr}}} vs ±{eps} at n = {n}"),
                        max_bits: prec.cap_bits,
                    });
                }
                floor = (bits * 2).min(prec.cap_bits);
            }
        }
    }
}

/// Window-relative verdict for a set property. Never a claim about all of
/// the integers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value")]
pub enum Verdict {
    /// Holds on this window, with the observed bound (gap bound for
    /// syndetic-type verdicts, run length for thickness).
    HoldsOnWindow(i64),
    /// Fails on this window; the witness is the observed extremal value.
    FailsOnWindow(i64),
    /// Empty member set: nothing to classify.
    Vacuous,
}

/// Gap/run statistics of a finite member list within a window.
#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    pub window: (i64, i64),
    pub members: Vec<i64>,
    pub member_count: usize,
    /// Largest difference between consecutive members.
    pub max_gap: Option<i64>,
    /// Longest run of consecutive integers.
    pub max_run: i64,
    /// Distance from the window edges to the first/last member; reported
    /// separately so window truncation cannot fake a verdict.
    pub head_margin: Option<i64>,
    pub tail_margin: Option<i64>,
    pub probe: i64,
    pub syndetic: Verdict,
    pub thick: Verdict,
    pub thickly_syndetic: Verdict,
}

/// Classify a sorted member list on a window with run-probe L.
pub fn classify(members: &[i64], window: (i64, i64), probe: i64) -> Result<WindowReport> {
    let (lo, hi) = window;
    if probe < 1 {
        return Err(GpError::Precondition {
            context: "probe length must be positive".to_string(),
        });
    }
    if members.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GpError::Precondition {
            context: "member list must be strictly increasing".to_string(),
        });
    }
    if let (Some(first), Some(last)) = (members.first(), members.last()) {
        if *first < lo || *last > hi {
            return Err(GpError::Precondition {
                context: "members outside the window".to_string(),
            });
        }
    }
    if members.is_empty() {
        return Ok(WindowReport {
            window,
            members: Vec::new(),
            member_count: 0,
            max_gap: None,
            max_run: 0,
            head_margin: None,
            tail_margin: None,
            probe,
            syndetic: Verdict::Vacuous,
            thick: Verdict::Vacuous,
            thickly_syndetic: Verdict::Vacuous,
        });
    }

    let max_gap = members.windows(2).map(|w| w[1] - w[0]).max();
    let head_margin = members.first().map(|f| f - lo);
    let tail_margin = members.last().map(|l| hi - l);

    let mut max_run = 1i64;
    let mut run = 1i64;
    for w in members.windows(2) {
        if w[1] == w[0] + 1 {
            run += 1;
        } else {
            run = 1;
        }
        max_run = max_run.max(run);
    }

    let syndetic_bound = [
        max_gap.unwrap_or(0),
        head_margin.unwrap_or(0),
        tail_margin.unwrap_or(0),
        1,
    ]
    .into_iter()
    .max()
    .unwrap();
    let syndetic = Verdict::HoldsOnWindow(syndetic_bound);

    let thick = if max_run >= probe {
        Verdict::HoldsOnWindow(max_run)
    } else {
        Verdict::FailsOnWindow(max_run)
    };

    // Starts of full runs of length `probe`; the set is thickly syndetic
    // on the window when those starts are themselves gap-bounded.
    let mut starts: Vec<i64> = Vec::new();
    let mut i = 0usize;
    while i < members.len() {
        let mut j = i;
        while j + 1 < members.len() && members[j + 1] == members[j] + 1 {
            j += 1;
        }
        let run_len = (members[j] - members[i]) + 1;
        if run_len >= probe {
            for s in members[i]..=(members[j] - probe + 1) {
                starts.push(s);
            }
        }
        i = j + 1;
    }
    let thickly_syndetic = if starts.is_empty() {
        Verdict::FailsOnWindow(max_run)
    } else {
        let sub_hi = hi - probe + 1;
        let gaps = starts.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        let head = starts.first().unwrap() - lo;
        let tail = sub_hi - starts.last().unwrap();
        Verdict::HoldsOnWindow([gaps, head, tail, 1].into_iter().max().unwrap())
    };

    Ok(WindowReport {
        window,
        members: members.to_vec(),
        member_count: members.len(),
        max_gap,
        max_run,
        head_margin,
        tail_margin,
        probe,
        syndetic,
        thick,
        thickly_syndetic,
    })
}

/// Convenience: signed fractional part of an exact rational multiple used
/// in tests and reports.
pub fn frac_of_rational(q: &BigRational) -> BigRational {
    let m = crate::eval::nearest_int_rational(q);
    q - BigRational::from(BigInt::from(m))
}
