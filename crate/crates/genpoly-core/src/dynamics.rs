//! Concrete symbolic systems and the recurrence harness.
//!
//! Three systems are implemented: the Chacon substitution subshift
//! (weakly mixing and minimal), the full shift (weakly mixing, not
//! minimal — negative control), and an irrational circle rotation
//! (minimal, not weakly mixing — negative control). On top of them:
//! orbit tuples along generalized-polynomial times, hitting-time sets
//! N(p, U, V), finite-resolution density coverage of orbit tuples in X^d,
//! and the syndeticity report for N ∩ C.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use crate::coeff::Coefficient;
use crate::error::{GpError, Result};
use crate::eval::eval_nearest_int;
use crate::exec;
use crate::expr::GpExpr;
use crate::interval::{Precision, RealInterval};
use crate::sets::{classify, ConstraintSet, WindowReport};
use crate::structure::nondegenerate;

/// Hard caps keep box counts and scan times at desk scale.
#[derive(Clone, Debug, Serialize)]
pub struct DynConfig {
    pub horizon: i64,
    pub window_cap: i64,
    pub depth_cap: u32,
    pub dims_cap: usize,
    pub block_level_cap: u32,
    pub grid_cap: u32,
    pub sequential: bool,
}

impl Default for DynConfig {
    fn default() -> Self {
        DynConfig {
            horizon: 100_000,
            window_cap: 10_000_000,
            depth_cap: 6,
            dims_cap: 3,
            block_level_cap: 20,
            grid_cap: 256,
            sequential: false,
        }
    }
}

/// A concrete system together with its distinguished point.
#[derive(Clone, Debug)]
pub enum System {
    /// Chacon subshift with the canonical two-sided point.
    Chacon,
    /// Full shift on `alphabet` symbols; the point is a seeded
    /// pseudorandom two-sided sequence (or all zeros for `seed` = 0,
    /// which pins the orbit closure to a single fixed point).
    FullShift { alphabet: u8, seed: u64 },
    /// Rotation by alpha on the circle, starting at x0 in [0, 1).
    Rotation { alpha: Coefficient, x0: BigRational },
}

/// Non-empty open set: a cylinder anchored at coordinate 0 for subshifts,
/// an open arc for the rotation.
#[derive(Clone, Debug, Serialize)]
pub enum OpenSet {
    Cylinder { word: Vec<u8> },
    Arc {
        #[serde(serialize_with = "ser_rat")]
        center: BigRational,
        #[serde(serialize_with = "ser_rat")]
        radius: BigRational,
    },
}

fn ser_rat<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

/// One coordinate of an orbit tuple.
#[derive(Clone, Debug, Serialize)]
pub enum OrbitCoord {
    /// Subshift coordinate: the point seen from this offset.
    Shifted { offset: i64 },
    /// Circle coordinate in [0, 1), as a certified enclosure.
    Circle { lo: String, hi: String },
}

// ---------------------------------------------------------------------------
// Chacon subshift
// ---------------------------------------------------------------------------

/// Block lengths |B_k| = (3^(k+1) − 1) / 2, while they fit in i64.
fn chacon_lengths() -> &'static [i64] {
    static LENS: std::sync::OnceLock<Vec<i64>> = std::sync::OnceLock::new();
    LENS.get_or_init(|| {
        let mut v = vec![1i64];
        loop {
            let last = *v.last().unwrap();
            match last.checked_mul(3).and_then(|x| x.checked_add(1)) {
                Some(next) => v.push(next),
                None => break,
            }
        }
        v
    })
}

/// The level-`level` block: B_0 = "0", B_{k+1} = B_k B_k 1 B_k.
pub fn chacon_block(level: u32, cap: u32) -> Result<Vec<u8>> {
    if level > cap {
        return Err(GpError::LevelTooLarge { level, cap });
    }
    let mut block = vec![b'0'];
    for _ in 0..level {
        let mut next = Vec::with_capacity(block.len() * 3 + 1);
        next.extend_from_slice(&block);
        next.extend_from_slice(&block);
        next.push(b'1');
        next.extend_from_slice(&block);
        block = next;
    }
    Ok(block)
}

/// Character j of B_level, by descent through the recursion.
fn chacon_block_char(level: usize, j: i64) -> u8 {
    let lens = chacon_lengths();
    let mut level = level;
    let mut j = j;
    while level > 0 {
        let l = lens[level - 1];
        if j < l {
            level -= 1;
        } else if j < 2 * l {
            j -= l;
            level -= 1;
        } else if j == 2 * l {
            return b'1';
        } else {
            j -= 2 * l + 1;
            level -= 1;
        }
    }
    b'0'
}

/// The canonical two-sided Chacon point: the nonnegative side is the
/// one-sided substitution fixed point (x[0..|B_k|) = B_k for every k),
/// the negative side is suffix-aligned (x[-|B_k|..0) = B_k). The two
/// sides agree across levels because B_{k+1} both starts and ends with
/// B_k, and every window occurs inside the B_k·B_k junction of B_{k+1},
/// so this is a genuine point of the subshift.
pub fn chacon_char(i: i64) -> u8 {
    let lens = chacon_lengths();
    if i >= 0 {
        for (k, &len) in lens.iter().enumerate() {
            if i < len {
                return chacon_block_char(k, i);
            }
        }
    } else {
        for (k, &len) in lens.iter().enumerate() {
            if let Some(j) = len.checked_add(i) {
                if j >= 0 {
                    return chacon_block_char(k, j);
                }
            }
        }
    }
    panic!("chacon index {i} out of the supported range");
}

/// Distinct factors of the subshift language at the given depth, read off
/// a large block.
pub fn chacon_admissible(depth: u32) -> Vec<Vec<u8>> {
    let block = chacon_block(12, 20).expect("level 12 is under the cap");
    let depth = depth as usize;
    let mut words: std::collections::BTreeSet<Vec<u8>> = Default::default();
    for w in block.windows(depth) {
        words.insert(w.to_vec());
    }
    words.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Full shift point
// ---------------------------------------------------------------------------

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn full_shift_char(alphabet: u8, seed: u64, i: i64) -> u8 {
    if seed == 0 {
        return b'0';
    }
    let z = ((i << 1) ^ (i >> 63)) as u64; // zigzag
    b'0' + (splitmix64(seed ^ z.wrapping_mul(0xD1B54A32D192ED03)) % alphabet as u64) as u8
}

fn point_char(sys: &System, i: i64) -> u8 {
    match sys {
        System::Chacon => chacon_char(i),
        System::FullShift { alphabet, seed } => full_shift_char(*alphabet, *seed, i),
        System::Rotation { .. } => panic!("rotation has no symbolic point"),
    }
}

fn point_word(sys: &System, i: i64, len: usize) -> Vec<u8> {
    (0..len as i64).map(|d| point_char(sys, i + d)).collect()
}

// ---------------------------------------------------------------------------
// Evaluation of polynomial times
// ---------------------------------------------------------------------------

fn poly_offset(p: &GpExpr, n: i64, prec: &Precision) -> Result<i64> {
    let v = eval_nearest_int(p, n, prec)?;
    v.to_i64().ok_or_else(|| GpError::Precondition {
        context: format!("offset {v} exceeds the supported index range"),
    })
}

/// Validate that every expression is integer-valued and the tuple is
/// non-degenerate.
fn check_polys(polys: &[GpExpr], prec: &Precision, cfg: &DynConfig) -> Result<()> {
    if polys.is_empty() || polys.len() > cfg.dims_cap {
        return Err(GpError::Precondition {
            context: format!(
                "tuple length {} outside 1..={}",
                polys.len(),
                cfg.dims_cap
            ),
        });
    }
    let mut sums = Vec::new();
    for p in polys {
        sums.push(crate::calculus::normalize_to_sgp(p)?.h);
    }
    let nd = nondegenerate(&sums, prec)?;
    if !nd.ok {
        return Err(GpError::Precondition {
            context: format!(
                "tuple is degenerate: zero leading sum at {:?}, zero pair {:?}",
                nd.zero_leading, nd.zero_pair
            ),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Orbit tuples
// ---------------------------------------------------------------------------

/// The orbit tuple (T^{p₁(n)}x, ..., T^{p_d(n)}x) at time n.
pub fn orbit_tuple(
    sys: &System,
    polys: &[GpExpr],
    n: i64,
    prec: &Precision,
) -> Result<Vec<OrbitCoord>> {
    let mut out = Vec::with_capacity(polys.len());
    for p in polys {
        match sys {
            System::Chacon | System::FullShift { .. } => {
                out.push(OrbitCoord::Shifted {
                    offset: poly_offset(p, n, prec)?,
                });
            }
            System::Rotation { alpha, x0 } => {
                let k = eval_nearest_int(p, n, prec)?;
                let iv = circle_point(x0, &k, alpha, prec)?;
                out.push(OrbitCoord::Circle {
                    lo: iv.lo().to_string(),
                    hi: iv.hi().to_string(),
                });
            }
        }
    }
    Ok(out)
}

/// Enclosure of {x0 + k·alpha} in [0, 1).
fn circle_point(
    x0: &BigRational,
    k: &BigInt,
    alpha: &Coefficient,
    prec: &Precision,
) -> Result<RealInterval> {
    if let Some(q) = alpha.as_rational() {
        let v = x0 + q * BigRational::from(k.clone());
        let f = &v - v.floor();
        return Ok(RealInterval::point(f));
    }
    for bits in prec.ladder() {
        let iv = alpha
            .eval(bits)
            .scale(&BigRational::from(k.clone()))
            .add(&RealInterval::point(x0.clone()));
        let f_lo = iv.lo().floor();
        let f_hi = iv.hi().floor();
        if f_lo == f_hi {
            return Ok(iv.sub(&RealInterval::point(f_lo)));
        }
    }
    Err(GpError::Undecidable {
        context: format!("circle coordinate of {k}·alpha"),
        max_bits: prec.cap_bits,
    })
}

/// Grid cell of {x0 + k·alpha} on a g-cell circle partition.
fn circle_cell(
    x0: &BigRational,
    k: &BigInt,
    alpha: &Coefficient,
    g: u32,
    prec: &Precision,
) -> Result<u32> {
    let g_rat = BigRational::from(BigInt::from(g));
    if let Some(q) = alpha.as_rational() {
        let v = x0 + q * BigRational::from(k.clone());
        let f = &v - v.floor();
        let cell = (f * g_rat).floor().to_integer();
        return Ok(cell.to_u32().unwrap_or(0).min(g - 1));
    }
    for bits in prec.ladder() {
        let iv = alpha
            .eval(bits)
            .scale(&BigRational::from(k.clone()))
            .add(&RealInterval::point(x0.clone()));
        let scaled = iv.scale(&g_rat);
        let c_lo = scaled.lo().floor();
        let c_hi = scaled.hi().floor();
        if c_lo == c_hi {
            let cell = c_lo.to_integer().mod_floor(&BigInt::from(g));
            return Ok(cell.to_u32().unwrap());
        }
    }
    Err(GpError::Undecidable {
        context: format!("grid cell of {k}·alpha at g = {g}"),
        max_bits: prec.cap_bits,
    })
}

// ---------------------------------------------------------------------------
// Hitting times
// ---------------------------------------------------------------------------

fn validate_open_set(sys: &System, set: &OpenSet, cfg: &DynConfig) -> Result<()> {
    match (sys, set) {
        (System::Rotation { .. }, OpenSet::Arc { radius, .. }) => {
            if !radius.is_positive() {
                return Err(GpError::Precondition {
                    context: "arc radius must be positive".to_string(),
                });
            }
            if *radius > BigRational::new(BigInt::one(), BigInt::from(4)) {
                return Err(GpError::Precondition {
                    context: "arc radius above 1/4 is not supported".to_string(),
                });
            }
            Ok(())
        }
        (System::Chacon, OpenSet::Cylinder { word }) => {
            if word.is_empty() || word.len() > cfg.depth_cap as usize {
                return Err(GpError::Precondition {
                    context: "cylinder word length outside caps".to_string(),
                });
            }
            if !chacon_admissible(word.len() as u32).contains(word) {
                return Err(GpError::Precondition {
                    context: format!(
                        "word {} does not occur in the subshift",
                        String::from_utf8_lossy(word)
                    ),
                });
            }
            Ok(())
        }
        (System::FullShift { alphabet, .. }, OpenSet::Cylinder { word }) => {
            if word.is_empty() {
                return Err(GpError::Precondition {
                    context: "empty cylinder word".to_string(),
                });
            }
            for c in word {
                if *c < b'0' || *c >= b'0' + alphabet {
                    return Err(GpError::Precondition {
                        context: "cylinder word outside the alphabet".to_string(),
                    });
                }
            }
            Ok(())
        }
        _ => Err(GpError::Precondition {
            context: "open-set kind does not match the system".to_string(),
        }),
    }
}

/// Is U ∩ T^{-m₁}V₁ ∩ ... ∩ T^{-m_d}V_d nonempty?
///
/// For the Chacon subshift this searches pattern occurrences inside a
/// finite horizon of the canonical point (minimality makes the language
/// of the point the language of the system); exhausting the horizon
/// reports "not found" rather than "empty". The full shift is decided
/// combinatorially, the rotation by exact arc intersection.
fn joint_hit(
    sys: &System,
    u: &OpenSet,
    targets: &[(&OpenSet, i64)],
    cfg: &DynConfig,
    prec: &Precision,
) -> Result<bool> {
    match sys {
        System::Chacon => {
            let u_word = match u {
                OpenSet::Cylinder { word } => word,
                _ => unreachable!(),
            };
            'outer: for i in 0..cfg.horizon {
                for (d, c) in u_word.iter().enumerate() {
                    if point_char(sys, i + d as i64) != *c {
                        continue 'outer;
                    }
                }
                for (v, m) in targets {
                    let v_word = match v {
                        OpenSet::Cylinder { word } => word,
                        _ => unreachable!(),
                    };
                    for (d, c) in v_word.iter().enumerate() {
                        if point_char(sys, i + m + d as i64) != *c {
                            continue 'outer;
                        }
                    }
                }
                return Ok(true);
            }
            Ok(false)
        }
        System::FullShift { .. } => {
            // Cylinder constraints are jointly satisfiable iff no two
            // prescribe different characters at the same position.
            let mut constraints: std::collections::HashMap<i64, u8> = Default::default();
            let u_word = match u {
                OpenSet::Cylinder { word } => word,
                _ => unreachable!(),
            };
            for (d, c) in u_word.iter().enumerate() {
                constraints.insert(d as i64, *c);
            }
            for (v, m) in targets {
                let v_word = match v {
                    OpenSet::Cylinder { word } => word,
                    _ => unreachable!(),
                };
                for (d, c) in v_word.iter().enumerate() {
                    let pos = m + d as i64;
                    if let Some(prev) = constraints.insert(pos, *c) {
                        if prev != *c {
                            return Ok(false);
                        }
                    }
                }
            }
            Ok(true)
        }
        System::Rotation { alpha, .. } => {
            // U ∩ (V₁ − m₁α) ∩ ...: anchor at U's center and compare
            // signed circle positions.
            let (c_u, r_u) = match u {
                OpenSet::Arc { center, radius } => (center.clone(), radius.clone()),
                _ => unreachable!(),
            };
            let mut lo_bound = -r_u.clone();
            let mut hi_bound = r_u.clone();
            for (v, m) in targets {
                let (c_v, r_v) = match v {
                    OpenSet::Arc { center, radius } => (center.clone(), radius.clone()),
                    _ => unreachable!(),
                };
                // position of (V − mα)'s center relative to U's center
                let delta = signed_circle_delta(&(c_v - &c_u), &BigInt::from(-*m), alpha, prec)?;
                let lo = delta.lo() - &r_v;
                let hi = delta.hi() + &r_v;
                // disjoint from U entirely?
                if lo >= hi_bound || hi <= lo_bound {
                    return Ok(false);
                }
                let tight_lo = delta.hi() - &r_v;
                let tight_hi = delta.lo() + &r_v;
                if tight_lo > lo_bound {
                    lo_bound = tight_lo;
                }
                if tight_hi < hi_bound {
                    hi_bound = tight_hi;
                }
                if lo_bound >= hi_bound {
                    // Cannot certify a common point with these enclosures.
                    // Distinguish "provably empty" from "undecided" by a
                    // conservative recheck on the outer hulls.
                    let mut outer_lo = -r_u.clone();
                    let mut outer_hi = r_u.clone();
                    let mut empty = false;
                    for (v2, m2) in targets {
                        let (c2, r2) = match v2 {
                            OpenSet::Arc { center, radius } => (center.clone(), radius.clone()),
                            _ => unreachable!(),
                        };
                        let d2 =
                            signed_circle_delta(&(c2 - &c_u), &BigInt::from(-*m2), alpha, prec)?;
                        let l2 = d2.lo() - &r2;
                        let h2 = d2.hi() + &r2;
                        if l2 > outer_lo {
                            outer_lo = l2;
                        }
                        if h2 < outer_hi {
                            outer_hi = h2;
                        }
                        if outer_lo >= outer_hi {
                            empty = true;
                            break;
                        }
                    }
                    if empty {
                        return Ok(false);
                    }
                    return Err(GpError::Undecidable {
                        context: "arc intersection at the enclosure boundary".to_string(),
                        max_bits: prec.cap_bits,
                    });
                }
            }
            Ok(true)
        }
    }
}

/// Signed circle position of base + k·alpha, reduced into (−1/2, 1/2].
fn signed_circle_delta(
    base: &BigRational,
    k: &BigInt,
    alpha: &Coefficient,
    prec: &Precision,
) -> Result<RealInterval> {
    if let Some(q) = alpha.as_rational() {
        let v = base + q * BigRational::from(k.clone());
        let m = crate::eval::nearest_int_rational(&v);
        return Ok(RealInterval::point(v - BigRational::from(m)));
    }
    for bits in prec.ladder() {
        let iv = alpha
            .eval(bits)
            .scale(&BigRational::from(k.clone()))
            .add(&RealInterval::point(base.clone()));
        if let Some(m) = crate::eval::nearest_int_value(&crate::eval::Value::Approx(iv.clone())) {
            return Ok(iv.sub(&RealInterval::point(BigRational::from(m))));
        }
    }
    Err(GpError::Undecidable {
        context: "signed circle position".to_string(),
        max_bits: prec.cap_bits,
    })
}

/// All n in the window with U ∩ T^{-p(n)}V nonempty.
pub fn hitting_times(
    sys: &System,
    u: &OpenSet,
    v: &OpenSet,
    p: &GpExpr,
    window: (i64, i64),
    cfg: &DynConfig,
    prec: &Precision,
) -> Result<Vec<i64>> {
    validate_open_set(sys, u, cfg)?;
    validate_open_set(sys, v, cfg)?;
    let (lo, hi) = window;
    if hi - lo > cfg.window_cap {
        return Err(GpError::WindowTooLarge {
            lo,
            hi,
            cap: cfg.window_cap,
        });
    }
    let flags = exec::try_map_window(lo, hi, cfg.sequential, |n| {
        let m = poly_offset(p, n, prec)?;
        joint_hit(sys, u, &[(v, m)], cfg, prec)
    })?;
    Ok(flags
        .into_iter()
        .zip(lo..=hi)
        .filter_map(|(h, n)| if h { Some(n) } else { None })
        .collect())
}

// ---------------------------------------------------------------------------
// Density coverage
// ---------------------------------------------------------------------------

/// Coverage of the orbit-tuple closure at finite resolution.
#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub polys: Vec<String>,
    pub resolution: String,
    pub window: (i64, i64),
    pub boxes_total: usize,
    pub boxes_hit: usize,
    pub coverage: f64,
    /// a sample of boxes never hit
    pub missing: Vec<String>,
    /// coverage after scanning |n| ≤ checkpoint, for nested windows
    pub curve: Vec<(i64, f64)>,
}

/// Scan the window and mark which product boxes the orbit tuple visits.
/// `resolution` is the cylinder depth for subshifts and the grid size for
/// the rotation. Checkpoints record coverage on nested symmetric
/// subwindows, so monotonicity is visible in one run.
pub fn density_coverage(
    sys: &System,
    polys: &[GpExpr],
    resolution: u32,
    window: (i64, i64),
    checkpoints: &[i64],
    cfg: &DynConfig,
    prec: &Precision,
) -> Result<DensityReport> {
    check_polys(polys, prec, cfg)?;
    let (lo, hi) = window;
    if hi - lo > cfg.window_cap {
        return Err(GpError::WindowTooLarge {
            lo,
            hi,
            cap: cfg.window_cap,
        });
    }
    let d = polys.len();

    // Per-coordinate admissible boxes.
    let (per_coord, labels): (usize, Vec<String>) = match sys {
        System::Chacon => {
            if resolution == 0 || resolution > cfg.depth_cap {
                return Err(GpError::ResolutionTooFine {
                    context: format!("depth {resolution} outside 1..={}", cfg.depth_cap),
                });
            }
            let words = chacon_admissible(resolution);
            let labels = words
                .iter()
                .map(|w| String::from_utf8_lossy(w).to_string())
                .collect();
            (words.len(), labels)
        }
        System::FullShift { alphabet, .. } => {
            if resolution == 0 || resolution > cfg.depth_cap {
                return Err(GpError::ResolutionTooFine {
                    context: format!("depth {resolution} outside 1..={}", cfg.depth_cap),
                });
            }
            let count = (*alphabet as usize).pow(resolution);
            let mut labels = Vec::with_capacity(count);
            for idx in 0..count {
                let mut word = Vec::with_capacity(resolution as usize);
                let mut rest = idx;
                for _ in 0..resolution {
                    word.push(b'0' + (rest % *alphabet as usize) as u8);
                    rest /= *alphabet as usize;
                }
                labels.push(String::from_utf8_lossy(&word).to_string());
            }
            (count, labels)
        }
        System::Rotation { .. } => {
            if resolution == 0 || resolution > cfg.grid_cap {
                return Err(GpError::ResolutionTooFine {
                    context: format!("grid {resolution} outside 1..={}", cfg.grid_cap),
                });
            }
            let labels = (0..resolution)
                .map(|c| format!("[{c}/{resolution}, {}/{resolution})", c + 1))
                .collect();
            (resolution as usize, labels)
        }
    };
    let boxes_total = per_coord.pow(d as u32);
    if boxes_total > 4_000_000 {
        return Err(GpError::ResolutionTooFine {
            context: format!("{boxes_total} product boxes"),
        });
    }

    // Word → index for subshift lookups.
    let word_index: std::collections::HashMap<Vec<u8>, usize> = match sys {
        System::Chacon => chacon_admissible(resolution)
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, i))
            .collect(),
        System::FullShift { alphabet, .. } => {
            let mut m = std::collections::HashMap::new();
            for idx in 0..per_coord {
                let mut word = Vec::with_capacity(resolution as usize);
                let mut rest = idx;
                for _ in 0..resolution {
                    word.push(b'0' + (rest % *alphabet as usize) as u8);
                    rest /= *alphabet as usize;
                }
                m.insert(word, idx);
            }
            m
        }
        System::Rotation { .. } => Default::default(),
    };

    // Phase 1 (parallel): box index per n.
    let ids = exec::try_map_window(lo, hi, cfg.sequential, |n| -> Result<usize> {
        let mut id = 0usize;
        for p in polys {
            let coord = match sys {
                System::Chacon | System::FullShift { .. } => {
                    let off = poly_offset(p, n, prec)?;
                    let word = point_word(sys, off, resolution as usize);
                    *word_index.get(&word).ok_or_else(|| GpError::Precondition {
                        context: format!(
                            "word {} not in the admissible set",
                            String::from_utf8_lossy(&word)
                        ),
                    })?
                }
                System::Rotation { alpha, x0 } => {
                    let k = eval_nearest_int(p, n, prec)?;
                    circle_cell(x0, &k, alpha, resolution, prec)? as usize
                }
            };
            id = id * per_coord + coord;
        }
        Ok(id)
    })?;

    // Phase 2 (sequential, by increasing |n|): mark hits, record curve.
    let mut hit = vec![false; boxes_total];
    let mut boxes_hit = 0usize;
    let mut curve = Vec::with_capacity(checkpoints.len());
    let mut cps: Vec<i64> = checkpoints.to_vec();
    cps.sort_unstable();
    let mut cp_iter = cps.into_iter().peekable();
    let max_abs = lo.abs().max(hi.abs());
    let mark = |n: i64, hit: &mut Vec<bool>, boxes_hit: &mut usize| {
        if n < lo || n > hi {
            return;
        }
        let id = ids[(n - lo) as usize];
        if !hit[id] {
            hit[id] = true;
            *boxes_hit += 1;
        }
    };
    for r in 0..=max_abs {
        if r == 0 {
            mark(0, &mut hit, &mut boxes_hit);
        } else {
            mark(r, &mut hit, &mut boxes_hit);
            mark(-r, &mut hit, &mut boxes_hit);
        }
        while let Some(&cp) = cp_iter.peek() {
            if cp == r {
                curve.push((cp, boxes_hit as f64 / boxes_total as f64));
                cp_iter.next();
            } else if cp < r {
                cp_iter.next();
            } else {
                break;
            }
        }
    }
    for cp in cp_iter {
        curve.push((cp, boxes_hit as f64 / boxes_total as f64));
    }

    let missing: Vec<String> = hit
        .iter()
        .enumerate()
        .filter(|(_, h)| !**h)
        .take(32)
        .map(|(id, _)| {
            let mut parts = Vec::with_capacity(d);
            let mut rest = id;
            for _ in 0..d {
                parts.push(labels[rest % per_coord].clone());
                rest /= per_coord;
            }
            parts.reverse();
            parts.join(" x ")
        })
        .collect();

    Ok(DensityReport {
        polys: polys.iter().map(|p| p.to_string()).collect(),
        resolution: match sys {
            System::Rotation { .. } => format!("grid {resolution}"),
            _ => format!("depth {resolution}"),
        },
        window,
        boxes_total,
        boxes_hit,
        coverage: boxes_hit as f64 / boxes_total as f64,
        missing,
        curve,
    })
}

// ---------------------------------------------------------------------------
// Syndeticity of N ∩ C
// ---------------------------------------------------------------------------

/// Members of N = {n : U ∩ T^{-p₁(n)}V₁ ∩ ... ≠ ∅} intersected with the
/// constraint set, classified on the window.
pub fn syndetic_check(
    sys: &System,
    u: &OpenSet,
    targets: &[(OpenSet, GpExpr)],
    constraint: &ConstraintSet,
    window: (i64, i64),
    probe: i64,
    cfg: &DynConfig,
    prec: &Precision,
) -> Result<WindowReport> {
    validate_open_set(sys, u, cfg)?;
    for (v, _) in targets {
        validate_open_set(sys, v, cfg)?;
    }
    let (lo, hi) = window;
    if hi - lo > cfg.window_cap {
        return Err(GpError::WindowTooLarge {
            lo,
            hi,
            cap: cfg.window_cap,
        });
    }
    let flags = exec::try_map_window(lo, hi, cfg.sequential, |n| -> Result<bool> {
        if !constraint.member(n, prec)? {
            return Ok(false);
        }
        let mut offs = Vec::with_capacity(targets.len());
        for (v, p) in targets {
            offs.push((v, poly_offset(p, n, prec)?));
        }
        joint_hit(sys, u, &offs, cfg, prec)
    })?;
    let members: Vec<i64> = flags
        .into_iter()
        .zip(lo..=hi)
        .filter_map(|(h, n)| if h { Some(n) } else { None })
        .collect();
    classify(&members, window, probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use num_traits::Zero;

    fn prec() -> Precision {
        Precision::default()
    }

    fn cfg() -> DynConfig {
        DynConfig::default()
    }

    #[test]
    fn chacon_blocks_golden() {
        assert_eq!(chacon_block(0, 20).unwrap(), b"0".to_vec());
        assert_eq!(chacon_block(1, 20).unwrap(), b"0010".to_vec());
        assert_eq!(chacon_block(2, 20).unwrap(), b"0010001010010".to_vec());
        assert!(matches!(
            chacon_block(21, 20),
            Err(GpError::LevelTooLarge { .. })
        ));
    }

    #[test]
    fn chacon_point_consistency() {
        // The point restricted to [0, |B_k|) must equal B_k for every k:
        // the origin sits at the start of a copy of every block.
        for k in 0..8 {
            let block = chacon_block(k, 20).unwrap();
            for (j, c) in block.iter().enumerate() {
                assert_eq!(chacon_char(j as i64), *c, "level {k} index {j}");
            }
        }
        // Two-sided: the negative side is suffix-aligned with every block.
        let lens = chacon_lengths();
        for k in 1..8usize {
            let block = chacon_block(k as u32, 20).unwrap();
            for i in -lens[k]..0 {
                assert_eq!(
                    chacon_char(i),
                    block[(lens[k] + i) as usize],
                    "level {k} offset {i}"
                );
            }
        }
    }

    #[test]
    fn chacon_never_contains_11() {
        let words = chacon_admissible(2);
        assert_eq!(words.len(), 3);
        assert!(!words.contains(&b"11".to_vec()));
    }

    #[test]
    fn chacon_block_char_matches_block() {
        let block = chacon_block(9, 20).unwrap();
        for j in (0..block.len()).step_by(97) {
            assert_eq!(chacon_block_char(9, j as i64), block[j]);
        }
    }

    #[test]
    fn admissible_words_occur_in_point() {
        // every admissible depth-3 word occurs in the point's window
        let words = chacon_admissible(3);
        let seg: Vec<u8> = (0..3000).map(chacon_char).collect();
        for w in &words {
            assert!(
                seg.windows(3).any(|s| s == &w[..]),
                "missing {:?}",
                String::from_utf8_lossy(w)
            );
        }
    }

    #[test]
    fn orbit_tuple_at_zero_is_identity() {
        let prec = prec();
        let polys = vec![parse("n^2").unwrap(), parse("n^2 + n").unwrap()];
        let t = orbit_tuple(&System::Chacon, &polys, 0, &prec).unwrap();
        for c in t {
            match c {
                OrbitCoord::Shifted { offset } => assert_eq!(offset, 0),
                _ => panic!(),
            }
        }
    }

    #[test]
    fn orbit_tuple_offsets() {
        let prec = prec();
        let polys = vec![parse("n^2").unwrap(), parse("n^2 + n").unwrap()];
        let t = orbit_tuple(&System::Chacon, &polys, 2, &prec).unwrap();
        let offs: Vec<i64> = t
            .iter()
            .map(|c| match c {
                OrbitCoord::Shifted { offset } => *offset,
                _ => panic!(),
            })
            .collect();
        assert_eq!(offs, vec![4, 6]);
    }

    #[test]
    fn rotation_orbit_coordinate() {
        let prec = prec();
        let sys = System::Rotation {
            alpha: Coefficient::sqrt_int(2),
            x0: BigRational::zero(),
        };
        let t = orbit_tuple(&sys, &[parse("n").unwrap()], 5, &prec).unwrap();
        match &t[0] {
            OrbitCoord::Circle { lo, hi } => {
                let lo: f64 = lo.parse::<BigRational>().map(|q| crate::coeff::rational_to_f64(&q)).unwrap();
                let hi: f64 = hi.parse::<BigRational>().map(|q| crate::coeff::rational_to_f64(&q)).unwrap();
                // {5·sqrt2} = 0.0710678...
                assert!(lo > 0.071 && hi < 0.0711);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn rotation_hits_match_constraint_set() {
        let prec = prec();
        let cfg = cfg();
        let sys = System::Rotation {
            alpha: Coefficient::sqrt_int(2),
            x0: BigRational::zero(),
        };
        let arc = OpenSet::Arc {
            center: BigRational::zero(),
            radius: BigRational::new(BigInt::one(), BigInt::from(10)),
        };
        let hits = hitting_times(
            &sys,
            &arc,
            &arc,
            &parse("n").unwrap(),
            (0, 20),
            &cfg,
            &prec,
        )
        .unwrap();
        // U = V = arc(0, 0.1): U ∩ (U − n·sqrt2) nonempty iff the circle
        // distance of n·sqrt2 from 0 is < 0.2; on [0,20] that holds exactly
        // at {0, 5, 12, 17} (same fractional parts as the constraint-set
        // example, with threshold 2ε).
        assert!(hits.contains(&0) && hits.contains(&5));
        assert!(hits.contains(&12) && hits.contains(&17));
        assert!(!hits.contains(&1) && !hits.contains(&3));
    }

    #[test]
    fn full_shift_far_separations_always_hit() {
        let prec = prec();
        let cfg = cfg();
        let sys = System::FullShift {
            alphabet: 2,
            seed: 7,
        };
        let u = OpenSet::Cylinder {
            word: b"01".to_vec(),
        };
        let v = OpenSet::Cylinder {
            word: b"10".to_vec(),
        };
        let hits = hitting_times(&sys, &u, &v, &parse("n").unwrap(), (-30, 30), &cfg, &prec)
            .unwrap();
        for n in -30..=30i64 {
            if n.unsigned_abs() >= 2 {
                assert!(hits.contains(&n), "expected hit at {n}");
            }
        }
    }

    #[test]
    fn chacon_density_small_window_depth1() {
        let prec = prec();
        let cfg = cfg();
        let report = density_coverage(
            &System::Chacon,
            &[parse("n").unwrap()],
            1,
            (-500, 500),
            &[10, 100, 500],
            &cfg,
            &prec,
        )
        .unwrap();
        assert_eq!(report.boxes_total, 2);
        assert_eq!(report.coverage, 1.0);
        // curve is monotone
        for w in report.curve.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn rotation_line_confinement() {
        // (n, 2n) on the rotation: the tuple lies on a line, so a 4-cell
        // grid cannot be covered.
        let prec = prec();
        let cfg = cfg();
        let sys = System::Rotation {
            alpha: Coefficient::sqrt_int(2),
            x0: BigRational::zero(),
        };
        let report = density_coverage(
            &sys,
            &[parse("n").unwrap(), parse("2 * n").unwrap()],
            4,
            (-3000, 3000),
            &[1000, 3000],
            &cfg,
            &prec,
        )
        .unwrap();
        assert!(report.coverage < 1.0);
        assert!(!report.missing.is_empty());
    }

    #[test]
    fn syndetic_check_chacon_identity_poly() {
        let prec = prec();
        let cfg = cfg();
        let u = OpenSet::Cylinder { word: b"0".to_vec() };
        let report = syndetic_check(
            &System::Chacon,
            &u,
            &[(u.clone(), parse("n").unwrap())],
            &ConstraintSet::universal(),
            (-2000, 2000),
            2,
            &cfg,
            &prec,
        )
        .unwrap();
        assert!(report.member_count > 0);
        match report.syndetic {
            crate::sets::Verdict::HoldsOnWindow(bound) => assert!(bound <= 16),
            _ => panic!("expected a bound"),
        }
    }
}
