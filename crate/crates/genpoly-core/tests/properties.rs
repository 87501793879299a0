//! Property tests for the bracket algebra, structural analysis and
//! integer-set machinery.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use genpoly_core::coeff::Coefficient;
use genpoly_core::eval::{frac_value, nearest_int_rational, Value};
use genpoly_core::expr::GpExpr;
use genpoly_core::interval::{Precision, RealInterval};
use genpoly_core::parse::parse;
use genpoly_core::sets::{classify, ConstraintSet};
use genpoly_core::sgp::{Hat, SgpSum};
use genpoly_core::structure::{
    approx_eq, equivalent, leading_sum, pet_less, weight_vector, WeightVector,
};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

fn coeff_pool() -> impl Strategy<Value = Coefficient> {
    prop_oneof![
        (1i64..=9, 1i64..=4).prop_map(|(p, q)| Coefficient::from_rational(rat(p, q))),
        (-9i64..=-1, 1i64..=4).prop_map(|(p, q)| Coefficient::from_rational(rat(p, q))),
        Just(Coefficient::sqrt_int(2)),
        Just(Coefficient::sqrt_int(3)),
        Just(Coefficient::sqrt_int(5)),
        Just(Coefficient::pi()),
        Just(Coefficient::euler()),
        Just(Coefficient::golden()),
        (Just(()), 2i64..=5).prop_map(|(_, k)| Coefficient::sqrt_int(7).mul_rational(&rat(k, 2))),
    ]
}

fn nonzero_coeff() -> impl Strategy<Value = Coefficient> {
    coeff_pool().prop_filter("nonzero", |c| !c.is_zero())
}

/// Canonical expression trees, mirroring what the parser can produce.
fn expr_strategy() -> impl Strategy<Value = GpExpr> {
    let leaf = (nonzero_coeff(), 1u32..=3).prop_map(|(c, p)| GpExpr::monomial(c, p));
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(GpExpr::bracket),
            (nonzero_coeff(), inner.clone()).prop_map(|(c, e)| match e {
                // scale() keeps monomials canonical by folding
                e => GpExpr::scale(c, e),
            }),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(GpExpr::sum),
            // canonical product: at most one monomial child, first
            (
                (nonzero_coeff(), 1u32..=2),
                prop::collection::vec(inner.clone().prop_map(GpExpr::bracket), 1..=2)
            )
                .prop_map(|((c, p), rest)| {
                    let mut children = vec![GpExpr::monomial(c, p)];
                    children.extend(rest);
                    GpExpr::product(children)
                }),
        ]
    })
}

/// Normal-form hats of small degree with coefficients from the pool.
fn hat_strategy() -> impl Strategy<Value = Hat> {
    prop_oneof![
        (nonzero_coeff(), 1u32..=3).prop_map(|(c, p)| Hat::monomial(c, p)),
        (nonzero_coeff(), nonzero_coeff(), 1u32..=2, 1u32..=2)
            .prop_map(|(a, b, p, q)| Hat::chain(&[(a, p), (b, q)])),
        (nonzero_coeff(), nonzero_coeff()).prop_map(|(a, b)| Hat::new(
            Coefficient::one(),
            0,
            vec![Hat::monomial(a, 1), Hat::monomial(b, 1)]
        )),
    ]
}

fn sum_strategy() -> impl Strategy<Value = SgpSum> {
    prop::collection::vec((1i64..=4, hat_strategy()), 1..=3).prop_map(|parts| {
        SgpSum::from_parts(
            parts
                .into_iter()
                .map(|(c, h)| (BigInt::from(c), h))
                .collect::<Vec<_>>(),
        )
    })
}

// ---------------------------------------------------------------------------
// Round trips and evaluation
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn parse_format_identity(e in expr_strategy()) {
        let text = e.format();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn frac_lands_in_half_open_interval(e in expr_strategy(), n in -200i64..=200) {
        let prec = Precision::default();
        if let Ok((v, _)) = frac_value(&e, n, &prec) {
            match v {
                Value::Exact(q) => {
                    prop_assert!(q > rat(-1, 2) && q <= rat(1, 2));
                }
                Value::Approx(iv) => {
                    // the enclosure of a frac may poke past the boundary by
                    // its own width, never by more
                    let w = iv.width();
                    prop_assert!(iv.lo() > &(rat(-1, 2) - &w));
                    prop_assert!(iv.hi() <= &(rat(1, 2) + &w));
                }
            }
        }
    }

    #[test]
    fn nearest_is_within_half(q_num in -4000i64..=4000, q_den in 1i64..=97) {
        let q = rat(q_num, q_den);
        let m = nearest_int_rational(&q);
        let diff = &q - BigRational::from(m);
        prop_assert!(diff.abs() <= rat(1, 2));
        prop_assert!(diff > rat(-1, 2) && diff <= rat(1, 2));
    }
}

// ---------------------------------------------------------------------------
// Structural analysis
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equivalence_is_an_equivalence(
        base in hat_strategy(),
        lows in prop::collection::vec((1i64..=3, hat_strategy()), 0..=2),
        c1 in 1i64..=3, c2 in 1i64..=3, c3 in 1i64..=3,
    ) {
        // Build three sums sharing the same top term, perturbed below.
        let mk = |c: i64, lows: &[(i64, Hat)]| {
            let mut parts = vec![(BigInt::from(c), base.clone())];
            let top_deg = base.degree();
            for (k, h) in lows {
                if h.degree() < top_deg {
                    parts.push((BigInt::from(*k), h.clone()));
                }
            }
            SgpSum::from_parts(parts)
        };
        let p = mk(c1, &lows);
        let q = mk(c2, &lows);
        let r = mk(c3, &lows);
        prop_assert!(equivalent(&p, &p).unwrap());
        if c1 == c2 {
            prop_assert!(equivalent(&p, &q).unwrap());
            prop_assert_eq!(equivalent(&q, &p).unwrap(), equivalent(&p, &q).unwrap());
            if c2 == c3 {
                if equivalent(&p, &q).unwrap() && equivalent(&q, &r).unwrap() {
                    prop_assert!(equivalent(&p, &r).unwrap());
                }
            }
        }
    }

    #[test]
    fn pet_less_is_a_strict_total_order(
        a in prop::collection::vec(0u64..=3, 0..=5),
        b in prop::collection::vec(0u64..=3, 0..=5),
        c in prop::collection::vec(0u64..=3, 0..=5),
    ) {
        let (a, b, c) = (WeightVector(a), WeightVector(b), WeightVector(c));
        prop_assert!(!pet_less(&a, &a));
        if pet_less(&a, &b) {
            prop_assert!(!pet_less(&b, &a));
        }
        if pet_less(&a, &b) && pet_less(&b, &c) {
            prop_assert!(pet_less(&a, &c));
        }
        // totality on distinct (after zero-trim) vectors
        let mut at = a.0.clone();
        let mut bt = b.0.clone();
        while at.last() == Some(&0) { at.pop(); }
        while bt.last() == Some(&0) { bt.pop(); }
        if at != bt {
            prop_assert!(pet_less(&a, &b) || pet_less(&b, &a));
        }
    }

    #[test]
    fn leading_sum_scales_with_integer_factors(h in hat_strategy(), c in 2i64..=7) {
        let single = SgpSum::from_parts(vec![(BigInt::from(1), h.clone())]);
        let scaled = SgpSum::from_parts(vec![(BigInt::from(c), h)]);
        let expect = leading_sum(&single).mul_bigint(&BigInt::from(c));
        prop_assert_eq!(leading_sum(&scaled), expect);
    }

    #[test]
    fn weight_vector_ignores_permutation(sums in prop::collection::vec(sum_strategy(), 1..=4), seed in 0usize..24) {
        let w1 = weight_vector(&sums).unwrap();
        let mut permuted = sums.clone();
        // a deterministic pseudo-shuffle
        let len = permuted.len();
        for i in 0..len {
            let j = (i + seed) % len;
            permuted.swap(i, j);
        }
        let w2 = weight_vector(&permuted).unwrap();
        prop_assert_eq!(w1, w2);
    }
}

// ---------------------------------------------------------------------------
// The much-greater calculus
// ---------------------------------------------------------------------------

#[test]
fn bracket_of_large_value_is_comparable() {
    // ⌈a⌉ ≈ a whenever |a| ≫ 1, sampled over irrational magnitudes.
    let n = 1000u64;
    for k in [10_000i64, -10_000, 123_457, 5_000_000, -987_654] {
        let a = Coefficient::sqrt_int(2).mul_rational(&rat(k, 1));
        let iv = a.eval(192);
        let rounded = genpoly_core::sgp::coeff_nearest_int(&a, &Precision::default()).unwrap();
        let r_iv = RealInterval::point(BigRational::from(rounded));
        assert!(
            approx_eq(&r_iv, &iv, n).unwrap(),
            "bracket not comparable at {k}"
        );
    }
}

#[test]
fn comparability_survives_products_and_sums() {
    // the worked instance: 10000·sqrt2 and 5000·sqrt3
    let n = 1000u64;
    let prec = Precision::default();
    let a = Coefficient::sqrt_int(2).mul_rational(&rat(10_000, 1));
    let b = Coefficient::sqrt_int(3).mul_rational(&rat(5_000, 1));
    let a_iv = a.eval(192);
    let b_iv = b.eval(192);
    let a_round = RealInterval::point(BigRational::from(
        genpoly_core::sgp::coeff_nearest_int(&a, &prec).unwrap(),
    ));
    let b_round = RealInterval::point(BigRational::from(
        genpoly_core::sgp::coeff_nearest_int(&b, &prec).unwrap(),
    ));
    // products of comparable pairs stay comparable
    assert!(approx_eq(&a_iv.mul(&b_iv), &a_round.mul(&b_round), n).unwrap());
    // sums too, given the magnitude hypothesis on a + b
    assert!(approx_eq(&a_iv.add(&b_iv), &a_round.add(&b_round), n).unwrap());
}

// ---------------------------------------------------------------------------
// Integer sets
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumerate_matches_member(kind in 0usize..3, num in 1i64..=30, den in 1i64..=30) {
        let prec = Precision::default();
        let expr = match kind {
            0 => parse("sqrt2 * n").unwrap(),
            1 => parse(&format!("{num}/{den} * n")).unwrap(),
            _ => parse("pi * n^2").unwrap(),
        };
        let set = ConstraintSet::new(rat(1, 7), vec![expr]);
        let members = set.enumerate(-60, 60, &prec).unwrap();
        for n in -60..=60i64 {
            prop_assert_eq!(members.contains(&n), set.member(n, &prec).unwrap());
        }
    }

    #[test]
    fn classify_is_idempotent(bits in prop::collection::vec(any::<bool>(), 1..80), probe in 1i64..=5) {
        let members: Vec<i64> = bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| if *b { Some(i as i64) } else { None })
            .collect();
        let window = (0i64, bits.len() as i64 - 1);
        let r1 = classify(&members, window, probe).unwrap();
        let r2 = classify(&r1.members, window, probe).unwrap();
        prop_assert_eq!(r1.max_gap, r2.max_gap);
        prop_assert_eq!(r1.max_run, r2.max_run);
        prop_assert_eq!(r1.syndetic, r2.syndetic);
        prop_assert_eq!(r1.thick, r2.thick);
        prop_assert_eq!(r1.thickly_syndetic, r2.thickly_syndetic);
    }

    #[test]
    fn intersection_is_conjunction(e1 in 0usize..3, e2 in 0usize..3) {
        let prec = Precision::default();
        let exprs = ["sqrt2 * n", "sqrt3 * n", "1/3 * n"];
        let a = ConstraintSet::new(rat(1, 8), vec![parse(exprs[e1]).unwrap()]);
        let b = ConstraintSet::new(rat(1, 5), vec![parse(exprs[e2]).unwrap()]);
        let both = a.intersect(&b);
        for n in -40..=40i64 {
            let expect = a.member(n, &prec).unwrap() && b.member(n, &prec).unwrap();
            prop_assert_eq!(both.member(n, &prec).unwrap(), expect);
        }
    }
}

/// Gap growth of sampled irrational constraint sets: reported, not
/// asserted as a theorem. The gap must stabilize rather than blow up for
/// the sets to be plausibly syndetic.
#[test]
fn report_gap_stabilization() {
    let prec = Precision::default();
    for expr in ["sqrt2 * n", "golden * n", "sqrt5 * n^2"] {
        let set = ConstraintSet::new(rat(1, 10), vec![parse(expr).unwrap()]);
        let mut gaps = Vec::new();
        for w in [300i64, 1000, 3000] {
            let members = set.enumerate(-w, w, &prec).unwrap();
            let r = classify(&members, (-w, w), 2).unwrap();
            gaps.push(r.max_gap.unwrap_or(0));
        }
        println!("gap growth for {{{expr}}} small: {gaps:?}");
        // growing the window can only reveal gaps, never shrink them
        assert!(gaps.windows(2).all(|w| w[0] <= w[1]));
        // and the largest window's gap stays desk-scale finite
        assert!(*gaps.last().unwrap() <= 200);
    }
}

// ---------------------------------------------------------------------------
// Dynamics consistency
// ---------------------------------------------------------------------------

#[test]
fn orbit_matches_repeated_shift() {
    use genpoly_core::dynamics::{chacon_char, orbit_tuple, OrbitCoord, System};
    let prec = Precision::default();
    let polys = vec![parse("n^2").unwrap(), parse("n^2 + n").unwrap()];
    for n in -31..=31i64 {
        let tuple = orbit_tuple(&System::Chacon, &polys, n, &prec).unwrap();
        for (p, coord) in polys.iter().zip(&tuple) {
            let offset = match coord {
                OrbitCoord::Shifted { offset } => *offset,
                _ => unreachable!(),
            };
            // naive oracle: apply the unit shift |p(n)| times
            let direct = genpoly_core::eval::eval_nearest_int(p, n, &prec).unwrap();
            let mut walked = 0i64;
            let steps: i64 = direct.to_string().parse().unwrap();
            for _ in 0..steps.abs() {
                walked += steps.signum();
            }
            assert_eq!(walked, offset);
            // and the symbol the coordinate shows at index 0 agrees
            assert_eq!(chacon_char(offset), chacon_char(walked));
        }
    }
}

#[test]
fn coverage_monotone_under_nested_windows() {
    use genpoly_core::dynamics::{density_coverage, DynConfig, System};
    let prec = Precision::default();
    let cfg = DynConfig::default();
    let polys = vec![parse("n^2").unwrap(), parse("n^2 + n").unwrap()];
    let report = density_coverage(
        &System::Chacon,
        &polys,
        2,
        (-4000, 4000),
        &[100, 400, 1600, 4000],
        &cfg,
        &prec,
    )
    .unwrap();
    assert!(report.curve.len() == 4);
    for w in report.curve.windows(2) {
        assert!(w[1].1 >= w[0].1, "coverage regressed: {:?}", report.curve);
    }
}
