use proptest::prelude::*;
use rug::float::Constant;
use rug::{Float, Integer, Rational};

use harmzero::blocks::{sinpi_dyadic, cospi_dyadic};
use harmzero::coarse::{label_components, refines, Raster};
use harmzero::exactpoly::{build_pc, extract_b};
use harmzero::{build_construction, Block, Bounded, DyadicRational};

fn encloses(b: &Bounded, exact: &Float) -> bool {
    let gap = Float::with_val(exact.prec(), exact - &b.value).abs();
    gap <= b.err
}

/// Like `encloses`, with room for the reference value's own rounding.
fn encloses_near(b: &Bounded, reference: &Float, slack: &Float) -> bool {
    let gap = Float::with_val(reference.prec(), reference - &b.value).abs();
    gap <= Float::with_val(reference.prec(), &b.err + slack)
}

fn dyadic() -> impl Strategy<Value = DyadicRational> {
    (-1_000_000i64..1_000_000, 0u32..12).prop_map(|(n, e)| DyadicRational::new(Integer::from(n), e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reduction_mod_two_is_exact(q in dyadic(), m in -40i64..40) {
        let shifted = q.add(&DyadicRational::from_int(2 * m));
        let r = q.rem_two();
        prop_assert_eq!(r.clone(), shifted.rem_two());
        let rf = r.to_f64();
        prop_assert!((0.0..2.0).contains(&rf));
        let (s1, s2) = (sinpi_dyadic(&q, 128), sinpi_dyadic(&shifted, 128));
        prop_assert_eq!(&s1.value, &s2.value);
        let wide = Float::with_val(512, Constant::Pi) * q.to_float(512);
        let slack = Float::with_val(512, Float::i_exp(1, -480)) * (1.0 + q.to_f64().abs());
        prop_assert!(encloses_near(&s1, &Float::with_val(512, wide.sin_ref()), &slack));
        prop_assert!(encloses_near(&cospi_dyadic(&q, 128), &Float::with_val(512, wide.cos_ref()), &slack));
    }

    #[test]
    fn bounded_arithmetic_encloses(a in -10_000i64..10_000, da in 1u32..997, b in -10_000i64..10_000, db in 1u32..997) {
        let (ra, rb) = (Rational::from((a, da)), Rational::from((b, db)));
        let (x, y) = (Bounded::from_rational(53, &ra), Bounded::from_rational(53, &rb));
        let exact = |r: Rational| Float::with_val(1024, r);
        prop_assert!(encloses(&(&x + &y), &exact(Rational::from(&ra + &rb))));
        prop_assert!(encloses(&(&x - &y), &exact(Rational::from(&ra - &rb))));
        prop_assert!(encloses(&(&x * &y), &exact(Rational::from(&ra * &rb))));
        let small = Rational::from(&ra / 1000);
        let e = Bounded::from_rational(53, &small).exp().expect("finite");
        prop_assert!(encloses(&e, &exact(small).exp()));
    }

    #[test]
    fn block_coefficients_reproduce_pc(c in 2u32..16) {
        let b = extract_b(c).unwrap();
        prop_assert_eq!(b.reconstruct(), build_pc(c).unwrap());
        prop_assert!(b.within_binomial_bounds());
    }

    #[test]
    fn blocks_vanish_on_multiples_of_the_period(k in 1u32..6, c in 2u32..7, m in -20i64..20, y in -30.0f64..30.0) {
        let block = Block::for_level(k, c).unwrap();
        let x = DyadicRational::from_int(m << k);
        prop_assert!(block.eval_u(&x, &Float::with_val(128, y)).unwrap().is_exact_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn induction_invariants_hold(n in prop::collection::vec(1u32..4, 1..4), eps in 0.3f64..2.0, t in 0.0f64..1.0, s in 0.0f64..1.0) {
        let depth = n.len();
        let constr = build_construction(&n, &Float::with_val(128, eps), depth, 128).unwrap();
        for (audit, level) in constr.audit().iter().zip(constr.levels()) {
            prop_assert!(audit.passed());
            prop_assert!(level.amplitude <= level.cap);
            let tail = constr.tail_bound(level.k).unwrap();
            prop_assert!(tail.value < level.margin);
        }
        let top = f64::from(1u32 << depth);
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        let r_lo = Float::with_val(128, lo * top);
        let r_hi = Float::with_val(128, hi * top);
        prop_assert!(constr.modulus_bound(&r_lo) <= constr.modulus_bound(&r_hi));
        prop_assert!(constr.modulus_bound(&r_hi) <= constr.modulus_budget(&r_hi));
    }

    #[test]
    fn evaluation_error_covers_wider_precision(x in -3.9f64..3.9, y in -3.9f64..3.9) {
        prop_assume!(x.hypot(y) < 3.9);
        let constr = build_construction(&[1, 2], &Float::with_val(64, 0.5), 2, 96).unwrap();
        let wide = constr.with_precision(512).unwrap();
        let xd = DyadicRational::from_f64(x).unwrap();
        let g = constr.column(&xd).g_rounded(&Float::with_val(96, y)).unwrap();
        let reference = wide.column(&xd).g_rounded(&Float::with_val(512, y)).unwrap();
        prop_assert!(encloses(&g, &reference.value));
    }
}

fn synthetic_raster(resolution: usize, values: &[f64]) -> Raster {
    let side = 2 * resolution + 1;
    let rr = (resolution * resolution) as i64;
    let half = resolution as i64;
    let ln_abs = (0..side * side)
        .map(|idx| {
            let i = (idx % side) as i64 - half;
            let j = (idx / side) as i64 - half;
            if i * i + j * j <= rr {
                values[idx % values.len()]
            } else {
                f64::NAN
            }
        })
        .collect();
    Raster {
        r: 1.0,
        resolution,
        ln_abs,
        zero_nodes: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sublevel_labels_refine(values in prop::collection::vec(-30.0f64..0.0, 37..200), d1 in -30.0f64..0.0, d2 in -30.0f64..0.0) {
        let raster = synthetic_raster(16, &values);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let fine = label_components(&raster, &raster.mask(lo.exp()));
        let coarse = label_components(&raster, &raster.mask(hi.exp()));
        prop_assert!(refines(&fine, &coarse));
        let full = label_components(&raster, &raster.mask(1.0));
        prop_assert_eq!(full.count, 1);
    }
}
