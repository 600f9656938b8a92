use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use proptest::prelude::*;

use skewrec::cocycle::{convergent_sum, ergodic_sums, rotate};
use skewrec::iet::{rauzy_step, Ball, Permutation};
use skewrec::recurrence::divergence_series;
use skewrec::staircase::{level_histograms, level_lengths};
use skewrec::{CirclePoint, ContinuedFraction, Iet, Letter, OmegaWeight, StaircaseParams, StepCocycle};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convergents_have_unit_determinant(digits in prop::collection::vec(1u64..50, 2..30)) {
        let cf = ContinuedFraction::from_digits(&digits).unwrap();
        let cs = cf.convergents(digits.len()).unwrap();
        for w in cs.windows(2) {
            let det = &w[1].p * &w[0].q - &w[0].p * &w[1].q;
            prop_assert_eq!(det.abs(), BigInt::one());
        }
    }

    #[test]
    fn rotation_is_additive(m in 0u64..1 << 20, a in -500i64..500, b in -500i64..500, d in 1u64..6) {
        let cf = ContinuedFraction::constant(d).unwrap();
        let x = CirclePoint::dyadic(m, 20);
        let lhs = rotate(&rotate(&x, a, &cf).unwrap(), b, &cf).unwrap();
        prop_assert_eq!(lhs, rotate(&x, a + b, &cf).unwrap());
    }

    #[test]
    fn sums_satisfy_cocycle_identity(m in 0u64..1 << 20, split in 1usize..200, d in 1u64..6) {
        let cf = ContinuedFraction::constant(d).unwrap();
        let f = StepCocycle::staircase();
        let x = CirclePoint::dyadic(m, 20);
        let whole = ergodic_sums(&f, &x, 400, &cf).unwrap();
        let y = rotate(&x, split as i64, &cf).unwrap();
        let tail = ergodic_sums(&f, &y, 400 - split, &cf).unwrap();
        for n in 0..=400 - split {
            prop_assert_eq!(whole.sums[split + n], whole.sums[split] + tail.sums[n]);
        }
    }

    #[test]
    fn convergent_sums_match_walked_sums(
        digits in prop::collection::vec(1u64..8, 12),
        m in 0u64..1 << 30,
        k in 1usize..9,
    ) {
        let cf = ContinuedFraction::periodic(&digits, &[1]).unwrap();
        let f = StepCocycle::staircase();
        let x = CirclePoint::dyadic(m, 30);
        let q = cf.q(k).unwrap().to_usize().unwrap();
        prop_assume!(q <= 20_000);
        let walked = ergodic_sums(&f, &x, q, &cf).unwrap().sums[q];
        prop_assert_eq!(convergent_sum(&f, &x, k, &cf).unwrap(), BigInt::from(walked));
    }

    #[test]
    fn histograms_count_every_letter(pairs in prop::collection::vec((1u64..4, 1u64..4), 1..3)) {
        let params = StaircaseParams::new(pairs.clone()).unwrap();
        let n = pairs.len();
        let lens = level_lengths(&params, n).unwrap();
        let hist = level_histograms(&params, n).unwrap();
        for l in [Letter::A, Letter::B, Letter::C] {
            prop_assert_eq!(hist.word(l).total(), lens[l.index()].clone());
        }
    }

    #[test]
    fn rauzy_step_inverts_through_its_matrix(raw in prop::collection::vec(1i64..1000, 3..6)) {
        let m = raw.len();
        let total: i64 = raw.iter().sum();
        let lengths: Vec<BigRational> = raw.iter().map(|&l| rat(l, total)).collect();
        let iet = Iet::from_rationals(Permutation::rotation_class(m), &lengths, 128).unwrap();
        let (last_top, last_bottom) = {
            let p = iet.permutation();
            (p.top[m - 1], p.bottom[m - 1])
        };
        prop_assume!(raw[last_top] != raw[last_bottom]);
        let (next, _, e) = rauzy_step(&iet).unwrap();
        let new = next.lengths_f64();
        let back: Vec<f64> = (0..m).map(|i| (0..m).map(|j| e[(i, j)] as f64 * new[j]).sum()).collect();
        let scale = back.iter().sum::<f64>();
        for (b, l) in back.iter().zip(&raw) {
            prop_assert!((b / scale - *l as f64 / total as f64).abs() < 1e-12);
        }
        prop_assert!((new.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balls_enclose_exact_arithmetic(a in -1000i64..1000, b in 1i64..1000, c in 1i64..1000, d in 1i64..1000) {
        let x = rat(a, b);
        let y = rat(c, d);
        let bx = Ball::from_rational(&x, 80);
        let by = Ball::from_rational(&y, 80);
        prop_assert!(bx.add(&by).contains(&(&x + &y)));
        prop_assert!(bx.sub(&by).contains(&(&x - &y)));
        prop_assert!(bx.div(&by).unwrap().contains(&(&x / &y)));
        prop_assert!(bx.scale(7).contains(&(x * BigRational::from_integer(7.into()))));
    }

    #[test]
    fn divergence_partials_are_monotone(rows in prop::collection::vec((1.0f64..1e6, 1.0f64..1e3), 1..40)) {
        let ns: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let rhos: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let w = OmegaWeight::harmonic();
        let partial = divergence_series(&ns, &rhos, &w, ns.len()).unwrap();
        let direct: f64 = ns.iter().zip(&rhos).map(|(n, r)| w.eval(*n) * n / r).sum();
        prop_assert!(partial.windows(2).all(|p| p[1] >= p[0]));
        prop_assert!((partial.last().unwrap() - direct).abs() <= 1e-9 * direct.max(1.0));
    }
}

#[test]
fn staircase_lengths_grow_with_r() {
    let small = StaircaseParams::new(vec![(1u64, 1)]).unwrap();
    let big = StaircaseParams::new(vec![(BigUint::from(5u32), 1)]).unwrap();
    let a = &level_lengths(&small, 1).unwrap()[Letter::A.index()];
    let b = &level_lengths(&big, 1).unwrap()[Letter::A.index()];
    assert!(b > a);
}
