mod common;

use std::cmp::Ordering;

use common::{farey_oracle, frac_cmp, totient};
use noma_farey::farey::{determinant, mediant, FareyError, Fraction, PunchedFarey};
use proptest::prelude::*;

fn as_pairs(seq: &PunchedFarey) -> Vec<(u64, u64)> {
    seq.terms().iter().map(|f| (f.num(), f.den())).collect()
}

#[test]
fn classical_farey_prefix_and_totient_count() {
    for k in 1..=40u64 {
        let seq = PunchedFarey::new(k, k).unwrap();
        let prefix: Vec<_> = as_pairs(&seq).into_iter().take_while(|&(n, m)| m > 0 && n <= m).collect();
        let want = 1 + (1..=k).map(totient).sum::<u64>();
        assert_eq!(prefix.len() as u64, want, "K={k}");
        assert_eq!(prefix.last(), Some(&(1, 1)));
        // F_K membership, directly
        for &(n, m) in &prefix {
            assert!(m <= k && n <= m && common::gcd(n, m) == 1);
        }
    }
}

#[test]
fn cardinality_formula() {
    for k in 1..=15u64 {
        for l in 1..=15u64 {
            let coprime =
                (1..=l).flat_map(|n| (1..=k).map(move |m| (n, m))).filter(|&(n, m)| common::gcd(n, m) == 1).count();
            assert_eq!(PunchedFarey::new(k, l).unwrap().len(), coprime + 2);
        }
    }
}

#[test]
fn rejects_bad_bounds() {
    assert!(matches!(PunchedFarey::new(0, 3), Err(FareyError::ZeroBound { .. })));
    assert!(matches!(PunchedFarey::new(3, 0), Err(FareyError::ZeroBound { .. })));
    assert!(matches!(PunchedFarey::new(1 << 20, 1 << 20), Err(FareyError::BoundTooLarge { .. })));
    assert!(matches!(Fraction::new(0, 0), Err(FareyError::BothZero)));
}

#[test]
fn large_sequence_verifies() {
    let seq = PunchedFarey::new(63, 63).unwrap();
    assert_eq!(as_pairs(&seq), farey_oracle(63, 63));
    for (a, b) in seq.pairs() {
        assert_eq!(determinant(a, b), 1);
        assert_eq!(seq.successor(a), Some(b));
    }
}

proptest! {
    #[test]
    fn matches_generate_and_sort(k in 1u64..60, l in 1u64..60) {
        let seq = PunchedFarey::new(k, l).unwrap();
        prop_assert_eq!(as_pairs(&seq), farey_oracle(k, l));
    }

    #[test]
    fn reciprocal_symmetry(k in 1u64..40, l in 1u64..40) {
        let a = as_pairs(&PunchedFarey::new(k, l).unwrap());
        let b: Vec<_> = as_pairs(&PunchedFarey::new(l, k).unwrap())
            .into_iter()
            .rev()
            .map(|(n, m)| (m, n))
            .collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn verify_passes(k in 1u64..20, l in 1u64..20) {
        let report = PunchedFarey::new(k, l).unwrap().verify().unwrap();
        prop_assert!(report.pairs >= 2);
    }

    #[test]
    fn locate_brackets_the_ratio(k in 1u64..30, l in 1u64..30, ratio in 1e-3f64..1e3) {
        let seq = PunchedFarey::new(k, l).unwrap();
        let i = seq.locate(ratio);
        let (lo, hi) = seq.interval(i);
        prop_assert_eq!(lo.cmp_f64(ratio), Ordering::Less);
        prop_assert_ne!(hi.cmp_f64(ratio), Ordering::Less);
    }

    #[test]
    fn locate_on_a_term_takes_the_left_interval(k in 1u64..30, l in 1u64..30, pick in 0usize..1000) {
        let seq = PunchedFarey::new(k, l).unwrap();
        // skip 0/1 and 1/0, which are not positive finite ratios
        let idx = 1 + pick % (seq.len() - 2);
        let t = seq.terms()[idx];
        prop_assert_eq!(seq.locate_exact(t), idx - 1);
    }

    #[test]
    fn adjacent_mediant_is_interior_and_reduced(k in 1u64..30, l in 1u64..30) {
        let seq = PunchedFarey::new(k, l).unwrap();
        for (a, b) in seq.pairs() {
            let med = mediant(a, b);
            prop_assert_eq!(med.num(), a.num() + b.num());
            prop_assert_eq!(med.den(), a.den() + b.den());
            prop_assert_eq!(common::gcd(med.num(), med.den()), 1);
            prop_assert!(a < med && med < b);
        }
    }

    #[test]
    fn fraction_order_matches_cross_multiplication(
        a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000,
    ) {
        prop_assume!(a + b > 0 && c + d > 0);
        let (x, y) = (Fraction::new(a, b).unwrap(), Fraction::new(c, d).unwrap());
        prop_assert_eq!(x.cmp(&y), frac_cmp((a, b), (c, d)));
        prop_assert_eq!(common::gcd(x.num(), x.den()), 1);
    }
}
