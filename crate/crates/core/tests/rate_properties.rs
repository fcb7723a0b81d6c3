use noma_farey::rate::{
    asymptotic_rate_allocation, beta, candidates, enumerate_rate_allocations, exhaustive_rate_allocation,
    optimal_rate_allocation, AllocationSource, RateError, RateProblem,
};
use proptest::prelude::*;

fn problem() -> impl Strategy<Value = RateProblem> {
    (1u32..=10, -4.0f64..4.0).prop_map(|(k, e)| RateProblem::new(1 << k, 10f64.powf(e)).unwrap())
}

#[test]
fn worked_example_table() {
    let prob = RateProblem::new(8, 1.0).unwrap();
    assert_eq!(enumerate_rate_allocations(&prob), vec![(1, 63.0), (2, 48.0), (4, 48.0), (8, 63.0)]);
    assert_eq!(beta(2, &prob), Ok(48.0));
    assert_eq!(beta(3, &prob), Err(RateError::NotADivisor { m1: 3, m: 8 }));
    assert_eq!(beta(16, &prob), Err(RateError::NotADivisor { m1: 16, m: 8 }));
    let (g1, g2, _) = prob.breakpoints();
    assert!((g1 - 1.403).abs() < 1e-3 && (g2 - 2.828).abs() < 1e-3);
}

#[test]
fn weak_user_goes_silent_below_one_over_m_squared() {
    for k in 1..=8 {
        let m = 1u64 << k;
        let prob = RateProblem::new(m, 0.9 / (m * m) as f64).unwrap();
        assert_eq!(optimal_rate_allocation(&prob).m1, m);
        assert_eq!(asymptotic_rate_allocation(&prob).m1, m);
    }
}

proptest! {
    #[test]
    fn breakpoints_are_ordered(prob in problem()) {
        let (g1, g2, g3) = prob.breakpoints();
        let tol = 1e-12 * g3;
        prop_assert!(g1 <= g2 + tol && g2 <= g3 + tol, "{g1} {g2} {g3}");
        prop_assert!(g1 >= 1.0 - 1e-12 && g3 <= prob.m() as f64 + 1e-9);
    }

    #[test]
    fn beta_is_monotone_within_each_region(prob in problem()) {
        let (g1, g2, g3) = prob.breakpoints();
        let m = prob.m() as f64;
        // (lo, hi, decreasing)
        let regions = [(1.0, g1, true), (g1, g2, false), (g2, g3, true), (g3, m, false)];
        for (lo, hi, down) in regions {
            if hi - lo < 1e-9 {
                continue;
            }
            let n = 200;
            let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * (f64::from(i) + 0.5) / f64::from(n + 1)).collect();
            for w in xs.windows(2) {
                let (a, b) = (prob.beta_continuous(w[0]), prob.beta_continuous(w[1]));
                let slack = 1e-9 * a.abs().max(1.0);
                if down {
                    prop_assert!(b <= a + slack, "not decreasing on [{lo}, {hi}]");
                } else {
                    prop_assert!(b >= a - slack, "not increasing on [{lo}, {hi}]");
                }
            }
        }
    }

    #[test]
    fn theorem_matches_enumeration(prob in problem()) {
        let opt = optimal_rate_allocation(&prob);
        let ex = exhaustive_rate_allocation(&prob);
        prop_assert_eq!(opt, ex);
        prop_assert_eq!(opt.m1 * opt.m2, prob.m());
        prop_assert!(opt.beta > 0.0);
        for c in candidates(&prob).into_iter().flatten() {
            prop_assert!(c.is_power_of_two() && c <= prob.m());
        }
    }

    #[test]
    fn asymptotic_split_is_valid(prob in problem()) {
        let a = asymptotic_rate_allocation(&prob);
        prop_assert_eq!(a.source, AllocationSource::Asymptotic);
        prop_assert_eq!(a.m1 * a.m2, prob.m());
        prop_assert_eq!(a.beta, beta(a.m1, &prob).unwrap());
        prop_assert!(a.beta >= optimal_rate_allocation(&prob).beta);
    }
}
