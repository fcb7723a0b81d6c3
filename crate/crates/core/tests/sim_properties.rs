mod common;

use common::q_function;
use noma_farey::design::{design_weights, Channel, ConstellationPair, PowerBudget};
use noma_farey::sim::{
    curves_to_csv, detect_ml_joint, detect_noma, modulate_noma, noise_variance, noma_candidates, oma_symbol,
    sample_rayleigh, simulate_ber, BerCurve, Link, NomaSymbols, Scheme, SimConfig,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(schemes: Vec<Scheme>) -> SimConfig {
    SimConfig { snr_db: vec![5.0, 15.0, 25.0], symbols_per_point: 40_000, schemes, m1: 2, m2: 4, ..Default::default() }
}

fn snr_for(curves: &[BerCurve], scheme: Scheme, target: f64) -> f64 {
    curves
        .iter()
        .find(|c| c.scheme == scheme)
        .and_then(|c| c.snr_at_ber(target))
        .unwrap_or_else(|| panic!("{scheme} never reaches {target}"))
}

#[test]
fn replay_is_bit_identical_and_thread_independent() {
    let cfg = small(Scheme::ALL.to_vec());
    let a = curves_to_csv(&simulate_ber(&cfg).unwrap());
    let b = curves_to_csv(&simulate_ber(&cfg).unwrap());
    let serial = curves_to_csv(&simulate_ber(&SimConfig { parallel: false, ..cfg.clone() }).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, serial);
    let other = curves_to_csv(&simulate_ber(&SimConfig { seed: 99, ..cfg }).unwrap());
    assert_ne!(a, other);
}

#[test]
fn ber_is_bounded_and_falls_with_snr() {
    let cfg = SimConfig {
        snr_db: (0..=6).map(|i| 5.0 * f64::from(i)).collect(),
        symbols_per_point: 50_000,
        m1: 4,
        m2: 4,
        ..Default::default()
    };
    for c in simulate_ber(&cfg).unwrap() {
        for p in &c.points {
            assert!(p.ber <= 0.5, "{} at {} dB: {}", c.scheme, p.snr_db, p.ber);
            let per_use = if matches!(c.scheme, Scheme::Tdma | Scheme::Fdma) { 16 } else { 8 };
            assert_eq!(p.bits, 50_000 * per_use);
        }
        for w in c.points.windows(2) {
            assert!(
                w[1].ber <= w[0].ber + w[0].ci_halfwidth + w[1].ci_halfwidth,
                "{} rises between {} and {} dB",
                c.scheme,
                w[0].snr_db,
                w[1].snr_db
            );
        }
    }
}

#[test]
fn transmit_power_stays_within_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 200_000;
    for (m1, m2, p1, p2) in [(2, 2, 1.0, 1.0), (4, 4, 1.0, 1.0), (4, 2, 0.5, 2.0), (8, 4, 3.0, 0.2)] {
        let sizes = ConstellationPair::new(m1, m2).unwrap();
        let power = PowerBudget::new(p1, p2).unwrap();
        let link = Link::new(sizes, power);
        let (mut noma, mut oma, mut cr) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        for _ in 0..n {
            let ch = Channel::new(sample_rayleigh(1.0, &mut rng), sample_rayleigh(0.1, &mut rng)).unwrap();
            let d = design_weights(&ch, &power, &sizes);
            let sym = NomaSymbols {
                s1: rng.random_range(0..m1),
                s1q: rng.random_range(0..m1),
                s2: rng.random_range(0..m2),
                s2q: rng.random_range(0..m2),
            };
            let (x1, x2) = modulate_noma(&sym, &d, &ch, &sizes);
            noma[0] += x1.norm_sqr();
            noma[1] += x2.norm_sqr();
            for (k, (m, p, h)) in [(m1, p1, ch.h1()), (m2, p2, ch.h2())].into_iter().enumerate() {
                let q = m * m;
                oma[k] += oma_symbol(rng.random_range(0..q), rng.random_range(0..q), q, p, h).norm_sqr();
                let ring = link.psk_alphabet(k as u8 + 1);
                cr[k] += ring[rng.random_range(0..ring.len())].norm_sqr();
            }
        }
        for (k, budget) in [p1, p2].into_iter().enumerate() {
            for (name, acc) in [("noma", noma), ("oma", oma), ("cr_noma", cr)] {
                let avg = acc[k] / n as f64;
                assert!(avg <= budget * 1.01, "{name} user {}: {avg} > {budget}", k + 1);
            }
        }
    }
}

#[test]
fn noise_free_noma_decodes_without_errors() {
    let cfg = SimConfig {
        snr_db: vec![200.0],
        symbols_per_point: 20_000,
        m1: 8,
        m2: 4,
        schemes: Scheme::ALL.to_vec(),
        ..Default::default()
    };
    for c in simulate_ber(&cfg).unwrap() {
        assert_eq!(c.points[0].errors, 0, "{}", c.scheme);
    }
}

#[test]
fn symbol_errors_respect_the_union_bound() {
    let h = [[0.8, 0.3], [-0.2, 0.45]];
    let ch = Channel::new(Complex64::new(h[0][0], h[0][1]), Complex64::new(h[1][0], h[1][1])).unwrap();
    let sizes = ConstellationPair::new(4, 4).unwrap();
    let d = design_weights(&ch, &PowerBudget::unit(), &sizes).d_noma;
    for ratio in [3.5, 8.0] {
        // d / sigma = ratio with sigma^2 = 1 / (2 rho)
        let rho = ratio * ratio / (2.0 * d * d);
        let cfg = SimConfig {
            snr_db: vec![10.0 * rho.log10()],
            symbols_per_point: 200_000,
            schemes: vec![Scheme::Noma],
            fixed_channel: Some(h),
            ..Default::default()
        };
        let p = simulate_ber(&cfg).unwrap()[0].points[0];
        let ser = p.symbol_errors as f64 / p.symbols as f64;
        let bound = 4.0 * q_function(ratio) * 1.5;
        assert!(ser <= bound, "d/sigma={ratio}: SER {ser} > {bound}");
        if ratio < 4.0 {
            assert!(p.symbol_errors > 0);
        }
    }
}

#[test]
fn near_far_gains_are_larger_than_equal_gains() {
    let run = |var2: f64| {
        let cfg = SimConfig {
            snr_db: (0..=16).map(|i| 10.0 + 2.5 * f64::from(i)).collect(),
            symbols_per_point: 200_000,
            schemes: vec![Scheme::Noma, Scheme::Tdma, Scheme::Fdma],
            m1: 4,
            m2: 4,
            fading_var2: var2,
            ..Default::default()
        };
        simulate_ber(&cfg).unwrap()
    };
    let near_far = run(1.0 / 64.0);
    // at high SNR NOMA sits below both orthogonal curves
    for i in 8..13 {
        let (n, t, f) = (near_far[0].points[i], near_far[1].points[i], near_far[2].points[i]);
        assert!(n.ber < t.ber && n.ber < f.ber, "at {} dB", n.snr_db);
    }
    let equal = run(1.0);
    let gain = |c: &[BerCurve]| snr_for(c, Scheme::Fdma, 1e-2) - snr_for(c, Scheme::Noma, 1e-2);
    let (g_nf, g_eq) = (gain(&near_far), gain(&equal));
    assert!(g_nf > g_eq, "near-far gain {g_nf:.2} dB vs equal-gain {g_eq:.2} dB");
}

#[test]
fn block_fading_changes_draws_but_stays_deterministic() {
    let fast = small(vec![Scheme::Noma]);
    let block = SimConfig { block_len: 64, ..fast.clone() };
    let a = simulate_ber(&block).unwrap();
    assert_eq!(a, simulate_ber(&block).unwrap());
    assert_ne!(a, simulate_ber(&fast).unwrap());
}

#[test]
fn config_rejects_unknown_keys() {
    let ok: SimConfig = serde_json::from_str(r#"{"m1": 2, "snr_db": [10.0], "schemes": ["tdma"]}"#).unwrap();
    assert_eq!((ok.m1, ok.m2), (2, 4));
    assert!(serde_json::from_str::<SimConfig>(r#"{"m3": 2}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantizer_agrees_with_joint_ml(
        m1 in prop::sample::select(vec![2u32, 4, 8]),
        m2 in prop::sample::select(vec![2u32, 4, 8]),
        a2 in (-2.0f64..2.0).prop_map(|e| 10f64.powf(e)),
        t1 in -3.1f64..3.1, t2 in -3.1f64..3.1,
        snr in 0.0f64..30.0, seed in any::<u64>(),
    ) {
        let ch = Channel::new(Complex64::from_polar(1.0, t1), Complex64::from_polar(a2, t2)).unwrap();
        let sizes = ConstellationPair::new(m1, m2).unwrap();
        let d = design_weights(&ch, &PowerBudget::unit(), &sizes);
        let cands = noma_candidates(&d, &ch, &sizes);
        let pts: Vec<Complex64> = cands.iter().map(|c| c.1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let sent = cands[rng.random_range(0..cands.len())].1;
            let z = sent + sample_rayleigh(noise_variance(snr), &mut rng);
            prop_assert_eq!(detect_noma(z, &d, &sizes), cands[detect_ml_joint(z, &pts)].0);
        }
    }
}
