//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's algorithms; each oracle recomputes
//! its quantity from first principles.

#![allow(dead_code)]

use std::cmp::Ordering;

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Compares `n1/m1` with `n2/m2`, treating `x/0` as infinity.
pub fn frac_cmp(a: (u64, u64), b: (u64, u64)) -> Ordering {
    (u128::from(a.0) * u128::from(b.1)).cmp(&(u128::from(b.0) * u128::from(a.1)))
}

/// Generate-and-sort reference for the punched sequence, as `(num, den)`.
pub fn farey_oracle(max_den: u64, max_num: u64) -> Vec<(u64, u64)> {
    let mut v = vec![(0, 1), (1, 0)];
    for m in 1..=max_den {
        for n in 1..=max_num {
            if gcd(n, m) == 1 {
                v.push((n, m));
            }
        }
    }
    v.sort_by(|&a, &b| frac_cmp(a, b));
    v.dedup_by(|a, b| frac_cmp(*a, *b) == Ordering::Equal);
    v
}

pub fn totient(n: u64) -> u64 {
    (1..=n).filter(|&k| gcd(k, n) == 1).count() as u64
}

/// `sqrt(3P / (2(M^2-1)))`, the largest weight meeting the power budget.
pub fn full_weight(p: f64, m: u32) -> f64 {
    let m = f64::from(m);
    (3.0 * p / (2.0 * (m * m - 1.0))).sqrt()
}

/// Half the smallest gap between the one-branch sum points produced by two
/// different symbol pairs, scanning every pair of symbol pairs.
pub fn min_half_distance_symbols(x: f64, y: f64, m1: u32, m2: u32) -> f64 {
    let level = |i: u32, m: u32| 2.0 * f64::from(i) - f64::from(m - 1);
    let mut pts = Vec::with_capacity((m1 * m2) as usize);
    for i in 0..m1 {
        for j in 0..m2 {
            pts.push(x * level(i, m1) + y * level(j, m2));
        }
    }
    let mut best = f64::INFINITY;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            best = best.min((pts[a] - pts[b]).abs());
        }
    }
    best / 2.0
}

/// Whether some nonzero half-difference pair brings the distance to `t` or
/// below. Exits at the first such pair.
pub fn any_pair_within(x: f64, y: f64, m1: u32, m2: u32, t: f64) -> bool {
    let (nmax, mmax) = (i64::from(m1) - 1, i64::from(m2) - 1);
    for m in 0..=mmax {
        let lo = if m == 0 { 1 } else { -nmax };
        for n in lo..=nmax {
            if (x * n as f64 - y * m as f64).abs() <= t {
                return true;
            }
        }
    }
    false
}

/// Best min distance over single Farey intervals, maximized over the
/// intervals of the reference sequence with denominators up to `M2-1` and
/// numerators up to `M1-1`.
pub fn interval_max(h1t: f64, h2t: f64, m1: u32, m2: u32) -> f64 {
    let seq = farey_oracle(u64::from(m2 - 1), u64::from(m1 - 1));
    seq.windows(2)
        .map(|w| {
            let a = (w[0].1 + w[1].1) as f64;
            let b = (w[0].0 + w[1].0) as f64;
            (h2t / b).min(h1t / a)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `3 P1 |h1|^2 / (2 d^2)` evaluated with `P1 = |h1| = 1`, for the rate
/// objective at a given split.
pub fn beta_from_distance(d: f64) -> f64 {
    1.5 / (d * d)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Standard normal tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}
