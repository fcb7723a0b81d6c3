//! Punched Farey sequences.
//!
//! `PunchedFarey::new(k, l)` holds every irreducible fraction `n/m` with
//! `m <= k` and `n <= l`, in ascending order from `0/1` to `1/0`. The
//! sequence partitions `(0, inf)` into intervals that organize the
//! minimum-distance search in [`crate::design`].
//!
//! All comparisons are exact: fractions use `u64` parts and compare by
//! cross-multiplication in `u128`, so nothing here can overflow.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `k * l` accepted by [`PunchedFarey::new`].
///
/// The sequence has roughly `0.6 * k * l` terms, so this caps memory near
/// 160 MiB.
pub const MAX_ENUMERATION: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FareyError {
    #[error("fraction 0/0 is undefined")]
    BothZero,
    #[error("bounds must be positive (got K={k}, L={l})")]
    ZeroBound { k: u64, l: u64 },
    #[error("K*L = {product} exceeds the enumeration cap {cap}")]
    BoundTooLarge { product: u128, cap: u64 },
    #[error("property violation: {0}")]
    PropertyViolation(String),
}

/// Non-negative irreducible fraction; `1/0` stands for infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };
    pub const INFINITY: Fraction = Fraction { num: 1, den: 0 };

    /// Reduces `num/den` to lowest terms.
    pub fn new(num: u64, den: u64) -> Result<Self, FareyError> {
        if num == 0 && den == 0 {
            return Err(FareyError::BothZero);
        }
        let g = gcd(num, den);
        Ok(Fraction { num: num / g, den: den / g })
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn is_infinite(self) -> bool {
        self.den == 0
    }

    pub fn to_f64(self) -> f64 {
        if self.den == 0 {
            f64::INFINITY
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Exact comparison of a finite, non-negative `f64` against `self`.
    pub fn cmp_f64(self, x: f64) -> Ordering {
        cmp_f64_ratio(x, self.num, self.den).reverse()
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        cross_cmp(self.num, self.den, other.num, other.den)
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Compares `n1/m1` with `n2/m2` without requiring either to be reduced.
/// Denominators may be zero as long as the numerator is not.
pub fn cross_cmp(n1: u64, m1: u64, n2: u64, m2: u64) -> Ordering {
    (u128::from(n1) * u128::from(m2)).cmp(&(u128::from(n2) * u128::from(m1)))
}

/// Exact comparison of `x` with `num/den` for finite `x >= 0`.
///
/// `x` is a dyadic rational `mant * 2^exp`; the comparison is carried out on
/// integers, so the half-open interval convention in
/// [`PunchedFarey::locate`] is never blurred by rounding.
fn cmp_f64_ratio(x: f64, num: u64, den: u64) -> Ordering {
    debug_assert!(x.is_finite() && x >= 0.0);
    if den == 0 {
        return Ordering::Less;
    }
    if x == 0.0 {
        return 0u64.cmp(&num);
    }
    let (mant, exp) = decompose(x);
    // compare mant * 2^exp * den  vs  num
    let lhs = u128::from(mant) * u128::from(den);
    if exp >= 0 {
        let lhs_bits = 128 - lhs.leading_zeros();
        if lhs_bits + exp as u32 > 64 {
            return Ordering::Greater;
        }
        (lhs << exp).cmp(&u128::from(num))
    } else {
        let shift = (-exp) as u32;
        let rhs = u128::from(num);
        if rhs == 0 {
            return Ordering::Greater;
        }
        let rhs_bits = 128 - rhs.leading_zeros();
        if rhs_bits + shift > 127 {
            return Ordering::Less;
        }
        lhs.cmp(&(rhs << shift))
    }
}

fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    }
}

/// Mediant `(n1+n2)/(m1+m2)`.
///
/// Adjacent terms of a punched Farey sequence have unit determinant, so their
/// mediant is already irreducible and is returned as is; any other pair is
/// reduced.
pub fn mediant(a: Fraction, b: Fraction) -> Fraction {
    let num = a.num + b.num;
    let den = a.den + b.den;
    if determinant(a, b) == 1 {
        Fraction { num, den }
    } else {
        Fraction::new(num, den).expect("mediant of two fractions is never 0/0")
    }
}

/// `m1*n2 - m2*n1` for `a = n1/m1`, `b = n2/m2`.
pub fn determinant(a: Fraction, b: Fraction) -> i128 {
    i128::from(a.den) * i128::from(b.num) - i128::from(b.den) * i128::from(a.num)
}

/// The ascending sequence of irreducible `n/m` with `m <= K`, `n <= L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PunchedFarey {
    max_den: u64,
    max_num: u64,
    terms: Vec<Fraction>,
}

impl PunchedFarey {
    /// Enumerates `P_K^L` by generating all coprime pairs and sorting.
    pub fn new(max_den: u64, max_num: u64) -> Result<Self, FareyError> {
        if max_den == 0 || max_num == 0 {
            return Err(FareyError::ZeroBound { k: max_den, l: max_num });
        }
        let product = u128::from(max_den) * u128::from(max_num);
        if product > u128::from(MAX_ENUMERATION) {
            return Err(FareyError::BoundTooLarge { product, cap: MAX_ENUMERATION });
        }
        let mut terms = vec![Fraction::ZERO, Fraction::INFINITY];
        for m in 1..=max_den {
            for n in 1..=max_num {
                if gcd(n, m) == 1 {
                    terms.push(Fraction { num: n, den: m });
                }
            }
        }
        terms.sort_unstable();
        Ok(PunchedFarey { max_den, max_num, terms })
    }

    /// Denominator bound `K`.
    pub fn max_den(&self) -> u64 {
        self.max_den
    }

    /// Numerator bound `L`.
    pub fn max_num(&self) -> u64 {
        self.max_num
    }

    pub fn terms(&self) -> &[Fraction] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of Farey intervals, `len() - 1`.
    pub fn interval_count(&self) -> usize {
        self.terms.len() - 1
    }

    /// Endpoints of interval `k`.
    pub fn interval(&self, k: usize) -> (Fraction, Fraction) {
        (self.terms[k], self.terms[k + 1])
    }

    /// Adjacent pairs in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = (Fraction, Fraction)> + '_ {
        self.terms.windows(2).map(|w| (w[0], w[1]))
    }

    /// Index `k` with `terms[k] < ratio <= terms[k+1]`.
    ///
    /// # Panics
    ///
    /// Panics unless `ratio` is finite and strictly positive.
    pub fn locate(&self, ratio: f64) -> usize {
        assert!(ratio.is_finite() && ratio > 0.0, "ratio must be finite and positive, got {ratio}");
        // first index whose term is >= ratio; terms[0] = 0 < ratio and the
        // last term is infinite, so the result lies in 1..len
        let upper = self.terms.partition_point(|t| t.cmp_f64(ratio) == Ordering::Less);
        upper - 1
    }

    /// [`locate`](Self::locate) for an exact rational ratio.
    pub fn locate_exact(&self, ratio: Fraction) -> usize {
        assert!(ratio.num > 0 && ratio.den > 0, "ratio must be finite and positive");
        self.terms.partition_point(|t| *t < ratio) - 1
    }

    /// Next term after `f` computed from the unit-determinant recurrence,
    /// independently of the sorted enumeration. `None` for `1/0`.
    pub fn successor(&self, f: Fraction) -> Option<Fraction> {
        if f.den == 0 {
            return None;
        }
        let (m1, n1) = (i128::from(f.den), i128::from(f.num));
        let (k, l) = (i128::from(self.max_den), i128::from(self.max_num));
        // particular solution of m1*n - m*n1 = 1
        let (g, x, y) = ext_gcd(m1, n1);
        debug_assert_eq!(g, 1);
        // m1*x + n1*y = 1  =>  n = x, m = -y
        let (n0, m0) = (x, -y);
        // general solution (m0 + r*m1, n0 + r*n1); both grow with r, and the
        // successor is the one with the largest admissible m
        let mut r = (k - m0).div_euclid(m1);
        if n1 > 0 {
            r = r.min((l - n0).div_euclid(n1));
        }
        let m = m0 + r * m1;
        let n = n0 + r * n1;
        Some(Fraction { num: n as u64, den: m as u64 })
    }

    /// Checks unit determinant, the sum laws and boundary pairs of adjacent
    /// terms, the mediant identity for triples, the cross-mediant
    /// inequalities for quadruples around each adjacent pair, and the
    /// recurrence successor of every term.
    pub fn verify(&self) -> Result<PropertyReport, FareyError> {
        let (k, l) = (self.max_den, self.max_num);
        let terms = &self.terms;
        let fail = |msg: String| Err(FareyError::PropertyViolation(msg));

        if terms.first() != Some(&Fraction::ZERO) || terms.last() != Some(&Fraction::INFINITY) {
            return fail("sequence must run from 0/1 to 1/0".into());
        }
        let mut report = PropertyReport::default();
        for (a, b) in self.pairs() {
            report.pairs += 1;
            if a >= b {
                return fail(format!("{a} !< {b}"));
            }
            if a.num > l || a.den > k || gcd(a.num, a.den) != 1 {
                return fail(format!("{a} outside P_{k}^{l}"));
            }
            if mediant(a, b).cmp(&a) != Ordering::Greater || mediant(a, b).cmp(&b) != Ordering::Less {
                return fail(format!("mediant of ({a}, {b}) not interior"));
            }
            if determinant(a, b) != 1 {
                return fail(format!("det({a}, {b}) = {}", determinant(a, b)));
            }
            let (nsum, msum) = (a.num + b.num, a.den + b.den);
            if nsum <= l && msum <= k {
                return fail(format!("({a}, {b}) has n1+n2 <= L and m1+m2 <= K"));
            }
            let left_edge = a == Fraction::ZERO && b == Fraction { num: 1, den: k };
            let right_edge = a == Fraction { num: l, den: 1 } && b == Fraction::INFINITY;
            if nsum == 0 || (nsum == 1) != left_edge {
                return fail(format!("({a}, {b}) breaks the n1+n2 >= 1 boundary law"));
            }
            if msum == 0 || (msum == 1) != right_edge {
                return fail(format!("({a}, {b}) breaks the m1+m2 >= 1 boundary law"));
            }
            if self.successor(a) != Some(b) {
                return fail(format!("recurrence gives {:?} after {a}, sequence has {b}", self.successor(a)));
            }
        }
        for w in terms.windows(3) {
            report.triples += 1;
            let (a, b, c) = (w[0], w[1], w[2]);
            let med = (a.num + c.num, a.den + c.den);
            if cross_cmp(b.num, b.den, med.0, med.1) != Ordering::Equal {
                return fail(format!("{b} is not the mediant of {a} and {c}"));
            }
        }
        for j in 1..terms.len().saturating_sub(2) {
            let (f2, f3) = (terms[j], terms[j + 1]);
            for f1 in &terms[..j] {
                // (n1+n3)/(m1+m3) <= n2/m2
                if cross_cmp(f1.num + f3.num, f1.den + f3.den, f2.num, f2.den) == Ordering::Greater {
                    return fail(format!("cross-mediant ({f1}, {f3}) exceeds {f2}"));
                }
                for f4 in &terms[j + 2..] {
                    report.quadruples += 1;
                    // n3/m3 <= (n2+n4)/(m2+m4)
                    if cross_cmp(f3.num, f3.den, f2.num + f4.num, f2.den + f4.den) == Ordering::Greater {
                        return fail(format!("{f3} exceeds cross-mediant ({f2}, {f4})"));
                    }
                }
            }
        }
        Ok(report)
    }

    /// One `num,den` line per term.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("num,den\n");
        for t in &self.terms {
            out.push_str(&format!("{},{}\n", t.num, t.den));
        }
        out
    }

    /// Space-separated `n/m` terms.
    pub fn to_compact(&self) -> String {
        self.terms.iter().map(Fraction::to_string).collect::<Vec<_>>().join(" ")
    }
}

/// Counts of the adjacent pairs, triples and quadruples checked by
/// [`PunchedFarey::verify`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PropertyReport {
    pub pairs: usize,
    pub triples: usize,
    pub quadruples: usize,
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fr(n: u64, m: u64) -> Fraction {
        Fraction::new(n, m).unwrap()
    }

    #[test]
    fn make_fraction_reduces() {
        assert_eq!(fr(2, 4), Fraction { num: 1, den: 2 });
        assert_eq!(fr(1, 0), Fraction::INFINITY);
        assert_eq!(fr(0, 7), Fraction::ZERO);
        assert_eq!(fr(6, 0), Fraction::INFINITY);
        assert_eq!(Fraction::new(0, 0), Err(FareyError::BothZero));
    }

    #[test]
    fn ordering_treats_one_over_zero_as_infinite() {
        assert!(fr(1, 0) > fr(1_000_000, 1));
        assert!(fr(0, 1) < fr(1, 1_000_000));
        assert!(fr(2, 5) < fr(1, 2));
        assert_eq!(fr(u64::MAX, 1).cmp(&fr(u64::MAX - 1, 1)), Ordering::Greater);
    }

    #[test]
    fn example_p52() {
        let seq = PunchedFarey::new(5, 2).unwrap();
        assert_eq!(seq.to_compact(), "0/1 1/5 1/4 1/3 2/5 1/2 2/3 1/1 2/1 1/0");
    }

    #[test]
    fn example_s5() {
        let seq = PunchedFarey::new(5, 5).unwrap();
        assert_eq!(seq.len(), 21);
        assert_eq!(
            seq.to_compact(),
            "0/1 1/5 1/4 1/3 2/5 1/2 3/5 2/3 3/4 4/5 1/1 5/4 4/3 3/2 5/3 2/1 5/2 3/1 4/1 5/1 1/0"
        );
    }

    #[test]
    fn smallest_sequence() {
        let seq = PunchedFarey::new(1, 1).unwrap();
        assert_eq!(seq.to_compact(), "0/1 1/1 1/0");
        assert!(seq.verify().is_ok());
    }

    #[test]
    fn bounds_rejected() {
        assert!(matches!(PunchedFarey::new(0, 3), Err(FareyError::ZeroBound { .. })));
        assert!(matches!(PunchedFarey::new(1 << 13, 1 << 12), Err(FareyError::BoundTooLarge { .. })));
    }

    #[test]
    fn mediant_examples() {
        assert_eq!(mediant(fr(0, 1), fr(1, 5)), Fraction { num: 1, den: 6 });
        assert_eq!(mediant(fr(1, 2), fr(2, 3)), Fraction { num: 3, den: 5 });
        // non-adjacent pair: 1/3 and 1/1 -> 2/4 reduced
        assert_eq!(mediant(fr(1, 3), fr(1, 1)), Fraction { num: 1, den: 2 });
        let seq = PunchedFarey::new(5, 2).unwrap();
        for (a, b) in seq.pairs() {
            let m = mediant(a, b);
            assert!(a < m && m < b, "{a} {m} {b}");
        }
    }

    #[test]
    fn left_boundary_determinant() {
        let seq = PunchedFarey::new(5, 2).unwrap();
        let (a, b) = seq.interval(0);
        assert_eq!((a, b), (fr(0, 1), fr(1, 5)));
        assert_eq!(determinant(a, b), 1);
    }

    #[test]
    fn locate_examples() {
        let seq = PunchedFarey::new(5, 2).unwrap();
        assert_eq!(seq.interval(seq.locate(0.45)), (fr(2, 5), fr(1, 2)));
        assert_eq!(seq.interval(seq.locate(0.5)), (fr(2, 5), fr(1, 2)));
        assert_eq!(seq.interval(seq.locate(3.0)), (fr(2, 1), fr(1, 0)));
        assert_eq!(seq.interval(seq.locate(1e-300)), (fr(0, 1), fr(1, 5)));
        assert_eq!(seq.interval(seq.locate(1e300)), (fr(2, 1), fr(1, 0)));
        assert_eq!(seq.locate_exact(fr(1, 2)), seq.locate(0.5));
        assert_eq!(seq.locate_exact(fr(1, 5)), 0);
    }

    #[test]
    fn f64_comparison_is_exact() {
        // 0.1 as f64 is slightly above 1/10
        assert_eq!(fr(1, 10).cmp_f64(0.1), Ordering::Less);
        assert_eq!(fr(1, 4).cmp_f64(0.25), Ordering::Equal);
        assert_eq!(fr(1, 3).cmp_f64(1.0 / 3.0), Ordering::Greater);
        assert_eq!(fr(1, 0).cmp_f64(f64::MAX), Ordering::Greater);
        assert_eq!(fr(0, 1).cmp_f64(f64::MIN_POSITIVE), Ordering::Less);
        assert_eq!(fr(u64::MAX, 1).cmp_f64(1e30), Ordering::Less);
    }

    #[test]
    fn successor_matches_enumeration_small() {
        let seq = PunchedFarey::new(7, 3).unwrap();
        for (a, b) in seq.pairs() {
            assert_eq!(seq.successor(a), Some(b));
        }
        assert_eq!(seq.successor(Fraction::INFINITY), None);
    }

    #[test]
    fn csv_output() {
        let seq = PunchedFarey::new(1, 1).unwrap();
        assert_eq!(seq.to_csv(), "num,den\n0,1\n1,1\n1,0\n");
    }
}
