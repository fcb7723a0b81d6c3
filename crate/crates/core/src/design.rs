//! Max-min Euclidean distance design of the two users' weighting
//! coefficients.
//!
//! Each QAM user is split into two identical PAM branches, so everything here
//! works on one real branch with the channel magnitudes `|h1|`, `|h2|`. The
//! phases are removed at the transmitters by pre-rotation (see
//! [`crate::sim`]).
//!
//! Normalized quantities carry a `_tilde` suffix: `w_tilde = w / w_max` lies
//! in `(0, 1]` and `h_tilde = w_max * |h|`, where `w_max = sqrt(3P/(2(M^2-1)))`
//! is the largest weight meeting the per-branch power budget `P/2`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::farey::{mediant, Fraction, PunchedFarey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("channel gains must be finite and non-zero (|h1|={h1}, |h2|={h2})")]
    InvalidChannel { h1: f64, h2: f64 },
    #[error("powers must be finite and positive (P1={p1}, P2={p2})")]
    InvalidPower { p1: f64, p2: f64 },
    #[error("constellation size {0} must be 1 or an even positive integer")]
    InvalidSize(u32),
    #[error("at least one user must transmit (M1 = M2 = 1)")]
    BothSilent,
    #[error("user {0} is silent (M = 1); the normalized channel is undefined")]
    SilentUser(u8),
    #[error("NOMA distance {d_noma} does not exceed TDMA distance {d_oma}")]
    SuperiorityViolated { d_noma: f64, d_oma: f64 },
}

/// Complex channel gains of the two users.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    h1: Complex64,
    h2: Complex64,
}

impl Channel {
    pub fn new(h1: Complex64, h2: Complex64) -> Result<Self, DesignError> {
        let (a1, a2) = (h1.norm(), h2.norm());
        if !(a1.is_finite() && a2.is_finite() && a1 > 0.0 && a2 > 0.0) {
            return Err(DesignError::InvalidChannel { h1: a1, h2: a2 });
        }
        Ok(Channel { h1, h2 })
    }

    /// Real positive gains (zero phase).
    pub fn from_magnitudes(h1: f64, h2: f64) -> Result<Self, DesignError> {
        Self::new(Complex64::new(h1, 0.0), Complex64::new(h2, 0.0))
    }

    pub fn h1(&self) -> Complex64 {
        self.h1
    }

    pub fn h2(&self) -> Complex64 {
        self.h2
    }

    pub fn abs1(&self) -> f64 {
        self.h1.norm()
    }

    pub fn abs2(&self) -> f64 {
        self.h2.norm()
    }

    /// Same phases, magnitudes multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self, DesignError> {
        Self::new(self.h1 * c, self.h2 * c)
    }
}

/// Average power limits `P1`, `P2` (split evenly over the two branches).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    p1: f64,
    p2: f64,
}

impl PowerBudget {
    pub fn new(p1: f64, p2: f64) -> Result<Self, DesignError> {
        if !(p1.is_finite() && p2.is_finite() && p1 > 0.0 && p2 > 0.0) {
            return Err(DesignError::InvalidPower { p1, p2 });
        }
        Ok(PowerBudget { p1, p2 })
    }

    pub fn unit() -> Self {
        PowerBudget { p1: 1.0, p2: 1.0 }
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }
}

/// PAM sizes per branch: user `k` sends `M_k^2`-QAM. `M = 1` is a silent user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstellationPair {
    m1: u32,
    m2: u32,
}

impl ConstellationPair {
    pub fn new(m1: u32, m2: u32) -> Result<Self, DesignError> {
        for m in [m1, m2] {
            if m == 0 || (m != 1 && m % 2 != 0) {
                return Err(DesignError::InvalidSize(m));
            }
        }
        if m1 == 1 && m2 == 1 {
            return Err(DesignError::BothSilent);
        }
        Ok(ConstellationPair { m1, m2 })
    }

    pub fn m1(&self) -> u32 {
        self.m1
    }

    pub fn m2(&self) -> u32 {
        self.m2
    }

    pub fn both_active(&self) -> bool {
        self.m1 >= 2 && self.m2 >= 2
    }
}

/// Largest weight with `E[w^2 s^2] <= P/2` over the uniform `M`-PAM alphabet.
pub fn max_weight(power: f64, m: u32) -> f64 {
    let m = f64::from(m);
    (3.0 * power / (2.0 * (m * m - 1.0))).sqrt()
}

/// Standard `M`-PAM alphabet `{-(M-1), ..., -1, 1, ..., M-1}` ascending.
pub fn pam_alphabet(m: u32) -> Vec<i64> {
    let m = i64::from(m);
    (0..m).map(|i| 2 * i - (m - 1)).collect()
}

/// Effective per-branch gains `h_tilde_k = max_weight(P_k, M_k) * |h_k|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedChannel {
    pub h1_tilde: f64,
    pub h2_tilde: f64,
}

pub fn normalize(
    channel: &Channel,
    power: &PowerBudget,
    sizes: &ConstellationPair,
) -> Result<NormalizedChannel, DesignError> {
    if sizes.m1 == 1 {
        return Err(DesignError::SilentUser(1));
    }
    if sizes.m2 == 1 {
        return Err(DesignError::SilentUser(2));
    }
    Ok(NormalizedChannel {
        h1_tilde: max_weight(power.p1, sizes.m1) * channel.abs1(),
        h2_tilde: max_weight(power.p2, sizes.m2) * channel.abs2(),
    })
}

/// Half-differences `(m, n)` of user 2's and user 1's symbols.
///
/// Pairs are reported with the sign fixed so that `m > 0`, or `m == 0` and
/// `n > 0`, since `d(m, n) = d(-m, -n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DifferentialPair {
    pub m: i64,
    pub n: i64,
}

impl DifferentialPair {
    fn canonical(m: i64, n: i64) -> Self {
        if m < 0 || (m == 0 && n < 0) {
            DifferentialPair { m: -m, n: -n }
        } else {
            DifferentialPair { m, n }
        }
    }

    fn from_fraction(f: Fraction) -> Self {
        DifferentialPair { m: f.den() as i64, n: f.num() as i64 }
    }
}

/// `d(m, n) = |x*n - y*m|` with `x = h1_tilde*w1_tilde`, `y = h2_tilde*w2_tilde`.
///
/// Evaluated with a compensated product so that near-cancelling pairs keep
/// their relative accuracy; otherwise a multiple `(k m, k n)` of the true
/// minimizer can round to a smaller value than the minimizer itself.
#[inline]
pub fn pair_distance(x: f64, y: f64, m: i64, n: i64) -> f64 {
    let (m, n) = (m as f64, n as f64);
    let p = y * m;
    let err = y.mul_add(m, -p);
    (x.mul_add(n, -p) - err).abs()
}

/// Minimum half-distance of the received branch constellation and the pairs
/// attaining it.
#[derive(Clone, Debug, PartialEq)]
pub struct MinDistance {
    pub d: f64,
    pub argmin: Vec<DifferentialPair>,
}

/// Exhaustive minimum of `d(m, n)` over `|m| <= M2-1`, `|n| <= M1-1`,
/// `(m, n) != (0, 0)`.
pub fn min_distance_bruteforce(
    w1_tilde: f64,
    w2_tilde: f64,
    nc: &NormalizedChannel,
    sizes: &ConstellationPair,
) -> MinDistance {
    let x = nc.h1_tilde * w1_tilde;
    let y = nc.h2_tilde * w2_tilde;
    let (mmax, nmax) = (i64::from(sizes.m2) - 1, i64::from(sizes.m1) - 1);
    let mut best = f64::INFINITY;
    let mut argmin = Vec::new();
    // half plane m > 0, or m == 0 and n > 0
    let half = (0..=mmax).flat_map(|m| {
        let lo = if m == 0 { 1 } else { -nmax };
        (lo..=nmax).map(move |n| (m, n))
    });
    for (m, n) in half {
        let d = pair_distance(x, y, m, n);
        if d < best {
            best = d;
            argmin.clear();
        }
        if d == best {
            argmin.push(DifferentialPair::canonical(m, n));
        }
    }
    MinDistance { d: best, argmin }
}

/// Minimum distance found by locating `y/x` in `P_{M2-1}^{M1-1}` and
/// comparing against the interval's mediant.
///
/// Holds the sequence so repeated queries for the same sizes do not
/// re-enumerate it.
#[derive(Clone, Debug)]
pub struct FareyDistance {
    seq: PunchedFarey,
}

impl FareyDistance {
    pub fn new(sizes: &ConstellationPair) -> Result<Self, DesignError> {
        if sizes.m1 < 2 {
            return Err(DesignError::SilentUser(1));
        }
        if sizes.m2 < 2 {
            return Err(DesignError::SilentUser(2));
        }
        let seq = PunchedFarey::new(u64::from(sizes.m2 - 1), u64::from(sizes.m1 - 1))
            .expect("bounds from u32 sizes fit the enumeration cap for M <= 4096");
        Ok(FareyDistance { seq })
    }

    pub fn sequence(&self) -> &PunchedFarey {
        &self.seq
    }

    pub fn min_distance(&self, w1_tilde: f64, w2_tilde: f64, nc: &NormalizedChannel) -> MinDistance {
        let x = nc.h1_tilde * w1_tilde;
        let y = nc.h2_tilde * w2_tilde;
        let k = self.seq.locate(y / x);
        let (left, right) = self.seq.interval(k);
        let (pl, pr) = (DifferentialPair::from_fraction(left), DifferentialPair::from_fraction(right));
        let (dl, dr) = (pair_distance(x, y, pl.m, pl.n), pair_distance(x, y, pr.m, pr.n));
        match mediant(left, right).cmp_f64(y / x) {
            // ratio above the mediant: the right endpoint is closer
            std::cmp::Ordering::Less => MinDistance { d: dr, argmin: vec![pr] },
            std::cmp::Ordering::Greater => MinDistance { d: dl, argmin: vec![pl] },
            std::cmp::Ordering::Equal => {
                let d = dl.min(dr);
                let mut argmin = Vec::new();
                if dl == d {
                    argmin.push(pl);
                }
                if dr == d {
                    argmin.push(pr);
                }
                MinDistance { d, argmin }
            }
        }
    }
}

/// One-shot version of [`FareyDistance::min_distance`].
pub fn min_distance_farey(
    w1_tilde: f64,
    w2_tilde: f64,
    nc: &NormalizedChannel,
    sizes: &ConstellationPair,
) -> Result<MinDistance, DesignError> {
    Ok(FareyDistance::new(sizes)?.min_distance(w1_tilde, w2_tilde, nc))
}

/// Best normalized weights when the ratio `y/x` is confined to one Farey
/// interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalOptimum {
    pub g: f64,
    pub w1_tilde: f64,
    pub w2_tilde: f64,
}

/// Optimum over interval `k` of `seq`: the ratio is placed on the interval's
/// mediant `B/A`, with whichever user can reach it at full power.
pub fn interval_optimum(k: usize, seq: &PunchedFarey, nc: &NormalizedChannel) -> IntervalOptimum {
    let (left, right) = seq.interval(k);
    let a = (left.den() + right.den()) as f64;
    let b = (left.num() + right.num()) as f64;
    let (h1, h2) = (nc.h1_tilde, nc.h2_tilde);
    if h2 * a <= h1 * b {
        IntervalOptimum { g: h2 / b, w1_tilde: h2 * a / (h1 * b), w2_tilde: 1.0 }
    } else {
        IntervalOptimum { g: h1 / a, w1_tilde: 1.0, w2_tilde: h1 * b / (h2 * a) }
    }
}

/// Operating regime of the closed-form optimum, keyed on `|h2|/|h1|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// User 2 at full power, user 1 backed off to `M2` times user 2's level.
    Case1,
    /// User 1 at full power, user 2 backed off; user 2 forms the fine grid.
    Case2,
    /// User 2 at full power, user 1 backed off; user 1 forms the fine grid.
    Case3,
    /// User 1 at full power, user 2 backed off to `M1` times user 1's level.
    Case4,
    User1Silent,
    User2Silent,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Case1 => "1",
            Regime::Case2 => "2",
            Regime::Case3 => "3",
            Regime::Case4 => "4",
            Regime::User1Silent => "silent1",
            Regime::User2Silent => "silent2",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Closed-form optimal weights for one channel realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignResult {
    pub w1: f64,
    pub w2: f64,
    pub w1_tilde: f64,
    pub w2_tilde: f64,
    /// Minimum half-distance of the received sum constellation.
    pub d_noma: f64,
    pub regime: Regime,
    /// `|h1| w1 / (|h2| w2)`: `M2` in cases 1-2, `1/M1` in cases 3-4, `None`
    /// when a user is silent.
    pub gain_ratio: Option<f64>,
}

/// `|h2|/|h1|` breakpoints separating cases 1|2, 2|3 and 3|4.
pub fn regime_thresholds(power: &PowerBudget, sizes: &ConstellationPair) -> [f64; 3] {
    let (p1, p2) = (power.p1, power.p2);
    let m1s = f64::from(sizes.m1).powi(2);
    let m2s = f64::from(sizes.m2).powi(2);
    [
        (p1 * (m2s - 1.0) / (p2 * m2s * (m1s - 1.0))).sqrt(),
        (p1 * m1s * (m2s - 1.0) / (p2 * m2s * (m1s - 1.0))).sqrt(),
        (p1 * m1s * (m2s - 1.0) / (p2 * (m1s - 1.0))).sqrt(),
    ]
}

/// Optimal `(w1, w2)` and the resulting `d_noma`.
pub fn design_weights(channel: &Channel, power: &PowerBudget, sizes: &ConstellationPair) -> DesignResult {
    let (a1, a2) = (channel.abs1(), channel.abs2());
    let (p1, p2) = (power.p1, power.p2);
    let (m1, m2) = (sizes.m1, sizes.m2);
    let c1 = max_weight(p1, m1);
    let c2 = max_weight(p2, m2);
    if m1 == 1 {
        return DesignResult {
            w1: 0.0,
            w2: c2,
            w1_tilde: 0.0,
            w2_tilde: 1.0,
            d_noma: c2 * a2,
            regime: Regime::User1Silent,
            gain_ratio: None,
        };
    }
    if m2 == 1 {
        return DesignResult {
            w1: c1,
            w2: 0.0,
            w1_tilde: 1.0,
            w2_tilde: 0.0,
            d_noma: c1 * a1,
            regime: Regime::User2Silent,
            gain_ratio: None,
        };
    }
    let (m1f, m2f) = (f64::from(m1), f64::from(m2));
    let (m1s, m2s) = (m1f * m1f, m2f * m2f);
    let ratio = a2 / a1;
    let [t1, t2, t3] = regime_thresholds(power, sizes);
    let (w1, w2, d_noma, regime) = if ratio <= t1 {
        ((3.0 * p2 * m2s / (2.0 * (m2s - 1.0))).sqrt() * ratio, c2, c2 * a2, Regime::Case1)
    } else if ratio <= t2 {
        let d = (3.0 * p1 / (2.0 * m2s * (m1s - 1.0))).sqrt();
        (c1, d / ratio, d * a1, Regime::Case2)
    } else if ratio <= t3 {
        let d = (3.0 * p2 / (2.0 * m1s * (m2s - 1.0))).sqrt();
        (d * ratio, c2, d * a2, Regime::Case3)
    } else {
        (c1, (3.0 * p1 * m1s / (2.0 * (m1s - 1.0))).sqrt() / ratio, c1 * a1, Regime::Case4)
    };
    let gain_ratio = match regime {
        Regime::Case1 | Regime::Case2 => m2f,
        _ => 1.0 / m1f,
    };
    DesignResult { w1, w2, w1_tilde: w1 / c1, w2_tilde: w2 / c2, d_noma, regime, gain_ratio: Some(gain_ratio) }
}

/// Noise-free received points `|h1| w1 s1 + |h2| w2 s2` of one branch,
/// ascending.
pub fn sum_constellation(design: &DesignResult, channel: &Channel, sizes: &ConstellationPair) -> Vec<f64> {
    let (g1, g2) = (channel.abs1() * design.w1, channel.abs2() * design.w2);
    let a1 = pam_alphabet(sizes.m1);
    let a2 = pam_alphabet(sizes.m2);
    let mut points: Vec<f64> =
        a1.iter().flat_map(|&s1| a2.iter().map(move |&s2| g1 * s1 as f64 + g2 * s2 as f64)).collect();
    points.sort_by(f64::total_cmp);
    points
}

/// Per-user TDMA distances `(d_oma1, d_oma2)`, each user sending
/// `M_k^2`-PAM per branch in its own slot at full power. A silent user's
/// entry is `+inf`.
pub fn oma_branch_distances(channel: &Channel, power: &PowerBudget, sizes: &ConstellationPair) -> (f64, f64) {
    let branch = |p: f64, m: u32, h: f64| {
        if m == 1 {
            f64::INFINITY
        } else {
            let m4 = f64::from(m).powi(4);
            (3.0 * p / (2.0 * (m4 - 1.0))).sqrt() * h
        }
    };
    (branch(power.p1, sizes.m1, channel.abs1()), branch(power.p2, sizes.m2, channel.abs2()))
}

/// Minimum distance of equal-slot TDMA at the same per-user rates.
pub fn oma_min_distance(channel: &Channel, power: &PowerBudget, sizes: &ConstellationPair) -> f64 {
    let (d1, d2) = oma_branch_distances(channel, power, sizes);
    d1.min(d2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Superiority {
    pub d_noma: f64,
    pub d_oma: f64,
    pub ratio: f64,
}

/// `d_noma` against `d_oma`; errors if NOMA is not strictly better.
pub fn verify_superiority(
    channel: &Channel,
    power: &PowerBudget,
    sizes: &ConstellationPair,
) -> Result<Superiority, DesignError> {
    let d_noma = design_weights(channel, power, sizes).d_noma;
    let d_oma = oma_min_distance(channel, power, sizes);
    if d_noma > d_oma {
        Ok(Superiority { d_noma, d_oma, ratio: d_noma / d_oma })
    } else {
        Err(DesignError::SuperiorityViolated { d_noma, d_oma })
    }
}

/// One CSV row of a design report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DesignRow {
    pub h1_abs: f64,
    pub h2_abs: f64,
    #[serde(rename = "P1")]
    pub p1: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
    #[serde(rename = "M1")]
    pub m1: u32,
    #[serde(rename = "M2")]
    pub m2: u32,
    #[serde(serialize_with = "serialize_regime")]
    pub case: Regime,
    pub w1: f64,
    pub w2: f64,
    pub d_noma: f64,
    pub d_oma: f64,
}

fn serialize_regime<S: serde::Serializer>(r: &Regime, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(r.label())
}

impl DesignRow {
    pub const HEADER: &'static str = "h1_abs,h2_abs,P1,P2,M1,M2,case,w1,w2,d_noma,d_oma";

    pub fn new(channel: &Channel, power: &PowerBudget, sizes: &ConstellationPair) -> Self {
        let design = design_weights(channel, power, sizes);
        DesignRow {
            h1_abs: channel.abs1(),
            h2_abs: channel.abs2(),
            p1: power.p1,
            p2: power.p2,
            m1: sizes.m1,
            m2: sizes.m2,
            case: design.regime,
            w1: design.w1,
            w2: design.w2,
            d_noma: design.d_noma,
            d_oma: oma_min_distance(channel, power, sizes),
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.h1_abs,
            self.h2_abs,
            self.p1,
            self.p2,
            self.m1,
            self.m2,
            self.case,
            self.w1,
            self.w2,
            self.d_noma,
            self.d_oma
        )
    }
}

/// `d_noma` and `d_oma` against `|h2|` for a fixed split `M = M1 * M2`.
pub fn distance_sweep(
    h1_abs: f64,
    h2_values: &[f64],
    power: &PowerBudget,
    sizes: &ConstellationPair,
) -> Result<Vec<DesignRow>, DesignError> {
    h2_values
        .iter()
        .map(|&h2| {
            let channel = Channel::from_magnitudes(h1_abs, h2)?;
            Ok(DesignRow::new(&channel, power, sizes))
        })
        .collect()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}
