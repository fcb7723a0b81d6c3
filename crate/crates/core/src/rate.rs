//! Rate split between the two users under a fixed sum rate.
//!
//! With `M1 * M2 = M` (all powers of two), maximizing `d_noma` is the same as
//! minimizing `beta(M1) = 3 P1 |h1|^2 / (2 d_noma^2)`, a piecewise function of
//! `M1` that depends on the channel only through
//! `lambda = P2 |h2|^2 / (P1 |h1|^2)`.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("sum constellation size {0} must be a power of two >= 2")]
    InvalidSize(u64),
    #[error("lambda must be finite and positive, got {0}")]
    InvalidLambda(f64),
    #[error("M1 = {m1} is not a power-of-two divisor of M = {m}")]
    NotADivisor { m1: u64, m: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateProblem {
    m: u64,
    lambda: f64,
}

impl RateProblem {
    pub fn new(m: u64, lambda: f64) -> Result<Self, RateError> {
        if m < 2 || !m.is_power_of_two() {
            return Err(RateError::InvalidSize(m));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(RateError::InvalidLambda(lambda));
        }
        Ok(RateProblem { m, lambda })
    }

    /// Builds `lambda` from gains and powers.
    pub fn from_channel(m: u64, h1_abs: f64, h2_abs: f64, p1: f64, p2: f64) -> Result<Self, RateError> {
        Self::new(m, p2 * h2_abs * h2_abs / (p1 * h1_abs * h1_abs))
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Breakpoints `(gamma1, gamma2, gamma3)` of `beta`.
    pub fn breakpoints(&self) -> (f64, f64, f64) {
        let l = self.lambda;
        let m = self.m as f64;
        let m2 = m * m;
        let g1 = ((l + 1.0) / (l + 1.0 / m2)).sqrt();
        // (sqrt(a^2 + b) - a) / 2 with a = lambda - 1, b = 4 lambda / M^2,
        // rationalized when a > 0 to avoid cancellation at large lambda
        let (a, b) = (l - 1.0, 4.0 * l / m2);
        let root = (a * a + b).sqrt();
        let half = if a > 0.0 { b / (2.0 * (root + a)) } else { (root - a) / 2.0 };
        let g2 = half.sqrt() * m;
        let g3 = ((l + m2) / (l + 1.0)).sqrt();
        (g1, g2, g3)
    }

    /// `beta` at a real-valued `M1` in `[1, M]`.
    pub fn beta_continuous(&self, m1: f64) -> f64 {
        let (g1, g2, g3) = self.breakpoints();
        let l = self.lambda;
        let m = self.m as f64;
        let (m1s, ms) = (m1 * m1, m * m);
        if m1 <= g1 {
            (ms / m1s - 1.0) / l
        } else if m1 <= g2 {
            ms - ms / m1s
        } else if m1 <= g3 {
            (ms - m1s) / l
        } else {
            m1s - 1.0
        }
    }

    /// Power-of-two divisors of `M`, ascending.
    pub fn divisors(&self) -> impl Iterator<Item = u64> {
        let bits = self.m.trailing_zeros();
        (0..=bits).map(|k| 1u64 << k)
    }
}

/// `beta(M1)` for a power-of-two divisor `M1` of `M`.
pub fn beta(m1: u64, prob: &RateProblem) -> Result<f64, RateError> {
    if m1 == 0 || !m1.is_power_of_two() || m1 > prob.m {
        return Err(RateError::NotADivisor { m1, m: prob.m });
    }
    Ok(prob.beta_continuous(m1 as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationSource {
    Optimal,
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateAllocation {
    pub m1: u64,
    pub m2: u64,
    pub beta: f64,
    pub source: AllocationSource,
}

/// Largest `k` with `2^k <= x`, for `x >= 1`; `-1` for `x` in `[0.5, 1)` and
/// so on.
fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let mut k = x.log2().floor() as i32;
    // log2 may round across an integer; settle on exact powers
    while 2f64.powi(k + 1) <= x {
        k += 1;
    }
    while 2f64.powi(k) > x {
        k -= 1;
    }
    k
}

fn clamp_pow2(k: i32, m: u64) -> u64 {
    let max = m.trailing_zeros() as i32;
    1u64 << k.clamp(0, max)
}

/// The four candidate splits examined for the optimum; `None` marks a
/// candidate ruled out by its feasibility condition.
pub fn candidates(prob: &RateProblem) -> [Option<u64>; 4] {
    let (g1, g2, g3) = prob.breakpoints();
    let (f1, f2, f3) = (floor_log2(g1), floor_log2(g2), floor_log2(g3));
    [
        Some(clamp_pow2(f1, prob.m)),
        (f1 <= f2 + 1).then(|| clamp_pow2(f1 + 1, prob.m)),
        (f2 <= f3 + 1).then(|| clamp_pow2(f3, prob.m)),
        Some(clamp_pow2(f3 + 1, prob.m)),
    ]
}

/// Best split among the candidates of [`candidates`]; ties go to the
/// smallest `M1`.
pub fn optimal_rate_allocation(prob: &RateProblem) -> RateAllocation {
    let mut best: Option<(u64, f64)> = None;
    for m1 in candidates(prob).into_iter().flatten() {
        let b = prob.beta_continuous(m1 as f64);
        best = match best {
            Some((bm, bb)) if bb < b || (bb == b && bm <= m1) => Some((bm, bb)),
            _ => Some((m1, b)),
        };
    }
    let (m1, beta) = best.expect("candidates 1 and 4 are always feasible");
    RateAllocation { m1, m2: prob.m / m1, beta, source: AllocationSource::Optimal }
}

/// `beta` at every power-of-two `M1`, ascending.
pub fn enumerate_rate_allocations(prob: &RateProblem) -> Vec<(u64, f64)> {
    prob.divisors().map(|m1| (m1, prob.beta_continuous(m1 as f64))).collect()
}

/// Minimum of [`enumerate_rate_allocations`], smallest `M1` on ties.
pub fn exhaustive_rate_allocation(prob: &RateProblem) -> RateAllocation {
    let (m1, beta) =
        enumerate_rate_allocations(prob)
            .into_iter()
            .fold((0, f64::INFINITY), |acc, (m1, b)| if b < acc.1 { (m1, b) } else { acc });
    RateAllocation { m1, m2: prob.m / m1, beta, source: AllocationSource::Optimal }
}

/// High-rate split: the weak user's PAM size tracks the gain disparity.
pub fn asymptotic_rate_allocation(prob: &RateProblem) -> RateAllocation {
    let l = prob.lambda;
    let m1 = if l <= 1.0 {
        clamp_pow2(floor_log2(1.0 / l.sqrt()) + 1, prob.m)
    } else {
        clamp_pow2(floor_log2(prob.m as f64 / l.sqrt()), prob.m)
    };
    RateAllocation { m1, m2: prob.m / m1, beta: prob.beta_continuous(m1 as f64), source: AllocationSource::Asymptotic }
}

/// CSV row `M,lambda,M1_opt,M2_opt,beta_opt,M1_asym,M2_asym,beta_asym`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub m: u64,
    pub lambda: f64,
    pub optimal: RateAllocation,
    pub asymptotic: RateAllocation,
}

impl RateRow {
    pub const HEADER: &'static str = "M,lambda,M1_opt,M2_opt,beta_opt,M1_asym,M2_asym,beta_asym";

    pub fn new(prob: &RateProblem) -> Self {
        RateRow {
            m: prob.m,
            lambda: prob.lambda,
            optimal: optimal_rate_allocation(prob),
            asymptotic: asymptotic_rate_allocation(prob),
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.m,
            self.lambda,
            self.optimal.m1,
            self.optimal.m2,
            self.optimal.beta,
            self.asymptotic.m1,
            self.asymptotic.m2,
            self.asymptotic.beta
        )
    }
}
