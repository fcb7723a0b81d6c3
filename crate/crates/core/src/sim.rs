//! Link-level Monte Carlo simulation of the uplink.
//!
//! One channel use of the NOMA link carries one `M1^2`-QAM symbol of user 1
//! and one `M2^2`-QAM symbol of user 2. The orthogonal baselines carry the
//! same bits in a two-slot frame (TDMA), or over two half-band channels with
//! half the noise (FDMA), each user sending `M_k^4`-QAM at full power. The
//! rotation baseline (CR-NOMA) sends `M_k^2`-PSK at full power, user 2's
//! alphabet offset by half a PSK step, and is detected by joint ML.
//!
//! Bits are Gray-labelled per PAM branch (per PSK ring for CR-NOMA).
//!
//! # Reproducibility
//!
//! Each SNR point is split into chunks of [`CHUNK_SYMBOLS`] channel uses.
//! Chunk `c` of scheme `s` at SNR index `p` draws from a ChaCha8 generator
//! seeded with `seed` on stream `(s << 56) | (p << 32) | c`, so the counts
//! do not depend on how many threads run the chunks.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{design_weights, max_weight, Channel, ConstellationPair, DesignResult, PowerBudget, Regime};

/// Channel uses per RNG stream.
pub const CHUNK_SYMBOLS: u64 = 1 << 14;

/// Normal quantile for the 95% Wilson interval.
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Noma,
    Tdma,
    Fdma,
    CrNoma,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Noma, Scheme::Tdma, Scheme::Fdma, Scheme::CrNoma];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Noma => "noma",
            Scheme::Tdma => "tdma",
            Scheme::Fdma => "fdma",
            Scheme::CrNoma => "cr_noma",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            Scheme::Noma => 0,
            Scheme::Tdma => 1,
            Scheme::Fdma => 2,
            Scheme::CrNoma => 3,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.id() == s)
            .ok_or_else(|| SimError::ConfigInvalid(format!("unknown scheme {s:?}")))
    }
}

/// Simulation parameters. Unknown keys are rejected when deserializing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// System SNR `rho = 1/(2 sigma^2)` in dB.
    pub snr_db: Vec<f64>,
    /// Channel uses per SNR point; for TDMA and FDMA, two-slot frames.
    pub symbols_per_point: u64,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub m1: u32,
    pub m2: u32,
    /// Per-component variances `delta_k^2`; `h_k ~ CN(0, 2 delta_k^2)`.
    pub fading_var1: f64,
    pub fading_var2: f64,
    pub p1: f64,
    pub p2: f64,
    /// Channel uses sharing one fading draw.
    pub block_len: u32,
    /// Replaces fading with a fixed `[[re1, im1], [re2, im2]]`.
    pub fixed_channel: Option<[[f64; 2]; 2]>,
    /// Run chunks on the rayon pool.
    pub parallel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            snr_db: (0..=8).map(|i| 10.0 + 5.0 * f64::from(i)).collect(),
            symbols_per_point: 100_000,
            seed: 1,
            schemes: vec![Scheme::Noma, Scheme::Tdma, Scheme::Fdma, Scheme::CrNoma],
            m1: 4,
            m2: 4,
            fading_var1: 1.0,
            fading_var2: 1.0,
            p1: 1.0,
            p2: 1.0,
            block_len: 1,
            fixed_channel: None,
            parallel: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::ConfigInvalid(msg));
        if self.snr_db.is_empty() {
            return bad("snr_db is empty".into());
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return bad(format!("non-finite SNR {x}"));
        }
        if self.symbols_per_point == 0 {
            return bad("symbols_per_point must be >= 1".into());
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        for m in [self.m1, self.m2] {
            if !m.is_power_of_two() {
                return bad(format!("constellation size {m} is not a power of two"));
            }
            if m > 64 {
                return bad(format!("constellation size {m} too large (max 64)"));
            }
        }
        if self.block_len == 0 {
            return bad("block_len must be >= 1".into());
        }
        for v in [self.fading_var1, self.fading_var2, self.p1, self.p2] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("fading variances and powers must be positive, got {v}"));
            }
        }
        if self.schemes.contains(&Scheme::CrNoma) && (self.m1 == 1 || self.m2 == 1) {
            return bad("cr_noma needs both users active".into());
        }
        ConstellationPair::new(self.m1, self.m2).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        if let Some(h) = self.fixed_channel {
            Channel::new(Complex64::new(h[0][0], h[0][1]), Complex64::new(h[1][0], h[1][1]))
                .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn sizes(&self) -> ConstellationPair {
        ConstellationPair::new(self.m1, self.m2).expect("validated")
    }

    pub fn power(&self) -> PowerBudget {
        PowerBudget::new(self.p1, self.p2).expect("validated")
    }
}

/// `h ~ CN(0, 2 var)`: real and imaginary parts `N(0, var)`.
pub fn sample_rayleigh<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let s = var.sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Complex noise with per-component variance `sigma2`.
pub fn awgn<R: Rng + ?Sized>(sigma2: f64, rng: &mut R) -> Complex64 {
    sample_rayleigh(sigma2, rng)
}

/// Per-component noise variance for system SNR `rho` in dB.
pub fn noise_variance(snr_db: f64) -> f64 {
    1.0 / (2.0 * 10f64.powf(snr_db / 10.0))
}

pub fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

/// Bit errors between the Gray labels of two indices.
fn label_errors(a: u32, b: u32) -> u64 {
    u64::from((gray(a) ^ gray(b)).count_ones())
}

fn log2(m: u32) -> u64 {
    u64::from(m.trailing_zeros())
}

/// PAM amplitude `2i - (M-1)` of index `i`.
pub fn pam_level(i: u32, m: u32) -> f64 {
    f64::from(2 * i) - f64::from(m - 1)
}

/// Nearest index of an `n`-PAM grid with unit half-spacing. Saturates at the
/// outer points; a value exactly halfway goes to the lower index.
pub fn quantize_pam(x: f64, n: u32) -> u32 {
    let pos = ((x + f64::from(n - 1)) / 2.0 - 0.5).ceil();
    if pos <= 0.0 {
        0
    } else if pos >= f64::from(n - 1) {
        n - 1
    } else {
        pos as u32
    }
}

/// PAM indices of one channel use: in-phase and quadrature for each user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NomaSymbols {
    pub s1: u32,
    pub s1q: u32,
    pub s2: u32,
    pub s2q: u32,
}

/// Transmitted `(x1, x2)`: each user's QAM point, pre-rotated by `-arg(h_k)`
/// so it arrives phase-aligned.
pub fn modulate_noma(
    sym: &NomaSymbols,
    design: &DesignResult,
    channel: &Channel,
    sizes: &ConstellationPair,
) -> (Complex64, Complex64) {
    let qam = |i: u32, q: u32, m: u32, w: f64| {
        if m == 1 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(w * pam_level(i, m), w * pam_level(q, m))
        }
    };
    let x1 = qam(sym.s1, sym.s1q, sizes.m1(), design.w1) * Complex64::from_polar(1.0, -channel.h1().arg());
    let x2 = qam(sym.s2, sym.s2q, sizes.m2(), design.w2) * Complex64::from_polar(1.0, -channel.h2().arg());
    (x1, x2)
}

/// Whether user 2 sits on the coarse (large-step) lattice of the sum grid.
fn user2_coarse(regime: Regime) -> bool {
    matches!(regime, Regime::Case3 | Regime::Case4)
}

/// Quantization receiver: the sum constellation is a regular
/// `M1 M2`-PAM grid on each branch with half-spacing `d_noma`, so each
/// branch is rounded independently and split back into the two users'
/// indices.
pub fn detect_noma(z: Complex64, design: &DesignResult, sizes: &ConstellationPair) -> NomaSymbols {
    let (m1, m2) = (sizes.m1(), sizes.m2());
    let n = m1 * m2;
    let split = |t: u32| {
        if user2_coarse(design.regime) {
            (t % m1, t / m1)
        } else {
            (t / m2, t % m2)
        }
    };
    let (s1, s2) = split(quantize_pam(z.re / design.d_noma, n));
    let (s1q, s2q) = split(quantize_pam(z.im / design.d_noma, n));
    NomaSymbols { s1, s1q, s2, s2q }
}

/// Index of the candidate nearest to `z`; the lowest index wins ties.
///
/// # Panics
///
/// Panics on an empty candidate set.
pub fn detect_ml_joint(z: Complex64, candidates: &[Complex64]) -> usize {
    assert!(!candidates.is_empty(), "empty candidate set");
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let d = (z - c).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// All noise-free NOMA receive points with their symbols, for exhaustive
/// ML detection.
pub fn noma_candidates(
    design: &DesignResult,
    channel: &Channel,
    sizes: &ConstellationPair,
) -> Vec<(NomaSymbols, Complex64)> {
    let (m1, m2) = (sizes.m1(), sizes.m2());
    let mut out = Vec::with_capacity((m1 * m1 * m2 * m2) as usize);
    for s1 in 0..m1 {
        for s1q in 0..m1 {
            for s2 in 0..m2 {
                for s2q in 0..m2 {
                    let sym = NomaSymbols { s1, s1q, s2, s2q };
                    let (x1, x2) = modulate_noma(&sym, design, channel, sizes);
                    out.push((sym, channel.h1() * x1 + channel.h2() * x2));
                }
            }
        }
    }
    out
}

/// Bit and symbol counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub bits: u64,
    pub bit_errors: u64,
    pub symbols: u64,
    pub symbol_errors: u64,
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        self.bits += o.bits;
        self.bit_errors += o.bit_errors;
        self.symbols += o.symbols;
        self.symbol_errors += o.symbol_errors;
    }
}

/// Per-configuration constants shared by all channel uses.
#[derive(Clone, Debug)]
pub struct Link {
    sizes: ConstellationPair,
    power: PowerBudget,
    /// user 1 and user 2 `N`-PSK alphabets for CR-NOMA, before pre-rotation
    psk: [Vec<Complex64>; 2],
}

impl Link {
    pub fn new(sizes: ConstellationPair, power: PowerBudget) -> Self {
        let ring = |n: u32, p: f64, offset: f64| {
            (0..n)
                .map(|k| Complex64::from_polar(p.sqrt(), (2.0 * PI * f64::from(k) + offset) / f64::from(n)))
                .collect::<Vec<_>>()
        };
        let n1 = sizes.m1() * sizes.m1();
        let n2 = sizes.m2() * sizes.m2();
        Link { sizes, power, psk: [ring(n1, power.p1(), 0.0), ring(n2, power.p2(), PI)] }
    }

    pub fn sizes(&self) -> &ConstellationPair {
        &self.sizes
    }

    /// CR-NOMA alphabet of user 1 or 2, before phase pre-rotation.
    ///
    /// # Panics
    ///
    /// Panics unless `user` is 1 or 2.
    pub fn psk_alphabet(&self, user: u8) -> &[Complex64] {
        match user {
            1 => &self.psk[0],
            2 => &self.psk[1],
            _ => panic!("user must be 1 or 2, got {user}"),
        }
    }

    /// Bits carried per NOMA or CR-NOMA channel use; an orthogonal frame
    /// carries twice as many.
    pub fn bits_per_use(&self) -> u64 {
        2 * (log2(self.sizes.m1()) + log2(self.sizes.m2()))
    }

    fn random_symbols<R: Rng + ?Sized>(&self, rng: &mut R) -> NomaSymbols {
        let (m1, m2) = (self.sizes.m1(), self.sizes.m2());
        NomaSymbols {
            s1: rng.random_range(0..m1),
            s1q: rng.random_range(0..m1),
            s2: rng.random_range(0..m2),
            s2q: rng.random_range(0..m2),
        }
    }

    /// One NOMA channel use with the closed-form optimal weights.
    pub fn noma_use<R: Rng + ?Sized>(&self, channel: &Channel, sigma2: f64, rng: &mut R) -> Tally {
        let design = design_weights(channel, &self.power, &self.sizes);
        let sym = self.random_symbols(rng);
        let (x1, x2) = modulate_noma(&sym, &design, channel, &self.sizes);
        let z = channel.h1() * x1 + channel.h2() * x2 + awgn(sigma2, rng);
        let est = detect_noma(z, &design, &self.sizes);
        let errors = label_errors(sym.s1, est.s1)
            + label_errors(sym.s1q, est.s1q)
            + label_errors(sym.s2, est.s2)
            + label_errors(sym.s2q, est.s2q);
        Tally { bits: self.bits_per_use(), bit_errors: errors, symbols: 1, symbol_errors: u64::from(est != sym) }
    }

    /// One orthogonal frame: each user in turn sends `M_k^4`-QAM at full
    /// power over the same channel realization. `noise_scale` is 1 for TDMA
    /// and 1/2 for FDMA. A frame spans two slots, so it carries the bits of
    /// two NOMA channel uses.
    pub fn oma_use<R: Rng + ?Sized>(&self, channel: &Channel, sigma2: f64, noise_scale: f64, rng: &mut R) -> Tally {
        let (mut bits, mut errors) = (0, 0);
        let mut wrong = false;
        for (m, p, h) in
            [(self.sizes.m1(), self.power.p1(), channel.h1()), (self.sizes.m2(), self.power.p2(), channel.h2())]
        {
            if m == 1 {
                continue;
            }
            let n = m * m;
            let (i, q) = (rng.random_range(0..n), rng.random_range(0..n));
            let x = oma_symbol(i, q, n, p, h);
            let z = h * x + awgn(sigma2 * noise_scale, rng);
            let unit = h.norm() * max_weight(p, n);
            let (ei, eq) = (quantize_pam(z.re / unit, n), quantize_pam(z.im / unit, n));
            bits += 2 * log2(n);
            errors += label_errors(i, ei) + label_errors(q, eq);
            wrong |= (i, q) != (ei, eq);
        }
        Tally { bits, bit_errors: errors, symbols: 1, symbol_errors: u64::from(wrong) }
    }

    /// One CR-NOMA channel use, both users at full power, joint ML.
    pub fn cr_noma_use<R: Rng + ?Sized>(&self, channel: &Channel, sigma2: f64, rng: &mut R) -> Tally {
        let [ring1, ring2] = &self.psk;
        let (n1, n2) = (ring1.len() as u32, ring2.len() as u32);
        let (k1, k2) = (rng.random_range(0..n1), rng.random_range(0..n2));
        let (a1, a2) = (channel.abs1(), channel.abs2());
        // after pre-rotation the receiver sees |h_k| times the ring point
        let candidates: Vec<Complex64> =
            ring1.iter().flat_map(|p1| ring2.iter().map(move |p2| p1 * a1 + p2 * a2)).collect();
        let x1 = ring1[k1 as usize] * Complex64::from_polar(1.0, -channel.h1().arg());
        let x2 = ring2[k2 as usize] * Complex64::from_polar(1.0, -channel.h2().arg());
        let z = channel.h1() * x1 + channel.h2() * x2 + awgn(sigma2, rng);
        let idx = detect_ml_joint(z, &candidates) as u32;
        let (e1, e2) = (idx / n2, idx % n2);
        Tally {
            bits: self.bits_per_use(),
            bit_errors: label_errors(k1, e1) + label_errors(k2, e2),
            symbols: 1,
            symbol_errors: u64::from((k1, k2) != (e1, e2)),
        }
    }
}

/// Pre-rotated `n^2`-QAM point `(i, q)` of an orthogonal baseline at full
/// power `power` over gain `h`.
pub fn oma_symbol(i: u32, q: u32, n: u32, power: f64, h: Complex64) -> Complex64 {
    let w = max_weight(power, n);
    Complex64::new(w * pam_level(i, n), w * pam_level(q, n)) * Complex64::from_polar(1.0, -h.arg())
}

/// One channel use of `scheme` at the given SNR.
pub fn run_scheme_symbol<R: Rng + ?Sized>(
    scheme: Scheme,
    rng: &mut R,
    channel: &Channel,
    snr_db: f64,
    link: &Link,
) -> Tally {
    let sigma2 = noise_variance(snr_db);
    match scheme {
        Scheme::Noma => link.noma_use(channel, sigma2, rng),
        Scheme::Tdma => link.oma_use(channel, sigma2, 1.0, rng),
        Scheme::Fdma => link.oma_use(channel, sigma2, 0.5, rng),
        Scheme::CrNoma => link.cr_noma_use(channel, sigma2, rng),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_halfwidth: f64,
    pub symbols: u64,
    pub symbol_errors: u64,
}

impl BerPoint {
    fn from_tally(snr_db: f64, t: Tally) -> Self {
        BerPoint {
            snr_db,
            bits: t.bits,
            errors: t.bit_errors,
            ber: t.bit_errors as f64 / t.bits as f64,
            ci_halfwidth: wilson_halfwidth(t.bit_errors, t.bits),
            symbols: t.symbols,
            symbol_errors: t.symbol_errors,
        }
    }
}

/// Half-width of the 95% Wilson score interval for `k` successes in `n`.
pub fn wilson_halfwidth(k: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    WILSON_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BerCurve {
    pub scheme: Scheme,
    pub points: Vec<BerPoint>,
}

impl BerCurve {
    pub const CSV_HEADER: &'static str = "scheme,snr_db,bits,errors,ber,ci_halfwidth";

    pub fn csv_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.points
            .iter()
            .map(move |p| format!("{},{},{},{},{},{}", self.scheme, p.snr_db, p.bits, p.errors, p.ber, p.ci_halfwidth))
    }

    /// SNR (dB) where the curve first falls to `target`, interpolating
    /// `log10(ber)` linearly between grid points.
    pub fn snr_at_ber(&self, target: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if a.ber >= target && b.ber <= target && a.ber > 0.0 {
                if b.ber == 0.0 || a.ber == b.ber {
                    return Some(b.snr_db);
                }
                let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
                Some(a.snr_db + (b.snr_db - a.snr_db) * (la - lt) / (la - lb))
            } else {
                None
            }
        })
    }
}

/// All curves as one CSV document with a header row.
pub fn curves_to_csv(curves: &[BerCurve]) -> String {
    let mut out = String::from(BerCurve::CSV_HEADER);
    out.push('\n');
    for c in curves {
        for line in c.csv_lines() {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

fn chunk_rng(seed: u64, scheme: Scheme, snr_index: usize, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((scheme.stream_tag() << 56) | ((snr_index as u64) << 32) | chunk);
    rng
}

fn run_chunk(cfg: &SimConfig, link: &Link, scheme: Scheme, snr_index: usize, chunk: u64) -> Tally {
    let mut rng = chunk_rng(cfg.seed, scheme, snr_index, chunk);
    let start = chunk * CHUNK_SYMBOLS;
    let count = CHUNK_SYMBOLS.min(cfg.symbols_per_point - start);
    let snr = cfg.snr_db[snr_index];
    let fixed = cfg
        .fixed_channel
        .map(|h| Channel::new(Complex64::new(h[0][0], h[0][1]), Complex64::new(h[1][0], h[1][1])).expect("validated"));
    let mut tally = Tally::default();
    let mut channel = None;
    for i in 0..count {
        if i % u64::from(cfg.block_len) == 0 || channel.is_none() {
            channel = Some(match fixed {
                Some(c) => c,
                None => draw_channel(cfg, &mut rng),
            });
        }
        tally += run_scheme_symbol(scheme, &mut rng, channel.as_ref().unwrap(), snr, link);
    }
    tally
}

fn draw_channel<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Channel {
    loop {
        let h1 = sample_rayleigh(cfg.fading_var1, rng);
        let h2 = sample_rayleigh(cfg.fading_var2, rng);
        // an exactly zero draw has probability zero; redraw rather than divide by it
        if let Ok(c) = Channel::new(h1, h2) {
            return c;
        }
    }
}

/// Runs every configured scheme at every SNR point.
pub fn simulate_ber(cfg: &SimConfig) -> Result<Vec<BerCurve>, SimError> {
    cfg.validate()?;
    let link = Link::new(cfg.sizes(), cfg.power());
    let chunks = cfg.symbols_per_point.div_ceil(CHUNK_SYMBOLS);
    let curves = cfg
        .schemes
        .iter()
        .map(|&scheme| {
            let points = (0..cfg.snr_db.len())
                .map(|p| {
                    let tally = if cfg.parallel {
                        (0..chunks).into_par_iter().map(|c| run_chunk(cfg, &link, scheme, p, c)).reduce(
                            Tally::default,
                            |mut a, b| {
                                a += b;
                                a
                            },
                        )
                    } else {
                        (0..chunks).fold(Tally::default(), |mut a, c| {
                            a += run_chunk(cfg, &link, scheme, p, c);
                            a
                        })
                    };
                    BerPoint::from_tally(cfg.snr_db[p], tally)
                })
                .collect();
            BerCurve { scheme, points }
        })
        .collect();
    Ok(curves)
}
