//! Eight tests from NIST SP 800-22: monobit, block frequency, runs, longest
//! run of ones, 8×8 binary matrix rank, DFT spectral, approximate entropy
//! and cumulative sums.

use std::collections::BTreeMap;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;
pub const MIN_STREAM_LEN: usize = 100;
pub const BLOCK_FREQUENCY_SIZES: [usize; 6] = [3, 4, 5, 6, 7, 8];
/// Fewest 8×8 matrices the rank test accepts.
pub const MIN_RANK_MATRICES: usize = 4;
pub const MIN_DFT_LEN: usize = 1000;
pub const MAX_APEN_BLOCK: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NistError {
    #[error("empty input")]
    EmptyInput,
    #[error("stream of {0} bits is shorter than the minimum of {MIN_STREAM_LEN}")]
    StreamTooShort(usize),
}

/// Conversion from a real sequence to bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BitRule {
    /// 1 iff `x ≥ median`.
    Threshold,
    /// The 8 bits of `clamp(⌊256·x⌋, 0, 255)`, MSB first.
    BitExpansion,
    /// The 8 bits of `⌊10⁶·x⌋ mod 256`, MSB first.
    LowByte,
}

impl std::str::FromStr for BitRule {
    type Err = String;
    fn from_str(s: &str) -> Result<BitRule, String> {
        match s {
            "threshold" => Ok(BitRule::Threshold),
            "bit_expansion" | "bit-expansion" => Ok(BitRule::BitExpansion),
            "low_byte" | "low-byte" => Ok(BitRule::LowByte),
            _ => Err(format!("unknown bit rule {s:?} (threshold, bit_expansion, low_byte)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
    pub origin: String,
}

impl BitStream {
    /// Panics if any element is not 0 or 1.
    pub fn new(bits: Vec<u8>, origin: impl Into<String>) -> BitStream {
        assert!(bits.iter().all(|&b| b <= 1), "bits must be 0 or 1");
        BitStream { bits, origin: origin.into() }
    }

    /// Unpacks bytes MSB first.
    pub fn from_bytes(bytes: &[u8], origin: impl Into<String>) -> BitStream {
        let bits = bytes.iter().flat_map(|&b| (0..8).rev().map(move |k| (b >> k) & 1)).collect();
        BitStream { bits, origin: origin.into() }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.bits.truncate(n);
    }
}

fn push_byte(bits: &mut Vec<u8>, b: u8) {
    bits.extend((0..8).rev().map(|k| (b >> k) & 1));
}

pub fn bits_from_reals(xs: &[f64], rule: BitRule) -> Result<BitStream, NistError> {
    if xs.is_empty() {
        return Err(NistError::EmptyInput);
    }
    let mut bits = Vec::with_capacity(xs.len() * 8);
    match rule {
        BitRule::Threshold => {
            let mut sorted = xs.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            let median =
                if sorted.len() % 2 == 1 { sorted[mid] } else { (sorted[mid - 1] + sorted[mid]) / 2.0 };
            bits.extend(xs.iter().map(|&x| u8::from(x >= median)));
        }
        BitRule::BitExpansion => {
            for &x in xs {
                push_byte(&mut bits, (x * 256.0).floor().clamp(0.0, 255.0) as u8);
            }
        }
        BitRule::LowByte => {
            for &x in xs {
                push_byte(&mut bits, ((x * 1e6).floor() as i64).rem_euclid(256) as u8);
            }
        }
    }
    Ok(BitStream { bits, origin: format!("{} reals, {rule:?}", xs.len()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub params: BTreeMap<String, String>,
    pub p_value: Option<f64>,
    pub decision: Decision,
}

impl TestReport {
    fn new(test: &str, params: &[(&str, String)], p: Option<f64>, significance: f64) -> TestReport {
        let decision = match p {
            None => Decision::Skipped,
            Some(p) if p >= significance => Decision::Passed,
            Some(_) => Decision::Failed,
        };
        TestReport {
            test: test.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            p_value: p.map(|p| p.clamp(0.0, 1.0)),
            decision,
        }
    }

    pub fn passed(&self) -> bool {
        self.decision == Decision::Passed
    }
}

fn igamc(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(a, x)
    }
}

fn signed_sum(bits: &[u8]) -> i64 {
    bits.iter().map(|&b| 2 * b as i64 - 1).sum()
}

pub fn monobit(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    erfc(signed_sum(bits).unsigned_abs() as f64 / (2.0 * n).sqrt())
}

pub fn block_frequency(bits: &[u8], m: usize) -> Option<f64> {
    let blocks = bits.len() / m;
    if m == 0 || blocks == 0 {
        return None;
    }
    let chi: f64 = bits
        .chunks_exact(m)
        .map(|c| {
            let pi = c.iter().map(|&b| b as f64).sum::<f64>() / m as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    Some(igamc(blocks as f64 / 2.0, chi / 2.0))
}

pub fn runs(bits: &[u8]) -> f64 {
    let n = bits.len() as f64;
    let pi = bits.iter().map(|&b| b as f64).sum::<f64>() / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return 0.0;
    }
    let v = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v as f64 - 2.0 * n * pi * (1.0 - pi)).abs();
    erfc(num / (2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi)))
}

const LONGEST_RUN_PROBS: [f64; 4] = [0.2148, 0.3672, 0.2305, 0.1875];

/// Block size 8; needs at least 128 bits.
pub fn longest_run(bits: &[u8]) -> Option<f64> {
    if bits.len() < 128 {
        return None;
    }
    let mut v = [0usize; 4];
    for block in bits.chunks_exact(8) {
        let (mut best, mut cur) = (0, 0);
        for &b in block {
            cur = if b == 1 { cur + 1 } else { 0 };
            best = best.max(cur);
        }
        v[best.clamp(1, 4) - 1] += 1;
    }
    let n = (bits.len() / 8) as f64;
    let chi: f64 = v
        .iter()
        .zip(LONGEST_RUN_PROBS)
        .map(|(&vi, p)| (vi as f64 - n * p).powi(2) / (n * p))
        .sum();
    Some(igamc(1.5, chi / 2.0))
}

/// Rank over GF(2) of an 8×8 matrix given as row bytes.
pub fn gf2_rank(mut rows: [u8; 8]) -> u32 {
    let mut rank = 0;
    for col in (0..8).rev() {
        let bit = 1u8 << col;
        let Some(p) = (rank..8).find(|&i| rows[i] & bit != 0) else { continue };
        rows.swap(rank, p);
        for i in 0..8 {
            if i != rank && rows[i] & bit != 0 {
                rows[i] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank as u32
}

/// Probability that a random `m × q` GF(2) matrix has rank `r`.
fn rank_probability(r: i32, m: i32, q: i32) -> f64 {
    let mut p = 2f64.powi(r * (q + m - r) - m * q);
    for i in 0..r {
        p *= (1.0 - 2f64.powi(i - q)) * (1.0 - 2f64.powi(i - m)) / (1.0 - 2f64.powi(i - r));
    }
    p
}

/// 8×8 matrices filled row by row; returns the p-value and matrix count.
pub fn matrix_rank(bits: &[u8]) -> Option<(f64, usize)> {
    let count = bits.len() / 64;
    if count < MIN_RANK_MATRICES {
        return None;
    }
    let mut f = [0usize; 3];
    for chunk in bits.chunks_exact(64) {
        let mut rows = [0u8; 8];
        for (row, bs) in rows.iter_mut().zip(chunk.chunks_exact(8)) {
            *row = bs.iter().fold(0, |acc, &b| (acc << 1) | b);
        }
        match gf2_rank(rows) {
            8 => f[0] += 1,
            7 => f[1] += 1,
            _ => f[2] += 1,
        }
    }
    let p8 = rank_probability(8, 8, 8);
    let p7 = rank_probability(7, 8, 8);
    let probs = [p8, p7, 1.0 - p8 - p7];
    let n = count as f64;
    let chi: f64 = f.iter().zip(probs).map(|(&fi, p)| (fi as f64 - n * p).powi(2) / (n * p)).sum();
    Some(((-chi / 2.0).exp(), count))
}

pub fn dft_spectral(bits: &[u8]) -> Option<f64> {
    let n = bits.len();
    if n < MIN_DFT_LEN {
        return None;
    }
    let mut buf: Vec<Complex<f64>> = bits.iter().map(|&b| Complex::new(2.0 * b as f64 - 1.0, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let t = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let n0 = 0.95 * nf / 2.0;
    let n1 = buf[..n / 2].iter().filter(|c| c.norm() < t).count() as f64;
    let d = (n1 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    Some(erfc(d.abs() / 2f64.sqrt()))
}

/// Block length used for a stream of `n` bits: `min(10, ⌊log₂ n⌋ − 6)`.
pub fn apen_block_len(n: usize) -> Option<usize> {
    let lg = usize::BITS as usize - 1 - n.leading_zeros() as usize;
    let m = lg.checked_sub(6)?.min(MAX_APEN_BLOCK);
    (m >= 2).then_some(m)
}

fn apen_phi(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u32; 1 << m];
    let mut w = bits[..m - 1].iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    for i in 0..n {
        w = ((w << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[w] += 1;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            p * p.ln()
        })
        .sum()
}

pub fn approximate_entropy(bits: &[u8], m: usize) -> f64 {
    let n = bits.len() as f64;
    let apen = apen_phi(bits, m) - apen_phi(bits, m + 1);
    let chi = 2.0 * n * (2f64.ln() - apen);
    igamc(2f64.powi(m as i32 - 1), chi / 2.0)
}

pub fn cumulative_sums(bits: &[u8], forward: bool) -> f64 {
    let n = bits.len() as f64;
    let mut s = 0i64;
    let mut z = 0i64;
    let mut step = |b: u8| {
        s += 2 * b as i64 - 1;
        z = z.max(s.abs());
    };
    if forward {
        bits.iter().for_each(|&b| step(b));
    } else {
        bits.iter().rev().for_each(|&b| step(b));
    }
    let z = z as f64;
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    let sq = n.sqrt();
    let mut sum1 = 0.0;
    let lo = ((-n / z + 1.0) / 4.0).floor() as i64;
    let hi = ((n / z - 1.0) / 4.0).floor() as i64;
    for k in lo..=hi {
        let k = k as f64;
        sum1 += phi.cdf((4.0 * k + 1.0) * z / sq) - phi.cdf((4.0 * k - 1.0) * z / sq);
    }
    let mut sum2 = 0.0;
    let lo = ((-n / z - 3.0) / 4.0).floor() as i64;
    for k in lo..=hi {
        let k = k as f64;
        sum2 += phi.cdf((4.0 * k + 3.0) * z / sq) - phi.cdf((4.0 * k + 1.0) * z / sq);
    }
    1.0 - sum1 + sum2
}

/// Runs the subset at the given significance level. Tests whose own length
/// minimum is not met are reported as skipped.
pub fn run_nist_subset_at(s: &BitStream, significance: f64) -> Result<Vec<TestReport>, NistError> {
    let bits = s.bits();
    let n = bits.len();
    if n < MIN_STREAM_LEN {
        return Err(NistError::StreamTooShort(n));
    }
    let sig = significance;
    let mut out = vec![TestReport::new("monobit", &[], Some(monobit(bits)), sig)];
    for m in BLOCK_FREQUENCY_SIZES {
        out.push(TestReport::new("block_frequency", &[("M", m.to_string())], block_frequency(bits, m), sig));
    }
    out.push(TestReport::new("runs", &[], Some(runs(bits)), sig));
    out.push(TestReport::new("longest_run", &[("M", "8".into())], longest_run(bits), sig));
    let rank = matrix_rank(bits);
    out.push(TestReport::new(
        "matrix_rank",
        &[
            ("rows", "8".into()),
            ("cols", "8".into()),
            ("matrices", rank.map_or(0, |r| r.1).to_string()),
        ],
        rank.map(|r| r.0),
        sig,
    ));
    out.push(TestReport::new("dft_spectral", &[], dft_spectral(bits), sig));
    let m = apen_block_len(n);
    out.push(TestReport::new(
        "approximate_entropy",
        &[("m", m.map_or_else(|| "-".into(), |m| m.to_string()))],
        m.map(|m| approximate_entropy(bits, m)),
        sig,
    ));
    for (mode, fwd) in [("forward", true), ("backward", false)] {
        out.push(TestReport::new(
            "cumulative_sums",
            &[("mode", mode.into())],
            Some(cumulative_sums(bits, fwd)),
            sig,
        ));
    }
    Ok(out)
}

pub fn run_nist_subset(s: &BitStream) -> Result<Vec<TestReport>, NistError> {
    run_nist_subset_at(s, DEFAULT_SIGNIFICANCE)
}

/// True when no executed test failed.
pub fn all_passed(reports: &[TestReport]) -> bool {
    reports.iter().all(|r| r.decision != Decision::Failed)
}
