//! Strength criteria for 8×8 S-boxes: bijectivity, nonlinearity, strict
//! avalanche, bit independence, the difference distribution table with its
//! maximum differential probability, and the linear approximation table with
//! its maximum linear bias. Also batch evaluation over S-box families.
//!
//! Boolean components are indexed by output mask `m`: the component for `m`
//! is `x ↦ parity(m & S(x))`. Single-bit masks are the coordinate functions.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::sbox::{SBox, SBoxFamily};

/// In-place fast Walsh–Hadamard transform of a length-256 ±1 (or any
/// integer) vector. Result `w[a] = Σ_x v[x]·(−1)^{a·x}`.
pub fn fwht(v: &mut [i32; 256]) {
    let mut h = 1;
    while h < 256 {
        for i in (0..256).step_by(h * 2) {
            for j in i..i + h {
                let (x, y) = (v[j], v[j + h]);
                v[j] = x + y;
                v[j + h] = x - y;
            }
        }
        h *= 2;
    }
}

/// Truth table of one Boolean function on 8 variables.
#[derive(Clone, PartialEq, Eq)]
pub struct ComponentFunction {
    truth_table: [u8; 256],
}

impl std::fmt::Debug for ComponentFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ComponentFunction(weight={})", self.hamming_weight())
    }
}

impl ComponentFunction {
    /// Component `x ↦ parity(mask & S(x))`.
    pub fn from_sbox(s: &SBox, mask: u8) -> ComponentFunction {
        ComponentFunction {
            truth_table: std::array::from_fn(|x| ((s.apply(x as u8) & mask).count_ones() & 1) as u8),
        }
    }

    pub fn from_truth_table(truth_table: [u8; 256]) -> ComponentFunction {
        ComponentFunction { truth_table: truth_table.map(|b| b & 1) }
    }

    pub fn value(&self, x: u8) -> u8 {
        self.truth_table[x as usize]
    }

    pub fn hamming_weight(&self) -> u32 {
        self.truth_table.iter().map(|&b| b as u32).sum()
    }

    pub fn walsh_spectrum(&self) -> [i32; 256] {
        let mut v = self.truth_table.map(|b| 1 - 2 * b as i32);
        fwht(&mut v);
        v
    }

    /// `128 − max|W|/2`.
    pub fn nonlinearity(&self) -> u32 {
        let max = self.walsh_spectrum().iter().map(|w| w.unsigned_abs()).max().unwrap_or(0);
        128 - max / 2
    }

    /// Fraction of inputs for which flipping input bit `i` (bit 0 = MSB)
    /// flips the output.
    pub fn avalanche(&self, i: u32) -> f64 {
        let flip = 0x80u8 >> i;
        let changed = (0..=255u8).filter(|&x| self.value(x) != self.value(x ^ flip)).count();
        changed as f64 / 256.0
    }
}

/// True iff all 256 outputs are distinct. The balancedness of every
/// non-zero component combination (weight 128) is evaluated alongside; the
/// two characterisations are equivalent.
pub fn is_bijective(s: &SBox) -> bool {
    let distinct = s.is_permutation();
    let balanced = (1..=255u8).all(|m| ComponentFunction::from_sbox(s, m).hamming_weight() == 128);
    debug_assert_eq!(distinct, balanced);
    distinct && balanced
}

/// Minimum nonlinearity over the 255 non-zero component combinations.
pub fn nonlinearity(s: &SBox) -> u32 {
    (1..=255u8).map(|m| ComponentFunction::from_sbox(s, m).nonlinearity()).min().unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SacResult {
    /// `matrix[i][j]`: probability that flipping input bit `i` flips output
    /// bit `j` (both numbered from the MSB).
    pub matrix: [[f64; 8]; 8],
    pub average: f64,
    pub max_offset: f64,
}

pub fn sac(s: &SBox) -> SacResult {
    let mut counts = [[0u32; 8]; 8];
    for (i, row) in counts.iter_mut().enumerate() {
        let flip = 0x80u8 >> i;
        for x in 0..=255u8 {
            let d = s.apply(x) ^ s.apply(x ^ flip);
            for (j, c) in row.iter_mut().enumerate() {
                *c += ((d >> (7 - j)) & 1) as u32;
            }
        }
    }
    let matrix = counts.map(|row| row.map(|c| c as f64 / 256.0));
    let total: u32 = counts.iter().flatten().sum();
    let max_offset = matrix.iter().flatten().map(|p| (p - 0.5).abs()).fold(0.0, f64::max);
    SacResult { matrix, average: total as f64 / (64.0 * 256.0), max_offset }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BicResult {
    /// Minimum nonlinearity of `f_j ⊕ f_k` over the 28 pairs `j < k`.
    pub nonlinearity: u32,
    /// Average avalanche probability of those 28 functions over all input bits.
    pub sac: f64,
}

pub fn bic(s: &SBox) -> BicResult {
    let mut min_nl = u32::MAX;
    let mut flips = 0usize;
    let mut pairs = 0usize;
    for j in 0..8 {
        for k in j + 1..8 {
            let f = ComponentFunction::from_sbox(s, (0x80u8 >> j) | (0x80u8 >> k));
            min_nl = min_nl.min(f.nonlinearity());
            for i in 0..8 {
                let flip = 0x80u8 >> i;
                flips += (0..=255u8).filter(|&x| f.value(x) != f.value(x ^ flip)).count();
            }
            pairs += 1;
        }
    }
    BicResult { nonlinearity: min_nl, sac: flips as f64 / (pairs * 8 * 256) as f64 }
}

/// `counts[Δx][Δy] = #{x : S(x) ⊕ S(x ⊕ Δx) = Δy}`.
#[derive(Clone, PartialEq, Eq)]
pub struct DifferenceDistributionTable {
    counts: Box<[[u16; 256]; 256]>,
}

impl std::fmt::Debug for DifferenceDistributionTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DDT(max={})", self.max_nontrivial())
    }
}

impl DifferenceDistributionTable {
    pub fn new(s: &SBox) -> DifferenceDistributionTable {
        let mut counts = Box::new([[0u16; 256]; 256]);
        for (dx, row) in counts.iter_mut().enumerate() {
            for x in 0..256usize {
                let dy = s.apply(x as u8) ^ s.apply((x ^ dx) as u8);
                row[dy as usize] += 1;
            }
        }
        DifferenceDistributionTable { counts }
    }

    pub fn get(&self, dx: u8, dy: u8) -> u16 {
        self.counts[dx as usize][dy as usize]
    }

    pub fn rows(&self) -> &[[u16; 256]; 256] {
        &self.counts
    }

    /// Largest entry outside the `Δx = 0` row.
    pub fn max_nontrivial(&self) -> u16 {
        self.counts[1..].iter().flatten().copied().max().unwrap_or(0)
    }
}

/// DDT and `max_{Δx≠0, Δy} DDT / 256`.
pub fn ddt_and_dp(s: &SBox) -> (DifferenceDistributionTable, f64) {
    let ddt = DifferenceDistributionTable::new(s);
    let dp = ddt.max_nontrivial() as f64 / 256.0;
    (ddt, dp)
}

/// `biases[Γx][Γy] = #{x : Γx·x = Γy·S(x)} − 128`.
#[derive(Clone, PartialEq, Eq)]
pub struct LinearApproximationTable {
    biases: Box<[[i16; 256]; 256]>,
}

impl std::fmt::Debug for LinearApproximationTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LAT(max={})", self.max_abs_nontrivial())
    }
}

impl LinearApproximationTable {
    pub fn new(s: &SBox) -> LinearApproximationTable {
        let mut biases = Box::new([[0i16; 256]; 256]);
        for gy in 0..=255u8 {
            let w = ComponentFunction::from_sbox(s, gy).walsh_spectrum();
            for (gx, &wv) in w.iter().enumerate() {
                biases[gx][gy as usize] = (wv / 2) as i16;
            }
        }
        LinearApproximationTable { biases }
    }

    pub fn get(&self, gx: u8, gy: u8) -> i16 {
        self.biases[gx as usize][gy as usize]
    }

    pub fn rows(&self) -> &[[i16; 256]; 256] {
        &self.biases
    }

    /// Largest `|bias|` over non-zero output masks.
    pub fn max_abs_nontrivial(&self) -> u16 {
        self.biases.iter().flat_map(|row| row[1..].iter()).map(|b| b.unsigned_abs()).max().unwrap()
    }
}

/// LAT and `max_{Γy≠0, Γx} |count/256 − 1/2|`.
pub fn lat_and_lp(s: &SBox) -> (LinearApproximationTable, f64) {
    let lat = LinearApproximationTable::new(s);
    let lp = lat.max_abs_nontrivial() as f64 / 256.0;
    (lat, lp)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub nonlinearity: u32,
    pub sac_average: f64,
    pub sac_max_offset: f64,
    pub bic_nonlinearity: u32,
    pub bic_sac: f64,
    pub dp: f64,
    pub lp: f64,
    pub bijective: bool,
}

impl MetricsReport {
    pub fn evaluate(s: &SBox) -> MetricsReport {
        let sac = sac(s);
        let bic = bic(s);
        MetricsReport {
            nonlinearity: nonlinearity(s),
            sac_average: sac.average,
            sac_max_offset: sac.max_offset,
            bic_nonlinearity: bic.nonlinearity,
            bic_sac: bic.sac,
            dp: ddt_and_dp(s).1,
            lp: lat_and_lp(s).1,
            bijective: is_bijective(s),
        }
    }
}

/// A report for one family member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxReport {
    pub rank: u32,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub count: usize,
    pub max_lp_avg: f64,
    pub max_dp_avg: f64,
    pub log2_max_lp_avg: f64,
    pub log2_max_dp_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub reports: Vec<BoxReport>,
    pub summary: BatchSummary,
}

/// Evaluates every member in parallel, then averages the per-box maximum
/// LP and DP.
pub fn batch_evaluate(family: &SBoxFamily) -> BatchReport {
    let reports: Vec<BoxReport> = (0..family.len())
        .into_par_iter()
        .map(|i| BoxReport { rank: family.ranks()[i], metrics: MetricsReport::evaluate(&family.get(i)) })
        .collect();
    let n = reports.len() as f64;
    let max_lp_avg = reports.iter().map(|r| r.metrics.lp).sum::<f64>() / n;
    let max_dp_avg = reports.iter().map(|r| r.metrics.dp).sum::<f64>() / n;
    BatchReport {
        summary: BatchSummary {
            count: reports.len(),
            max_lp_avg,
            max_dp_avg,
            log2_max_lp_avg: max_lp_avg.log2(),
            log2_max_dp_avg: max_dp_avg.log2(),
        },
        reports,
    }
}

/// One CSV row per box, with a header.
pub fn write_reports_csv<W: Write>(reports: &[BoxReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "rank",
        "nonlinearity",
        "sac_average",
        "sac_max_offset",
        "bic_nonlinearity",
        "bic_sac",
        "dp",
        "lp",
        "bijective",
    ])?;
    for r in reports {
        let m = &r.metrics;
        w.write_record([
            r.rank.to_string(),
            m.nonlinearity.to_string(),
            m.sac_average.to_string(),
            m.sac_max_offset.to_string(),
            m.bic_nonlinearity.to_string(),
            m.bic_sac.to_string(),
            m.dp.to_string(),
            m.lp.to_string(),
            m.bijective.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
