//! Chaotic generators and the tooling used to pick their parameters.
//!
//! * The modified logistic map `x ← r·x·(1 − x^{1−b})`, which reduces to the
//!   classic logistic map at `b = 0`.
//! * The TD-ERCS map (tangent-delay ellipse reflecting cavity), a two-output
//!   generator whose slope recurrence uses the tangent slope `m` steps back.
//! * Quantizers turning both streams into rotation amounts and S-box
//!   selectors, plus bifurcation scans, orbit classification and
//!   sensitivity traces.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Burn-in used for logistic orbits unless a caller asks otherwise.
pub const DEFAULT_BURN_IN: usize = 500;
/// Default tolerance of [`classify_orbit`].
pub const DEFAULT_ORBIT_TOLERANCE: f64 = 1e-6;
/// Tolerance at which orbits are judged the way an iteration plot shows
/// them: bands narrower than this read as a periodic orbit. Used for the
/// key-regime guard.
pub const PLOT_ORBIT_TOLERANCE: f64 = 0.05;
/// Largest period [`classify_orbit`] looks for.
pub const MAX_PERIOD: usize = 16;
/// Minimum length accepted by [`classify_orbit`].
pub const MIN_ORBIT_LEN: usize = 64;
/// `|Δx|` above which two trajectories count as separated.
pub const DIVERGENCE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChaosError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("orbit left [0, 10] at iterate {index} (value {value})")]
    DivergedOrbit { index: usize, value: f64 },
    #[error("degenerate TD-ERCS seed: x0 = ±1 puts the start point on the ellipse's x-axis")]
    DegenerateSeed,
    #[error("TD-ERCS iterate {index} blew up (x = {value})")]
    NumericalBlowup { index: usize, value: f64 },
    #[error("value {0} is outside the quantizer's domain")]
    ValueOutOfRange(f64),
    #[error("sequence of length {0} is too short to classify (need {MIN_ORBIT_LEN})")]
    TooShort(usize),
    #[error("parameter sets are identical")]
    IdenticalParams,
    #[error("parameter sets must differ in exactly one field, found {0}")]
    MultipleFieldsDiffer(usize),
}

/// Seed of the modified logistic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub x0: f64,
    pub b: f64,
    pub r: f64,
}

impl LogisticParams {
    pub fn new(x0: f64, b: f64, r: f64) -> Result<LogisticParams, ChaosError> {
        let p = LogisticParams { x0, b, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ChaosError> {
        if !(self.x0 > 0.0 && self.x0 < 1.0) {
            return Err(ChaosError::InvalidParams(format!("x0 = {} is not in (0,1)", self.x0)));
        }
        if !(self.b >= 0.0 && self.b < 1.0) {
            return Err(ChaosError::InvalidParams(format!("b = {} is not in [0,1)", self.b)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(ChaosError::InvalidParams(format!("r = {} is not positive", self.r)));
        }
        Ok(())
    }
}

/// One step of the modified logistic map. `x^{1−b}` is evaluated as
/// `exp((1−b)·ln x)`; zero maps to zero.
#[inline]
pub fn logistic_step(x: f64, b: f64, r: f64) -> f64 {
    let pow = if x == 0.0 { 0.0 } else { ((1.0 - b) * x.ln()).exp() };
    r * x * (1.0 - pow)
}

/// Stateful generator for the modified logistic map.
#[derive(Debug, Clone)]
pub struct LogisticMap {
    params: LogisticParams,
    x: f64,
    index: usize,
}

impl LogisticMap {
    pub fn new(params: LogisticParams) -> Result<LogisticMap, ChaosError> {
        params.validate()?;
        Ok(LogisticMap { params, x: params.x0, index: 0 })
    }

    /// Advances one step and returns the new iterate.
    pub fn next_value(&mut self) -> Result<f64, ChaosError> {
        let x = logistic_step(self.x, self.params.b, self.params.r);
        self.index += 1;
        if !(0.0..=10.0).contains(&x) {
            return Err(ChaosError::DivergedOrbit { index: self.index, value: x });
        }
        self.x = x;
        Ok(x)
    }
}

/// Iterates `burn_in + n` times from `x0` and returns the last `n` iterates.
pub fn logistic_sequence(p: &LogisticParams, n: usize, burn_in: usize) -> Result<Vec<f64>, ChaosError> {
    if n == 0 {
        return Err(ChaosError::InvalidParams("n must be at least 1".into()));
    }
    let mut map = LogisticMap::new(*p)?;
    for _ in 0..burn_in {
        map.next_value()?;
    }
    (0..n).map(|_| map.next_value()).collect()
}

/// Seed of the TD-ERCS map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdErcsParams {
    pub x0: f64,
    pub tan_alpha: f64,
    pub mu: f64,
    pub m: usize,
}

impl TdErcsParams {
    pub fn new(x0: f64, tan_alpha: f64, mu: f64, m: usize) -> Result<TdErcsParams, ChaosError> {
        let p = TdErcsParams { x0, tan_alpha, mu, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ChaosError> {
        if !(-1.0..=1.0).contains(&self.x0) {
            return Err(ChaosError::InvalidParams(format!("x0 = {} is not in [-1,1]", self.x0)));
        }
        if !self.tan_alpha.is_finite() {
            return Err(ChaosError::InvalidParams("tan_alpha must be finite".into()));
        }
        if !(self.mu > 0.05 && self.mu < 1.0) {
            return Err(ChaosError::InvalidParams(format!("mu = {} is not in (0.05,1)", self.mu)));
        }
        if self.m < 2 {
            return Err(ChaosError::InvalidParams(format!("m = {} must be at least 2", self.m)));
        }
        if self.x0.abs() == 1.0 {
            return Err(ChaosError::DegenerateSeed);
        }
        Ok(())
    }
}

/// Current point of the TD-ERCS orbit and the last `m` points, from which
/// the delayed tangent slope is taken.
#[derive(Debug, Clone)]
pub struct TdErcsState {
    pub x: f64,
    pub y: f64,
    pub k: f64,
    /// Most recent last; holds `min(n + 1, m)` points.
    history: VecDeque<(f64, f64)>,
}

impl TdErcsState {
    pub fn history(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.history.iter()
    }
}

/// Stateful TD-ERCS generator.
///
/// With `(x, y)` on the ellipse `x² + y²/μ² = 1` and chord slope `k`:
///
/// ```text
/// x_n  = −(2·k_{n−1}·y_{n−1} + x_{n−1}(μ² − k_{n−1}²)) / (μ² + k_{n−1}²)
/// y_n  = k_{n−1}(x_n − x_{n−1}) + y_{n−1}
/// k'   = −(x_j / y_j)·μ²        j = n − m if n ≥ m, else n − 1
/// k_n  = −(2k' − k_{n−1} + k_{n−1}·k'²) / (1 + 2·k_{n−1}·k' − k'²)
/// ```
///
/// started from `y0 = μ√(1 − x0²)`, `k0' = −(x0/y0)μ²` and
/// `k0 = (tanα + k0') / (1 − k0'·tanα)`.
#[derive(Debug, Clone)]
pub struct TdErcs {
    params: TdErcsParams,
    state: TdErcsState,
    n: usize,
}

impl TdErcs {
    pub fn new(params: TdErcsParams) -> Result<TdErcs, ChaosError> {
        params.validate()?;
        let mu2 = params.mu * params.mu;
        let y0 = params.mu * (1.0 - params.x0 * params.x0).sqrt();
        let k0_tangent = -(params.x0 / y0) * mu2;
        let k0 = (params.tan_alpha + k0_tangent) / (1.0 - k0_tangent * params.tan_alpha);
        let mut history = VecDeque::with_capacity(params.m);
        history.push_back((params.x0, y0));
        Ok(TdErcs { params, state: TdErcsState { x: params.x0, y: y0, k: k0, history }, n: 0 })
    }

    pub fn state(&self) -> &TdErcsState {
        &self.state
    }

    /// Advances one step and returns `(x_n, k_n)`.
    pub fn next_pair(&mut self) -> Result<(f64, f64), ChaosError> {
        let mu2 = self.params.mu * self.params.mu;
        let TdErcsState { x, y, k, .. } = self.state;
        let n = self.n + 1;

        let x_next = -(2.0 * k * y + x * (mu2 - k * k)) / (mu2 + k * k);
        let y_next = k * (x_next - x) + y;

        // history holds points n−1, n−2, … (most recent last); the delayed
        // point is n−m once n ≥ m and n−1 before that.
        let (xd, yd) = if n >= self.params.m {
            self.state.history[self.state.history.len() - self.params.m]
        } else {
            *self.state.history.back().expect("history never empty")
        };
        let kd = -(xd / yd) * mu2;
        let k_next = -(2.0 * kd - k + k * kd * kd) / (1.0 + 2.0 * k * kd - kd * kd);

        if !x_next.is_finite() || !y_next.is_finite() || x_next.abs() > 1.0 + 1e-6 {
            return Err(ChaosError::NumericalBlowup { index: n, value: x_next });
        }
        if !k_next.is_finite() {
            return Err(ChaosError::NumericalBlowup { index: n, value: k_next });
        }

        self.state.history.push_back((x_next, y_next));
        if self.state.history.len() > self.params.m {
            self.state.history.pop_front();
        }
        self.state.x = x_next;
        self.state.y = y_next;
        self.state.k = k_next;
        self.n = n;
        Ok((x_next, k_next))
    }
}

/// The first `n` iterates `x_1..x_n` and `k_1..k_n`.
pub fn tdercs_sequence(p: &TdErcsParams, n: usize) -> Result<(Vec<f64>, Vec<f64>), ChaosError> {
    let mut gen = TdErcs::new(*p)?;
    let mut xs = Vec::with_capacity(n);
    let mut ks = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, k) = gen.next_pair()?;
        xs.push(x);
        ks.push(k);
    }
    Ok((xs, ks))
}

/// Rotation amounts: `v ↦ ⌊100·v⌋ mod 8` for `v ∈ (0, 1)`.
pub fn quantize_shifts(xs: &[f64]) -> Result<Vec<u8>, ChaosError> {
    xs.iter()
        .map(|&v| {
            if v > 0.0 && v < 1.0 {
                Ok(((v * 100.0).floor() as u64 % 8) as u8)
            } else {
                Err(ChaosError::ValueOutOfRange(v))
            }
        })
        .collect()
}

/// S-box selectors: `v ↦ ⌊1000·(v + 1)⌋ mod s_n` for `v ∈ [−1, 1]`.
pub fn quantize_selectors(ys: &[f64], s_n: usize) -> Result<Vec<u32>, ChaosError> {
    if s_n == 0 {
        return Err(ChaosError::InvalidParams("s_n must be at least 1".into()));
    }
    ys.iter()
        .map(|&v| {
            if (-1.0..=1.0).contains(&v) {
                Ok((((v + 1.0) * 1000.0).floor() as u64 % s_n as u64) as u32)
            } else {
                Err(ChaosError::ValueOutOfRange(v))
            }
        })
        .collect()
}

/// Long-run behaviour of an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "period", rename_all = "lowercase")]
pub enum OrbitClass {
    Fixed,
    Periodic(usize),
    Aperiodic,
}

/// Classifies the second half of `seq`: `Fixed` if consecutive values agree
/// within `tol`, `Periodic(p)` for the smallest `p ≤ 16` with
/// `|x_{i+p} − x_i| < tol` throughout, `Aperiodic` otherwise.
pub fn classify_orbit(seq: &[f64], tol: f64) -> Result<OrbitClass, ChaosError> {
    if seq.len() < MIN_ORBIT_LEN {
        return Err(ChaosError::TooShort(seq.len()));
    }
    if !(tol > 0.0) {
        return Err(ChaosError::InvalidParams(format!("tol = {tol} must be positive")));
    }
    let tail = &seq[seq.len() / 2..];
    let repeats = |p: usize| tail.iter().zip(&tail[p..]).all(|(a, b)| (a - b).abs() < tol);
    if repeats(1) {
        return Ok(OrbitClass::Fixed);
    }
    Ok((2..=MAX_PERIOD).find(|&p| repeats(p)).map_or(OrbitClass::Aperiodic, OrbitClass::Periodic))
}

/// One point of a bifurcation scan. `x` is `None` when the orbit diverged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationRow {
    pub r: f64,
    pub x: Option<f64>,
}

/// For every `r` on the grid, `keep` iterates after `burn_in`, starting
/// from `x0 = 0.5`. A diverged orbit is emitted as one row with no value.
pub fn bifurcation_scan(
    b: f64,
    r_from: f64,
    r_to: f64,
    r_step: f64,
    burn_in: usize,
    keep: usize,
) -> Result<Vec<BifurcationRow>, ChaosError> {
    if !(r_from < r_to) || !(r_step > 0.0) {
        return Err(ChaosError::InvalidParams("need r_from < r_to and r_step > 0".into()));
    }
    let steps = ((r_to - r_from) / r_step + 1e-9).floor() as usize;
    let rows = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let r = r_from + i as f64 * r_step;
            match LogisticParams::new(0.5, b, r).and_then(|p| logistic_sequence(&p, keep, burn_in)) {
                Ok(xs) => xs.into_iter().map(|x| BifurcationRow { r, x: Some(x) }).collect(),
                Err(_) => vec![BifurcationRow { r, x: None }],
            }
        })
        .collect::<Vec<Vec<BifurcationRow>>>();
    Ok(rows.into_iter().flatten().collect())
}

/// `r,x` rows with a header; diverged orbits have an empty `x`.
pub fn write_bifurcation_csv<W: Write>(rows: &[BifurcationRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "x"])?;
    for row in rows {
        w.write_record([row.r.to_string(), row.x.map(|x| x.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters of either generator, for sensitivity comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "lowercase")]
pub enum ChaosParams {
    Logistic(LogisticParams),
    TdErcs(TdErcsParams),
}

impl ChaosParams {
    fn x_sequence(&self, n: usize) -> Result<Vec<f64>, ChaosError> {
        match self {
            ChaosParams::Logistic(p) => logistic_sequence(p, n, 0),
            ChaosParams::TdErcs(p) => tdercs_sequence(p, n).map(|(x, _)| x),
        }
    }

    fn differing_fields(&self, other: &ChaosParams) -> Option<usize> {
        match (self, other) {
            (ChaosParams::Logistic(a), ChaosParams::Logistic(b)) => {
                Some([a.x0 != b.x0, a.b != b.b, a.r != b.r].iter().filter(|&&d| d).count())
            }
            (ChaosParams::TdErcs(a), ChaosParams::TdErcs(b)) => Some(
                [a.x0 != b.x0, a.tan_alpha != b.tan_alpha, a.mu != b.mu, a.m != b.m]
                    .iter()
                    .filter(|&&d| d)
                    .count(),
            ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceTrace {
    /// First iterate index (0-based) with `|Δx| > 0.1`.
    pub first_divergence: Option<usize>,
    pub deltas: Vec<f64>,
}

/// Runs both parameter sets for `n` iterates (no burn-in) and traces `|Δx|`.
pub fn sensitivity_divergence(
    p1: &ChaosParams,
    p2: &ChaosParams,
    n: usize,
) -> Result<DivergenceTrace, ChaosError> {
    match p1.differing_fields(p2) {
        None => return Err(ChaosError::InvalidParams("parameter sets are for different maps".into())),
        Some(0) => return Err(ChaosError::IdenticalParams),
        Some(1) => {}
        Some(k) => return Err(ChaosError::MultipleFieldsDiffer(k)),
    }
    let a = p1.x_sequence(n)?;
    let b = p2.x_sequence(n)?;
    let deltas: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
    let first_divergence = deltas.iter().position(|&d| d > DIVERGENCE_THRESHOLD);
    Ok(DivergenceTrace { first_divergence, deltas })
}

/// `n,delta` rows with a header.
pub fn write_trace_csv<W: Write>(trace: &DivergenceTrace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "delta"])?;
    for (i, d) in trace.deltas.iter().enumerate() {
        w.write_record([i.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logistic(x0: f64, b: f64, r: f64) -> LogisticParams {
        LogisticParams::new(x0, b, r).unwrap()
    }

    #[test]
    fn logistic_examples() {
        assert_eq!(logistic_sequence(&logistic(0.5, 0.0, 4.0), 1, 0).unwrap(), vec![1.0]);
        let xs = logistic_sequence(&logistic(0.3, 0.0, 2.0), 100, 500).unwrap();
        assert!(xs.iter().all(|x| (x - 0.5).abs() < 1e-9));
        let xs = logistic_sequence(&logistic(0.5, 0.2, 2.5), 100, 500).unwrap();
        assert_eq!(classify_orbit(&xs, DEFAULT_ORBIT_TOLERANCE).unwrap(), OrbitClass::Fixed);
    }

    #[test]
    fn b_zero_is_classic_logistic() {
        let p = logistic(0.123, 0.0, 3.9);
        let xs = logistic_sequence(&p, 1000, 0).unwrap();
        let mut x = p.x0;
        for got in xs {
            let classic = p.r * x * (1.0 - x);
            assert!((got - classic).abs() <= 1e-12 * classic.abs().max(1.0), "{got} vs {classic}");
            x = got;
        }
    }

    #[test]
    fn divergence_reported() {
        let err = logistic_sequence(&logistic(0.5, 0.0, 5.0), 10, 0).unwrap_err();
        assert!(matches!(err, ChaosError::DivergedOrbit { .. }));
    }

    #[test]
    fn invalid_params() {
        assert!(LogisticParams::new(0.0, 0.2, 4.3).is_err());
        assert!(LogisticParams::new(0.5, 1.0, 4.3).is_err());
        assert!(TdErcsParams::new(0.5, 1.0, 0.05, 3).is_err());
        assert!(TdErcsParams::new(0.5, 1.0, 0.5, 1).is_err());
        assert_eq!(TdErcsParams::new(1.0, 1.0, 0.5, 3).unwrap_err(), ChaosError::DegenerateSeed);
    }

    #[test]
    fn tdercs_initial_values() {
        let gen = TdErcs::new(TdErcsParams::new(0.0, 1.0, 0.5, 3).unwrap()).unwrap();
        assert_eq!(gen.state().y, 0.5);
        assert_eq!(gen.state().k, 1.0);
        let gen = TdErcs::new(TdErcsParams::new(0.0, 0.3, 0.5, 3).unwrap()).unwrap();
        // k0' = 0 so k0 = tanα.
        assert_eq!(gen.state().k, 0.3);
    }

    /// The recurrences written out again with plain vectors for history.
    fn tdercs_oracle(p: &TdErcsParams, n: usize) -> Vec<f64> {
        let mu2 = p.mu * p.mu;
        let mut xs = vec![p.x0];
        let mut ys = vec![p.mu * (1.0 - p.x0 * p.x0).sqrt()];
        let kp0 = -(xs[0] / ys[0]) * mu2;
        let mut k = (p.tan_alpha + kp0) / (1.0 - kp0 * p.tan_alpha);
        for step in 1..=n {
            let (xp, yp) = (xs[step - 1], ys[step - 1]);
            let x = -(2.0 * k * yp + xp * (mu2 - k * k)) / (mu2 + k * k);
            let y = k * (x - xp) + yp;
            let j = if step >= p.m { step - p.m } else { step - 1 };
            let kd = -(xs[j] / ys[j]) * mu2;
            k = -(2.0 * kd - k + k * kd * kd) / (1.0 + 2.0 * k * kd - kd * kd);
            xs.push(x);
            ys.push(y);
        }
        xs.split_off(1)
    }

    #[test]
    fn tdercs_matches_oracle_and_stays_on_ellipse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = TdErcsParams::new(
                rng.gen_range(-0.99..0.99),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(0.06..0.99),
                rng.gen_range(2..8),
            )
            .unwrap();
            let (xs, _) = match tdercs_sequence(&p, 10_000) {
                Ok(v) => v,
                Err(ChaosError::NumericalBlowup { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            assert!(xs.iter().all(|x| x.abs() <= 1.0 + 1e-9));
            let oracle = tdercs_oracle(&p, 200);
            assert_eq!(&xs[..200], &oracle[..]);
        }
    }

    #[test]
    fn shift_quantizer() {
        assert_eq!(quantize_shifts(&[0.031, 0.009, 0.17]).unwrap(), vec![3, 0, 1]);
        assert!(quantize_shifts(&[0.0]).is_err());
        assert!(quantize_shifts(&[1.0]).is_err());
    }

    #[test]
    fn selector_quantizer() {
        assert_eq!(quantize_selectors(&[-1.0], 7).unwrap(), vec![0]);
        assert_eq!(quantize_selectors(&[0.105], 256).unwrap(), vec![81]);
        assert_eq!(quantize_selectors(&[0.3, -0.2, 0.9], 1).unwrap(), vec![0, 0, 0]);
        assert!(quantize_selectors(&[1.5], 256).is_err());
        assert!(quantize_selectors(&[0.0], 0).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_orbit(&[0.3; 64], 1e-6).unwrap(), OrbitClass::Fixed);
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.2 } else { 0.7 }).collect();
        assert_eq!(classify_orbit(&alt, 1e-6).unwrap(), OrbitClass::Periodic(2));
        assert_eq!(classify_orbit(&[0.1; 10], 1e-6).unwrap_err(), ChaosError::TooShort(10));
        let chaotic = logistic_sequence(&logistic(0.5, 0.2, 4.3), 1000, 500).unwrap();
        assert_eq!(classify_orbit(&chaotic, 1e-6).unwrap(), OrbitClass::Aperiodic);
    }

    #[test]
    fn bifurcation_fixed_regime() {
        let rows = bifurcation_scan(0.0, 2.5, 2.9, 0.05, 500, 50).unwrap();
        assert_eq!(rows.len(), 9 * 50);
        for chunk in rows.chunks(50) {
            let xs: Vec<f64> = chunk.iter().map(|r| r.x.unwrap()).collect();
            assert!(xs.iter().all(|x| (x - xs[0]).abs() < 1e-6), "r = {}", chunk[0].r);
        }
        let rows = bifurcation_scan(0.2, 1.1, 3.4, 0.1, 500, 64).unwrap();
        for chunk in rows.chunks(64) {
            let xs: Vec<f64> = chunk.iter().map(|r| r.x.unwrap()).collect();
            assert_eq!(classify_orbit(&xs, DEFAULT_ORBIT_TOLERANCE).unwrap(), OrbitClass::Fixed);
        }
    }

    #[test]
    fn bifurcation_marks_divergence() {
        let rows = bifurcation_scan(0.0, 4.5, 5.0, 0.5, 10, 5).unwrap();
        assert_eq!(rows.iter().filter(|r| r.x.is_none()).count(), 2);
        let mut buf = Vec::new();
        write_bifurcation_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("r,x\n4.5,\n"));
    }

    #[test]
    fn sensitivity() {
        let a = ChaosParams::Logistic(logistic(0.5, 0.2, 4.5));
        let b = ChaosParams::Logistic(logistic(0.5 + 1e-10, 0.2, 4.5));
        let t = sensitivity_divergence(&a, &b, 500).unwrap();
        let i = t.first_divergence.unwrap();
        assert!((10..=60).contains(&i), "{i}");
        assert_eq!(sensitivity_divergence(&a, &a, 10).unwrap_err(), ChaosError::IdenticalParams);
        let c = ChaosParams::Logistic(logistic(0.5, 0.2 + 1e-10, 4.5));
        assert!(sensitivity_divergence(&a, &c, 500).unwrap().first_divergence.is_some());
        let d = ChaosParams::Logistic(logistic(0.6, 0.3, 4.5));
        assert_eq!(sensitivity_divergence(&a, &d, 10).unwrap_err(), ChaosError::MultipleFieldsDiffer(2));
    }

    #[test]
    fn deterministic() {
        let p = logistic(0.41, 0.2, 4.5);
        assert_eq!(logistic_sequence(&p, 500, 500).unwrap(), logistic_sequence(&p, 500, 500).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn quantizers_stay_in_range(v in 1e-9f64..(1.0 - 1e-9), w in -1.0f64..=1.0, s_n in 1usize..50_000) {
            let s = quantize_shifts(&[v]).unwrap()[0];
            proptest::prop_assert!(s < 8);
            let q = quantize_selectors(&[w], s_n).unwrap()[0];
            proptest::prop_assert!((q as usize) < s_n);
        }
    }
}
