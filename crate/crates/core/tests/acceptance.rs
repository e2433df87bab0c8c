//! Acceptance gate. Each test checks one criterion, prints a single
//! `criterion N PASS|FAIL: ...` line and then asserts it.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfspn::chaos::{
    classify_orbit, logistic_sequence, sensitivity_divergence, ChaosError, ChaosParams, LogisticParams, OrbitClass,
    TdErcsParams, DEFAULT_BURN_IN, DEFAULT_ORBIT_TOLERANCE, PLOT_ORBIT_TOLERANCE,
};
use sfspn::cipher::{Cipher, CipherError, CipherKeyBundle};
use sfspn::evaluation::{differential_protocol, encrypt_image, key_sensitivity};
use sfspn::image::{glcm_features, image_report, neighbour_pairs, GlcmConfig, GlcmFeatures, GrayImage};
use sfspn::metrics::{ComponentFunction, MetricsReport};
use sfspn::nist::{bits_from_reals, monobit, run_nist_subset, BitRule, Decision};
use sfspn::sbox::{generate_family, load_fixture_sbox, BitPermutation, SBox, SBoxFamily, S8_ORDER};
use sfspn::semifield::MulTable;

const AES_SAC: f64 = 0.504;
const AES_SAC_TOL: f64 = 0.001;
const FIXTURE_SAC: f64 = 0.503;
const FIXTURE_BIC_SAC: f64 = 0.501;
const FIXTURE_TOL: f64 = 0.002;
const OPTIMAL_NL: u32 = 112;
const OPTIMAL_DP: f64 = 0.015625;
const OPTIMAL_LP: f64 = 0.0625;
const NPCR_MIN: f64 = 99.0;
const UACI_BAND: (f64, f64) = (32.3, 34.3);
const ENTROPY_MIN: f64 = 7.99;
const UNIFORMITY_P_MIN: f64 = 0.01;
const HOMOGENEITY_MIN: f64 = 0.99;
const ENERGY_MIN: f64 = 0.98;
/// "Much smaller than" for the contrast comparison.
const CONTRAST_RATIO_MAX: f64 = 0.1;
const DIVERGENCE_MAX_INDEX: usize = 200;
const NIST_BITS: usize = 100_000;
const NIST_SIGNIFICANCE: f64 = 0.01;
const ORACLE_TOL: f64 = 1e-9;

fn report(n: u32, pass: bool, detail: impl AsRef<str>) {
    println!("criterion {n:>2} {}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    assert!(pass, "criterion {n} failed: {}", detail.as_ref());
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn camera() -> GrayImage {
    GrayImage::read_pgm(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/camera_256.pgm")).unwrap()
}

fn image_keys() -> CipherKeyBundle {
    CipherKeyBundle::new(
        [0x00, 0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88, 0x99, 0xaa, 0xbb, 0xcc, 0xdd, 0xee, 0xff],
        LogisticParams::new(0.5, 0.2, 4.5).unwrap(),
        TdErcsParams::new(0.5, 1.0, 0.5, 3).unwrap(),
    )
    .unwrap()
}

fn image_family() -> SBoxFamily {
    generate_family(&load_fixture_sbox().unwrap(), 256).unwrap()
}

fn in_band(v: f64, band: (f64, f64)) -> bool {
    v >= band.0 && v <= band.1
}

#[test]
fn criterion_01_aes_analyzer() {
    let t = Instant::now();
    let m = MetricsReport::evaluate(&SBox::aes());
    let elapsed = t.elapsed();
    let pass = m.nonlinearity == OPTIMAL_NL
        && (m.sac_average - AES_SAC).abs() <= AES_SAC_TOL
        && m.bic_nonlinearity == OPTIMAL_NL
        && m.dp == OPTIMAL_DP
        && m.lp == OPTIMAL_LP
        && within(elapsed, 5);
    report(
        1,
        pass,
        format!(
            "AES NL {} SAC {:.7} BIC-NL {} DP {} LP {} in {:.2?}",
            m.nonlinearity, m.sac_average, m.bic_nonlinearity, m.dp, m.lp, elapsed
        ),
    );
}

#[test]
fn criterion_02_fixture_metrics() {
    let s = load_fixture_sbox().expect("fixture must be bijective; otherwise an erratum is required");
    let m = MetricsReport::evaluate(&s);
    let pass = m.bijective
        && m.nonlinearity == OPTIMAL_NL
        && (m.sac_average - FIXTURE_SAC).abs() <= FIXTURE_TOL
        && m.bic_nonlinearity == OPTIMAL_NL
        && (m.bic_sac - FIXTURE_BIC_SAC).abs() <= FIXTURE_TOL
        && m.dp == OPTIMAL_DP
        && m.lp == OPTIMAL_LP;
    report(
        2,
        pass,
        format!(
            "fixture bijective {} NL {} SAC {:.7} BIC-NL {} BIC-SAC {:.7} DP {} LP {}",
            m.bijective, m.nonlinearity, m.sac_average, m.bic_nonlinearity, m.bic_sac, m.dp, m.lp
        ),
    );
}

#[test]
fn criterion_03_s8_invariance() {
    let t = Instant::now();
    let seed = load_fixture_sbox().unwrap();
    let base = MetricsReport::evaluate(&seed);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ranks: Vec<u32> = (0..50).map(|_| rng.gen_range(0..S8_ORDER)).collect();
    let mismatches: Vec<u32> = ranks
        .iter()
        .copied()
        .filter(|&r| MetricsReport::evaluate(&seed.permute_output_bits(&BitPermutation::unrank(r).unwrap())) != base)
        .collect();
    let elapsed = t.elapsed();
    report(
        3,
        mismatches.is_empty() && within(elapsed, 30),
        format!("50 random ranks, {} with differing metrics, {:.2?}", mismatches.len(), elapsed),
    );
}

#[test]
fn criterion_04_semifield_axioms() {
    let t = Instant::now();
    let result = MulTable::semifield().check_axioms();
    let elapsed = t.elapsed();
    let (pass, detail) = match &result {
        Ok(r) => (
            r.associativity_witness.is_some() && within(elapsed, 1),
            format!(
                "axioms hold; {} non-associative triples, first {:?}; {:.2?}",
                r.non_associative_triples, r.associativity_witness, elapsed
            ),
        ),
        Err(e) => (false, e.to_string()),
    };
    report(4, pass, detail);
}

fn random_keys(rng: &mut ChaCha8Rng) -> CipherKeyBundle {
    loop {
        let mut k1 = [0u8; 16];
        rng.fill(&mut k1);
        let k2 = LogisticParams { x0: rng.gen_range(0.01..0.99), b: rng.gen_range(0.1..0.3), r: rng.gen_range(4.25..4.6) };
        let k3 = TdErcsParams {
            x0: rng.gen_range(-0.99..0.99),
            tan_alpha: rng.gen_range(-4.0..4.0),
            mu: rng.gen_range(0.1..0.99),
            m: rng.gen_range(2..9),
        };
        if let Ok(k) = CipherKeyBundle::new(k1, k2, k3) {
            return k;
        }
    }
}

#[test]
fn criterion_05_roundtrip() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seed = load_fixture_sbox().unwrap();
    let families: Vec<SBoxFamily> = [1, 8, 256].iter().map(|&n| generate_family(&seed, n).unwrap()).collect();
    let (mut ok, mut failures, mut redrawn) = (0, Vec::new(), 0);
    for i in 0..200 {
        let len = rng.gen_range(1..=4096);
        let p: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let family = &families[i % 3];
        let rounds = if (i / 3) % 2 == 0 { 1 } else { 6 };
        loop {
            let cipher = Cipher::new(random_keys(&mut rng), family).unwrap();
            match cipher.encrypt(&p, rounds) {
                Ok(ct) => {
                    if cipher.decrypt(&ct).as_deref() == Ok(&p[..]) {
                        ok += 1;
                    } else {
                        failures.push(i);
                    }
                    break;
                }
                // Keys whose TD-ERCS orbit is undefined at this length cannot
                // encrypt at all; draw another bundle.
                Err(CipherError::Chaos(ChaosError::NumericalBlowup { .. })) => redrawn += 1,
                Err(e) => panic!("encryption failed: {e}"),
            }
        }
    }
    let elapsed = t.elapsed();
    report(
        5,
        failures.is_empty() && ok == 200 && within(elapsed, 60),
        format!("{ok}/200 roundtrips exact ({redrawn} key bundles redrawn after generator blow-up), {elapsed:.2?}"),
    );
}

#[test]
fn criterion_06_npcr_uaci() {
    let t = Instant::now();
    let cipher = Cipher::new(image_keys(), &image_family()).unwrap();
    let rows = differential_protocol(&cipher, &camera(), 6).unwrap();
    let elapsed = t.elapsed();
    let pass = rows.iter().all(|r| r.npcr > NPCR_MIN && in_band(r.uaci, UACI_BAND)) && within(elapsed, 120);
    let detail: Vec<String> =
        rows.iter().map(|r| format!("({},{}) NPCR {:.4}% UACI {:.4}%", r.row, r.col, r.npcr, r.uaci)).collect();
    report(6, pass, format!("{}; {elapsed:.2?}", detail.join(", ")));
}

#[test]
fn criterion_07_key_sensitivity() {
    let ks = key_sensitivity(&image_keys(), &image_family(), &camera(), 6, 0).unwrap();
    let ok = |v: &sfspn::image::NpcrUaci| v.npcr > NPCR_MIN && in_band(v.uaci, UACI_BAND);
    report(
        7,
        ok(&ks.encryption) && ok(&ks.decryption),
        format!(
            "k1 bit flip at encryption NPCR {:.4}% UACI {:.4}%; at decryption NPCR {:.4}% UACI {:.4}% (k2.b + 1e-10 at decryption: NPCR {:.4}% UACI {:.4}%)",
            ks.encryption.npcr,
            ks.encryption.uaci,
            ks.decryption.npcr,
            ks.decryption.uaci,
            ks.b_perturbed.npcr,
            ks.b_perturbed.uaci
        ),
    );
}

#[test]
fn criterion_08_ciphertext_statistics() {
    let plain = camera();
    let cipher = Cipher::new(image_keys(), &image_family()).unwrap();
    let (ct, _) = encrypt_image(&cipher, &plain, 6).unwrap();
    let cfg = GlcmConfig::matlab_default();
    let c = image_report(&ct, cfg).unwrap();
    let p = image_report(&plain, cfg).unwrap();
    let full_c = glcm_features(&ct, GlcmConfig::default()).unwrap();
    let full_p = glcm_features(&plain, GlcmConfig::default()).unwrap();
    let checks = [
        ("entropy", c.entropy >= ENTROPY_MIN),
        ("uniformity", c.histogram_p_value >= UNIFORMITY_P_MIN),
        ("homogeneity", c.glcm.homogeneity >= HOMOGENEITY_MIN),
        ("energy", c.glcm.energy >= ENERGY_MIN),
        ("contrast", c.glcm.contrast <= CONTRAST_RATIO_MAX * p.glcm.contrast),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    report(
        8,
        failed.is_empty(),
        format!(
            "entropy {:.4} chi2 p {:.4} homogeneity {:.4} energy {:.4} contrast {:.4} vs plaintext {:.4} \
             (256-level symmetric GLCM: cipher contrast {:.1} vs plaintext {:.1}); failing: {:?}",
            c.entropy,
            c.histogram_p_value,
            c.glcm.homogeneity,
            c.glcm.energy,
            c.glcm.contrast,
            p.glcm.contrast,
            full_c.contrast,
            full_p.contrast,
            failed
        ),
    );
}

#[test]
fn criterion_09_chaotic_regimes() {
    let t = Instant::now();
    let expected: [(f64, fn(OrbitClass) -> bool); 7] = [
        (2.5, |c| c == OrbitClass::Fixed),
        (3.7, |c| c == OrbitClass::Periodic(2)),
        (4.41, |c| matches!(c, OrbitClass::Periodic(_))),
        (4.52, |c| matches!(c, OrbitClass::Periodic(_))),
        (4.3, |c| c == OrbitClass::Aperiodic),
        (4.5, |c| c == OrbitClass::Aperiodic),
        (4.56, |c| c == OrbitClass::Aperiodic),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (r, ok) in expected {
        let xs = logistic_sequence(&LogisticParams::new(0.5, 0.2, r).unwrap(), 2000, DEFAULT_BURN_IN).unwrap();
        let plot = classify_orbit(&xs, PLOT_ORBIT_TOLERANCE).unwrap();
        let strict = classify_orbit(&xs, DEFAULT_ORBIT_TOLERANCE).unwrap();
        pass &= ok(plot);
        parts.push(format!("r={r} {plot:?} (tol 1e-6: {strict:?})"));
    }
    let base = LogisticParams::new(0.5, 0.2, 4.5).unwrap();
    for (name, p) in [
        ("x0", LogisticParams { x0: base.x0 + 1e-10, ..base }),
        ("r", LogisticParams { r: base.r + 1e-10, ..base }),
        ("b", LogisticParams { b: base.b + 1e-10, ..base }),
    ] {
        let trace =
            sensitivity_divergence(&ChaosParams::Logistic(base), &ChaosParams::Logistic(p), DIVERGENCE_MAX_INDEX + 1)
                .unwrap();
        pass &= trace.first_divergence.is_some_and(|i| i <= DIVERGENCE_MAX_INDEX);
        parts.push(format!("d{name} diverges at {:?}", trace.first_divergence));
    }
    let elapsed = t.elapsed();
    report(9, pass && within(elapsed, 30), format!("{}; {elapsed:.2?}", parts.join(", ")));
}

#[test]
fn criterion_10_nist_subset() {
    let xs =
        logistic_sequence(&LogisticParams::new(0.5, 0.2, 4.3).unwrap(), NIST_BITS / 8, DEFAULT_BURN_IN).unwrap();
    let stream = bits_from_reals(&xs, BitRule::LowByte).unwrap();
    let reports = run_nist_subset(&stream).unwrap();
    let pass = stream.len() >= NIST_BITS
        && reports.iter().all(|r| r.decision == Decision::Passed && r.p_value.unwrap() >= NIST_SIGNIFICANCE);
    let detail: Vec<String> = reports
        .iter()
        .map(|r| {
            let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!("{}[{}] {:.4}", r.test, params.join(","), r.p_value.unwrap_or(f64::NAN))
        })
        .collect();
    report(10, pass, format!("{} bits: {}", stream.len(), detail.join("; ")));
}

fn brute_force_nonlinearity(s: &SBox) -> u32 {
    let mut best = u32::MAX;
    for mask in 1..=255u8 {
        let f: Vec<u8> = (0..=255u8).map(|x| ((s.apply(x) & mask).count_ones() % 2) as u8).collect();
        for a in 0..=255u8 {
            let lin: Vec<u8> = (0..=255u8).map(|x| ((x & a).count_ones() % 2) as u8).collect();
            let d = f.iter().zip(&lin).filter(|(x, y)| x != y).count() as u32;
            best = best.min(d).min(256 - d);
        }
    }
    best
}

fn walsh_nonlinearity(s: &SBox) -> u32 {
    (1..=255u8).map(|m| ComponentFunction::from_sbox(s, m).nonlinearity()).min().unwrap()
}

fn pair_features(img: &GrayImage, cfg: GlcmConfig) -> GlcmFeatures {
    let mut pairs = Vec::new();
    for (a, b) in neighbour_pairs(img, cfg.offset) {
        let (i, j) = (cfg.level(a) as f64, cfg.level(b) as f64);
        pairs.push((i, j));
        if cfg.symmetric {
            pairs.push((j, i));
        }
    }
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    let (mi, mj) = (mean(&|p| p.0), mean(&|p| p.1));
    let si = mean(&|p| (p.0 - mi).powi(2)).sqrt();
    let sj = mean(&|p| (p.1 - mj).powi(2)).sqrt();
    let cov = mean(&|p| (p.0 - mi) * (p.1 - mj));
    GlcmFeatures {
        correlation: (si * sj > 0.0).then(|| cov / (si * sj)),
        contrast: mean(&|p| (p.0 - p.1).powi(2)),
        homogeneity: mean(&|p| 1.0 / (1.0 + (p.0 - p.1).abs())),
        energy: pairs.iter().map(|p| pairs.iter().filter(|q| *q == p).count() as f64).sum::<f64>() / (n * n),
    }
}

fn features_agree(a: &GlcmFeatures, b: &GlcmFeatures) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= ORACLE_TOL * x.abs().max(1.0);
    close(a.contrast, b.contrast)
        && close(a.homogeneity, b.homogeneity)
        && close(a.energy, b.energy)
        && match (a.correlation, b.correlation) {
            (Some(x), Some(y)) => close(x, y),
            (None, None) => true,
            _ => false,
        }
}

/// erfc from its Maclaurin series below 2 and a continued fraction above.
fn erfc_oracle(x: f64) -> f64 {
    if x < 2.0 {
        let (mut term, mut sum) = (x, x);
        for k in 1..200 {
            term *= -x * x / k as f64;
            sum += term / (2 * k + 1) as f64;
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        let mut f = 0.0;
        for k in (1..300).rev() {
            f = (k as f64 / 2.0) / (x + f);
        }
        (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f)
    }
}

#[test]
fn criterion_11_oracle_equivalences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut nl = Vec::new();
    for _ in 0..3 {
        let mut t: Vec<u8> = (0..=255).collect();
        for i in (1..256).rev() {
            t.swap(i, rng.gen_range(0..=i));
        }
        let s = SBox::new(t.try_into().unwrap()).unwrap();
        nl.push((walsh_nonlinearity(&s), brute_force_nonlinearity(&s)));
    }
    let nl_ok = nl.iter().all(|(a, b)| a == b);

    let mut glcm_ok = true;
    for k in 0..5 {
        let (w, h) = (5 + k, 4 + 2 * k);
        let img = GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap();
        for cfg in [GlcmConfig::default(), GlcmConfig::matlab_default()] {
            glcm_ok &= features_agree(&glcm_features(&img, cfg).unwrap(), &pair_features(&img, cfg));
        }
    }

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(100..20_000);
        let bias = rng.gen_range(0.47..0.53);
        let bits: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(bias))).collect();
        let s: i64 = bits.iter().map(|&b| 2 * i64::from(b) - 1).sum();
        let oracle = erfc_oracle(s.unsigned_abs() as f64 / (2.0 * n as f64).sqrt());
        worst = worst.max((monobit(&bits) - oracle).abs());
    }
    let mono_ok = worst <= ORACLE_TOL;
    report(
        11,
        nl_ok && glcm_ok && mono_ok,
        format!("nonlinearity (walsh, brute) {nl:?}; GLCM on 5 images agree {glcm_ok}; monobit max deviation {worst:.2e}"),
    );
}
