use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sfspn::chaos::{
    bifurcation_scan, classify_orbit, logistic_sequence, sensitivity_divergence, write_bifurcation_csv,
    write_trace_csv, ChaosParams, LogisticParams, TdErcsParams, DEFAULT_BURN_IN, DEFAULT_ORBIT_TOLERANCE,
};
use sfspn::cipher::{Cipher, CipherKeyBundle, CiphertextContainer, DEFAULT_ROUNDS};
use sfspn::evaluation::{bit_avalanche, differential_protocol, key_sensitivity};
use sfspn::image::{image_report, npcr_uaci, write_histogram_csv, GlcmConfig, GrayImage};
use sfspn::metrics::{batch_evaluate, write_reports_csv, MetricsReport};
use sfspn::nist::{all_passed, bits_from_reals, run_nist_subset_at, BitRule, BitStream, DEFAULT_SIGNIFICANCE};
use sfspn::sbox::{
    load_fixture_sbox, read_family_file, read_sbox_file, render_family, render_sbox, SBox, SBoxFamily, S8_ORDER,
};
use sfspn::semifield::{build_sbox_via_t_in, scan_constructions, MulTable, TConvention};

/// Semifield S-boxes, chaotic generators, the SPN cipher and its evaluation.
#[derive(Parser, Serialize)]
#[command(name = "sfspn", version, about)]
struct Cli {
    /// Write the run manifest here instead of to stderr.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Build, expand and analyse S-boxes.
    #[command(subcommand)]
    Sbox(SboxCmd),
    /// Chaotic map tooling.
    #[command(subcommand)]
    Chaos(ChaosCmd),
    /// NIST SP 800-22 subset.
    #[command(subcommand)]
    Nist(NistCmd),
    /// Encrypt a file or PGM image into a container.
    Encrypt(EncryptArgs),
    /// Decrypt a container.
    Decrypt(DecryptArgs),
    /// Image statistics.
    #[command(subcommand)]
    Image(ImageCmd),
    /// Three-location single-pixel protocol, key sensitivity and bit avalanche.
    Avalanche(AvalancheArgs),
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SboxCmd {
    /// Write an S-box file, either the published seed box or a T-map construction.
    Gen(SboxGenArgs),
    /// Expand a seed box into members of its S8 family.
    Family(SboxFamilyArgs),
    /// Metrics for an S-box or family file.
    Analyze(SboxAnalyzeArgs),
    /// Try every pseudo-irreducible polynomial and product convention.
    Scan(OutArg),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Field {
    Semifield,
    Gf16,
}

#[derive(Args, Serialize)]
struct SboxGenArgs {
    /// Use the published seed box.
    #[arg(long, conflicts_with_all = ["alpha", "beta"])]
    fixture: bool,
    /// Coefficient α as a nibble 0..15.
    #[arg(long, requires = "beta")]
    alpha: Option<u8>,
    /// Coefficient β as a nibble 0..15.
    #[arg(long, requires = "alpha")]
    beta: Option<u8>,
    #[arg(long, value_enum, default_value = "semifield")]
    field: Field,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct SeedBox {
    /// Seed S-box file.
    #[arg(long, conflicts_with_all = ["fixture", "aes"])]
    seed_file: Option<PathBuf>,
    /// Use the published seed box (default).
    #[arg(long)]
    fixture: bool,
    /// Use the AES S-box.
    #[arg(long, conflicts_with = "fixture")]
    aes: bool,
}

impl SeedBox {
    fn load(&self, ctx: &mut Ctx) -> Result<SBox> {
        if let Some(p) = &self.seed_file {
            ctx.input(p);
            return read_sbox_file(p).with_context(|| format!("reading {}", p.display()));
        }
        if self.aes {
            return Ok(SBox::aes());
        }
        Ok(load_fixture_sbox()?)
    }
}

#[derive(Args, Serialize)]
struct SboxFamilyArgs {
    #[command(flatten)]
    seed_box: SeedBox,
    /// Number of members.
    #[arg(long)]
    count: usize,
    /// Draw distinct ranks uniformly at random instead of taking 0..count.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize)]
struct SboxAnalyzeArgs {
    /// Analyse the published seed box.
    #[arg(long)]
    fixture: bool,
    /// Analyse the AES S-box.
    #[arg(long)]
    aes: bool,
    /// S-box file.
    #[arg(long = "sbox")]
    sbox_file: Option<PathBuf>,
    /// Family file.
    #[arg(long = "family")]
    family_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct OutArg {
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ChaosCmd {
    /// Bifurcation diagram of the modified logistic map as `r,x` CSV.
    Bifurcate(BifurcateArgs),
    /// Classify a logistic orbit as fixed, periodic or aperiodic.
    Classify(ClassifyArgs),
    /// Trace |Δx| between two runs differing in one parameter.
    Sensitivity(SensitivityArgs),
}

#[derive(Args, Serialize)]
struct BifurcateArgs {
    #[arg(long, default_value_t = 0.2)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    r_from: f64,
    #[arg(long, default_value_t = 4.6)]
    r_to: f64,
    #[arg(long, default_value_t = 0.001)]
    r_step: f64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 100)]
    keep: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    #[arg(long, default_value_t = 0.5)]
    x0: f64,
    #[arg(long, default_value_t = 0.2)]
    b: f64,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_ORBIT_TOLERANCE)]
    tol: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MapKind {
    Logistic,
    Tdercs,
}

#[derive(Args, Serialize)]
struct SensitivityArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    map: MapKind,
    #[arg(long, default_value_t = 0.5)]
    x0: f64,
    #[arg(long, default_value_t = 0.2)]
    b: f64,
    #[arg(long, default_value_t = 4.5)]
    r: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    tan_alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Parameter to perturb: x0, b, r (logistic) or x0, tan-alpha, mu (TD-ERCS).
    #[arg(long, default_value = "x0")]
    perturb: String,
    #[arg(long, default_value_t = 1e-10, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NistCmd {
    /// Run the subset on a stream; exits 1 if any executed test fails.
    Run(NistArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RuleArg {
    Threshold,
    BitExpansion,
    LowByte,
}

impl From<RuleArg> for BitRule {
    fn from(r: RuleArg) -> BitRule {
        match r {
            RuleArg::Threshold => BitRule::Threshold,
            RuleArg::BitExpansion => BitRule::BitExpansion,
            RuleArg::LowByte => BitRule::LowByte,
        }
    }
}

#[derive(Args, Serialize)]
struct NistArgs {
    /// Binary file, unpacked MSB first.
    #[arg(long, conflicts_with_all = ["bits", "logistic"])]
    bytes: Option<PathBuf>,
    /// Text file of '0'/'1' characters; anything else is ignored.
    #[arg(long, conflicts_with = "logistic")]
    bits: Option<PathBuf>,
    /// Generate the stream from the modified logistic map.
    #[arg(long)]
    logistic: bool,
    #[arg(long, default_value_t = 0.5)]
    x0: f64,
    #[arg(long, default_value_t = 0.2)]
    b: f64,
    #[arg(long, default_value_t = 4.3)]
    r: f64,
    /// Number of map values to draw.
    #[arg(long, default_value_t = 12_500)]
    values: usize,
    #[arg(long, value_enum, default_value = "low-byte")]
    rule: RuleArg,
    #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
    significance: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct FamilySource {
    /// Family file; otherwise the first `--family-size` members of the
    /// published seed's family.
    #[arg(long = "family")]
    family_file: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    family_size: usize,
}

impl FamilySource {
    fn load(&self, ctx: &mut Ctx) -> Result<SBoxFamily> {
        match &self.family_file {
            Some(p) => {
                ctx.input(p);
                let members = read_family_file(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(SBoxFamily::from_members(&members)?)
            }
            None => Ok(sfspn::sbox::generate_family(&load_fixture_sbox()?, self.family_size)?),
        }
    }
}

#[derive(Args, Serialize)]
struct EncryptArgs {
    /// Key file.
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Treat the input as a binary PGM and encrypt its raster.
    #[arg(long)]
    pgm: bool,
    /// With --pgm, also write the cipher image here.
    #[arg(long, requires = "pgm")]
    cipher_image: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    rounds: u8,
    #[command(flatten)]
    family: FamilySource,
}

#[derive(Args, Serialize)]
struct DecryptArgs {
    #[arg(long)]
    key: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the plaintext as a PGM of this size, e.g. 256x256.
    #[arg(long, value_name = "WxH")]
    pgm: Option<String>,
    #[command(flatten)]
    family: FamilySource,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ImageCmd {
    /// Entropy, histogram uniformity and GLCM features as JSON.
    Metrics(ImageMetricsArgs),
    /// NPCR and UACI between two images.
    NpcrUaci(NpcrArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GlcmArg {
    /// 256 levels, symmetric.
    Full,
    /// 8 levels over [0, 1], one-directional.
    Matlab,
}

impl From<GlcmArg> for GlcmConfig {
    fn from(g: GlcmArg) -> GlcmConfig {
        match g {
            GlcmArg::Full => GlcmConfig::default(),
            GlcmArg::Matlab => GlcmConfig::matlab_default(),
        }
    }
}

#[derive(Args, Serialize)]
struct ImageMetricsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    glcm: GlcmArg,
    /// Also write the histogram as `level,count` CSV.
    #[arg(long)]
    histogram_csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct NpcrArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Serialize)]
struct AvalancheArgs {
    #[arg(long)]
    key: PathBuf,
    /// Plain image (PGM).
    #[arg(long)]
    image: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    rounds: u8,
    /// k1 bit flipped for the key-sensitivity cases (0 = MSB of the first byte).
    #[arg(long, default_value_t = 0)]
    key_bit: usize,
    /// Trials for the random bit-avalanche estimate.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    family: FamilySource,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Default)]
struct Ctx {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    failed_checks: bool,
}

impl Ctx {
    fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    fn write(&mut self, out: &OutArg, bytes: &[u8]) -> Result<()> {
        match &out.out {
            Some(p) => self.write_file(p, bytes),
            None => {
                io::stdout().write_all(bytes)?;
                Ok(())
            }
        }
    }

    fn write_file(&mut self, p: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.outputs.push(p.to_path_buf());
        Ok(())
    }

    fn json(&mut self, out: &OutArg, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(out, text.as_bytes())
    }

    fn read(&mut self, p: &Path) -> Result<Vec<u8>> {
        self.input(p);
        fs::read(p).with_context(|| format!("reading {}", p.display()))
    }

    fn read_pgm(&mut self, p: &Path) -> Result<GrayImage> {
        let bytes = self.read(p)?;
        GrayImage::from_pgm(&bytes).with_context(|| format!("parsing {}", p.display()))
    }

    fn keys(&mut self, p: &Path) -> Result<CipherKeyBundle> {
        self.input(p);
        Ok(CipherKeyBundle::read(p)?)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: Vec<String>,
    params: &'a Command,
    inputs: &'a [PathBuf],
    outputs: &'a [PathBuf],
    threads: usize,
    duration_s: f64,
    status: &'a str,
}

fn sbox_gen(a: &SboxGenArgs, ctx: &mut Ctx) -> Result<()> {
    let s = match (a.alpha, a.beta) {
        (Some(alpha), Some(beta)) => {
            if alpha > 15 || beta > 15 {
                bail!("alpha and beta are nibbles in 0..=15");
            }
            let table = match a.field {
                Field::Semifield => MulTable::semifield(),
                Field::Gf16 => MulTable::gf16(),
            };
            if !table.is_pseudo_irreducible(alpha, beta) {
                bail!("X^2 + {alpha}X + {beta} is not pseudo-irreducible over {}", table.name());
            }
            build_sbox_via_t_in(table, alpha, beta, TConvention::default())?
        }
        _ => load_fixture_sbox()?,
    };
    ctx.write(&a.out, render_sbox(&s).as_bytes())
}

fn sbox_family(a: &SboxFamilyArgs, ctx: &mut Ctx) -> Result<()> {
    let seed = a.seed_box.load(ctx)?;
    if a.count == 0 || a.count > S8_ORDER as usize {
        bail!("count must be in 1..={S8_ORDER}");
    }
    let ranks: Vec<u32> = if a.random {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        sample(&mut rng, S8_ORDER as usize, a.count).into_iter().map(|r| r as u32).collect()
    } else {
        (0..a.count as u32).collect()
    };
    let fam = SBoxFamily::new(seed, ranks)?;
    let boxes = fam.materialize();
    ctx.write(&a.out, render_family(fam.ranks().iter().copied().zip(boxes.iter())).as_bytes())
}

fn sbox_analyze(a: &SboxAnalyzeArgs, ctx: &mut Ctx) -> Result<()> {
    let chosen = [a.fixture, a.aes, a.sbox_file.is_some(), a.family_file.is_some()].iter().filter(|&&x| x).count();
    if chosen != 1 {
        bail!("give exactly one of --fixture, --aes, --sbox, --family");
    }
    let family = if let Some(p) = &a.family_file {
        ctx.input(p);
        SBoxFamily::from_members(&read_family_file(p).with_context(|| format!("reading {}", p.display()))?)?
    } else {
        let s = if a.fixture {
            load_fixture_sbox()?
        } else if a.aes {
            SBox::aes()
        } else {
            let p = a.sbox_file.as_ref().expect("checked");
            ctx.input(p);
            read_sbox_file(p).with_context(|| format!("reading {}", p.display()))?
        };
        if a.family_file.is_none() && matches!(a.format, Format::Json) {
            return ctx.json(&a.out, &MetricsReport::evaluate(&s));
        }
        SBoxFamily::new(s, vec![0])?
    };
    let batch = batch_evaluate(&family);
    match a.format {
        Format::Json => ctx.json(&a.out, &batch),
        Format::Csv => {
            let mut buf = Vec::new();
            write_reports_csv(&batch.reports, &mut buf)?;
            ctx.write(&a.out, &buf)
        }
    }
}

fn chaos_sensitivity(a: &SensitivityArgs, ctx: &mut Ctx) -> Result<()> {
    let (base, other) = match a.map {
        MapKind::Logistic => {
            let p = LogisticParams::new(a.x0, a.b, a.r)?;
            let mut q = p;
            match a.perturb.as_str() {
                "x0" => q.x0 += a.delta,
                "b" => q.b += a.delta,
                "r" => q.r += a.delta,
                other => bail!("logistic has no parameter {other:?} (x0, b, r)"),
            }
            (ChaosParams::Logistic(p), ChaosParams::Logistic(q))
        }
        MapKind::Tdercs => {
            let p = TdErcsParams::new(a.x0, a.tan_alpha, a.mu, a.m)?;
            let mut q = p;
            match a.perturb.as_str() {
                "x0" => q.x0 += a.delta,
                "tan-alpha" | "tan_alpha" => q.tan_alpha += a.delta,
                "mu" => q.mu += a.delta,
                other => bail!("TD-ERCS has no real parameter {other:?} (x0, tan-alpha, mu)"),
            }
            (ChaosParams::TdErcs(p), ChaosParams::TdErcs(q))
        }
    };
    let trace = sensitivity_divergence(&base, &other, a.n)?;
    eprintln!("first divergence: {:?}", trace.first_divergence);
    let mut buf = Vec::new();
    write_trace_csv(&trace, &mut buf)?;
    ctx.write(&a.out, &buf)
}

fn nist_run(a: &NistArgs, ctx: &mut Ctx) -> Result<()> {
    let stream = if let Some(p) = &a.bytes {
        BitStream::from_bytes(&ctx.read(p)?, p.display().to_string())
    } else if let Some(p) = &a.bits {
        let text = ctx.read(p)?;
        let bits = text.iter().filter(|c| matches!(c, b'0' | b'1')).map(|c| c - b'0').collect();
        BitStream::new(bits, p.display().to_string())
    } else if a.logistic {
        let xs = logistic_sequence(&LogisticParams::new(a.x0, a.b, a.r)?, a.values, DEFAULT_BURN_IN)?;
        bits_from_reals(&xs, a.rule.into())?
    } else {
        bail!("give one of --bytes, --bits or --logistic");
    };
    let reports = run_nist_subset_at(&stream, a.significance)?;
    ctx.failed_checks = !all_passed(&reports);
    ctx.json(&a.out, &reports)
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s.split_once(['x', 'X']).context("expected WxH")?;
    Ok((w.trim().parse().context("width")?, h.trim().parse().context("height")?))
}

fn encrypt_cmd(a: &EncryptArgs, ctx: &mut Ctx) -> Result<()> {
    let keys = ctx.keys(&a.key)?;
    let family = a.family.load(ctx)?;
    let cipher = Cipher::new(keys, &family)?;
    let data = ctx.read(&a.input)?;
    let (plain, dims) = if a.pgm {
        let img = GrayImage::from_pgm(&data).with_context(|| format!("parsing {}", a.input.display()))?;
        let dims = (img.width(), img.height());
        (img.into_pixels(), Some(dims))
    } else {
        (data, None)
    };
    let ct = cipher.encrypt(&plain, a.rounds)?;
    ctx.write_file(&a.out, &ct.encode())?;
    if let (Some(p), Some((w, h))) = (&a.cipher_image, dims) {
        let img = GrayImage::new(w, h, ct.blocks[..w * h].to_vec())?;
        ctx.write_file(p, &img.to_pgm())?;
    }
    Ok(())
}

fn decrypt_cmd(a: &DecryptArgs, ctx: &mut Ctx) -> Result<()> {
    let keys = ctx.keys(&a.key)?;
    let family = a.family.load(ctx)?;
    let cipher = Cipher::new(keys, &family)?;
    let ct = CiphertextContainer::decode(&ctx.read(&a.input)?)?;
    let plain = cipher.decrypt(&ct)?;
    let bytes = match &a.pgm {
        Some(d) => {
            let (w, h) = parse_dims(d)?;
            GrayImage::new(w, h, plain)?.to_pgm()
        }
        None => plain,
    };
    ctx.write_file(&a.out, &bytes)
}

fn image_metrics(a: &ImageMetricsArgs, ctx: &mut Ctx) -> Result<()> {
    let img = ctx.read_pgm(&a.input)?;
    let report = image_report(&img, a.glcm.into())?;
    if let Some(p) = &a.histogram_csv {
        let mut buf = Vec::new();
        write_histogram_csv(&sfspn::image::histogram(&img), &mut buf)?;
        ctx.write_file(p, &buf)?;
    }
    ctx.json(&a.out, &report)
}

#[derive(Serialize)]
struct AvalancheReport {
    differential: Vec<sfspn::evaluation::DifferentialRow>,
    key_sensitivity: sfspn::evaluation::KeySensitivity,
    bit_avalanche: sfspn::evaluation::AvalancheStats,
}

fn avalanche(a: &AvalancheArgs, ctx: &mut Ctx) -> Result<()> {
    let keys = ctx.keys(&a.key)?;
    let family = a.family.load(ctx)?;
    let img = ctx.read_pgm(&a.image)?;
    let cipher = Cipher::new(keys, &family)?;
    let report = AvalancheReport {
        differential: differential_protocol(&cipher, &img, a.rounds)?,
        key_sensitivity: key_sensitivity(&keys, &family, &img, a.rounds, a.key_bit)?,
        bit_avalanche: bit_avalanche(&cipher, img.pixels().len(), a.trials, a.rounds, a.seed)?,
    };
    ctx.json(&a.out, &report)
}

fn dispatch(cmd: &Command, ctx: &mut Ctx) -> Result<()> {
    match cmd {
        Command::Sbox(SboxCmd::Gen(a)) => sbox_gen(a, ctx),
        Command::Sbox(SboxCmd::Family(a)) => sbox_family(a, ctx),
        Command::Sbox(SboxCmd::Analyze(a)) => sbox_analyze(a, ctx),
        Command::Sbox(SboxCmd::Scan(out)) => {
            let fixture = load_fixture_sbox()?;
            let rows = scan_constructions(MulTable::semifield(), Some(&fixture));
            ctx.json(out, &rows)
        }
        Command::Chaos(ChaosCmd::Bifurcate(a)) => {
            let rows = bifurcation_scan(a.b, a.r_from, a.r_to, a.r_step, a.burn_in, a.keep)?;
            let mut buf = Vec::new();
            write_bifurcation_csv(&rows, &mut buf)?;
            ctx.write(&a.out, &buf)
        }
        Command::Chaos(ChaosCmd::Classify(a)) => {
            let p = LogisticParams::new(a.x0, a.b, a.r)?;
            let xs = logistic_sequence(&p, a.n, a.burn_in)?;
            let class = classify_orbit(&xs, a.tol)?;
            #[derive(Serialize)]
            struct Out {
                params: LogisticParams,
                n: usize,
                tol: f64,
                class: sfspn::chaos::OrbitClass,
            }
            ctx.json(&a.out, &Out { params: p, n: a.n, tol: a.tol, class })
        }
        Command::Chaos(ChaosCmd::Sensitivity(a)) => chaos_sensitivity(a, ctx),
        Command::Nist(NistCmd::Run(a)) => nist_run(a, ctx),
        Command::Encrypt(a) => encrypt_cmd(a, ctx),
        Command::Decrypt(a) => decrypt_cmd(a, ctx),
        Command::Image(ImageCmd::Metrics(a)) => image_metrics(a, ctx),
        Command::Image(ImageCmd::NpcrUaci(a)) => {
            let (x, y) = (ctx.read_pgm(&a.a)?, ctx.read_pgm(&a.b)?);
            ctx.json(&a.out, &npcr_uaci(&x, &y)?)
        }
        Command::Avalanche(a) => avalanche(a, ctx),
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SFSPN_THREADS") {
        let n: usize = v.parse().with_context(|| format!("SFSPN_THREADS = {v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut ctx = Ctx::default();
    let result = configure_threads().and_then(|()| dispatch(&cli.command, &mut ctx));
    let status = match (&result, ctx.failed_checks) {
        (Err(_), _) => "error",
        (Ok(()), true) => "checks-failed",
        (Ok(()), false) => "ok",
    };
    let manifest = Manifest {
        tool: "sfspn",
        version: env!("CARGO_PKG_VERSION"),
        argv: std::env::args().collect(),
        params: &cli.command,
        inputs: &ctx.inputs,
        outputs: &ctx.outputs,
        threads: rayon::current_num_threads(),
        duration_s: start.elapsed().as_secs_f64(),
        status,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    match &cli.manifest {
        Some(p) => {
            if let Err(e) = fs::write(p, format!("{text}\n")) {
                eprintln!("error: writing manifest {}: {e}", p.display());
                return ExitCode::from(1);
            }
        }
        None => eprintln!("{text}"),
    }
    match result {
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Ok(()) if ctx.failed_checks => ExitCode::from(1),
        Ok(()) => ExitCode::SUCCESS,
    }
}
