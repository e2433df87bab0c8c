//! 8-bit grayscale images, binary PGM I/O and the statistics used to judge
//! cipher images: entropy, histogram uniformity, GLCM texture features and
//! NPCR/UACI.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image is empty")]
    EmptyImage,
    #[error("image dimensions differ: {0}×{1} vs {2}×{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("pixel buffer of {len} bytes does not match {width}×{height}")]
    BadBuffer { width: usize, height: usize, len: usize },
    #[error("image too small for offset ({0}, {1})")]
    TooSmall(isize, isize),
    #[error("invalid GLCM configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}×{})", self.width, self.height)
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<GrayImage, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage);
        }
        if width.checked_mul(height) != Some(pixels.len()) {
            return Err(ImageError::BadBuffer { width, height, len: pixels.len() });
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<GrayImage, ImageError> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Binary PGM (`P5`). Comments are allowed in the header; maxval must
    /// be at most 255 and samples are taken as stored.
    pub fn from_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
        let bad = |m: &str| ImageError::MalformedPgm(m.to_string());
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(bad("missing P5 magic"));
        }
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for field in fields.iter_mut() {
            loop {
                match bytes.get(pos) {
                    Some(c) if c.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                            pos += 1;
                        }
                    }
                    Some(_) => break,
                    None => return Err(bad("truncated header")),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos || pos - start > 9 {
                return Err(bad("expected a header number"));
            }
            *field = std::str::from_utf8(&bytes[start..pos]).expect("digits").parse().expect("digits");
        }
        let [width, height, maxval] = fields;
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(bad("header must end with one whitespace byte"));
        }
        pos += 1;
        if maxval == 0 || maxval > 255 {
            return Err(bad("maxval must be in 1..=255"));
        }
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage);
        }
        let n = width.checked_mul(height).ok_or_else(|| bad("dimensions overflow"))?;
        let data = bytes.get(pos..).filter(|d| d.len() >= n).ok_or_else(|| bad("truncated raster"))?;
        let pixels = data[..n].to_vec();
        if pixels.iter().any(|&p| usize::from(p) > maxval) {
            return Err(bad("sample exceeds maxval"));
        }
        GrayImage::new(width, height, pixels)
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
        GrayImage::from_pgm(&fs::read(path)?)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        fs::write(path, self.to_pgm())?;
        Ok(())
    }
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in img.pixels() {
        h[usize::from(p)] += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramReport {
    #[serde(skip)]
    pub counts: [u64; 256],
    pub chi_square: f64,
    pub p_value: f64,
}

/// Histogram with a chi-square test against the uniform distribution
/// (255 degrees of freedom).
pub fn histogram_uniformity(img: &GrayImage) -> HistogramReport {
    let counts = histogram(img);
    let expected = img.pixels().len() as f64 / 256.0;
    let chi_square: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = ChiSquared::new(255.0).expect("dof > 0").sf(chi_square);
    HistogramReport { counts, chi_square, p_value }
}

pub fn write_histogram_csv<W: Write>(counts: &[u64; 256], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "count"])?;
    for (level, c) in counts.iter().enumerate() {
        w.write_record([level.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn shannon_entropy(img: &GrayImage) -> f64 {
    let n = img.pixels().len() as f64;
    histogram(img)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// How gray values are mapped onto GLCM levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GlcmScaling {
    /// One level per gray value.
    Identity,
    /// `level = clamp(⌊levels·(v − low)/(high − low)⌋, 0, levels − 1)`.
    Linear { levels: usize, low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlcmConfig {
    pub scaling: GlcmScaling,
    pub symmetric: bool,
    /// `(Δrow, Δcol)`.
    pub offset: (isize, isize),
}

impl Default for GlcmConfig {
    /// 256 levels, symmetric, horizontal neighbours.
    fn default() -> GlcmConfig {
        GlcmConfig { scaling: GlcmScaling::Identity, symmetric: true, offset: (0, 1) }
    }
}

impl GlcmConfig {
    /// `graycomatrix` defaults as MATLAB applies them to a `double` array
    /// holding raw 0..255 samples: 8 levels over gray limits `[0, 1]`,
    /// one-directional counting, offset `[0 1]`. Every nonzero sample lands
    /// in the top level.
    pub fn matlab_default() -> GlcmConfig {
        GlcmConfig {
            scaling: GlcmScaling::Linear { levels: 8, low: 0.0, high: 1.0 },
            symmetric: false,
            offset: (0, 1),
        }
    }

    pub fn levels(&self) -> usize {
        match self.scaling {
            GlcmScaling::Identity => 256,
            GlcmScaling::Linear { levels, .. } => levels,
        }
    }

    fn validate(&self) -> Result<(), ImageError> {
        if let GlcmScaling::Linear { levels, low, high } = self.scaling {
            if !(1..=256).contains(&levels) {
                return Err(ImageError::InvalidConfig(format!("levels = {levels} is not in 1..=256")));
            }
            if !(low < high) || !low.is_finite() || !high.is_finite() {
                return Err(ImageError::InvalidConfig(format!("gray limits [{low}, {high}] are not increasing")));
            }
        }
        if self.offset == (0, 0) {
            return Err(ImageError::InvalidConfig("offset (0, 0)".into()));
        }
        Ok(())
    }

    pub fn level(&self, v: u8) -> usize {
        match self.scaling {
            GlcmScaling::Identity => usize::from(v),
            GlcmScaling::Linear { levels, low, high } => {
                let s = (levels as f64 * (f64::from(v) - low) / (high - low)).floor();
                s.clamp(0.0, (levels - 1) as f64) as usize
            }
        }
    }
}

/// Every `(a, b)` gray pair at the configured offset, in raster order of `a`.
pub fn neighbour_pairs(img: &GrayImage, offset: (isize, isize)) -> Vec<(u8, u8)> {
    let (dr, dc) = offset;
    let mut out = Vec::new();
    for r in 0..img.height() as isize {
        for c in 0..img.width() as isize {
            let (r2, c2) = (r + dr, c + dc);
            if r2 >= 0 && c2 >= 0 && (r2 as usize) < img.height() && (c2 as usize) < img.width() {
                out.push((img.get(r as usize, c as usize), img.get(r2 as usize, c2 as usize)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    probs: Vec<f64>,
    pub config: GlcmConfig,
}

impl Glcm {
    pub fn new(img: &GrayImage, config: GlcmConfig) -> Result<Glcm, ImageError> {
        config.validate()?;
        let pairs = neighbour_pairs(img, config.offset);
        if pairs.is_empty() {
            return Err(ImageError::TooSmall(config.offset.0, config.offset.1));
        }
        let levels = config.levels();
        let mut counts = vec![0u64; levels * levels];
        for (a, b) in pairs {
            let (i, j) = (config.level(a), config.level(b));
            counts[i * levels + j] += 1;
            if config.symmetric {
                counts[j * levels + i] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Glcm { levels, probs, config })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.levels + j]
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| ((k / self.levels) as f64, (k % self.levels) as f64, p))
    }

    pub fn features(&self) -> GlcmFeatures {
        let (mut contrast, mut homogeneity, mut energy) = (0.0, 0.0, 0.0);
        let (mut mi, mut mj) = (0.0, 0.0);
        for (i, j, p) in self.cells() {
            contrast += (i - j).powi(2) * p;
            homogeneity += p / (1.0 + (i - j).abs());
            energy += p * p;
            mi += i * p;
            mj += j * p;
        }
        let (mut vi, mut vj, mut cov) = (0.0, 0.0, 0.0);
        for (i, j, p) in self.cells() {
            vi += (i - mi).powi(2) * p;
            vj += (j - mj).powi(2) * p;
            cov += (i - mi) * (j - mj) * p;
        }
        let denom = (vi * vj).sqrt();
        let correlation = (denom > 0.0).then(|| cov / denom);
        GlcmFeatures { correlation, contrast, homogeneity, energy }
    }
}

/// Correlation is `None` when either marginal has zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlcmFeatures {
    pub correlation: Option<f64>,
    pub contrast: f64,
    pub homogeneity: f64,
    pub energy: f64,
}

pub fn glcm_features(img: &GrayImage, config: GlcmConfig) -> Result<GlcmFeatures, ImageError> {
    Ok(Glcm::new(img, config)?.features())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NpcrUaci {
    pub npcr: f64,
    pub uaci: f64,
}

/// Percentages of differing pixels and of mean absolute intensity change.
pub fn npcr_uaci(a1: &GrayImage, a2: &GrayImage) -> Result<NpcrUaci, ImageError> {
    if (a1.width(), a1.height()) != (a2.width(), a2.height()) {
        return Err(ImageError::DimensionMismatch(a1.width(), a1.height(), a2.width(), a2.height()));
    }
    let n = a1.pixels().len() as f64;
    let (mut diff, mut sum) = (0u64, 0u64);
    for (&x, &y) in a1.pixels().iter().zip(a2.pixels()) {
        diff += u64::from(x != y);
        sum += u64::from(x.abs_diff(y));
    }
    Ok(NpcrUaci { npcr: diff as f64 / n * 100.0, uaci: sum as f64 / (255.0 * n) * 100.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub width: usize,
    pub height: usize,
    pub entropy: f64,
    pub histogram_chi_square: f64,
    pub histogram_p_value: f64,
    pub glcm: GlcmFeatures,
    pub glcm_config: GlcmConfig,
}

pub fn image_report(img: &GrayImage, config: GlcmConfig) -> Result<ImageReport, ImageError> {
    let h = histogram_uniformity(img);
    Ok(ImageReport {
        width: img.width(),
        height: img.height(),
        entropy: shannon_entropy(img),
        histogram_chi_square: h.chi_square,
        histogram_p_value: h.p_value,
        glcm: glcm_features(img, config)?,
        glcm_config: config,
    })
}
