//! End-to-end cipher experiments on images: the three-location
//! single-pixel differential protocol, key sensitivity and bit avalanche.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cipher::{Cipher, CipherError, CipherKeyBundle, CiphertextContainer};
use crate::image::{npcr_uaci, GrayImage, ImageError, NpcrUaci};
use crate::sbox::SBoxFamily;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Ciphertext of the raster, cut back to the image's own size.
pub fn encrypt_image(cipher: &Cipher, img: &GrayImage, rounds: u8) -> Result<(GrayImage, CiphertextContainer), EvalError> {
    let ct = cipher.encrypt(img.pixels(), rounds)?;
    let n = img.pixels().len();
    let shown = GrayImage::new(img.width(), img.height(), ct.blocks[..n].to_vec())?;
    Ok((shown, ct))
}

pub fn decrypt_image(cipher: &Cipher, ct: &CiphertextContainer, width: usize, height: usize) -> Result<GrayImage, EvalError> {
    Ok(GrayImage::new(width, height, cipher.decrypt(ct)?)?)
}

/// First pixel, centre pixel and last pixel.
pub fn change_locations(height: usize, width: usize) -> [(usize, usize); 3] {
    [(0, 0), (height / 2, width / 2), (height - 1, width - 1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DifferentialRow {
    pub row: usize,
    pub col: usize,
    pub npcr: f64,
    pub uaci: f64,
}

/// For each location, adds 1 (mod 256) to that pixel and compares the two
/// cipher images.
pub fn differential_protocol(cipher: &Cipher, img: &GrayImage, rounds: u8) -> Result<Vec<DifferentialRow>, EvalError> {
    let (base, _) = encrypt_image(cipher, img, rounds)?;
    change_locations(img.height(), img.width())
        .into_par_iter()
        .map(|(row, col)| {
            let mut changed = img.clone();
            changed.set(row, col, changed.get(row, col).wrapping_add(1));
            let (other, _) = encrypt_image(cipher, &changed, rounds)?;
            let NpcrUaci { npcr, uaci } = npcr_uaci(&base, &other)?;
            Ok(DifferentialRow { row, col, npcr, uaci })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeySensitivity {
    /// Cipher images under `k1` and `k1` with one bit flipped.
    pub encryption: NpcrUaci,
    /// Plain image against its decryption under the flipped key.
    pub decryption: NpcrUaci,
    /// Plain image against its decryption with `k2.b` raised by `1e-10`.
    pub b_perturbed: NpcrUaci,
}

pub fn flip_k1_bit(keys: &CipherKeyBundle, bit: usize) -> CipherKeyBundle {
    let mut k = *keys;
    k.k1[(bit / 8) % 16] ^= 0x80 >> (bit % 8);
    k
}

pub fn key_sensitivity(
    keys: &CipherKeyBundle,
    family: &SBoxFamily,
    img: &GrayImage,
    rounds: u8,
    bit: usize,
) -> Result<KeySensitivity, EvalError> {
    let cipher = Cipher::new(*keys, family)?;
    let flipped = Cipher::new(flip_k1_bit(keys, bit), family)?;
    let mut nudged_keys = *keys;
    nudged_keys.k2.b += 1e-10;
    let nudged = Cipher::new(nudged_keys, family)?;

    let (c1, ct) = encrypt_image(&cipher, img, rounds)?;
    let (c2, _) = encrypt_image(&flipped, img, rounds)?;
    let wrong = decrypt_image(&flipped, &ct, img.width(), img.height())?;
    let wrong_b = decrypt_image(&nudged, &ct, img.width(), img.height())?;
    Ok(KeySensitivity {
        encryption: npcr_uaci(&c1, &c2)?,
        decryption: npcr_uaci(img, &wrong)?,
        b_perturbed: npcr_uaci(img, &wrong_b)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvalancheStats {
    pub trials: usize,
    /// Mean fraction of ciphertext bits that change per flipped plaintext bit.
    pub mean_bit_fraction: f64,
    pub min_bit_fraction: f64,
    pub max_bit_fraction: f64,
}

/// Flips one random bit of a random `len`-byte plaintext per trial.
pub fn bit_avalanche(cipher: &Cipher, len: usize, trials: usize, rounds: u8, seed: u64) -> Result<AvalancheStats, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fractions = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let mut q = p.clone();
        q[rng.gen_range(0..len)] ^= 1 << rng.gen_range(0..8);
        let (a, b) = (cipher.encrypt(&p, rounds)?, cipher.encrypt(&q, rounds)?);
        let flips: u32 = a.blocks.iter().zip(&b.blocks).map(|(x, y)| (x ^ y).count_ones()).sum();
        fractions.push(f64::from(flips) / (8 * a.blocks.len()) as f64);
    }
    Ok(AvalancheStats {
        trials,
        mean_bit_fraction: fractions.iter().sum::<f64>() / trials.max(1) as f64,
        min_bit_fraction: fractions.iter().copied().fold(f64::INFINITY, f64::min),
        max_bit_fraction: fractions.iter().copied().fold(0.0, f64::max),
    })
}
