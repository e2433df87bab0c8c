//! The whitening / rotation / substitution block cipher.
//!
//! Per block: `B_x = B_p ⊕ R`, every byte of `B_x` is rotated left by the
//! next logistic shift, then substituted through the family box chosen by
//! the next TD-ERCS selector, and the result becomes both the ciphertext
//! block and the new chaining register `R`. `R` starts as `k1` and is never
//! reset, so round `j + 1`'s first block is whitened with round `j`'s last
//! ciphertext block. Both streams run on across blocks and rounds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chaos::{
    classify_orbit, logistic_sequence, quantize_selectors, quantize_shifts, tdercs_sequence, ChaosError,
    LogisticParams, OrbitClass, TdErcsParams, DEFAULT_BURN_IN, PLOT_ORBIT_TOLERANCE,
};
use crate::sbox::{SBox, SBoxFamily};

pub const BLOCK_LEN: usize = 16;
/// Messages are padded to at least this many blocks.
pub const MIN_BLOCKS: usize = 2;
pub const DEFAULT_ROUNDS: u8 = 6;
pub const CONTAINER_MAGIC: [u8; 8] = *b"SFSPNv1\0";
pub const CONTAINER_HEADER_LEN: usize = 17;
/// Orbit length used by the key-regime guard.
pub const REGIME_CHECK_LEN: usize = 2000;
/// Largest excursion outside a quantizer's domain that is clamped rather
/// than reported.
pub const CLAMP_SLACK: f64 = 1e-6;

pub type Block = [u8; BLOCK_LEN];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CipherError {
    #[error("plaintext is empty")]
    EmptyPlaintext,
    #[error("S-box family is empty")]
    EmptyFamily,
    #[error("invalid keys: {0}")]
    InvalidKeys(String),
    #[error("malformed key file: {0}")]
    MalformedKeyFile(String),
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error(transparent)]
    Chaos(#[from] ChaosError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CipherKeyBundle {
    #[serde(with = "hex_key")]
    pub k1: [u8; 16],
    pub k2: LogisticParams,
    pub k3: TdErcsParams,
}

mod hex_key {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(k: &[u8; 16], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::hex(k))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 16], D::Error> {
        let text = String::deserialize(d)?;
        super::parse_k1(&text).map_err(serde::de::Error::custom)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn parse_k1(text: &str) -> Result<[u8; 16], String> {
    if text.len() != 32 || !text.bytes().all(|c| c.is_ascii_hexdigit()) {
        return Err(format!("k1 must be 32 hex digits, got {text:?}"));
    }
    let mut k = [0u8; 16];
    for (i, byte) in k.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&text[2 * i..2 * i + 2], 16).expect("validated hex");
    }
    Ok(k)
}

impl CipherKeyBundle {
    pub fn new(k1: [u8; 16], k2: LogisticParams, k3: TdErcsParams) -> Result<CipherKeyBundle, CipherError> {
        let keys = CipherKeyBundle { k1, k2, k3 };
        keys.validate()?;
        Ok(keys)
    }

    /// Parameter ranges for both generators, plus the regime guard: the
    /// logistic orbit must be aperiodic at the plot tolerance.
    pub fn validate(&self) -> Result<(), CipherError> {
        self.k2.validate().map_err(|e| CipherError::InvalidKeys(format!("k2: {e}")))?;
        self.k3.validate().map_err(|e| CipherError::InvalidKeys(format!("k3: {e}")))?;
        let orbit = logistic_sequence(&self.k2, REGIME_CHECK_LEN, DEFAULT_BURN_IN)
            .map_err(|e| CipherError::InvalidKeys(format!("k2: {e}")))?;
        match classify_orbit(&orbit, PLOT_ORBIT_TOLERANCE)? {
            OrbitClass::Aperiodic => Ok(()),
            other => Err(CipherError::InvalidKeys(format!(
                "k2 (r = {}, b = {}) is not in a chaotic regime: {other:?}",
                self.k2.r, self.k2.b
            ))),
        }
    }

    /// Parses a key file: one `name = value` per line for `k1`, `k2.x0`,
    /// `k2.b`, `k2.r`, `k3.x0`, `k3.tan_alpha`, `k3.mu` and `k3.m`. Blank
    /// lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<CipherKeyBundle, CipherError> {
        const NAMES: [&str; 8] = ["k1", "k2.x0", "k2.b", "k2.r", "k3.x0", "k3.tan_alpha", "k3.mu", "k3.m"];
        let bad = |m: String| CipherError::MalformedKeyFile(m);
        let mut values: [Option<&str>; 8] = [None; 8];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) =
                line.split_once('=').ok_or_else(|| bad(format!("line {}: expected name = value", lineno + 1)))?;
            let (name, value) = (name.trim(), value.trim());
            let slot = NAMES
                .iter()
                .position(|&n| n == name)
                .ok_or_else(|| bad(format!("line {}: unknown key {name:?}", lineno + 1)))?;
            if values[slot].replace(value).is_some() {
                return Err(bad(format!("line {}: duplicate key {name:?}", lineno + 1)));
            }
        }
        let get = |i: usize| values[i].ok_or_else(|| bad(format!("missing key {:?}", NAMES[i])));
        let real = |i: usize| -> Result<f64, CipherError> {
            let v = get(i)?;
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("{} = {v:?} is not a finite number", NAMES[i])))
        };
        let k1 = parse_k1(get(0)?).map_err(bad)?;
        let k2 = LogisticParams { x0: real(1)?, b: real(2)?, r: real(3)? };
        let m = get(7)?.parse::<usize>().map_err(|_| bad(format!("k3.m = {:?} is not an integer", get(7).unwrap())))?;
        let k3 = TdErcsParams { x0: real(4)?, tan_alpha: real(5)?, mu: real(6)?, m };
        CipherKeyBundle::new(k1, k2, k3)
    }

    pub fn render(&self) -> String {
        format!(
            "k1 = {}\nk2.x0 = {:?}\nk2.b = {:?}\nk2.r = {:?}\nk3.x0 = {:?}\nk3.tan_alpha = {:?}\nk3.mu = {:?}\nk3.m = {}\n",
            hex(&self.k1),
            self.k2.x0,
            self.k2.b,
            self.k2.r,
            self.k3.x0,
            self.k3.tan_alpha,
            self.k3.mu,
            self.k3.m
        )
    }

    pub fn read(path: impl AsRef<Path>) -> Result<CipherKeyBundle, CipherError> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| CipherError::MalformedKeyFile(format!("{}: {e}", path.as_ref().display())))?;
        CipherKeyBundle::parse(&text)
    }
}

#[inline]
pub fn rotl_byte(b: u8, k: u8) -> u8 {
    b.rotate_left(u32::from(k & 7))
}

#[inline]
pub fn rotr_byte(b: u8, k: u8) -> u8 {
    b.rotate_right(u32::from(k & 7))
}

/// Row is the high nibble and column the low nibble, both zero-indexed,
/// which is plain table lookup.
#[inline]
pub fn substitute_byte(b: u8, sbox: &SBox) -> u8 {
    sbox.table()[usize::from(b >> 4) * 16 + usize::from(b & 0x0f)]
}

fn clamp_into(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo && v >= lo - CLAMP_SLACK {
        lo
    } else if v > hi && v <= hi + CLAMP_SLACK {
        hi
    } else {
        v
    }
}

/// `16 · n_blocks · rounds` shift amounts and box selectors.
pub fn derive_streams(
    keys: &CipherKeyBundle,
    n_blocks: usize,
    rounds: usize,
    family_size: usize,
) -> Result<(Vec<u8>, Vec<u32>), CipherError> {
    if n_blocks == 0 || rounds == 0 || family_size == 0 {
        return Err(CipherError::InvalidKeys("block, round and family counts must be at least 1".into()));
    }
    let len = BLOCK_LEN * n_blocks * rounds;
    let xs: Vec<f64> = logistic_sequence(&keys.k2, len, DEFAULT_BURN_IN)?
        .into_iter()
        .map(|v| clamp_into(v, f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
        .collect();
    let (ts, _) = tdercs_sequence(&keys.k3, len)?;
    let ts: Vec<f64> = ts.into_iter().map(|v| clamp_into(v, -1.0, 1.0)).collect();
    Ok((quantize_shifts(&xs)?, quantize_selectors(&ts, family_size)?))
}

/// Binary container: magic, rounds (u8), original length (u64 LE), then the
/// ciphertext blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiphertextContainer {
    pub rounds: u8,
    pub original_length: u64,
    pub blocks: Vec<u8>,
}

/// Ciphertext length for a message of `len` bytes.
pub fn padded_len(len: usize) -> usize {
    len.div_ceil(BLOCK_LEN).max(MIN_BLOCKS) * BLOCK_LEN
}

impl CiphertextContainer {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CONTAINER_HEADER_LEN + self.blocks.len());
        out.extend_from_slice(&CONTAINER_MAGIC);
        out.push(self.rounds);
        out.extend_from_slice(&self.original_length.to_le_bytes());
        out.extend_from_slice(&self.blocks);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<CiphertextContainer, CipherError> {
        let bad = |m: &str| CipherError::MalformedContainer(m.to_string());
        if bytes.len() < CONTAINER_HEADER_LEN {
            return Err(bad("shorter than the header"));
        }
        if bytes[..8] != CONTAINER_MAGIC {
            return Err(bad("bad magic"));
        }
        let rounds = bytes[8];
        let original_length = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes"));
        let c = CiphertextContainer { rounds, original_length, blocks: bytes[CONTAINER_HEADER_LEN..].to_vec() };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<(), CipherError> {
        let bad = |m: String| Err(CipherError::MalformedContainer(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.blocks.len() % BLOCK_LEN != 0 {
            return bad(format!("ciphertext length {} is not a multiple of {BLOCK_LEN}", self.blocks.len()));
        }
        if self.original_length == 0 {
            return bad("original length is zero".into());
        }
        match usize::try_from(self.original_length) {
            Ok(n) if padded_len(n) == self.blocks.len() => Ok(()),
            _ => bad(format!(
                "original length {} does not match {} ciphertext bytes",
                self.original_length,
                self.blocks.len()
            )),
        }
    }
}

/// Keys plus the family's boxes and their inverses, ready for repeated use.
#[derive(Debug, Clone)]
pub struct Cipher {
    keys: CipherKeyBundle,
    boxes: Vec<SBox>,
    inverses: Vec<SBox>,
}

impl Cipher {
    pub fn new(keys: CipherKeyBundle, family: &SBoxFamily) -> Result<Cipher, CipherError> {
        if family.is_empty() {
            return Err(CipherError::EmptyFamily);
        }
        keys.validate()?;
        let boxes = family.materialize();
        let inverses = boxes.iter().map(SBox::inverse).collect();
        Ok(Cipher { keys, boxes, inverses })
    }

    pub fn keys(&self) -> &CipherKeyBundle {
        &self.keys
    }

    pub fn encrypt(&self, plaintext: &[u8], rounds: u8) -> Result<CiphertextContainer, CipherError> {
        if plaintext.is_empty() {
            return Err(CipherError::EmptyPlaintext);
        }
        if rounds == 0 {
            return Err(CipherError::InvalidKeys("rounds must be at least 1".into()));
        }
        let mut data = plaintext.to_vec();
        data.resize(padded_len(plaintext.len()), 0);
        let n_blocks = data.len() / BLOCK_LEN;
        let (shifts, selectors) = derive_streams(&self.keys, n_blocks, rounds.into(), self.boxes.len())?;

        let mut reg: Block = self.keys.k1;
        let mut pos = 0;
        for _ in 0..rounds {
            for block in data.chunks_exact_mut(BLOCK_LEN) {
                for (q, byte) in block.iter_mut().enumerate() {
                    let x = *byte ^ reg[q];
                    let c = rotl_byte(x, shifts[pos]);
                    *byte = substitute_byte(c, &self.boxes[selectors[pos] as usize]);
                    pos += 1;
                }
                reg.copy_from_slice(block);
            }
        }
        Ok(CiphertextContainer { rounds, original_length: plaintext.len() as u64, blocks: data })
    }

    pub fn decrypt(&self, ct: &CiphertextContainer) -> Result<Vec<u8>, CipherError> {
        ct.check()?;
        let n_blocks = ct.blocks.len() / BLOCK_LEN;
        let rounds = usize::from(ct.rounds);
        let (shifts, selectors) = derive_streams(&self.keys, n_blocks, rounds, self.boxes.len())?;

        let mut data = ct.blocks.clone();
        let unmix = |block: &mut [u8], base: usize| {
            for (q, byte) in block.iter_mut().enumerate() {
                let s = substitute_byte(*byte, &self.inverses[selectors[base + q] as usize]);
                *byte = rotr_byte(s, shifts[base + q]);
            }
        };
        for j in (0..rounds).rev() {
            let out = data.clone();
            let round_base = j * n_blocks * BLOCK_LEN;
            // Blocks after the first are chained to this round's ciphertext.
            for i in (1..n_blocks).rev() {
                let block = &mut data[i * BLOCK_LEN..(i + 1) * BLOCK_LEN];
                unmix(block, round_base + i * BLOCK_LEN);
                for (b, r) in block.iter_mut().zip(&out[(i - 1) * BLOCK_LEN..i * BLOCK_LEN]) {
                    *b ^= r;
                }
            }
            // The first block's register is k1 in round one and otherwise the
            // previous round's last ciphertext block, just recovered above.
            let reg: Block = if j == 0 {
                self.keys.k1
            } else {
                data[(n_blocks - 1) * BLOCK_LEN..].try_into().expect("one block")
            };
            let block = &mut data[..BLOCK_LEN];
            unmix(block, round_base);
            for (b, r) in block.iter_mut().zip(&reg) {
                *b ^= r;
            }
        }
        data.truncate(ct.original_length as usize);
        Ok(data)
    }
}

pub fn encrypt(
    plaintext: &[u8],
    keys: &CipherKeyBundle,
    family: &SBoxFamily,
    rounds: u8,
) -> Result<CiphertextContainer, CipherError> {
    Cipher::new(*keys, family)?.encrypt(plaintext, rounds)
}

pub fn decrypt(ct: &CiphertextContainer, keys: &CipherKeyBundle, family: &SBoxFamily) -> Result<Vec<u8>, CipherError> {
    Cipher::new(*keys, family)?.decrypt(ct)
}
