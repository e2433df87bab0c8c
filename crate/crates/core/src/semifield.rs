//! GF(4), the 16-element proper semifield built over it, and the
//! pseudo-extension map `T` that turns a pseudo-irreducible quadratic into a
//! 256-entry substitution table.
//!
//! Elements of the semifield are written `u + λv` with `u, v ∈ GF(4)`. The
//! nibble encoding is `(u << 2) | v`, with GF(4) encoded as
//! `0 ↦ 00, 1 ↦ 01, ω ↦ 10, ω² ↦ 11`, so semifield addition is nibble XOR.
//!
//! Multiplication is
//!
//! ```text
//! (u + λv)(x + λy) = (ux + v²y) + λ(vx + u²y + v²y²)
//! ```
//!
//! which is distributive on both sides, has two-sided identity `1 + λ0`, no
//! zero divisors, and is not associative.

use std::fmt;
use std::ops::{Add, Mul};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sbox::SBox;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemifieldError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("nibble value {0:#x} is out of range")]
    InvalidNibble(u8),
    #[error("polynomial X^2 + {alpha}X + {beta} is not pseudo-irreducible")]
    NotPseudoIrreducible { alpha: SfElement, beta: SfElement },
    #[error("construction produced only {distinct} distinct outputs out of 256")]
    NonBijectiveResult { distinct: usize },
    #[error("semifield axiom violated: {0}")]
    AxiomViolation(String),
}

/// An element of GF(4) = {0, 1, ω, ω²}.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Gf4(u8);

// Multiplication in GF(4) indexed by the 2-bit encodings.
const GF4_MUL: [[u8; 4]; 4] = [[0, 0, 0, 0], [0, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]];

impl Gf4 {
    pub const ZERO: Gf4 = Gf4(0);
    pub const ONE: Gf4 = Gf4(1);
    pub const OMEGA: Gf4 = Gf4(2);
    pub const OMEGA_SQ: Gf4 = Gf4(3);

    pub fn new(value: u8) -> Option<Gf4> {
        (value < 4).then_some(Gf4(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn square(self) -> Gf4 {
        self * self
    }

    pub fn all() -> impl Iterator<Item = Gf4> {
        (0..4).map(Gf4)
    }
}

impl Add for Gf4 {
    type Output = Gf4;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf4) -> Gf4 {
        Gf4(self.0 ^ rhs.0)
    }
}

impl Mul for Gf4 {
    type Output = Gf4;

    fn mul(self, rhs: Gf4) -> Gf4 {
        Gf4(GF4_MUL[self.0 as usize][rhs.0 as usize])
    }
}

impl fmt::Debug for Gf4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Gf4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.0 {
            0 => "0",
            1 => "1",
            2 => "ω",
            _ => "ω²",
        };
        f.write_str(s)
    }
}

/// Which side an inverse is taken on. With a non-associative product the
/// left and right inverses of an element may differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `x` with `x · a = e`.
    Left,
    /// `x` with `a · x = e`.
    #[default]
    Right,
}

/// An element `u + λv` of the semifield of order 16.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SfElement {
    u: Gf4,
    v: Gf4,
}

impl SfElement {
    pub const ZERO: SfElement = SfElement { u: Gf4::ZERO, v: Gf4::ZERO };
    /// The multiplicative identity `e = 1 + λ0`.
    pub const ONE: SfElement = SfElement { u: Gf4::ONE, v: Gf4::ZERO };
    pub const LAMBDA: SfElement = SfElement { u: Gf4::ZERO, v: Gf4::ONE };

    pub fn new(u: Gf4, v: Gf4) -> SfElement {
        SfElement { u, v }
    }

    pub fn from_nibble(n: u8) -> Result<SfElement, SemifieldError> {
        if n > 0xF {
            return Err(SemifieldError::InvalidNibble(n));
        }
        Ok(SfElement { u: Gf4(n >> 2), v: Gf4(n & 3) })
    }

    pub fn to_nibble(self) -> u8 {
        (self.u.0 << 2) | self.v.0
    }

    pub fn u(self) -> Gf4 {
        self.u
    }

    pub fn v(self) -> Gf4 {
        self.v
    }

    pub fn is_zero(self) -> bool {
        self == SfElement::ZERO
    }

    /// All 16 elements in nibble order.
    pub fn all() -> impl Iterator<Item = SfElement> {
        (0u8..16).map(|n| SfElement { u: Gf4(n >> 2), v: Gf4(n & 3) })
    }

    /// Product straight from the defining formula. [`Mul`] goes through a
    /// precomputed table built from this.
    pub fn mul_by_formula(self, rhs: SfElement) -> SfElement {
        let (u, v) = (self.u, self.v);
        let (x, y) = (rhs.u, rhs.v);
        SfElement {
            u: u * x + v.square() * y,
            v: v * x + u.square() * y + v.square() * y.square(),
        }
    }

    pub fn inverse(self, side: Side) -> Result<SfElement, SemifieldError> {
        MulTable::semifield()
            .inverse(self.to_nibble(), side)
            .map(|n| SfElement::from_nibble(n).expect("table entries are nibbles"))
    }
}

impl Add for SfElement {
    type Output = SfElement;

    fn add(self, rhs: SfElement) -> SfElement {
        SfElement { u: self.u + rhs.u, v: self.v + rhs.v }
    }
}

impl Mul for SfElement {
    type Output = SfElement;

    fn mul(self, rhs: SfElement) -> SfElement {
        let n = MulTable::semifield().mul(self.to_nibble(), rhs.to_nibble());
        SfElement { u: Gf4(n >> 2), v: Gf4(n & 3) }
    }
}

impl fmt::Debug for SfElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?},{:?})", self.u, self.v)
    }
}

impl fmt::Display for SfElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.to_nibble())
    }
}

/// Multiplication table of a 16-element algebra on nibbles whose addition is
/// XOR, plus its identity. Used by the `T` construction so the same code can
/// run over the semifield and over GF(16) as a control.
#[derive(Clone, PartialEq, Eq)]
pub struct MulTable {
    name: &'static str,
    mul: [[u8; 16]; 16],
    one: u8,
    right_inv: [u8; 16],
    left_inv: [u8; 16],
}

impl fmt::Debug for MulTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MulTable").field("name", &self.name).finish_non_exhaustive()
    }
}

impl MulTable {
    /// Builds the table from a product function. Inverses are found by
    /// exhaustive search; an element without one keeps the placeholder 0.
    pub fn from_fn(name: &'static str, one: u8, f: impl Fn(u8, u8) -> u8) -> MulTable {
        let mut mul = [[0u8; 16]; 16];
        for a in 0..16u8 {
            for b in 0..16u8 {
                mul[a as usize][b as usize] = f(a, b) & 0xF;
            }
        }
        let mut right_inv = [0u8; 16];
        let mut left_inv = [0u8; 16];
        for a in 1..16usize {
            if let Some(x) = (0..16u8).find(|&x| mul[a][x as usize] == one) {
                right_inv[a] = x;
            }
            if let Some(x) = (0..16u8).find(|&x| mul[x as usize][a] == one) {
                left_inv[a] = x;
            }
        }
        MulTable { name, mul, one, right_inv, left_inv }
    }

    /// The semifield of order 16.
    pub fn semifield() -> &'static MulTable {
        static TABLE: OnceLock<MulTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            MulTable::from_fn("semifield16", SfElement::ONE.to_nibble(), |a, b| {
                let a = SfElement { u: Gf4(a >> 2), v: Gf4(a & 3) };
                let b = SfElement { u: Gf4(b >> 2), v: Gf4(b & 3) };
                a.mul_by_formula(b).to_nibble()
            })
        })
    }

    /// GF(16) as GF(2)[z]/(z⁴ + z + 1). Commutative and associative.
    pub fn gf16() -> &'static MulTable {
        static TABLE: OnceLock<MulTable> = OnceLock::new();
        TABLE.get_or_init(|| MulTable::from_fn("gf16", 1, gf16_mul))
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn one(&self) -> u8 {
        self.one
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize & 0xF][b as usize & 0xF]
    }

    pub fn inverse(&self, a: u8, side: Side) -> Result<u8, SemifieldError> {
        if a & 0xF == 0 {
            return Err(SemifieldError::ZeroInverse);
        }
        Ok(match side {
            Side::Right => self.right_inv[a as usize & 0xF],
            Side::Left => self.left_inv[a as usize & 0xF],
        })
    }

    /// Non-vanishing condition for `X² + αX + β`: `(α − γ)γ − β ≠ 0` for all
    /// 16 elements γ. Subtraction is addition in characteristic 2.
    pub fn is_pseudo_irreducible(&self, alpha: u8, beta: u8) -> bool {
        (0..16u8).all(|g| self.mul(alpha ^ g, g) ^ beta != 0)
    }

    /// Checks the semifield axioms exhaustively. Addition is XOR, so the
    /// additive group laws hold by construction; everything multiplicative
    /// is checked on every tuple.
    pub fn check_axioms(&self) -> Result<AxiomReport, SemifieldError> {
        let fail = |msg: String| Err(SemifieldError::AxiomViolation(msg));
        for a in 0..16u8 {
            if self.mul(self.one, a) != a || self.mul(a, self.one) != a {
                return fail(format!("identity fails at {a:#x}"));
            }
            for b in 0..16u8 {
                if self.mul(a, b) == 0 && a != 0 && b != 0 {
                    return fail(format!("zero divisor {a:#x}·{b:#x}"));
                }
                for c in 0..16u8 {
                    if self.mul(a, b ^ c) != self.mul(a, b) ^ self.mul(a, c) {
                        return fail(format!("left distributivity at ({a:#x},{b:#x},{c:#x})"));
                    }
                    if self.mul(a ^ b, c) != self.mul(a, c) ^ self.mul(b, c) {
                        return fail(format!("right distributivity at ({a:#x},{b:#x},{c:#x})"));
                    }
                }
            }
        }
        for a in 1..16u8 {
            let mut row = [false; 16];
            let mut col = [false; 16];
            for x in 0..16u8 {
                row[self.mul(a, x) as usize] = true;
                col[self.mul(x, a) as usize] = true;
            }
            if !row.iter().all(|&h| h) || !col.iter().all(|&h| h) {
                return fail(format!("multiplication by {a:#x} is not a bijection"));
            }
        }
        let mut witness = None;
        let mut non_associative_triples = 0;
        for a in 0..16u8 {
            for b in 0..16u8 {
                for c in 0..16u8 {
                    if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                        non_associative_triples += 1;
                        witness.get_or_insert((a, b, c));
                    }
                }
            }
        }
        Ok(AxiomReport { non_associative_triples, associativity_witness: witness })
    }
}

fn gf16_mul(a: u8, b: u8) -> u8 {
    let mut acc = 0u8;
    for i in 0..4 {
        if (b >> i) & 1 == 1 {
            acc ^= a << i;
        }
    }
    for i in (4..8).rev() {
        if (acc >> i) & 1 == 1 {
            acc ^= 0b1_0011 << (i - 4);
        }
    }
    acc
}

/// Outcome of [`MulTable::check_axioms`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub non_associative_triples: usize,
    /// First `(a, b, c)` in nibble order with `(ab)c ≠ a(bc)`.
    pub associativity_witness: Option<(u8, u8, u8)>,
}

/// `P(X) = X² + αX + β` over the semifield.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PseudoPolynomial {
    pub alpha: SfElement,
    pub beta: SfElement,
}

impl PseudoPolynomial {
    pub fn new(alpha: SfElement, beta: SfElement) -> PseudoPolynomial {
        PseudoPolynomial { alpha, beta }
    }

    pub fn is_pseudo_irreducible(&self) -> bool {
        MulTable::semifield().is_pseudo_irreducible(self.alpha.to_nibble(), self.beta.to_nibble())
    }

    /// Every pseudo-irreducible `(α, β)` pair, in nibble order.
    pub fn all_pseudo_irreducible() -> Vec<PseudoPolynomial> {
        let table = MulTable::semifield();
        (0..16u8)
            .flat_map(|a| (0..16u8).map(move |b| (a, b)))
            .filter(|&(a, b)| table.is_pseudo_irreducible(a, b))
            .map(|(a, b)| PseudoPolynomial {
                alpha: SfElement::from_nibble(a).unwrap(),
                beta: SfElement::from_nibble(b).unwrap(),
            })
            .collect()
    }
}

/// How `a⁻¹c` is formed from the inverse of `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuotientOrder {
    /// `inv(a) · x`
    #[default]
    InverseFirst,
    /// `x · inv(a)`
    InverseLast,
}

/// Operand order of `d = c(α − γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DOrder {
    /// `c · (α − γ)`
    #[default]
    CFirst,
    /// `(α − γ) · c`
    CLast,
}

/// Conventions for the products in `T` that a non-associative,
/// non-commutative multiplication leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct TConvention {
    pub inverse_side: Side,
    pub quotient: QuotientOrder,
    pub d_order: DOrder,
}

impl TConvention {
    /// All eight combinations.
    pub fn all() -> impl Iterator<Item = TConvention> {
        [Side::Right, Side::Left].into_iter().flat_map(|inverse_side| {
            [QuotientOrder::InverseFirst, QuotientOrder::InverseLast].into_iter().flat_map(
                move |quotient| {
                    [DOrder::CFirst, DOrder::CLast]
                        .into_iter()
                        .map(move |d_order| TConvention { inverse_side, quotient, d_order })
                },
            )
        })
    }
}

/// Evaluates `T` on every byte `(a << 4) | b` without checking bijectivity.
///
/// ```text
/// T(0, 0) = (0, 0)
/// T(0, b) = (0, b⁻¹)
/// T(a, b) = (a⁻¹c, a⁻¹d)   γ = a⁻¹b, c = [(α − γ)γ − β]⁻¹, d = c(α − γ)
/// ```
pub fn t_map_table(
    table: &MulTable,
    alpha: u8,
    beta: u8,
    conv: TConvention,
) -> Result<[u8; 256], SemifieldError> {
    if !table.is_pseudo_irreducible(alpha, beta) {
        return Err(SemifieldError::NotPseudoIrreducible {
            alpha: SfElement::from_nibble(alpha & 0xF)?,
            beta: SfElement::from_nibble(beta & 0xF)?,
        });
    }
    let side = conv.inverse_side;
    let quotient = |a_inv: u8, x: u8| match conv.quotient {
        QuotientOrder::InverseFirst => table.mul(a_inv, x),
        QuotientOrder::InverseLast => table.mul(x, a_inv),
    };
    let mut out = [0u8; 256];
    for (byte, slot) in out.iter_mut().enumerate() {
        let a = (byte >> 4) as u8;
        let b = (byte & 0xF) as u8;
        *slot = match (a, b) {
            (0, 0) => 0,
            (0, b) => table.inverse(b, side)?,
            (a, b) => {
                let a_inv = table.inverse(a, side)?;
                let gamma = quotient(a_inv, b);
                let diff = alpha ^ gamma;
                // Non-zero by pseudo-irreducibility.
                let c = table.inverse(table.mul(diff, gamma) ^ beta, side)?;
                let d = match conv.d_order {
                    DOrder::CFirst => table.mul(c, diff),
                    DOrder::CLast => table.mul(diff, c),
                };
                (quotient(a_inv, c) << 4) | quotient(a_inv, d)
            }
        };
    }
    Ok(out)
}

fn distinct_count(table: &[u8; 256]) -> usize {
    let mut seen = [false; 256];
    table.iter().for_each(|&v| seen[v as usize] = true);
    seen.iter().filter(|&&s| s).count()
}

/// Builds the S-box of a pseudo-irreducible polynomial through `T` over the
/// semifield. Fails with [`SemifieldError::NonBijectiveResult`] when the
/// resulting table is not a permutation.
pub fn build_sbox_via_t(p: &PseudoPolynomial, conv: TConvention) -> Result<SBox, SemifieldError> {
    build_sbox_via_t_in(MulTable::semifield(), p.alpha.to_nibble(), p.beta.to_nibble(), conv)
}

/// [`build_sbox_via_t`] over an arbitrary nibble algebra.
pub fn build_sbox_via_t_in(
    table: &MulTable,
    alpha: u8,
    beta: u8,
    conv: TConvention,
) -> Result<SBox, SemifieldError> {
    let out = t_map_table(table, alpha, beta, conv)?;
    let distinct = distinct_count(&out);
    if distinct != 256 {
        return Err(SemifieldError::NonBijectiveResult { distinct });
    }
    Ok(SBox::from_raw(out))
}

/// One row of [`scan_constructions`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstructionScanRow {
    pub alpha: u8,
    pub beta: u8,
    pub convention: TConvention,
    pub distinct_outputs: usize,
    pub bijective: bool,
    /// Whether the table equals the published fixture.
    pub matches_fixture: bool,
}

/// Runs `T` for every pseudo-irreducible `(α, β)` under every convention and
/// records how close each result is to a permutation.
pub fn scan_constructions(table: &MulTable, fixture: Option<&SBox>) -> Vec<ConstructionScanRow> {
    let mut rows = Vec::new();
    for alpha in 0..16u8 {
        for beta in 0..16u8 {
            if !table.is_pseudo_irreducible(alpha, beta) {
                continue;
            }
            for convention in TConvention::all() {
                let out = t_map_table(table, alpha, beta, convention)
                    .expect("pseudo-irreducible and inverses exist");
                let distinct_outputs = distinct_count(&out);
                rows.push(ConstructionScanRow {
                    alpha,
                    beta,
                    convention,
                    distinct_outputs,
                    bijective: distinct_outputs == 256,
                    matches_fixture: fixture.is_some_and(|f| f.table() == &out),
                });
            }
        }
    }
    rows
}
