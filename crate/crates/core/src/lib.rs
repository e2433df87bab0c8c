//! Semifield S-boxes, their S₈ output-bit families and strength metrics, a
//! chaos-keyed substitution–permutation block cipher, and the statistical
//! tooling used to evaluate it.
//!
//! This is a research reproduction. The cipher is not suitable for
//! protecting real data.

pub mod chaos;
pub mod cipher;
pub mod evaluation;
pub mod image;
pub mod metrics;
pub mod nist;
pub mod sbox;
pub mod semifield;
