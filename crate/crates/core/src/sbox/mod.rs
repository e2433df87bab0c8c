//! Substitution boxes, the S₈ action on output bits and families of boxes
//! indexed by permutation rank.

mod file;
mod fixtures;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use file::{
    parse_family, parse_sbox, read_family_file, read_sbox_file, render_family, render_sbox,
    write_family_file, write_sbox_file,
};
pub use fixtures::{AES_TABLE, SEMIFIELD_TABLE};

/// Number of elements of S₈.
pub const S8_ORDER: u32 = 40_320;

#[derive(Debug, Error)]
pub enum SBoxError {
    #[error("table is not a permutation: duplicated {duplicated:?}, missing {missing:?}")]
    NotBijective { duplicated: Vec<u8>, missing: Vec<u8> },
    #[error("fixture erratum: duplicated {duplicated:?}, missing {missing:?}")]
    FixtureNotBijective { duplicated: Vec<u8>, missing: Vec<u8> },
    #[error("permutation rank {0} is outside 0..40320")]
    RankOutOfRange(u64),
    #[error("not a permutation of 0..8: {0:?}")]
    InvalidPermutation([u8; 8]),
    #[error("family size {0} is outside 1..=40320")]
    InvalidFamilySize(usize),
    #[error("malformed S-box file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A 256-entry byte substitution table. Index is the input byte.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SBox {
    table: [u8; 256],
}

impl fmt::Debug for SBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SBox({:02x?}..)", &self.table[..8])
    }
}

impl SBox {
    /// Wraps a table after checking that it is a permutation of the bytes.
    pub fn new(table: [u8; 256]) -> Result<SBox, SBoxError> {
        let (duplicated, missing) = permutation_defects(&table);
        if duplicated.is_empty() {
            Ok(SBox { table })
        } else {
            Err(SBoxError::NotBijective { duplicated, missing })
        }
    }

    /// Wraps an arbitrary table without the bijectivity check, for analysing
    /// tables that may not be permutations.
    pub fn from_raw(table: [u8; 256]) -> SBox {
        SBox { table }
    }

    pub fn identity() -> SBox {
        SBox { table: std::array::from_fn(|i| i as u8) }
    }

    pub fn aes() -> SBox {
        SBox { table: AES_TABLE }
    }

    #[inline]
    pub fn apply(&self, x: u8) -> u8 {
        self.table[x as usize]
    }

    pub fn table(&self) -> &[u8; 256] {
        &self.table
    }

    pub fn is_permutation(&self) -> bool {
        permutation_defects(&self.table).0.is_empty()
    }

    /// Inverse table. Only meaningful for permutations.
    pub fn inverse(&self) -> SBox {
        let mut inv = [0u8; 256];
        for (x, &y) in self.table.iter().enumerate() {
            inv[y as usize] = x as u8;
        }
        SBox { table: inv }
    }

    /// Relabels output bits: bit `j` of the result (bit 0 = most significant,
    /// the leading Boolean component) is bit `p[j]` of the original output.
    pub fn permute_output_bits(&self, p: &BitPermutation) -> SBox {
        let mut table = [0u8; 256];
        for (dst, &y) in table.iter_mut().zip(self.table.iter()) {
            *dst = p.apply_to_byte(y);
        }
        SBox { table }
    }
}

/// Values occurring more than once and values never occurring.
fn permutation_defects(table: &[u8; 256]) -> (Vec<u8>, Vec<u8>) {
    let mut count = [0u16; 256];
    table.iter().for_each(|&v| count[v as usize] += 1);
    let duplicated = (0..=255u8).filter(|&v| count[v as usize] > 1).collect();
    let missing = (0..=255u8).filter(|&v| count[v as usize] == 0).collect();
    (duplicated, missing)
}

/// The published semifield S-box. A table that is not a permutation is
/// reported as an erratum instead of being accepted.
pub fn load_fixture_sbox() -> Result<SBox, SBoxError> {
    let (duplicated, missing) = permutation_defects(&SEMIFIELD_TABLE);
    if !duplicated.is_empty() {
        return Err(SBoxError::FixtureNotBijective { duplicated, missing });
    }
    Ok(SBox { table: SEMIFIELD_TABLE })
}

/// `apply_bit_permutation` under its free-function name.
pub fn apply_bit_permutation(s: &SBox, p: &BitPermutation) -> SBox {
    s.permute_output_bits(p)
}

/// An element of S₈ acting on the eight output-bit positions.
///
/// `sigma[j]` is the source position of output bit `j`; positions are
/// numbered from the most significant bit.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BitPermutation {
    sigma: [u8; 8],
}

impl fmt::Debug for BitPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitPermutation{:?}", self.sigma)
    }
}

impl BitPermutation {
    pub fn new(sigma: [u8; 8]) -> Result<BitPermutation, SBoxError> {
        let mut seen = [false; 8];
        for &s in &sigma {
            if s >= 8 || seen[s as usize] {
                return Err(SBoxError::InvalidPermutation(sigma));
            }
            seen[s as usize] = true;
        }
        Ok(BitPermutation { sigma })
    }

    /// From one-line notation on positions 1..=8, e.g. `[1,3,2,4,6,5,7,8]`.
    pub fn from_one_based(one_line: [u8; 8]) -> Result<BitPermutation, SBoxError> {
        let mut sigma = [0u8; 8];
        for (dst, &v) in sigma.iter_mut().zip(one_line.iter()) {
            *dst = v.wrapping_sub(1);
        }
        BitPermutation::new(sigma).map_err(|_| SBoxError::InvalidPermutation(one_line))
    }

    pub fn identity() -> BitPermutation {
        BitPermutation { sigma: [0, 1, 2, 3, 4, 5, 6, 7] }
    }

    pub fn sigma(&self) -> [u8; 8] {
        self.sigma
    }

    /// The `rank`-th permutation in lexicographic order, decoded through the
    /// factorial number system.
    pub fn unrank(rank: u32) -> Result<BitPermutation, SBoxError> {
        if rank >= S8_ORDER {
            return Err(SBoxError::RankOutOfRange(rank.into()));
        }
        let mut pool: Vec<u8> = (0..8).collect();
        let mut rest = rank;
        let mut sigma = [0u8; 8];
        for (i, slot) in sigma.iter_mut().enumerate() {
            let f = factorial(7 - i as u32);
            let idx = (rest / f) as usize;
            rest %= f;
            *slot = pool.remove(idx);
        }
        Ok(BitPermutation { sigma })
    }

    /// Inverse of [`BitPermutation::unrank`].
    pub fn rank(&self) -> u32 {
        let mut rank = 0;
        for i in 0..8 {
            let smaller_later = self.sigma[i + 1..].iter().filter(|&&s| s < self.sigma[i]).count();
            rank += smaller_later as u32 * factorial(7 - i as u32);
        }
        rank
    }

    pub fn inverse(&self) -> BitPermutation {
        let mut inv = [0u8; 8];
        for (j, &s) in self.sigma.iter().enumerate() {
            inv[s as usize] = j as u8;
        }
        BitPermutation { sigma: inv }
    }

    /// The permutation equivalent to acting by `self` and then by `next`:
    /// `s.permute_output_bits(self).permute_output_bits(next)
    ///  == s.permute_output_bits(&self.then(next))`.
    /// As maps on positions, the result is `j ↦ self[next[j]]`.
    pub fn then(&self, next: &BitPermutation) -> BitPermutation {
        BitPermutation { sigma: std::array::from_fn(|j| self.sigma[next.sigma[j] as usize]) }
    }

    #[inline]
    pub fn apply_to_byte(&self, y: u8) -> u8 {
        let mut out = 0u8;
        for (j, &src) in self.sigma.iter().enumerate() {
            let bit = (y >> (7 - src)) & 1;
            out |= bit << (7 - j);
        }
        out
    }
}

fn factorial(n: u32) -> u32 {
    (1..=n).product()
}

/// A seed S-box together with the permutation ranks of its members. Boxes
/// are derived on demand; [`SBoxFamily::materialize`] builds them all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SBoxFamily {
    seed: SBox,
    ranks: Vec<u32>,
}

impl SBoxFamily {
    pub fn new(seed: SBox, ranks: Vec<u32>) -> Result<SBoxFamily, SBoxError> {
        if ranks.is_empty() || ranks.len() > S8_ORDER as usize {
            return Err(SBoxError::InvalidFamilySize(ranks.len()));
        }
        if !seed.is_permutation() {
            let (duplicated, missing) = permutation_defects(seed.table());
            return Err(SBoxError::NotBijective { duplicated, missing });
        }
        if let Some(&bad) = ranks.iter().find(|&&r| r >= S8_ORDER) {
            return Err(SBoxError::RankOutOfRange(bad.into()));
        }
        Ok(SBoxFamily { seed, ranks })
    }

    /// Rebuilds a family from `(rank, box)` members, recovering the seed from
    /// the first member and checking that every member agrees with it.
    pub fn from_members(members: &[(u32, SBox)]) -> Result<SBoxFamily, SBoxError> {
        let (first_rank, first) = members.first().ok_or(SBoxError::InvalidFamilySize(0))?;
        let seed = first.permute_output_bits(&BitPermutation::unrank(*first_rank)?.inverse());
        let family = SBoxFamily::new(seed, members.iter().map(|(r, _)| *r).collect())?;
        for (i, (rank, sbox)) in members.iter().enumerate() {
            if &family.get(i) != sbox {
                return Err(SBoxError::MalformedFile(format!(
                    "member with seed-rank {rank} is not derived from the same seed"
                )));
            }
        }
        Ok(family)
    }

    pub fn seed(&self) -> &SBox {
        &self.seed
    }

    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Member `i`, derived from the seed. Panics if `i >= len()`.
    pub fn get(&self, i: usize) -> SBox {
        let p = BitPermutation::unrank(self.ranks[i]).expect("ranks validated at construction");
        self.seed.permute_output_bits(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, SBox)> + '_ {
        self.ranks.iter().enumerate().map(|(i, &r)| (r, self.get(i)))
    }

    pub fn materialize(&self) -> Vec<SBox> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }
}

/// Family of the boxes with ranks `0..count`.
pub fn generate_family(seed: &SBox, count: usize) -> Result<SBoxFamily, SBoxError> {
    if count == 0 || count > S8_ORDER as usize {
        return Err(SBoxError::InvalidFamilySize(count));
    }
    SBoxFamily::new(seed.clone(), (0..count as u32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn fixture_values() {
        let s = load_fixture_sbox().unwrap();
        assert_eq!(s.apply(0x00), 63);
        assert_eq!(s.apply(0x01), 32);
        assert_eq!(s.apply(0xFF), 254);
    }

    #[test]
    fn non_permutation_is_reported() {
        let mut t = *SBox::identity().table();
        t[7] = 3;
        match SBox::new(t) {
            Err(SBoxError::NotBijective { duplicated, missing }) => {
                assert_eq!(duplicated, vec![3]);
                assert_eq!(missing, vec![7]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unrank_examples() {
        assert_eq!(BitPermutation::unrank(0).unwrap(), BitPermutation::identity());
        assert_eq!(BitPermutation::unrank(40319).unwrap().sigma(), [7, 6, 5, 4, 3, 2, 1, 0]);
        assert_eq!(BitPermutation::unrank(1).unwrap().sigma(), [0, 1, 2, 3, 4, 5, 7, 6]);
        assert!(matches!(BitPermutation::unrank(40320), Err(SBoxError::RankOutOfRange(40320))));
    }

    #[test]
    fn unrank_is_a_bijection_onto_s8() {
        let mut seen = HashSet::new();
        let mut prev: Option<[u8; 8]> = None;
        for r in 0..S8_ORDER {
            let p = BitPermutation::unrank(r).unwrap();
            assert_eq!(p.rank(), r);
            if let Some(prev) = prev {
                assert!(prev < p.sigma(), "lexicographic order broken at {r}");
            }
            prev = Some(p.sigma());
            assert!(seen.insert(p.sigma()));
        }
        assert_eq!(seen.len(), 40320);
    }

    #[test]
    fn figure_example_swaps_components() {
        let s = load_fixture_sbox().unwrap();
        let p = BitPermutation::from_one_based([1, 3, 2, 4, 6, 5, 7, 8]).unwrap();
        let t = s.permute_output_bits(&p);
        let bit = |y: u8, j: u32| (y >> (7 - j)) & 1;
        for x in 0..=255u8 {
            let (a, b) = (s.apply(x), t.apply(x));
            for (j, src) in [0, 2, 1, 3, 5, 4, 6, 7].into_iter().enumerate() {
                assert_eq!(bit(b, j as u32), bit(a, src));
            }
        }
    }

    #[test]
    fn identity_action() {
        let s = SBox::aes();
        assert_eq!(s.permute_output_bits(&BitPermutation::identity()), s);
    }

    #[test]
    fn family_of_one_is_the_seed() {
        let seed = load_fixture_sbox().unwrap();
        let fam = generate_family(&seed, 1).unwrap();
        assert_eq!(fam.get(0), seed);
        assert!(matches!(generate_family(&seed, 0), Err(SBoxError::InvalidFamilySize(0))));
        assert!(generate_family(&seed, 40321).is_err());
    }

    #[test]
    fn full_family_is_pairwise_distinct() {
        let seed = load_fixture_sbox().unwrap();
        let fam = generate_family(&seed, S8_ORDER as usize).unwrap();
        let mut seen = HashSet::new();
        for (_, b) in fam.iter() {
            assert!(b.is_permutation());
            assert!(seen.insert(*b.table()));
        }
        assert_eq!(seen.len(), 40320);
    }

    #[test]
    fn from_members_recovers_seed() {
        let seed = SBox::aes();
        let fam = SBoxFamily::new(seed.clone(), vec![17, 3, 40000]).unwrap();
        let members: Vec<_> = fam.iter().collect();
        let back = SBoxFamily::from_members(&members).unwrap();
        assert_eq!(back.seed(), &seed);
        assert_eq!(back.ranks(), &[17, 3, 40000]);
    }

    fn arb_perm() -> impl Strategy<Value = BitPermutation> {
        (0..S8_ORDER).prop_map(|r| BitPermutation::unrank(r).unwrap())
    }

    fn arb_sbox() -> impl Strategy<Value = SBox> {
        Just((0..=255u8).collect::<Vec<_>>()).prop_shuffle().prop_map(|v| {
            let mut t = [0u8; 256];
            t.copy_from_slice(&v);
            SBox::new(t).unwrap()
        })
    }

    proptest! {
        #[test]
        fn group_action_law(s in arb_sbox(), p in arb_perm(), q in arb_perm()) {
            let two_step = s.permute_output_bits(&p).permute_output_bits(&q);
            prop_assert_eq!(two_step, s.permute_output_bits(&p.then(&q)));
        }

        #[test]
        fn inverse_undoes_action(s in arb_sbox(), p in arb_perm()) {
            let t = s.permute_output_bits(&p);
            prop_assert!(t.is_permutation());
            prop_assert_eq!(t.permute_output_bits(&p.inverse()), s);
        }
    }
}
