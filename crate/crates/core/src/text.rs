//! Read-only text handle, position sets, and the brute-force oracles that
//! serve as ground truth in every test suite.
//!
//! Positions are 1-based throughout the crate. When one suffix is a proper
//! prefix of another, the shorter suffix compares smaller (a virtual
//! end-of-text sentinel below every symbol).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::Pos;

/// Largest supported text length; keeps positions and lengths in `u32`.
pub const MAX_TEXT_LEN: u64 = u32::MAX as u64 - 1;

#[derive(Clone)]
enum TextData {
    Bytes(Vec<u8>),
    /// Integer symbols for polynomially bounded alphabets.
    Wide { syms: Vec<u64>, sigma: u64 },
}

/// Immutable text with 1-based random access.
#[derive(Clone)]
pub struct Text {
    data: TextData,
}

impl Text {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Result<Text> {
        let bytes = bytes.into();
        if bytes.len() as u64 > MAX_TEXT_LEN {
            return Err(Error::TextTooLarge { n: bytes.len() as u64, limit: MAX_TEXT_LEN });
        }
        Ok(Text { data: TextData::Bytes(bytes) })
    }

    /// Wide-symbol mode: symbols are arbitrary `u64` values; `sigma` is one
    /// past the largest symbol actually present.
    pub fn from_wide(syms: Vec<u64>) -> Result<Text> {
        if syms.len() as u64 > MAX_TEXT_LEN {
            return Err(Error::TextTooLarge { n: syms.len() as u64, limit: MAX_TEXT_LEN });
        }
        let sigma = syms.iter().copied().max().map_or(1, |m| m + 1);
        Ok(Text { data: TextData::Wide { syms, sigma } })
    }

    pub fn n(&self) -> usize {
        match &self.data {
            TextData::Bytes(b) => b.len(),
            TextData::Wide { syms, .. } => syms.len(),
        }
    }

    /// Alphabet bound: one past the largest representable symbol.
    pub fn sigma(&self) -> u64 {
        match &self.data {
            TextData::Bytes(_) => 256,
            TextData::Wide { sigma, .. } => *sigma,
        }
    }

    /// Symbol at 1-based position `i`. Out-of-range access is a violation of
    /// the caller's contract and panics.
    #[inline]
    pub fn sym(&self, i: Pos) -> u64 {
        debug_assert!(i >= 1 && i as usize <= self.n(), "position {i} out of range");
        match &self.data {
            TextData::Bytes(b) => b[i as usize - 1] as u64,
            TextData::Wide { syms, .. } => syms[i as usize - 1],
        }
    }

    /// Raw bytes when in byte mode (the common case); enables memcmp-style
    /// slice comparisons in the oracles and the verifier.
    pub fn bytes(&self) -> Option<&[u8]> {
        match &self.data {
            TextData::Bytes(b) => Some(b),
            TextData::Wide { .. } => None,
        }
    }

    pub(crate) fn check_pos(&self, i: Pos) -> Result<()> {
        if i >= 1 && i as usize <= self.n() {
            Ok(())
        } else {
            Err(Error::PositionOutOfRange { pos: i as u64, n: self.n() as u64 })
        }
    }
}

impl std::fmt::Debug for Text {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Text(n={}, sigma={})", self.n(), self.sigma())
    }
}

/// Strictly increasing, non-empty set of 1-based positions.
#[derive(Clone, Debug)]
pub struct PositionSet {
    positions: Vec<Pos>,
}

impl PositionSet {
    /// Normalizes (sorts, deduplicates) and validates against `t`.
    pub fn new(t: &Text, mut positions: Vec<Pos>) -> Result<PositionSet> {
        positions.sort_unstable();
        positions.dedup();
        if positions.is_empty() {
            return Err(Error::BadPositionSet);
        }
        for &p in &positions {
            t.check_pos(p)?;
        }
        Ok(PositionSet { positions })
    }

    pub fn positions(&self) -> &[Pos] {
        &self.positions
    }

    pub fn b(&self) -> usize {
        self.positions.len()
    }
}

/// Length of the longest common prefix of `T[i..]` and `T[j..]`, by scan.
pub fn naive_lce(t: &Text, i: Pos, j: Pos) -> Result<u32> {
    t.check_pos(i)?;
    t.check_pos(j)?;
    if i == j {
        return Ok(t.n() as u32 - i + 1);
    }
    if let Some(bytes) = t.bytes() {
        let a = &bytes[i as usize - 1..];
        let b = &bytes[j as usize - 1..];
        let m = a.len().min(b.len());
        // Chunked equality is much faster than a byte loop on long matches.
        let mut l = 0;
        while l + 64 <= m && a[l..l + 64] == b[l..l + 64] {
            l += 64;
        }
        while l < m && a[l] == b[l] {
            l += 1;
        }
        return Ok(l as u32);
    }
    let n = t.n() as u32;
    let mut l = 0;
    while i + l <= n && j + l <= n && t.sym(i + l) == t.sym(j + l) {
        l += 1;
    }
    Ok(l)
}

/// Lexicographic order of the suffixes `T[i..]` and `T[j..]`; `Equal` only
/// for identical positions (distinct suffixes always differ in length).
pub fn suffix_compare(t: &Text, i: Pos, j: Pos) -> Result<Ordering> {
    t.check_pos(i)?;
    t.check_pos(j)?;
    if i == j {
        return Ok(Ordering::Equal);
    }
    if let Some(bytes) = t.bytes() {
        return Ok(bytes[i as usize - 1..].cmp(&bytes[j as usize - 1..]));
    }
    let n = t.n() as u32;
    let l = naive_lce(t, i, j)?;
    Ok(if i + l > n {
        Ordering::Less // T[i..] exhausted first: proper prefix of T[j..]
    } else if j + l > n {
        Ordering::Greater
    } else {
        t.sym(i + l).cmp(&t.sym(j + l))
    })
}

/// Brute-force sparse suffix sort: positions ordered by [`suffix_compare`],
/// LCPs by [`naive_lce`] of adjacent pairs. Quadratic; the oracle every
/// acceptance suite compares against.
pub fn brute_sparse_sort(t: &Text, set: &PositionSet) -> (Vec<Pos>, Vec<u32>) {
    let mut order: Vec<Pos> = set.positions().to_vec();
    order.sort_by(|&a, &b| suffix_compare(t, a, b).expect("validated positions"));
    let lcps = order
        .windows(2)
        .map(|w| naive_lce(t, w[0], w[1]).expect("validated positions"))
        .collect();
    (order, lcps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(s: &str) -> Text {
        Text::from_bytes(s.as_bytes().to_vec()).unwrap()
    }

    #[test]
    fn lce_examples() {
        let t = text("abaababa");
        assert_eq!(naive_lce(&t, 1, 4).unwrap(), 3);
        let banana = text("banana");
        assert_eq!(naive_lce(&banana, 2, 4).unwrap(), 3);
        assert_eq!(naive_lce(&banana, 3, 3).unwrap(), 4); // identity: n-i+1
        assert!(naive_lce(&banana, 0, 1).is_err());
        assert!(naive_lce(&banana, 1, 7).is_err());
    }

    #[test]
    fn lce_symmetric_exhaustive() {
        let t = Text::from_bytes(
            (0..64u32).map(|i| b"aabab"[(i as usize * 7) % 5]).collect::<Vec<_>>(),
        )
        .unwrap();
        let n = t.n() as Pos;
        for i in 1..=n {
            for j in 1..=n {
                assert_eq!(naive_lce(&t, i, j).unwrap(), naive_lce(&t, j, i).unwrap());
            }
        }
    }

    #[test]
    fn compare_prefix_rule() {
        let t = text("banana");
        assert_eq!(suffix_compare(&t, 5, 3).unwrap(), Ordering::Less); // "na" < "nana"
        assert_eq!(suffix_compare(&t, 1, 5).unwrap(), Ordering::Less); // "banana" < "na"
        assert_eq!(suffix_compare(&t, 4, 4).unwrap(), Ordering::Equal);
    }

    #[test]
    fn compare_is_total_order() {
        // Antisymmetry + transitivity over all triples of a small text.
        let t = text("abracadabraabracadabra");
        let n = t.n() as Pos;
        for i in 1..=n {
            for j in 1..=n {
                let ij = suffix_compare(&t, i, j).unwrap();
                assert_eq!(ij, suffix_compare(&t, j, i).unwrap().reverse());
                for k in 1..=n {
                    let jk = suffix_compare(&t, j, k).unwrap();
                    if ij == jk {
                        assert_eq!(suffix_compare(&t, i, k).unwrap(), ij);
                    }
                }
            }
        }
    }

    #[test]
    fn wide_mode_matches_bytes() {
        let bytes = b"mississippi".to_vec();
        let tb = Text::from_bytes(bytes.clone()).unwrap();
        let tw = Text::from_wide(bytes.iter().map(|&b| b as u64).collect()).unwrap();
        let n = tb.n() as Pos;
        for i in 1..=n {
            for j in 1..=n {
                assert_eq!(naive_lce(&tb, i, j).unwrap(), naive_lce(&tw, i, j).unwrap());
                assert_eq!(suffix_compare(&tb, i, j).unwrap(), suffix_compare(&tw, i, j).unwrap());
            }
        }
    }

    #[test]
    fn brute_sort_examples() {
        let t = text("banana");
        let set = PositionSet::new(&t, vec![1, 3, 5]).unwrap();
        let (order, lcps) = brute_sparse_sort(&t, &set);
        assert_eq!(order, vec![1, 5, 3]);
        assert_eq!(lcps, vec![0, 2]);

        let t = text("aaaa");
        let set = PositionSet::new(&t, vec![1, 2, 3, 4]).unwrap();
        let (order, lcps) = brute_sparse_sort(&t, &set);
        assert_eq!(order, vec![4, 3, 2, 1]);
        assert_eq!(lcps, vec![1, 2, 3]);

        let single = PositionSet::new(&t, vec![2]).unwrap();
        let (order, lcps) = brute_sparse_sort(&t, &single);
        assert_eq!(order, vec![2]);
        assert!(lcps.is_empty());
    }

    #[test]
    fn brute_sort_permutes_input() {
        let t = text("abracadabra");
        let set = PositionSet::new(&t, vec![11, 2, 7, 4, 1]).unwrap();
        let (mut order, _) = brute_sparse_sort(&t, &set);
        order.sort_unstable();
        assert_eq!(order, set.positions());
    }

    #[test]
    fn position_set_normalizes_and_validates() {
        let t = text("banana");
        let set = PositionSet::new(&t, vec![5, 1, 3, 5]).unwrap();
        assert_eq!(set.positions(), &[1, 3, 5]);
        assert_eq!(set.b(), 3);
        assert!(PositionSet::new(&t, vec![]).is_err());
        assert!(PositionSet::new(&t, vec![0]).is_err());
        assert!(PositionSet::new(&t, vec![7]).is_err());
    }
}
