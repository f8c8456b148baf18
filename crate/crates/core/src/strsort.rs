//! Bounded-space batch string sorting.
//!
//! Two primitives with complementary budgets, both stable and both using the
//! shorter-is-smaller rule when one string is a prefix of another:
//!
//! * [`sort_quadratic`] — insertion sort with a per-character three-class
//!   partition scan; O(b·(b+ℓ)) time, O(b) extra space, no alphabet
//!   assumptions.
//! * [`sort_radix`] — least-significant-chunk-first counting sort, splitting
//!   each symbol into ⌊log₂ S⌋-bit chunks to respect a space budget of S
//!   counters; O((b+S)·ℓ·log_S σ) time, O(b+S) space.
//!
//! Strings are referenced, never copied: a batch pairs `(start, len, tag)`
//! descriptors with a symbol accessor resolving `(start, offset)` to a
//! symbol. Symbols are u128 so both text characters and fingerprint values
//! can be sorted by the same machinery.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug)]
pub struct StringRef {
    /// Opaque base address, interpreted by the batch's accessor.
    pub start: u64,
    pub len: u32,
    /// Carried through to the output permutation.
    pub tag: u32,
}

/// Random-access string batch. Tags should be unique if the caller wants an
/// unambiguous permutation back.
pub struct StringRefBatch<A> {
    pub items: Vec<StringRef>,
    pub access: A,
}

impl<A> StringRefBatch<A>
where
    A: Fn(u64, u32) -> u128,
{
    pub fn new(items: Vec<StringRef>, access: A) -> Self {
        StringRefBatch { items, access }
    }

    /// Symbol `k` of item `idx`, or None past its end.
    #[inline]
    fn sym(&self, idx: usize, k: u32) -> Option<u128> {
        let it = &self.items[idx];
        if k < it.len {
            Some((self.access)(it.start, k))
        } else {
            None
        }
    }
}

/// Stable lexicographic sort by repeated insertion. Each insertion descends
/// character positions, maintaining the window of already-sorted strings
/// equal to the new one so far; the window shrinks by advancing its two
/// boundaries past the smaller and greater classes.
pub fn sort_quadratic<A>(batch: &StringRefBatch<A>) -> Vec<u32>
where
    A: Fn(u64, u32) -> u128,
{
    let mut sorted: Vec<usize> = Vec::with_capacity(batch.items.len());
    for idx in 0..batch.items.len() {
        let mut lo = 0usize;
        let mut hi = sorted.len();
        let mut k = 0u32;
        loop {
            if lo == hi {
                break;
            }
            match batch.sym(idx, k) {
                None => {
                    // New string exhausted: it follows exactly the existing
                    // strings that are equal to it (stability), which sit at
                    // the front of the window.
                    while lo < hi && batch.sym(sorted[lo], k).is_none() {
                        lo += 1;
                    }
                    break;
                }
                Some(s) => {
                    while lo < hi && batch.sym(sorted[lo], k).is_none_or(|c| c < s) {
                        lo += 1;
                    }
                    while hi > lo && batch.sym(sorted[hi - 1], k).is_some_and(|c| c > s) {
                        hi -= 1;
                    }
                    k += 1;
                }
            }
        }
        sorted.insert(lo, idx);
    }
    sorted.into_iter().map(|i| batch.items[i].tag).collect()
}

/// Stable LSD radix sort under a space budget. `sigma` bounds the symbols
/// (exclusive); `space` is the counter budget S, requiring 2 ≤ S ≤ σ.
pub fn sort_radix<A>(batch: &StringRefBatch<A>, sigma: u128, space: usize) -> Result<Vec<u32>>
where
    A: Fn(u64, u32) -> u128,
{
    if space < 2 {
        return Err(invalid(format!("radix space budget {space} < 2")));
    }
    if (space as u128) > sigma {
        return Err(invalid(format!("radix space budget {space} exceeds alphabet {sigma}")));
    }
    let b = batch.items.len();
    let chunk_bits = (usize::BITS - 1 - space.leading_zeros()).min(32); // ⌊log₂ S⌋
    let sym_bits = (128 - (sigma - 1).leading_zeros()).max(1);
    let chunks_per_sym = sym_bits.div_ceil(chunk_bits);
    let buckets = (1usize << chunk_bits) + 1; // bucket 0 = past-end
    let max_len = batch.items.iter().map(|it| it.len).max().unwrap_or(0);

    let mut order: Vec<u32> = (0..b as u32).collect();
    let mut scratch: Vec<u32> = vec![0; b];
    let mut counts: Vec<u32> = vec![0; buckets];

    for pos in (0..max_len).rev() {
        for chunk in 0..chunks_per_sym {
            let shift = chunk * chunk_bits;
            let key = |idx: u32| -> usize {
                match batch.sym(idx as usize, pos) {
                    None => 0,
                    Some(s) => (((s >> shift) as usize) & ((1 << chunk_bits) - 1)) + 1,
                }
            };
            counts.fill(0);
            for &idx in &order {
                counts[key(idx)] += 1;
            }
            let mut sum = 0u32;
            for c in counts.iter_mut() {
                let here = *c;
                *c = sum;
                sum += here;
            }
            for &idx in &order {
                let k = key(idx);
                scratch[counts[k] as usize] = idx;
                counts[k] += 1;
            }
            std::mem::swap(&mut order, &mut scratch);
        }
    }
    Ok(order.into_iter().map(|i| batch.items[i as usize].tag).collect())
}
