//! Table-free t-difference-covers of {1,…,n}.
//!
//! For a period t, the cover uses r = ⌈√t⌉, the effective period t_eff = r²,
//! and the residue set P = {0,…,r−1} ∪ {r, 2r, …, (r−1)r} of size 2r−1.
//! Every difference δ mod t_eff is realized inside P, witnessed by a closed
//! form, so membership, the common shift h(i,j), and the rank bijection all
//! evaluate in O(1) from three stored integers.
//!
//! Callers request t and must consume `t_eff()` from the returned object:
//! the guarantee is h < t_eff, and t_eff may exceed t (next perfect square).

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug)]
pub struct DifferenceCover {
    t_requested: u64,
    r: u64,
    t_eff: u64,
    n: u64,
}

/// O(√t) construction (the work is one integer square root).
/// Requires 1 ≤ t ≤ n.
pub fn build_cover(t: u64, n: u64) -> DifferenceCover {
    assert!(t >= 1 && t <= n, "period {t} outside 1..={n}");
    let mut r = t.isqrt();
    if r * r < t {
        r += 1;
    }
    DifferenceCover { t_requested: t, r, t_eff: r * r, n }
}

impl DifferenceCover {
    pub fn t_requested(&self) -> u64 {
        self.t_requested
    }

    pub fn t_eff(&self) -> u64 {
        self.t_eff
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn residue_covered(&self, rho: u64) -> bool {
        debug_assert!(rho < self.t_eff);
        rho < self.r || rho.is_multiple_of(self.r)
    }

    /// Is 1-based position `i` in DC = {i ∈ [1,n] : i mod t_eff ∈ P}?
    #[inline]
    pub fn is_member(&self, i: u64) -> bool {
        i >= 1 && i <= self.n && self.residue_covered(i % self.t_eff)
    }

    /// |DC ∩ [1, n]|.
    pub fn size(&self) -> u64 {
        self.count_members_through(self.n)
    }

    fn count_members_through(&self, v: u64) -> u64 {
        // Each full block of t_eff consecutive positions holds 2r−1 members.
        let q = v / self.t_eff;
        let rho = v % self.t_eff;
        q * (2 * self.r - 1) + rho.min(self.r - 1) + rho / self.r
    }

    /// Ascending members of DC ∩ [1, n].
    pub fn members(&self) -> Members<'_> {
        Members { dc: self, next: 0 }
    }
}

/// Iterator over cover members; yields O(1) amortized per member.
pub struct Members<'a> {
    dc: &'a DifferenceCover,
    next: u64, // last yielded member, 0 initially
}

impl Iterator for Members<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let dc = self.dc;
        let (r, t_eff) = (dc.r, dc.t_eff);
        let mut i = self.next;
        loop {
            let rho = i % t_eff;
            // Successor of residue rho within P (or jump to next block).
            i += if rho + 1 < r {
                1
            } else if rho < r * (r - 1) {
                r - rho % r
            } else {
                t_eff - rho // wraps to the 0 residue of the next block
            };
            if i > dc.n {
                return None;
            }
            if dc.residue_covered(i % t_eff) {
                self.next = i;
                return Some(i);
            }
        }
    }
}

/// The common shift: h with 0 ≤ h < t_eff such that i+h and j+h are both
/// members. Defined only while both shifted positions stay in the domain,
/// hence the precondition i, j ≤ n − t_eff; callers too close to the end
/// use their short-range fallback instead.
pub fn shift(dc: &DifferenceCover, i: u64, j: u64) -> Result<u64> {
    for v in [i, j] {
        if v < 1 || v > dc.n.saturating_sub(dc.t_eff) {
            return Err(Error::PositionOutOfRange {
                pos: v,
                n: dc.n.saturating_sub(dc.t_eff),
            });
        }
    }
    let t = dc.t_eff;
    let r = dc.r;
    let delta = (j + t - i % t) % t;
    let (q, s) = (delta / r, delta % r);
    let w = if s == 0 {
        0
    } else if q <= r - 2 {
        r - s
    } else {
        r
    };
    let h = (w + t - i % t) % t;
    debug_assert!(dc.residue_covered((i + h) % t) && dc.residue_covered((j + h) % t));
    Ok(h)
}

/// Rank of member `i` within ascending DC; 1-based.
pub fn index(dc: &DifferenceCover, i: u64) -> Result<u64> {
    if !dc.is_member(i) {
        return Err(invalid(format!("position {i} not in the difference cover")));
    }
    Ok(dc.count_members_through(i))
}

/// Inverse of [`index`].
pub fn unindex(dc: &DifferenceCover, rank: u64) -> Result<u64> {
    if rank < 1 || rank > dc.size() {
        return Err(invalid(format!("rank {rank} outside 1..={}", dc.size())));
    }
    let per_block = 2 * dc.r - 1;
    let q = (rank - 1) / per_block;
    let pc = rank - q * per_block; // 1..=2r−1, position within the block
    // Within a block, ranks 1..r−1 are residues 1..r−1, ranks r..2r−2 are
    // the multiples r..(r−1)r, and rank 2r−1 is the 0 residue of the next
    // block boundary (position (q+1)·t_eff).
    let rho = if pc < dc.r {
        pc
    } else if pc < per_block {
        (pc - dc.r + 1) * dc.r
    } else {
        dc.t_eff
    };
    Ok(q * dc.t_eff + rho)
}
