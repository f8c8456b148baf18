//! Longest-common-extension structures: a fingerprint baseline and the
//! recursive difference-cover index.
//!
//! [`BaselineLce`] keeps φ(T[i..]) at every g-aligned position (g = ⌈n/b⌉)
//! and answers a query by a short literal scan followed by a
//! doubling-then-binary search on fingerprint equality, each probe paying
//! O(g) to extend from the nearest anchor — O(b) size, O((n/b)·log n)
//! query. [`DcLce`] stacks difference-cover levels on top: level i holds
//! the sparse suffix array of a t_i-cover restricted to the text, so a
//! query can shift both positions into the cover in O(1), confirm the
//! shifted prefix by one fingerprint comparison, and finish with an O(1)
//! LCA lookup; anything near the text end or failing the prefix check falls
//! back to the baseline. Two regimes skip the levels entirely: b ≥ n/2
//! indexes every suffix outright, and b ≤ n/log₂ n keeps only the baseline.
//!
//! Level arrays are produced per round (residue class mod g) by a
//! [`RoundArraySource`] — the construction pipeline implements it with
//! coarse tries; [`BruteRoundSource`] is the reference implementation used
//! by oracles.

use std::sync::atomic::Ordering;

use crate::audit;
use crate::diffcover::{self, DifferenceCover};
use crate::error::{invalid, Result};
use crate::fingerprint::{fp_prepend, fp_strip_suffix, phi_build, FpContext, Fingerprint, PhiComponent};
use crate::sais;
use crate::text::{self, Text};
use crate::trie::{lcp_preprocess, trie_from_sorted, LcpIndex};
use crate::Pos;

/// Anchored fingerprint structure of size O(b).
pub struct BaselineLce<'a> {
    t: &'a Text,
    ctx: FpContext,
    n: u32,
    phi: PhiComponent,
}

/// One scan over the text; anchors at 1, 1+g, 1+2g, …
pub fn build_baseline<'a>(t: &'a Text, ctx: &FpContext, b: u32) -> Result<BaselineLce<'a>> {
    let n = t.n() as u32;
    if b == 0 || b > n {
        return Err(invalid(format!("b={b} out of range for n={n}")));
    }
    let g = n.div_ceil(b);
    let phi = phi_build(ctx, t, g)?;
    Ok(BaselineLce { t, ctx: ctx.clone(), n, phi })
}

impl<'a> BaselineLce<'a> {
    pub fn g(&self) -> u32 {
        self.phi.g()
    }

    pub fn anchor_count(&self) -> usize {
        self.phi.entries().len()
    }

    /// φ(T[1+k·g..n]).
    pub fn anchor(&self, k: usize) -> &Fingerprint {
        &self.phi.entries()[k]
    }

    /// φ(T[i..n]) for arbitrary i: O(g) left extension from the next anchor.
    fn suffix_fp_at(&self, i: Pos) -> Result<Fingerprint> {
        let g = self.phi.g() as u64;
        let a = 1 + ((i as u64 - 1).div_ceil(g)) * g;
        let mut fp;
        let mut pos;
        if a <= self.n as u64 {
            fp = *self.phi.suffix_fp(a as Pos)?;
            pos = a as Pos;
        } else {
            fp = self.ctx.empty();
            pos = self.n + 1;
        }
        while pos > i {
            pos -= 1;
            fp = fp_prepend(&self.ctx, self.t.sym(pos), &fp);
        }
        Ok(fp)
    }

    /// φ(T[i..i+l-1]), 1 ≤ l, i+l-1 ≤ n.
    pub(crate) fn fragment_fp(&self, i: Pos, l: u32) -> Result<Fingerprint> {
        debug_assert!(l >= 1 && (i as u64 + l as u64 - 1) <= self.n as u64);
        let w = self.suffix_fp_at(i)?;
        if i + l - 1 == self.n {
            return Ok(w);
        }
        let v = self.suffix_fp_at(i + l)?;
        fp_strip_suffix(&self.ctx, &v, &w)
    }

    pub(crate) fn fragment_equal(&self, i: Pos, j: Pos, l: u32) -> Result<bool> {
        if l == 0 {
            return Ok(true);
        }
        Ok(self.fragment_fp(i, l)? == self.fragment_fp(j, l)?)
    }
}

/// LCE by scan-then-fingerprint-search; equals `naive_lce` whenever the
/// involved fingerprints are collision-free.
pub fn baseline_query(s: &BaselineLce, i: Pos, j: Pos) -> Result<u32> {
    s.t.check_pos(i)?;
    s.t.check_pos(j)?;
    if i == j {
        return Ok(s.n - i + 1);
    }
    let max_possible = s.n + 1 - i.max(j);
    let scan_cap = (2 * s.phi.g() as u64).min(max_possible as u64) as u32;
    for k in 0..scan_cap {
        if s.t.sym(i + k) != s.t.sym(j + k) {
            return Ok(k);
        }
    }
    if scan_cap == max_possible {
        return Ok(max_possible);
    }
    let mut lo = scan_cap as u64; // known equal
    let mut hi = max_possible as u64 + 1; // sentinel: no failure seen yet
    let mut probe = lo * 2;
    while probe < max_possible as u64 {
        if s.fragment_equal(i, j, probe as u32)? {
            lo = probe;
            probe *= 2;
        } else {
            hi = probe;
            break;
        }
    }
    if hi > max_possible as u64 {
        if s.fragment_equal(i, j, max_possible)? {
            return Ok(max_possible);
        }
        hi = max_possible as u64;
    }
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if s.fragment_equal(i, j, mid as u32)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo as u32)
}

struct Level {
    cover: DifferenceCover,
    positions: Vec<Pos>,
    lcps: Vec<u32>,
    index: LcpIndex,
}

struct FullIndex {
    index: LcpIndex,
}

/// Difference-cover LCE index over a baseline.
pub struct DcLce<'a> {
    t: &'a Text,
    baseline: BaselineLce<'a>,
    levels: Vec<Level>,
    full: Option<FullIndex>,
    b: u32,
}

/// Supplies, for every level and round, the lexicographically sorted
/// positions of `B^(level) ∩ {p : p ≡ r (mod g)}`. Implemented efficiently
/// by the construction pipeline; see [`BruteRoundSource`] for the oracle.
pub trait RoundArraySource {
    fn round_arrays(
        &mut self,
        t: &Text,
        ctx: &FpContext,
        g: u32,
        covers: &[DifferenceCover],
    ) -> Result<Vec<Vec<Vec<Pos>>>>;
}

/// Reference source: buckets cover members by residue and sorts each bucket
/// by direct suffix comparison. Quadratic-ish; for oracles and small tests.
pub struct BruteRoundSource;

impl RoundArraySource for BruteRoundSource {
    fn round_arrays(
        &mut self,
        t: &Text,
        _ctx: &FpContext,
        g: u32,
        covers: &[DifferenceCover],
    ) -> Result<Vec<Vec<Vec<Pos>>>> {
        covers
            .iter()
            .map(|dc| {
                let mut rounds: Vec<Vec<Pos>> = vec![Vec::new(); g as usize];
                for p in dc.members() {
                    let p = p as Pos;
                    rounds[((p - 1) % g) as usize].push(p);
                }
                for run in &mut rounds {
                    run.sort_by(|&a, &b| text::suffix_compare(t, a, b).expect("members in range"));
                }
                Ok(rounds)
            })
            .collect()
    }
}

pub fn build_dc_lce<'a>(
    t: &'a Text,
    ctx: &FpContext,
    b: u32,
    source: &mut dyn RoundArraySource,
) -> Result<DcLce<'a>> {
    let n = t.n() as u32;
    if b == 0 || b > n {
        return Err(invalid(format!("b={b} out of range for n={n}")));
    }
    let baseline = build_baseline(t, ctx, b)?;

    // b ≥ n/2: index every suffix of the text directly.
    if 2 * b as u64 >= n as u64 {
        let full = build_full_index(t)?;
        return Ok(DcLce { t, baseline, levels: Vec::new(), full: Some(full), b });
    }
    // b ≤ n/log₂ n: the baseline already meets this regime's bound.
    if (b as f64) * (n as f64).log2() <= n as f64 {
        return Ok(DcLce { t, baseline, levels: Vec::new(), full: None, b });
    }

    // Levels: t_i = q^{2(i+1)} (exact squares), kept while t_i ≤ n.
    let q = (n as u64).div_ceil(b as u64);
    let mut covers = Vec::new();
    loop {
        let i = covers.len() as u32 + 1;
        let Some(ti) = q.checked_pow(2 * (i + 1)) else { break };
        if ti > n as u64 {
            break;
        }
        covers.push(diffcover::build_cover(ti, n as u64));
    }
    if covers.is_empty() {
        return Ok(DcLce { t, baseline, levels: Vec::new(), full: None, b });
    }

    let g = q as u32;
    let mut arrays = source.round_arrays(t, ctx, g, &covers)?;
    if arrays.len() != covers.len() {
        return Err(invalid(format!(
            "round source produced {} levels, expected {}",
            arrays.len(),
            covers.len()
        )));
    }

    // Bottom-up: the merge at level i compares suffixes with the already
    // finished level i+1 (the deepest level uses the baseline).
    let i_max = covers.len();
    let mut built: Vec<Option<Level>> = (0..i_max).map(|_| None).collect();
    for li in (0..i_max).rev() {
        let upper = built.get(li + 1).and_then(|o| o.as_ref());
        let runs = std::mem::take(&mut arrays[li]);
        let merged = merge_runs(runs, |p, q| suffix_less(t, &baseline, upper, p, q))?;
        let mut lcps = Vec::with_capacity(merged.len().saturating_sub(1));
        for w in merged.windows(2) {
            lcps.push(query_with(t, &baseline, upper, w[0], w[1])?);
        }
        let trie = trie_from_sorted(t, &merged, &lcps)?;
        let index = lcp_preprocess(&trie);
        built[li] = Some(Level { cover: covers[li].clone(), positions: merged, lcps, index });
    }
    let levels = built.into_iter().map(|o| o.expect("all levels built")).collect();
    Ok(DcLce { t, baseline, levels, full: None, b })
}

impl<'a> DcLce<'a> {
    pub fn baseline(&self) -> &BaselineLce<'a> {
        &self.baseline
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// True when the b ≥ n/2 regime indexed the whole text.
    pub fn is_full(&self) -> bool {
        self.full.is_some()
    }

    /// Sorted positions and adjacent LCPs of level `i` (1-based).
    pub fn level_array(&self, i: usize) -> Option<(&[Pos], &[u32])> {
        self.levels.get(i - 1).map(|lv| (lv.positions.as_slice(), lv.lcps.as_slice()))
    }

    pub fn level_cover(&self, i: usize) -> Option<&DifferenceCover> {
        self.levels.get(i - 1).map(|lv| &lv.cover)
    }
}

/// LCE through the cover shift at the given level; `None` goes straight to
/// the baseline. Only level 1 is consulted at query time; higher levels
/// serve the bottom-up construction.
fn query_with(t: &Text, base: &BaselineLce, level: Option<&Level>, i: Pos, j: Pos) -> Result<u32> {
    t.check_pos(i)?;
    t.check_pos(j)?;
    let n = t.n() as u64;
    if i == j {
        return Ok((n - i as u64 + 1) as u32);
    }
    let Some(lv) = level else {
        return baseline_query(base, i, j);
    };
    let te = lv.cover.t_eff();
    if i as u64 > n - te || j as u64 > n - te {
        audit::LCE_FALLBACKS.fetch_add(1, Ordering::Relaxed);
        return baseline_query(base, i, j);
    }
    let h = diffcover::shift(&lv.cover, i as u64, j as u64)? as u32;
    if h == 0 {
        return lv.index.lcp_query(i, j);
    }
    if base.fragment_equal(i, j, h)? {
        Ok(h + lv.index.lcp_query(i + h, j + h)?)
    } else {
        audit::LCE_FALLBACKS.fetch_add(1, Ordering::Relaxed);
        baseline_query(base, i, j)
    }
}

pub fn dc_query(s: &DcLce, i: Pos, j: Pos) -> Result<u32> {
    if let Some(full) = &s.full {
        s.t.check_pos(i)?;
        s.t.check_pos(j)?;
        return full.index.lcp_query(i, j);
    }
    query_with(s.t, &s.baseline, s.levels.first(), i, j)
}

/// Either backend behind one query interface; the construction pipeline
/// picks the variant by mode and threads it through as an opaque oracle.
pub enum LceEngine<'a> {
    Baseline(BaselineLce<'a>),
    Dc(DcLce<'a>),
}

impl LceEngine<'_> {
    pub fn query(&self, i: Pos, j: Pos) -> Result<u32> {
        match self {
            LceEngine::Baseline(s) => baseline_query(s, i, j),
            LceEngine::Dc(s) => dc_query(s, i, j),
        }
    }
}

fn suffix_less(t: &Text, base: &BaselineLce, upper: Option<&Level>, p: Pos, q: Pos) -> Result<bool> {
    let n = t.n() as u32;
    let l = query_with(t, base, upper, p, q)?;
    let (lp, lq) = (n - p + 1, n - q + 1);
    if l >= lp.min(lq) {
        Ok(lp < lq)
    } else {
        Ok(t.sym(p + l) < t.sym(q + l))
    }
}

/// Loser-tree multiway merge; comparisons are LCE-backed and fallible.
fn merge_runs(
    runs: Vec<Vec<Pos>>,
    mut less: impl FnMut(Pos, Pos) -> Result<bool>,
) -> Result<Vec<Pos>> {
    let mut runs: Vec<std::vec::IntoIter<Pos>> = runs
        .into_iter()
        .filter(|r| !r.is_empty())
        .map(|r| r.into_iter())
        .collect();
    let k = runs.len();
    let total: usize = runs.iter().map(|r| r.len()).sum();
    let mut out = Vec::with_capacity(total);
    if k == 0 {
        return Ok(out);
    }
    if k == 1 {
        out.extend(runs.pop().unwrap());
        return Ok(out);
    }

    let mut heads: Vec<Option<Pos>> = runs.iter_mut().map(|r| r.next()).collect();

    fn opt_less(
        a: Option<Pos>,
        b: Option<Pos>,
        less: &mut dyn FnMut(Pos, Pos) -> Result<bool>,
    ) -> Result<bool> {
        match (a, b) {
            (None, _) => Ok(false),
            (Some(_), None) => Ok(true),
            (Some(x), Some(y)) => less(x, y),
        }
    }

    // node[1..k) hold the losers of their subtrees; node[0] the champion.
    // Leaves live at conceptual indices k..2k-1, leaf k+i = run i.
    fn init(
        j: usize,
        k: usize,
        node: &mut [usize],
        heads: &[Option<Pos>],
        less: &mut dyn FnMut(Pos, Pos) -> Result<bool>,
    ) -> Result<usize> {
        if j >= k {
            return Ok(j - k);
        }
        let a = init(2 * j, k, node, heads, less)?;
        let b = init(2 * j + 1, k, node, heads, less)?;
        if opt_less(heads[a], heads[b], less)? {
            node[j] = b;
            Ok(a)
        } else {
            node[j] = a;
            Ok(b)
        }
    }

    let mut node = vec![usize::MAX; k];
    node[0] = init(1, k, &mut node, &heads, &mut less)?;

    loop {
        let w = node[0];
        let Some(v) = heads[w] else { break };
        out.push(v);
        heads[w] = runs[w].next();
        let mut cur = w;
        let mut j = (k + w) / 2;
        while j >= 1 {
            if !opt_less(heads[cur], heads[node[j]], &mut less)? {
                std::mem::swap(&mut cur, &mut node[j]);
            }
            if j == 1 {
                break;
            }
            j /= 2;
        }
        node[0] = cur;
    }
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

/// b ≥ n/2 path: suffix array + LCP of the whole text, indexed for LCA.
fn build_full_index(t: &Text) -> Result<FullIndex> {
    let n = t.n();
    let (ranks, sigma) = full_text_ranks(t);
    let sa = sais::suffix_array(&ranks, sigma);
    let lcp = sais::lcp_kasai(&ranks, &sa);
    let positions: Vec<Pos> = sa.iter().map(|&s| s + 1).collect();
    let lcps: Vec<u32> = lcp[1..].to_vec();
    debug_assert_eq!(positions.len(), n);
    let trie = trie_from_sorted(t, &positions, &lcps)?;
    Ok(FullIndex { index: lcp_preprocess(&trie) })
}

fn full_text_ranks(t: &Text) -> (Vec<u32>, u32) {
    if let Some(bytes) = t.bytes() {
        return (bytes.iter().map(|&c| c as u32).collect(), 256);
    }
    let n = t.n() as u32;
    let mut syms: Vec<u64> = (1..=n).map(|i| t.sym(i)).collect();
    let mut uniq = syms.clone();
    uniq.sort_unstable();
    uniq.dedup();
    for s in &mut syms {
        *s = uniq.binary_search(s).unwrap() as u64;
    }
    (syms.into_iter().map(|s| s as u32).collect(), uniq.len() as u32)
}
