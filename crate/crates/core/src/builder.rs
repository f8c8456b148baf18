//! The Monte Carlo construction pipeline: coarse compacted tries over
//! block supercharacters (insertion path for small b, per-round merge path
//! for large b), uncoarsening to exact character depths, and the top-level
//! sparse-suffix-tree build.

use std::time::Instant;

use crate::audit::UNCOARSEN_CHAR_CMPS;
use crate::error::{invalid, Result};
use crate::fingerprint::{
    fp_of_fragment, fp_strip_prefix, new_context, phi_advance, phi_build, phi_fragment, FpContext,
    PhiComponent, DEFAULT_C, DEFAULT_SEED,
};
use crate::lce::{build_baseline, build_dc_lce, LceEngine, RoundArraySource};
use crate::sais;
use crate::strsort::{sort_quadratic, sort_radix, StringRef, StringRefBatch};
use crate::text::{PositionSet, Text};
use crate::trie::{
    trie_from_sorted, CoarseTrie, CompactedTrie, EdgeKey, InsertAt, NodeId, ROOT,
};
use crate::Pos;

/// Which LCE backend answers edge-interior divergence queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LceMode {
    /// Shifted difference-cover LCE; O(n) total build work.
    Fast,
    /// Baseline anchors only; O(n + b log b) total build work.
    Slow,
}

/// Which coarse construction strategy to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoarsePath {
    /// Per-suffix root-to-locus insertion (intended for b² ≤ n).
    Small,
    /// Per-round tries merged in coarse order (intended for b² > n).
    Large,
}

#[derive(Clone, Debug)]
pub struct BuildConfig {
    pub seed: u64,
    /// Error-probability exponent: collisions with probability n^{-c}.
    pub c: u32,
    pub mode: LceMode,
    /// Overrides the b² ≤ n path choice when set (tests, benchmarks).
    pub path_override: Option<CoarsePath>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig { seed: DEFAULT_SEED, c: DEFAULT_C, mode: LceMode::Fast, path_override: None }
    }
}

/// Stage wall times in milliseconds.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuildTimings {
    pub lce_ms: f64,
    pub coarse_ms: f64,
    pub uncoarsen_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug)]
pub struct BuildMeta {
    pub seed: u64,
    pub c: u32,
    pub prime: u128,
    pub mode: LceMode,
    pub path: CoarsePath,
    pub timings: BuildTimings,
}

/// The finished sparse suffix tree: the exact compacted trie over the
/// requested suffixes plus its array view (positions in lexicographic
/// order with adjacent LCPs).
#[derive(Debug)]
pub struct SparseSuffixTree {
    trie: CompactedTrie,
    positions: Vec<Pos>,
    lcps: Vec<u32>,
    meta: BuildMeta,
}

impl SparseSuffixTree {
    pub fn trie(&self) -> &CompactedTrie {
        &self.trie
    }

    pub fn positions(&self) -> &[Pos] {
        &self.positions
    }

    pub fn lcps(&self) -> &[u32] {
        &self.lcps
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    pub fn b(&self) -> usize {
        self.positions.len()
    }
}

/// The block string T_r of one round: supercharacter identities
/// (fingerprint value, block length) per block, plus their dense rank
/// normalization over {1, …}.
#[derive(Clone, Debug)]
pub struct RoundString {
    r: u32,
    g: u32,
    syms: Vec<EdgeKey>,
    ranks: Vec<u32>,
}

impl RoundString {
    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn g(&self) -> u32 {
        self.g
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syms.is_empty()
    }

    pub fn syms(&self) -> &[EdgeKey] {
        &self.syms
    }

    /// Dense 1-based ranks, ordered consistently with the (value, length)
    /// supercharacter order.
    pub fn ranks(&self) -> &[u32] {
        &self.ranks
    }
}

/// T_r from Φ_r: one O(1) fragment evaluation per block, then dense ranks
/// via a single-symbol radix sort under counter budget `space`. Each block
/// is a single composite symbol value·(g+1)+len so that rank order equals
/// (value, length) order — the length tie-break makes a truncated tail
/// block distinct from any same-valued full block.
pub fn round_string(ctx: &FpContext, phi: &PhiComponent, space: usize) -> Result<RoundString> {
    let n = ctx.n() as u32;
    let r = phi.r();
    let g = phi.g();
    let m = phi.entries().len();
    let mut syms: Vec<EdgeKey> = Vec::with_capacity(m);
    for j in 0..m as u32 {
        let start = r + j * g;
        let blen = g.min(n - start + 1);
        let fp = phi_fragment(ctx, phi, start, start + blen - 1)?;
        syms.push((fp.value, blen as u64));
    }
    let mult = g as u128 + 1;
    let sigma = ctx
        .p()
        .checked_mul(mult)
        .ok_or_else(|| invalid(format!("block alphabet p·(g+1) overflows at g={g}")))?;
    let keys: Vec<u128> = syms.iter().map(|&(v, l)| v * mult + l as u128).collect();
    let items = (0..m).map(|j| StringRef { start: j as u64, len: 1, tag: j as u32 }).collect();
    let batch = StringRefBatch::new(items, |s, _| keys[s as usize]);
    let order = sort_radix(&batch, sigma, space.max(2))?;

    let mut ranks = vec![0u32; m];
    let mut next = 0u32;
    let mut prev: Option<u128> = None;
    for &tag in &order {
        let k = keys[tag as usize];
        if prev != Some(k) {
            next += 1;
            prev = Some(k);
        }
        ranks[tag as usize] = next;
    }
    Ok(RoundString { r, g, syms, ranks })
}

/// Suffix array and LCP (in whole blocks) of a round's rank string.
struct RoundTables {
    rs: RoundString,
    sa: Vec<u32>,
    lcp: Vec<u32>,
}

fn round_tables(ctx: &FpContext, phi: &PhiComponent, space: usize) -> Result<RoundTables> {
    let rs = round_string(ctx, phi, space)?;
    let sigma = rs.ranks.iter().copied().max().unwrap_or(0) + 1;
    let sa = sais::suffix_array(&rs.ranks, sigma);
    let lcp = sais::lcp_kasai(&rs.ranks, &sa);
    Ok(RoundTables { rs, sa, lcp })
}

/// Stack construction of a coarse trie with fingerprints restored from Φ_r.
fn blocks_to_trie(
    n: u32,
    ctx: &FpContext,
    phi: &PhiComponent,
    leaves: &[Pos],
    lcps: &[u32],
) -> Result<CoarseTrie> {
    CoarseTrie::from_sorted_blocks(
        phi.g(),
        n,
        leaves,
        lcps,
        |p, d| phi_fragment(ctx, phi, p, p + d - 1).expect("node depth is block-aligned"),
        |s, l| {
            let f = phi_fragment(ctx, phi, s, s + l - 1).expect("edge block is aligned");
            (f.value, l as u64)
        },
    )
}

/// Restriction of a round's sorted leaf order to the given members, with
/// block LCPs tightened by range minimum over the skipped leaves.
fn restrict_order(
    rs: &RoundString,
    sa: &[u32],
    lcp: &[u32],
    members: &[Pos],
) -> (Vec<Pos>, Vec<u32>) {
    let mut sel = vec![false; rs.len()];
    for &p in members {
        debug_assert!(p >= rs.r() && (p - rs.r()).is_multiple_of(rs.g()), "member {p} not in round");
        sel[((p - rs.r()) / rs.g()) as usize] = true;
    }
    let mut leaves = Vec::with_capacity(members.len());
    let mut lcps = Vec::with_capacity(members.len().saturating_sub(1));
    let mut run_min = u32::MAX;
    let mut any = false;
    for (k, &j) in sa.iter().enumerate() {
        if k > 0 {
            run_min = run_min.min(lcp[k]);
        }
        if sel[j as usize] {
            if any {
                lcps.push(run_min);
            }
            leaves.push(rs.r() + j * rs.g());
            any = true;
            run_min = u32::MAX;
        }
    }
    (leaves, lcps)
}

/// The coarse trie of all r-aligned suffixes S_r: rank-normalize T_r, one
/// linear suffix array + LCP pass over the ranks, then stack construction
/// with edge annotations re-derived from Φ_r. `space` is the radix counter
/// budget (the caller's b).
pub fn coarse_trie_of_round(
    t: &Text,
    ctx: &FpContext,
    phi: &PhiComponent,
    space: usize,
) -> Result<CoarseTrie> {
    let n = t.n() as u32;
    let tables = round_tables(ctx, phi, space)?;
    let leaves: Vec<Pos> = tables.sa.iter().map(|&j| tables.rs.r() + j * tables.rs.g()).collect();
    blocks_to_trie(n, ctx, phi, &leaves, &tables.lcp[1..])
}

/// Coarse trie of the given r-aligned members only, derived from the full
/// round tables by order restriction (O(|T_r|)).
fn round_subset_trie(
    t: &Text,
    ctx: &FpContext,
    phi: &PhiComponent,
    members: &[Pos],
    space: usize,
) -> Result<CoarseTrie> {
    let n = t.n() as u32;
    let tables = round_tables(ctx, phi, space)?;
    let (leaves, lcps) = restrict_order(&tables.rs, &tables.sa, &tables.lcp, members);
    blocks_to_trie(n, ctx, phi, &leaves, &lcps)
}

const CUR_UNSET: NodeId = u32::MAX;
const CUR_END: NodeId = u32::MAX - 1;

/// Descent state shared across insertions. In monotone mode (merge rounds,
/// members arriving in coarse lexicographic order) the stack resumes from
/// the previous terminal and per-node child cursors advance only forward;
/// otherwise every insertion restarts from the root and scans children.
struct Walk {
    monotone: bool,
    stack: Vec<NodeId>,
    cursors: Vec<NodeId>,
}

impl Walk {
    fn new(monotone: bool) -> Walk {
        Walk { monotone, stack: vec![ROOT], cursors: Vec::new() }
    }

    fn grow(&mut self, count: usize) {
        if self.monotone && self.cursors.len() < count {
            self.cursors.resize(count, CUR_UNSET);
        }
    }
}

/// Insert one suffix of the current round into `acc`: pop the resumed path
/// to the deepest coarse prefix (O(1) fingerprint test per pop), descend by
/// supercharacter keys with whole-edge fingerprint comparisons, and resolve
/// edge-interior divergence with a single LCE query rounded down to a block
/// boundary; a subdivision pays one O(g) scan to re-key the demoted edge.
fn insert_suffix(
    acc: &mut CoarseTrie,
    t: &Text,
    ctx: &FpContext,
    phi: &PhiComponent,
    lce: &LceEngine,
    p: Pos,
    walk: &mut Walk,
) -> Result<()> {
    let g = acc.g();
    let n = acc.n();
    debug_assert!(p >= phi.r() && (p - phi.r()).is_multiple_of(g), "suffix {p} not aligned to round");
    let leaf_len = n - p + 1;
    walk.grow(acc.node_count());

    if walk.monotone {
        // Pop to the deepest stacked node whose string is a coarse prefix
        // of T[p..]. Depths that are not multiples of g belong to tail
        // blocks, which no other suffix can match coarsely.
        while walk.stack.len() > 1 {
            let u = *walk.stack.last().unwrap();
            let d = acc.depth(u);
            if d.is_multiple_of(g)
                && d <= leaf_len
                && phi_fragment(ctx, phi, p, p + d - 1)? == *acc.fp(u)
            {
                break;
            }
            walk.stack.pop();
        }
    } else {
        walk.stack.clear();
        walk.stack.push(ROOT);
    }

    loop {
        let u = *walk.stack.last().unwrap();
        let d = acc.depth(u);
        let remaining = leaf_len - d;
        if remaining == 0 {
            // The suffix is exactly str(u): terminal on an existing node.
            return acc.set_terminal(u, p);
        }
        let blen = remaining.min(g);
        let bstart = p + d;
        let bfp = phi_fragment(ctx, phi, bstart, bstart + blen - 1)?;
        let bkey: EdgeKey = (bfp.value, blen as u64);

        // Locate the first child with key ≥ bkey, resuming from the cursor
        // when the walk is monotone.
        let mut c = if walk.monotone {
            match walk.cursors[u as usize] {
                CUR_UNSET => acc.first_child(u),
                CUR_END => None,
                cur => Some(cur),
            }
        } else {
            acc.first_child(u)
        };
        while let Some(x) = c {
            if acc.key(x) >= bkey {
                break;
            }
            c = acc.next_sibling(x);
        }
        if walk.monotone {
            walk.cursors[u as usize] = c.map_or(CUR_END, |x| x);
        }
        let cand = c.filter(|&x| acc.key(x) == bkey);

        let Some(v) = cand else {
            let sfp = *phi.suffix_fp(p)?;
            let (leaf, _) = acc.insert_leaf(InsertAt::Node(u), p, sfp, bkey, None)?;
            walk.grow(acc.node_count());
            if walk.monotone {
                walk.cursors[u as usize] = leaf;
            }
            walk.stack.push(leaf);
            return Ok(());
        };

        let (es, ee) = acc.edge(v);
        let edgelen = ee - es + 1;
        let full_blocks = edgelen % g == 0;
        if remaining >= edgelen && (full_blocks || remaining == edgelen) {
            let frag = phi_fragment(ctx, phi, bstart, bstart + edgelen - 1)?;
            let label = fp_strip_prefix(ctx, acc.fp(u), acc.fp(v))?;
            if frag == label {
                walk.stack.push(v);
                continue;
            }
        }

        // Divergence strictly inside the edge (or inside its first block).
        // One LCE query; the split depth is its block-aligned floor. A
        // full-block edge whose label fingerprint differed cannot match
        // through its whole length; a tail-block edge can match through all
        // characters yet still diverge coarsely at the short block.
        let l = lce.query(bstart, es)?;
        let capped = if full_blocks { l.min(edgelen - 1) } else { l.min(edgelen) };
        let dd = d + (capped / g) * g;
        if dd == d {
            // Divergence within the first block: the key equality was a
            // collision; hang beside v as an equal-key sibling.
            let sfp = *phi.suffix_fp(p)?;
            let (leaf, _) = acc.insert_leaf(InsertAt::Node(u), p, sfp, bkey, None)?;
            walk.grow(acc.node_count());
            walk.stack.push(leaf);
            return Ok(());
        }
        let split_fp = phi_fragment(ctx, phi, p, p + dd - 1)?;
        let (mid, pending) = acc.split_at(v, dd, split_fp)?;
        let fixed = fp_of_fragment(ctx, t, pending.start, pending.start + pending.len - 1)?;
        acc.set_edge_key(pending.node, (fixed.value, pending.len as u64));
        walk.grow(acc.node_count());
        if walk.monotone && walk.cursors[u as usize] == v {
            walk.cursors[u as usize] = mid;
        }
        walk.stack.push(mid);
        if dd == leaf_len {
            return acc.set_terminal(mid, p);
        }
        let bstart2 = p + dd;
        let blen2 = (leaf_len - dd).min(g);
        let f2 = phi_fragment(ctx, phi, bstart2, bstart2 + blen2 - 1)?;
        let sfp = *phi.suffix_fp(p)?;
        let (leaf, _) =
            acc.insert_leaf(InsertAt::Node(mid), p, sfp, (f2.value, blen2 as u64), None)?;
        walk.grow(acc.node_count());
        walk.stack.push(leaf);
        return Ok(());
    }
}

/// Members grouped by round (ascending r, positions ascending within each
/// round) without allocating one bucket per residue class.
fn rounds_of(members: &[Pos], g: u32) -> Vec<(u32, Vec<Pos>)> {
    let mut tagged: Vec<(u32, Pos)> = members.iter().map(|&p| ((p - 1) % g + 1, p)).collect();
    tagged.sort_unstable();
    let mut groups: Vec<(u32, Vec<Pos>)> = Vec::new();
    for (r, p) in tagged {
        match groups.last_mut() {
            Some((gr, ps)) if *gr == r => ps.push(p),
            _ => groups.push((r, vec![p])),
        }
    }
    groups
}

/// Coarse trie of B by per-suffix insertion: ⌈n/b⌉ rounds, each inserting
/// its aligned members by a root-to-locus descent under Φ_r.
pub fn build_coarse_small(
    t: &Text,
    ctx: &FpContext,
    bset: &PositionSet,
    lce: &LceEngine,
) -> Result<CoarseTrie> {
    let n = t.n() as u32;
    let b = bset.b() as u32;
    let g = ((n as u64).div_ceil(b as u64)) as u32;
    let mut acc = CoarseTrie::new(g, n);
    let groups = rounds_of(bset.positions(), g);
    let last_r = groups.last().map_or(1, |(r, _)| *r);
    let mut phi = phi_build(ctx, t, g)?;
    let mut walk = Walk::new(false);
    let mut gi = 0;
    for r in 1..=last_r {
        if gi < groups.len() && groups[gi].0 == r {
            for &p in &groups[gi].1 {
                insert_suffix(&mut acc, t, ctx, &phi, lce, p, &mut walk)?;
            }
            gi += 1;
        }
        if r < last_r {
            phi = phi_advance(ctx, t, phi)?;
        }
    }
    Ok(acc)
}

/// Merge one round's coarse trie into the accumulator: its members are
/// inserted in coarse lexicographic order, each descent resuming from the
/// previous terminal's path with monotone per-node child cursors.
pub fn merge_round(
    acc: &mut CoarseTrie,
    part: &CoarseTrie,
    t: &Text,
    ctx: &FpContext,
    phi: &PhiComponent,
    lce: &LceEngine,
) -> Result<()> {
    if acc.g() != part.g() || acc.n() != part.n() {
        return Err(invalid(format!(
            "cannot merge coarse tries with g {} vs {} (n {} vs {})",
            acc.g(),
            part.g(),
            acc.n(),
            part.n()
        )));
    }
    if part.g() != phi.g() {
        return Err(invalid(format!("round component g {} does not match tries", phi.g())));
    }
    let mut walk = Walk::new(true);
    for p in part.terminals_in_order() {
        insert_suffix(acc, t, ctx, phi, lce, p, &mut walk)?;
    }
    Ok(())
}

/// Coarse trie of B by per-round construction: for every nonempty round,
/// the sorted order of its members is cut out of the full round tables and
/// merged into the accumulator; Φ_r rolls forward between rounds.
pub fn build_coarse_large(
    t: &Text,
    ctx: &FpContext,
    bset: &PositionSet,
    lce: &LceEngine,
) -> Result<CoarseTrie> {
    let n = t.n() as u32;
    let b = bset.b() as u32;
    let g = ((n as u64).div_ceil(b as u64)) as u32;
    let mut acc = CoarseTrie::new(g, n);
    let groups = rounds_of(bset.positions(), g);
    let last_r = groups.last().map_or(1, |(r, _)| *r);
    let mut phi = phi_build(ctx, t, g)?;
    let mut gi = 0;
    for r in 1..=last_r {
        if gi < groups.len() && groups[gi].0 == r {
            let part = round_subset_trie(t, ctx, &phi, &groups[gi].1, b as usize)?;
            merge_round(&mut acc, &part, t, ctx, &phi, lce)?;
            gi += 1;
        }
        if r < last_r {
            phi = phi_advance(ctx, t, phi)?;
        }
    }
    Ok(acc)
}

/// Character LCP of two edges' first blocks by direct comparison,
/// instrumented via [`UNCOARSEN_CHAR_CMPS`].
fn first_block_lcp(t: &Text, g: u32, coarse: &CoarseTrie, c1: NodeId, c2: NodeId) -> u32 {
    let (s1, e1) = coarse.edge(c1);
    let (s2, e2) = coarse.edge(c2);
    let l1 = g.min(e1 - s1 + 1);
    let l2 = g.min(e2 - s2 + 1);
    let lim = l1.min(l2);
    let mut k = 0;
    let mut cmps = 0u64;
    while k < lim {
        cmps += 1;
        if t.sym(s1 + k) != t.sym(s2 + k) {
            break;
        }
        k += 1;
    }
    UNCOARSEN_CHAR_CMPS.fetch_add(cmps, std::sync::atomic::Ordering::Relaxed);
    k
}

/// Exact compacted trie from a coarse one. All first-block edge labels of
/// branching nodes are sorted in one global batch (quadratic sort when
/// b ≤ √n, radix otherwise); a DFS in the refined child order then emits
/// the leaf array with divergence depths — depth(parent) plus a direct
/// character LCP of adjacent first blocks — and the stack construction
/// rebuilds the exact trie with lexicographic sibling order.
pub fn uncoarsen(t: &Text, coarse: &CoarseTrie, budget: usize) -> Result<CompactedTrie> {
    let n = t.n() as u32;
    let g = coarse.g();
    let count = coarse.node_count();

    let mut kid_lists: Vec<Vec<NodeId>> = vec![Vec::new(); count];
    let mut items: Vec<StringRef> = Vec::new();
    for u in 0..count as NodeId {
        let kids = coarse.children(u);
        match kids.len() {
            0 => {}
            1 => kid_lists[u as usize] = kids,
            _ => {
                for &c in &kids {
                    let (es, ee) = coarse.edge(c);
                    items.push(StringRef { start: es as u64, len: g.min(ee - es + 1), tag: c });
                }
            }
        }
    }

    if !items.is_empty() {
        let batch = StringRefBatch::new(items, |s, k| t.sym(s as Pos + k) as u128);
        let sigma = t.sigma() as u128;
        let quadratic = (budget as u64).saturating_mul(budget as u64) <= n as u64 || sigma < 2;
        let order = if quadratic {
            sort_quadratic(&batch)
        } else {
            sort_radix(&batch, sigma, budget.max(2).min(sigma as usize))?
        };
        for c in order {
            let parent = coarse.parent(c).expect("sorted edges hang below a parent");
            kid_lists[parent as usize].push(c);
        }
    }

    let mut positions: Vec<Pos> = Vec::with_capacity(coarse.leaf_count());
    let mut lcps: Vec<u32> = Vec::with_capacity(coarse.leaf_count().saturating_sub(1));
    let mut pending = u32::MAX;
    let mut stack: Vec<(NodeId, usize)> = vec![(ROOT, 0)];
    while let Some((u, idx)) = stack.pop() {
        let kids = &kid_lists[u as usize];
        if idx == 0 {
            if let Some(p) = coarse.terminal(u) {
                if !positions.is_empty() {
                    lcps.push(pending);
                }
                positions.push(p);
                pending = coarse.depth(u);
            }
        } else if idx < kids.len() {
            let dv = coarse.depth(u) + first_block_lcp(t, g, coarse, kids[idx - 1], kids[idx]);
            pending = pending.min(dv);
        }
        if idx < kids.len() {
            stack.push((u, idx + 1));
            stack.push((kids[idx], 0));
        }
    }

    trie_from_sorted(t, &positions, &lcps)
}

/// Round-array source backed by the coarse machinery: one rolling Φ pass,
/// shared round tables per nonempty round, order restriction per cover
/// level, and uncoarsening of each restricted trie to character order.
#[derive(Default)]
pub struct CoarseRoundSource;

impl RoundArraySource for CoarseRoundSource {
    fn round_arrays(
        &mut self,
        t: &Text,
        ctx: &FpContext,
        g: u32,
        covers: &[crate::diffcover::DifferenceCover],
    ) -> Result<Vec<Vec<Vec<Pos>>>> {
        let mut out: Vec<Vec<Vec<Pos>>> =
            covers.iter().map(|_| vec![Vec::new(); g as usize]).collect();
        let mut groups: Vec<Vec<(u32, Vec<Pos>)>> = Vec::with_capacity(covers.len());
        let mut last_r = 1;
        for dc in covers {
            let members: Vec<Pos> = dc.members().map(|p| p as Pos).collect();
            let lg = rounds_of(&members, g);
            if let Some((r, _)) = lg.last() {
                last_r = last_r.max(*r);
            }
            groups.push(lg);
        }
        let mut cursors = vec![0usize; covers.len()];
        let mut phi = phi_build(ctx, t, g)?;
        for r in 1..=last_r {
            let mut tables: Option<RoundTables> = None;
            for (li, lg) in groups.iter().enumerate() {
                let gi = cursors[li];
                if gi >= lg.len() || lg[gi].0 != r {
                    continue;
                }
                let members = &lg[gi].1;
                cursors[li] += 1;
                if tables.is_none() {
                    let space = phi.entries().len().max(2);
                    tables = Some(round_tables(ctx, &phi, space)?);
                }
                let tb = tables.as_ref().unwrap();
                let (leaves, lcps) = restrict_order(&tb.rs, &tb.sa, &tb.lcp, members);
                let part = blocks_to_trie(t.n() as u32, ctx, &phi, &leaves, &lcps)?;
                let exact = uncoarsen(t, &part, members.len())?;
                let (pos, _) = exact.extract_order_and_lcps();
                out[li][(r - 1) as usize] = pos;
            }
            if r < last_r {
                phi = phi_advance(ctx, t, phi)?;
            }
        }
        Ok(out)
    }
}

/// End-to-end Monte Carlo build: fingerprint context, LCE backend by mode,
/// coarse path by b² ≤ n (unless overridden), uncoarsening, array view.
/// The output is correct with probability at least 1 − n^{−c}.
pub fn build_sst(t: &Text, bset: &PositionSet, cfg: &BuildConfig) -> Result<SparseSuffixTree> {
    let ctx = new_context(t, cfg.c, cfg.seed)?;
    build_sst_with_context(t, bset, cfg, &ctx)
}

/// [`build_sst`] with a caller-supplied fingerprint context. This is how the
/// Las Vegas wrapper re-rolls the modulus between attempts, and how tests
/// inject deliberately weak parameters to exercise collision recovery.
pub fn build_sst_with_context(
    t: &Text,
    bset: &PositionSet,
    cfg: &BuildConfig,
    ctx: &FpContext,
) -> Result<SparseSuffixTree> {
    let started = Instant::now();
    let n = t.n() as u64;
    let b = bset.b() as u32;

    let lce_started = Instant::now();
    let engine = match cfg.mode {
        LceMode::Fast => {
            let mut source = CoarseRoundSource;
            LceEngine::Dc(build_dc_lce(t, ctx, b, &mut source)?)
        }
        LceMode::Slow => LceEngine::Baseline(build_baseline(t, ctx, b)?),
    };
    let lce_ms = lce_started.elapsed().as_secs_f64() * 1e3;

    let path = cfg.path_override.unwrap_or(if (b as u64).saturating_mul(b as u64) <= n {
        CoarsePath::Small
    } else {
        CoarsePath::Large
    });
    let coarse_started = Instant::now();
    let coarse = match path {
        CoarsePath::Small => build_coarse_small(t, ctx, bset, &engine)?,
        CoarsePath::Large => build_coarse_large(t, ctx, bset, &engine)?,
    };
    let coarse_ms = coarse_started.elapsed().as_secs_f64() * 1e3;

    let unc_started = Instant::now();
    let trie = uncoarsen(t, &coarse, bset.b())?;
    let uncoarsen_ms = unc_started.elapsed().as_secs_f64() * 1e3;

    let (positions, lcps) = trie.extract_order_and_lcps();
    let meta = BuildMeta {
        seed: cfg.seed,
        c: cfg.c,
        prime: ctx.p(),
        mode: cfg.mode,
        path,
        timings: BuildTimings {
            lce_ms,
            coarse_ms,
            uncoarsen_ms,
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    };
    Ok(SparseSuffixTree { trie, positions, lcps, meta })
}
