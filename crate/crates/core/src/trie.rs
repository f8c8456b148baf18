//! Compacted trie structures over suffix sets.
//!
//! [`CompactedTrie`] is the character-level result type: built in O(b) from
//! a sorted position list with adjacent LCPs, queried through [`LcpIndex`]
//! (Euler tour + sparse-table range minimum; the table's log factor is
//! registered as excluded in the space audit and reported separately).
//!
//! [`CoarseTrie`] is the block-granularity intermediate: string depths are
//! multiples of the block length g except for leaf tails that end at the
//! text boundary, every node carries the fingerprint of its full string,
//! every edge carries the fingerprint of its first block, and siblings are
//! ordered by that first-block key — (fingerprint value, block length)
//! pairs, an internal order unrelated to lexicographic order. Supporting
//! both incremental leaf insertion (with edge subdivision) and stack
//! construction from a block-sorted leaf list.
//!
//! Edge labels are (start, end) references into the text; labels are never
//! copied.

use std::collections::{HashMap, HashSet};

use crate::audit;
use crate::error::{invalid, Error, Result};
use crate::fingerprint::Fingerprint;
use crate::text::Text;
use crate::Pos;

pub type NodeId = u32;
pub const ROOT: NodeId = 0;
const NONE: NodeId = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    depth: u32,
    parent: NodeId,
    /// Label of the edge from the parent: T[edge_start..=edge_end].
    edge_start: Pos,
    edge_end: Pos,
    first_sym: u64,
    terminal: Option<Pos>,
    children: Vec<NodeId>, // ascending by first_sym
}

/// Character-level compacted trie of a set of suffixes.
#[derive(Clone, Debug)]
pub struct CompactedTrie {
    n: u32,
    nodes: Vec<Node>,
}

/// O(b) rightmost-path construction from lexicographically sorted suffix
/// positions and their adjacent LCPs.
///
/// Only syntactically visible inconsistencies are rejected (an LCP reaching
/// past either adjacent suffix); semantic validation of the order itself is
/// the verifier's business.
pub fn trie_from_sorted(t: &Text, positions: &[Pos], lcps: &[u32]) -> Result<CompactedTrie> {
    let n = t.n() as u32;
    if positions.is_empty() {
        return Err(Error::BadPositionSet);
    }
    if lcps.len() + 1 != positions.len() {
        return Err(invalid(format!(
            "{} positions need {} lcps, got {}",
            positions.len(),
            positions.len() - 1,
            lcps.len()
        )));
    }
    for &p in positions {
        t.check_pos(p)?;
    }

    let root = Node {
        depth: 0,
        parent: NONE,
        edge_start: 0,
        edge_end: 0,
        first_sym: 0,
        terminal: None,
        children: Vec::new(),
    };
    let mut tr = CompactedTrie { n, nodes: vec![root] };

    let push_leaf = |tr: &mut CompactedTrie, parent: NodeId, p: Pos| -> NodeId {
        let d = tr.nodes[parent as usize].depth;
        let id = tr.nodes.len() as NodeId;
        tr.nodes.push(Node {
            depth: n - p + 1,
            parent,
            edge_start: p + d,
            edge_end: n,
            first_sym: t.sym(p + d),
            terminal: Some(p),
            children: Vec::new(),
        });
        tr.nodes[parent as usize].children.push(id);
        id
    };

    let mut stack: Vec<NodeId> = vec![ROOT];
    stack.push(push_leaf(&mut tr, ROOT, positions[0]));

    for k in 1..positions.len() {
        let p = positions[k];
        let l = lcps[k - 1];
        let len_prev = n - positions[k - 1] + 1;
        let len_cur = n - p + 1;
        if l > len_prev {
            return Err(invalid(format!(
                "lcp {l} exceeds preceding suffix length {len_prev}"
            )));
        }
        if l >= len_cur {
            return Err(invalid(format!(
                "lcp {l} not below following suffix length {len_cur}"
            )));
        }

        let mut last = NONE;
        while tr.nodes[*stack.last().unwrap() as usize].depth > l {
            last = stack.pop().unwrap();
        }
        let top = *stack.last().unwrap();
        let parent = if tr.nodes[top as usize].depth == l {
            top
        } else {
            // Subdivide the edge top→last at string depth l.
            let (ls, lsym) = {
                let nd = &tr.nodes[last as usize];
                (nd.edge_start, nd.first_sym)
            };
            let d_top = tr.nodes[top as usize].depth;
            let mid = tr.nodes.len() as NodeId;
            tr.nodes.push(Node {
                depth: l,
                parent: top,
                edge_start: ls,
                edge_end: ls + (l - d_top) - 1,
                first_sym: lsym,
                terminal: None,
                children: vec![last],
            });
            let slot = tr.nodes[top as usize]
                .children
                .iter()
                .position(|&c| c == last)
                .expect("rightmost child present");
            tr.nodes[top as usize].children[slot] = mid;
            let child = &mut tr.nodes[last as usize];
            child.parent = mid;
            child.edge_start = ls + (l - d_top);
            child.first_sym = t.sym(child.edge_start);
            stack.push(mid);
            mid
        };
        stack.push(push_leaf(&mut tr, parent, p));
    }
    Ok(tr)
}

impl CompactedTrie {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self, u: NodeId) -> u32 {
        self.nodes[u as usize].depth
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        let p = self.nodes[u as usize].parent;
        (p != NONE).then_some(p)
    }

    pub fn terminal(&self, u: NodeId) -> Option<Pos> {
        self.nodes[u as usize].terminal
    }

    pub fn children(&self, u: NodeId) -> &[NodeId] {
        &self.nodes[u as usize].children
    }

    /// Edge from the parent: (label start, label end, first symbol).
    pub fn edge(&self, u: NodeId) -> (Pos, Pos, u64) {
        let nd = &self.nodes[u as usize];
        (nd.edge_start, nd.edge_end, nd.first_sym)
    }

    /// Leaf order and adjacent LCA depths, i.e. the inverse of
    /// [`trie_from_sorted`]. Iterative DFS; LCP of consecutive leaves is
    /// the depth of the node where the walk turns between them.
    pub fn extract_order_and_lcps(&self) -> (Vec<Pos>, Vec<u32>) {
        let mut order = Vec::new();
        let mut lcps = Vec::new();
        let mut divergence = u32::MAX;
        // (node, next child index); terminal-internal nodes emit before
        // descending into children.
        let mut stack: Vec<(NodeId, usize)> = vec![(ROOT, 0)];
        while let Some(&mut (u, ref mut ci)) = stack.last_mut() {
            let nd = &self.nodes[u as usize];
            if *ci == 0 {
                if let Some(p) = nd.terminal {
                    if !order.is_empty() {
                        lcps.push(divergence.min(nd.depth));
                    }
                    divergence = nd.depth;
                    order.push(p);
                }
            }
            if *ci < nd.children.len() {
                let c = nd.children[*ci];
                *ci += 1;
                stack.push((c, 0));
            } else {
                stack.pop();
                if let Some(&(parent, _)) = stack.last() {
                    divergence = divergence.min(self.nodes[parent as usize].depth);
                }
            }
        }
        (order, lcps)
    }

    /// Indented structural dump for golden tests.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(NodeId, usize)> = vec![(ROOT, 0)];
        out.push_str("depth=0\n");
        while let Some(&mut (u, ref mut ci)) = stack.last_mut() {
            if *ci < self.nodes[u as usize].children.len() {
                let c = self.nodes[u as usize].children[*ci];
                *ci += 1;
                let nd = &self.nodes[c as usize];
                let pad = "  ".repeat(stack.len());
                let sym = if nd.first_sym < 128 {
                    format!("'{}'", nd.first_sym as u8 as char)
                } else {
                    format!("{}", nd.first_sym)
                };
                out.push_str(&format!(
                    "{pad}{sym} [{},{}] depth={}{}\n",
                    nd.edge_start,
                    nd.edge_end,
                    nd.depth,
                    nd.terminal.map(|p| format!(" terminal({p})")).unwrap_or_default()
                ));
                stack.push((c, 0));
            } else {
                stack.pop();
            }
        }
        out
    }
}

/// O(1) LCP queries between stored suffixes after O(b log b) preprocessing.
///
/// Space note: the sparse table is the one super-linear piece of the whole
/// pipeline; its words are registered with [`audit::exclude_bytes`] before
/// allocation and released on drop, so build-time peak windows report the
/// guaranteed-linear state.
pub struct LcpIndex {
    n: u32,
    tour: Vec<u32>,
    occ: HashMap<Pos, u32>,
    levels: Vec<Vec<u32>>,
    excluded: u64,
}

pub fn lcp_preprocess(trie: &CompactedTrie) -> LcpIndex {
    let mut tour: Vec<u32> = Vec::with_capacity(2 * trie.nodes.len());
    let mut occ = HashMap::new();
    let mut stack: Vec<(NodeId, usize)> = vec![(ROOT, 0)];
    tour.push(0);
    while let Some(&mut (u, ref mut ci)) = stack.last_mut() {
        let nd = &trie.nodes[u as usize];
        if *ci == 0 {
            if let Some(p) = nd.terminal {
                occ.insert(p, tour.len() as u32 - 1);
            }
        }
        if *ci < nd.children.len() {
            let c = nd.children[*ci];
            *ci += 1;
            stack.push((c, 0));
            tour.push(trie.nodes[c as usize].depth);
        } else {
            stack.pop();
            if let Some(&(parent, _)) = stack.last() {
                tour.push(trie.nodes[parent as usize].depth);
            }
        }
    }

    let m = tour.len();
    let max_k = if m > 1 { usize::BITS - 1 - m.leading_zeros() } else { 0 };
    let mut excluded = 0u64;
    for k in 1..=max_k {
        excluded += (m + 1).saturating_sub(1usize << k) as u64 * 4;
    }
    audit::exclude_bytes(excluded);
    let mut levels: Vec<Vec<u32>> = Vec::with_capacity(max_k as usize);
    for k in 1..=max_k {
        let half = 1usize << (k - 1);
        let len = (m + 1).saturating_sub(1usize << k);
        let prev: &[u32] = if k == 1 { &tour } else { &levels[k as usize - 2] };
        let mut cur = Vec::with_capacity(len);
        for i in 0..len {
            cur.push(prev[i].min(prev[i + half]));
        }
        levels.push(cur);
    }
    LcpIndex { n: trie.n, tour, occ, levels, excluded }
}

impl LcpIndex {
    /// LCP of the suffixes at terminals `a` and `b`; `(a,a)` is the full
    /// suffix length.
    pub fn lcp_query(&self, a: Pos, b: Pos) -> Result<u32> {
        let &ia = self.occ.get(&a).ok_or_else(|| invalid(format!("unknown terminal {a}")))?;
        let &ib = self.occ.get(&b).ok_or_else(|| invalid(format!("unknown terminal {b}")))?;
        if a == b {
            return Ok(self.n - a + 1);
        }
        let (l, r) = if ia <= ib { (ia, ib) } else { (ib, ia) };
        let len = (r - l + 1) as usize;
        let k = usize::BITS - 1 - len.leading_zeros();
        let get = |k: u32, i: usize| -> u32 {
            if k == 0 {
                self.tour[i]
            } else {
                self.levels[k as usize - 1][i]
            }
        };
        Ok(get(k, l as usize).min(get(k, r as usize + 1 - (1usize << k))))
    }

    pub fn terminals(&self) -> impl Iterator<Item = Pos> + '_ {
        self.occ.keys().copied()
    }
}

impl Drop for LcpIndex {
    fn drop(&mut self) {
        audit::unexclude_bytes(self.excluded);
    }
}

/// First-block sibling key: (fingerprint value, block character length).
/// The length component separates a short tail block from a full block
/// that happens to share its value; fingerprint separation applies only to
/// equal lengths.
pub type EdgeKey = (u128, u64);

#[derive(Clone, Debug)]
struct CNode {
    depth: u32,
    parent: NodeId,
    edge_start: Pos,
    edge_end: Pos,
    key: EdgeKey,
    fp: Fingerprint,
    terminal: Option<Pos>,
    first_child: NodeId,
    last_child: NodeId,
    next_sib: NodeId,
    prev_sib: NodeId,
}

/// Block-granularity compacted trie with fingerprint annotations.
pub struct CoarseTrie {
    g: u32,
    n: u32,
    nodes: Vec<CNode>,
    terminals: HashSet<Pos>,
}

/// Attachment point for [`CoarseTrie::insert_leaf`].
#[derive(Clone, Copy, Debug)]
pub enum InsertAt {
    Node(NodeId),
    /// Split the edge leading into `child` at absolute string depth
    /// `char_depth` (a multiple of g strictly between the endpoints' depths).
    EdgeInterior { child: NodeId, char_depth: u32 },
}

/// An edge whose first-block key the trie could not derive in O(1):
/// fingerprint `T[start..start+len-1]` and call [`CoarseTrie::set_edge_key`].
#[derive(Clone, Copy, Debug)]
pub struct PendingEdgeKey {
    pub node: NodeId,
    pub start: Pos,
    pub len: u32,
}

impl CoarseTrie {
    pub fn new(g: u32, n: u32) -> CoarseTrie {
        assert!(g >= 1 && n >= 1);
        let root = CNode {
            depth: 0,
            parent: NONE,
            edge_start: 0,
            edge_end: 0,
            key: (0, 0),
            fp: Fingerprint { value: 0, pow: 1, ipow: 1, len: 0 },
            terminal: None,
            first_child: NONE,
            last_child: NONE,
            next_sib: NONE,
            prev_sib: NONE,
        };
        CoarseTrie { g, n, nodes: vec![root], terminals: HashSet::new() }
    }

    pub fn g(&self) -> u32 {
        self.g
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.terminals.len()
    }

    pub fn depth(&self, u: NodeId) -> u32 {
        self.nodes[u as usize].depth
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        let p = self.nodes[u as usize].parent;
        (p != NONE).then_some(p)
    }

    pub fn fp(&self, u: NodeId) -> &Fingerprint {
        &self.nodes[u as usize].fp
    }

    pub fn key(&self, u: NodeId) -> EdgeKey {
        self.nodes[u as usize].key
    }

    pub fn terminal(&self, u: NodeId) -> Option<Pos> {
        self.nodes[u as usize].terminal
    }

    pub fn edge(&self, u: NodeId) -> (Pos, Pos) {
        let nd = &self.nodes[u as usize];
        (nd.edge_start, nd.edge_end)
    }

    pub fn first_child(&self, u: NodeId) -> Option<NodeId> {
        let c = self.nodes[u as usize].first_child;
        (c != NONE).then_some(c)
    }

    pub fn next_sibling(&self, u: NodeId) -> Option<NodeId> {
        let s = self.nodes[u as usize].next_sib;
        (s != NONE).then_some(s)
    }

    pub fn children(&self, u: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut c = self.nodes[u as usize].first_child;
        while c != NONE {
            out.push(c);
            c = self.nodes[c as usize].next_sib;
        }
        out
    }

    /// Attach a new leaf for `suffix` at `at`.
    ///
    /// `suffix_fp` is φ(T[suffix..n]); `leaf_key` the first-block key of the
    /// new leaf edge. An interior attachment subdivides the edge: the mid
    /// node inherits the old first block as its own edge key and stores
    /// `split_fp` = φ of the first `char_depth` characters of the suffix;
    /// the demoted child's new first block cannot be derived here in O(1),
    /// so it is returned as a [`PendingEdgeKey`] for the caller to
    /// fingerprint (an O(g) scan) and install.
    pub fn insert_leaf(
        &mut self,
        at: InsertAt,
        suffix: Pos,
        suffix_fp: Fingerprint,
        leaf_key: EdgeKey,
        split_fp: Option<Fingerprint>,
    ) -> Result<(NodeId, Option<PendingEdgeKey>)> {
        if self.terminals.contains(&suffix) {
            return Err(invalid(format!("duplicate terminal {suffix}")));
        }
        // Validate the attachment depth before mutating anything.
        let d = match at {
            InsertAt::Node(u) => {
                if u as usize >= self.nodes.len() {
                    return Err(invalid(format!("unknown node {u}")));
                }
                self.nodes[u as usize].depth
            }
            InsertAt::EdgeInterior { char_depth, .. } => char_depth,
        };
        let leaf_depth = self.n.checked_sub(suffix).map(|r| r + 1).unwrap_or(0);
        if suffix == 0 || leaf_depth <= d {
            return Err(invalid(format!(
                "suffix {suffix} (length {leaf_depth}) cannot hang below depth {d}"
            )));
        }
        let (parent, pending) = match at {
            InsertAt::Node(u) => (u, None),
            InsertAt::EdgeInterior { child, char_depth } => {
                let split_fp = split_fp
                    .ok_or_else(|| invalid("edge-interior insertion requires the split fingerprint"))?;
                let (mid, pending) = self.split_at(child, char_depth, split_fp)?;
                (mid, Some(pending))
            }
        };
        self.terminals.insert(suffix);
        let leaf = self.nodes.len() as NodeId;
        self.nodes.push(CNode {
            depth: leaf_depth,
            parent,
            edge_start: suffix + d,
            edge_end: self.n,
            key: leaf_key,
            fp: suffix_fp,
            terminal: Some(suffix),
            first_child: NONE,
            last_child: NONE,
            next_sib: NONE,
            prev_sib: NONE,
        });
        self.link_ordered(parent, leaf);
        Ok((leaf, pending))
    }

    /// Subdivide the edge leading into `child` at absolute depth
    /// `char_depth`, returning the new mid node together with the demoted
    /// child's first block as a [`PendingEdgeKey`] (the caller fingerprints
    /// it and calls [`CoarseTrie::set_edge_key`]).
    pub fn split_at(
        &mut self,
        child: NodeId,
        char_depth: u32,
        split_fp: Fingerprint,
    ) -> Result<(NodeId, PendingEdgeKey)> {
        let mid = self.split_edge(child, char_depth, split_fp)?;
        let c = &self.nodes[child as usize];
        let pending = PendingEdgeKey {
            node: child,
            start: c.edge_start,
            len: (c.edge_end - c.edge_start + 1).min(self.g),
        };
        Ok((mid, pending))
    }

    /// Mark an existing node as the terminal of `suffix`; the node's string
    /// depth must equal the suffix length exactly.
    pub fn set_terminal(&mut self, u: NodeId, suffix: Pos) -> Result<()> {
        if u as usize >= self.nodes.len() {
            return Err(invalid(format!("unknown node {u}")));
        }
        if self.terminals.contains(&suffix) {
            return Err(invalid(format!("duplicate terminal {suffix}")));
        }
        let len = if suffix >= 1 && suffix <= self.n { self.n - suffix + 1 } else { 0 };
        let d = self.nodes[u as usize].depth;
        if len == 0 || len != d {
            return Err(invalid(format!(
                "suffix {suffix} (length {len}) cannot terminate at depth {d}"
            )));
        }
        if self.nodes[u as usize].terminal.is_some() {
            return Err(invalid(format!("node {u} already terminal")));
        }
        self.nodes[u as usize].terminal = Some(suffix);
        self.terminals.insert(suffix);
        Ok(())
    }

    /// Terminal positions in coarse lexicographic order: a node's own
    /// terminal precedes everything in its children's subtrees.
    pub fn terminals_in_order(&self) -> Vec<Pos> {
        let mut out = Vec::with_capacity(self.terminals.len());
        let mut stack = vec![ROOT];
        while let Some(u) = stack.pop() {
            if let Some(p) = self.nodes[u as usize].terminal {
                out.push(p);
            }
            let mut c = self.nodes[u as usize].last_child;
            while c != NONE {
                stack.push(c);
                c = self.nodes[c as usize].prev_sib;
            }
        }
        out
    }

    fn split_edge(&mut self, child: NodeId, char_depth: u32, split_fp: Fingerprint) -> Result<NodeId> {
        if child as usize >= self.nodes.len() || child == ROOT {
            return Err(invalid(format!("cannot split above node {child}")));
        }
        let parent = self.nodes[child as usize].parent;
        let d_parent = self.nodes[parent as usize].depth;
        let d_child = self.nodes[child as usize].depth;
        if char_depth <= d_parent || char_depth >= d_child || !char_depth.is_multiple_of(self.g) {
            return Err(invalid(format!(
                "split depth {char_depth} invalid between {d_parent} and {d_child} (g={})",
                self.g
            )));
        }
        let (es, key, prev, next) = {
            let c = &self.nodes[child as usize];
            (c.edge_start, c.key, c.prev_sib, c.next_sib)
        };
        let mid = self.nodes.len() as NodeId;
        self.nodes.push(CNode {
            depth: char_depth,
            parent,
            edge_start: es,
            edge_end: es + (char_depth - d_parent) - 1,
            key,
            fp: split_fp,
            terminal: None,
            first_child: child,
            last_child: child,
            next_sib: next,
            prev_sib: prev,
        });
        // Mid takes child's slot in the parent list (same key, same place).
        if prev != NONE {
            self.nodes[prev as usize].next_sib = mid;
        } else {
            self.nodes[parent as usize].first_child = mid;
        }
        if next != NONE {
            self.nodes[next as usize].prev_sib = mid;
        } else {
            self.nodes[parent as usize].last_child = mid;
        }
        let c = &mut self.nodes[child as usize];
        c.parent = mid;
        c.edge_start = es + (char_depth - d_parent);
        c.prev_sib = NONE;
        c.next_sib = NONE;
        Ok(mid)
    }

    /// Install a recomputed first-block key and restore the sibling order.
    pub fn set_edge_key(&mut self, u: NodeId, key: EdgeKey) {
        let parent = self.nodes[u as usize].parent;
        self.unlink(parent, u);
        self.nodes[u as usize].key = key;
        self.link_ordered(parent, u);
    }

    fn unlink(&mut self, parent: NodeId, u: NodeId) {
        let (prev, next) = {
            let nd = &self.nodes[u as usize];
            (nd.prev_sib, nd.next_sib)
        };
        if prev != NONE {
            self.nodes[prev as usize].next_sib = next;
        } else {
            self.nodes[parent as usize].first_child = next;
        }
        if next != NONE {
            self.nodes[next as usize].prev_sib = prev;
        } else {
            self.nodes[parent as usize].last_child = prev;
        }
        let nd = &mut self.nodes[u as usize];
        nd.prev_sib = NONE;
        nd.next_sib = NONE;
    }

    /// Insert `u` into `parent`'s child list at its key position (after any
    /// equal keys; equal sibling keys only arise under fingerprint
    /// collisions and are tolerated, never asserted away).
    fn link_ordered(&mut self, parent: NodeId, u: NodeId) {
        let key = self.nodes[u as usize].key;
        let mut after = NONE; // last child with key <= new key
        let mut c = self.nodes[parent as usize].first_child;
        while c != NONE && self.nodes[c as usize].key <= key {
            after = c;
            c = self.nodes[c as usize].next_sib;
        }
        let before = c;
        {
            let nd = &mut self.nodes[u as usize];
            nd.prev_sib = after;
            nd.next_sib = before;
        }
        if after != NONE {
            self.nodes[after as usize].next_sib = u;
        } else {
            self.nodes[parent as usize].first_child = u;
        }
        if before != NONE {
            self.nodes[before as usize].prev_sib = u;
        } else {
            self.nodes[parent as usize].last_child = u;
        }
    }

    /// Stack construction from leaves sorted by supercharacter order, with
    /// adjacent LCPs counted in whole equal blocks. `node_fp(p, d)` must
    /// return φ(T[p..p+d-1]) and `edge_key(s, l)` the key of the block
    /// T[s..s+l-1]; both are invoked only with block-aligned offsets so a
    /// rolling component can serve them in O(1).
    pub fn from_sorted_blocks(
        g: u32,
        n: u32,
        leaves: &[Pos],
        block_lcps: &[u32],
        mut node_fp: impl FnMut(Pos, u32) -> Fingerprint,
        mut edge_key: impl FnMut(Pos, u32) -> EdgeKey,
    ) -> Result<CoarseTrie> {
        if leaves.is_empty() {
            return Err(Error::BadPositionSet);
        }
        if block_lcps.len() + 1 != leaves.len() {
            return Err(invalid("block lcp count mismatch"));
        }
        let blocks_of = |p: Pos| (n - p + 1).div_ceil(g);
        let mut tr = CoarseTrie::new(g, n);

        // Appends at the end of the parent's list: leaves arrive in key
        // order, so the new leaf is rightmost among its siblings.
        fn push_leaf(
            tr: &mut CoarseTrie,
            parent: NodeId,
            p: Pos,
            node_fp: &mut dyn FnMut(Pos, u32) -> Fingerprint,
            edge_key: &mut dyn FnMut(Pos, u32) -> EdgeKey,
        ) -> Result<NodeId> {
            let (g, n) = (tr.g, tr.n);
            let d = tr.nodes[parent as usize].depth;
            let len = n - p + 1;
            if len <= d || !tr.terminals.insert(p) {
                return Err(invalid(format!("leaf {p} inconsistent at depth {d}")));
            }
            let first_len = (len - d).min(g);
            let id = tr.nodes.len() as NodeId;
            tr.nodes.push(CNode {
                depth: len,
                parent,
                edge_start: p + d,
                edge_end: n,
                key: edge_key(p + d, first_len),
                fp: node_fp(p, len),
                terminal: Some(p),
                first_child: NONE,
                last_child: NONE,
                next_sib: NONE,
                prev_sib: NONE,
            });
            let last = tr.nodes[parent as usize].last_child;
            if last == NONE {
                tr.nodes[parent as usize].first_child = id;
            } else {
                tr.nodes[last as usize].next_sib = id;
                tr.nodes[id as usize].prev_sib = last;
            }
            tr.nodes[parent as usize].last_child = id;
            Ok(id)
        }

        let mut stack: Vec<NodeId> = vec![ROOT];
        stack.push(push_leaf(&mut tr, ROOT, leaves[0], &mut node_fp, &mut edge_key)?);

        for k in 1..leaves.len() {
            let p = leaves[k];
            let lb = block_lcps[k - 1];
            if lb > blocks_of(leaves[k - 1]) || lb >= blocks_of(p) {
                return Err(invalid(format!(
                    "block lcp {lb} inconsistent with adjacent leaf lengths"
                )));
            }
            // Pop to the first node of block depth ≤ lb. A node at a
            // non-multiple depth is a short-tail leaf; equality through a
            // short block is impossible (the lengths would differ), so such
            // a node either pops or flags inconsistent input.
            let target_chars = lb * g;
            let mut last = NONE;
            while tr.nodes[*stack.last().unwrap() as usize].depth.div_ceil(g) > lb {
                last = stack.pop().unwrap();
            }
            let top = *stack.last().unwrap();
            let d_top = tr.nodes[top as usize].depth;
            let parent = if d_top == target_chars {
                // Internal node or full-tail terminal leaf at exactly lb
                // blocks.
                top
            } else if !d_top.is_multiple_of(g) {
                return Err(invalid(format!(
                    "block lcp {lb} matches through a short tail block at depth {d_top}"
                )));
            } else {
                debug_assert!(last != NONE);
                let (ls, lkey) = {
                    let nd = &tr.nodes[last as usize];
                    (nd.edge_start, nd.key)
                };
                let mid = tr.nodes.len() as NodeId;
                tr.nodes.push(CNode {
                    depth: target_chars,
                    parent: top,
                    edge_start: ls,
                    edge_end: ls + (target_chars - d_top) - 1,
                    key: lkey,
                    fp: node_fp(p, target_chars),
                    terminal: None,
                    first_child: last,
                    last_child: last,
                    next_sib: NONE,
                    prev_sib: NONE,
                });
                // `last` is the rightmost child of top; replace in place.
                let prev = tr.nodes[last as usize].prev_sib;
                if prev != NONE {
                    tr.nodes[prev as usize].next_sib = mid;
                } else {
                    tr.nodes[top as usize].first_child = mid;
                }
                tr.nodes[mid as usize].prev_sib = prev;
                tr.nodes[top as usize].last_child = mid;
                let c = &mut tr.nodes[last as usize];
                c.parent = mid;
                c.edge_start = ls + (target_chars - d_top);
                c.prev_sib = NONE;
                c.next_sib = NONE;
                let (cs, ce) = (tr.nodes[last as usize].edge_start, tr.nodes[last as usize].edge_end);
                let klen = (ce - cs + 1).min(g);
                tr.nodes[last as usize].key = edge_key(cs, klen);
                stack.push(mid);
                mid
            };
            stack.push(push_leaf(&mut tr, parent, p, &mut node_fp, &mut edge_key)?);
        }
        Ok(tr)
    }

    /// Indented structural dump (depth, key, terminal) for golden tests.
    pub fn debug_dump(&self) -> String {
        let mut out = String::from("depth=0\n");
        let mut stack: Vec<(NodeId, NodeId)> = vec![(ROOT, self.nodes[ROOT as usize].first_child)];
        while let Some(&mut (_, ref mut cursor)) = stack.last_mut() {
            let c = *cursor;
            if c != NONE {
                *cursor = self.nodes[c as usize].next_sib;
                let nd = &self.nodes[c as usize];
                let pad = "  ".repeat(stack.len());
                out.push_str(&format!(
                    "{pad}key=({},{}) [{},{}] depth={}{}\n",
                    nd.key.0,
                    nd.key.1,
                    nd.edge_start,
                    nd.edge_end,
                    nd.depth,
                    nd.terminal.map(|p| format!(" terminal({p})")).unwrap_or_default()
                ));
                stack.push((c, nd.first_child));
            } else {
                stack.pop();
            }
        }
        out
    }
}
