//! Sparse suffix sorting in O(b) working space.
//!
//! Given read-only access to a text `T[1..n]` and an arbitrary set `B` of `b`
//! starting positions, this crate builds the sparse suffix array of `B`
//! (sorted positions plus adjacent LCPs) and the equivalent sparse suffix
//! tree, using fingerprint-driven coarse tries so that working memory stays
//! proportional to `b` rather than `n`. The Monte Carlo builder can be wrapped
//! into a Las Vegas one: a deterministic verifier decides whether a claimed
//! array is correct by checking a derived system of substring equations, so
//! accepted outputs are correct unconditionally.
//!
//! Module map:
//! - [`text`]: read-only text handle, position sets, brute-force oracles;
//! - [`fingerprint`]: augmented Karp–Rabin fingerprints and the rolling
//!   per-round component;
//! - [`diffcover`]: constant-time-evaluable difference covers;
//! - [`strsort`]: the two bounded-space string sorts;
//! - [`trie`]: compacted/coarse tries and LCA-based LCP queries;
//! - [`lce`]: baseline and recursive difference-cover LCE structures;
//! - [`builder`]: the coarse construction pipeline and `build_sst`;
//! - [`verifier`]: substring-equation verification and the Las Vegas wrapper;
//! - [`audit`]: allocation counting backing the space-claim instrumentation.

pub mod audit;
pub mod builder;
pub mod diffcover;
pub mod error;
pub mod fingerprint;
pub mod lce;
pub mod strsort;
pub mod text;
pub mod trie;
pub mod verifier;

mod sais;

pub use error::{Error, Result};

/// 1-based position in the text. Texts are capped at `u32::MAX - 1` symbols.
pub type Pos = u32;

// Unit tests that audit live allocation need the counting allocator wired
// into the test binary; the library itself never installs one.
#[cfg(test)]
#[global_allocator]
static TEST_ALLOC: audit::CountingAlloc = audit::CountingAlloc;
