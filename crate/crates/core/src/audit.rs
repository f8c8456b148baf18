//! Heap and operation accounting.
//!
//! The space guarantee under test is *working* space: everything the builder
//! allocates beyond the read-only text. [`CountingAlloc`] tracks live heap
//! words globally; a [`Window`] snapshots the live count and records the peak
//! overshoot while it is open. Structures whose extra log factors are
//! documented as outside the guarantee (the LCE index's range-minimum tables)
//! register themselves in the *excluded* counter so a window reports only
//! guaranteed-linear state.
//!
//! Binaries and test harnesses opt in with:
//!
//! ```ignore
//! #[global_allocator]
//! static ALLOC: sparsa_core::audit::CountingAlloc = sparsa_core::audit::CountingAlloc;
//! ```

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicU64, Ordering};

static LIVE: AtomicU64 = AtomicU64::new(0);
static PEAK: AtomicU64 = AtomicU64::new(0);
static EXCLUDED: AtomicU64 = AtomicU64::new(0);

/// Pass-through allocator that maintains a live-bytes counter and a
/// monotone peak. Costs two atomic ops per allocation.
pub struct CountingAlloc;

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            bump(layout.size() as u64);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size() as u64, Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            LIVE.fetch_sub(layout.size() as u64, Ordering::Relaxed);
            bump(new_size as u64);
        }
        p
    }
}

#[inline]
fn bump(size: u64) {
    let now = LIVE.fetch_add(size, Ordering::Relaxed) + size;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

/// Live heap bytes right now (zero unless a binary installed [`CountingAlloc`]).
pub fn live_bytes() -> u64 {
    LIVE.load(Ordering::Relaxed)
}

/// Register `bytes` of upcoming allocations as outside the linear-space
/// guarantee. Call *before* allocating so a concurrent peak reading never
/// overstates. Pair with [`unexclude_bytes`] when the structure is dropped.
pub fn exclude_bytes(bytes: u64) {
    EXCLUDED.fetch_add(bytes, Ordering::Relaxed);
}

pub fn unexclude_bytes(bytes: u64) {
    EXCLUDED.fetch_sub(bytes, Ordering::Relaxed);
}

/// Peak accounting over a region of interest.
///
/// `open()` records the current live count as the baseline (so the text and
/// any pre-existing state are free); `peak_aux_bytes()` reports the highest
/// subsequent live count minus baseline and exclusions.
///
/// Windows share the one global peak, so overlapping windows interfere;
/// measurement suites serialize on a lock.
pub struct Window {
    baseline: u64,
}

impl Window {
    pub fn open() -> Window {
        let baseline = LIVE.load(Ordering::Relaxed);
        // Restart the global peak at the baseline for this window.
        PEAK.store(baseline, Ordering::Relaxed);
        Window { baseline }
    }

    pub fn peak_aux_bytes(&self) -> u64 {
        let peak = PEAK.load(Ordering::Relaxed).max(self.baseline);
        let excluded = EXCLUDED.load(Ordering::Relaxed);
        (peak - self.baseline).saturating_sub(excluded)
    }

    /// Peak in 8-byte words, the unit the space bound is stated in.
    pub fn peak_aux_words(&self) -> u64 {
        self.peak_aux_bytes().div_ceil(8)
    }
}

/// Steps spent advancing fingerprint components between rounds; the bound
/// says O(n) total per pass.
pub static PHI_ADVANCE_STEPS: AtomicU64 = AtomicU64::new(0);

/// Character comparisons spent refining block-level order to character
/// level; the bound says O(g) per emitted suffix.
pub static UNCOARSEN_CHAR_CMPS: AtomicU64 = AtomicU64::new(0);

/// Times a shifted-cover LCE query fell through to the baseline search.
pub static LCE_FALLBACKS: AtomicU64 = AtomicU64::new(0);

pub fn reset_op_counters() {
    PHI_ADVANCE_STEPS.store(0, Ordering::Relaxed);
    UNCOARSEN_CHAR_CMPS.store(0, Ordering::Relaxed);
    LCE_FALLBACKS.store(0, Ordering::Relaxed);
}
