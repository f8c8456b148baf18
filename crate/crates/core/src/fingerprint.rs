//! Augmented Karp–Rabin fingerprints.
//!
//! A fingerprint of a string `w` carries `(value, x^|w|, x^-|w|, |w|)` where
//! `value = Σ w[i]·x^(i-1) mod p`. Carrying the powers makes concatenation
//! and both "division" directions O(1): given any two of `u`, `v`, `w` with
//! `uv = w`, the third follows ([`fp_solve`]).
//!
//! Instantiation draws the base `x` from a seeded generator. With `p ≥
//! max(σ, n^{3+c})` the function is collision-free on all fragments of the
//! text with probability at least `1 − n^{-c}`; [`new_context`] picks the
//! smallest supported Mersenne prime that satisfies the bound and fails
//! when none does.
//!
//! [`PhiComponent`] is the rolling structure behind block-granularity
//! pipelines: the fingerprints of every r-aligned suffix, advanced from
//! round r to r+1 in time proportional to its own size and queried for any
//! r-aligned fragment in O(1).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::text::Text;
use crate::Pos;

/// Mersenne prime 2^61 − 1: single-limb mode.
pub const P_M61: u128 = (1 << 61) - 1;
/// Mersenne prime 2^107 − 1: two-limb mode for large `n^{3+c}` or wide alphabets.
pub const P_M107: u128 = (1 << 107) - 1;

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 42;
/// Failure exponent used when the caller does not supply one: the
/// collision-freeness guarantee is then `1 − 1/n`.
pub const DEFAULT_C: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Reduction {
    M61,
    M107,
    /// Arbitrary prime below 2^64, reduced with `%`. Slow; the hook for
    /// frozen-arithmetic tests and forced-collision experiments.
    Custom,
}

/// Modular context: prime, base, and the parameters it was derived from.
#[derive(Clone, Debug)]
pub struct FpContext {
    p: u128,
    x: u128,
    xinv: u128,
    n: u64,
    c: u32,
    seed: u64,
    red: Reduction,
}

/// Picks the modulus for `max(σ, n^{3+c})`, draws `x` uniformly from
/// `[1, p−1]` with a ChaCha8 generator seeded by `seed`, and precomputes
/// `x^{-1}`. Deterministic in `(t, c, seed)`.
pub fn new_context(t: &Text, c: u32, seed: u64) -> Result<FpContext> {
    let n = t.n() as u64;
    let n_pow = (n as u128).checked_pow(3 + c);
    let required = n_pow.map(|v| v.max(t.sigma() as u128));
    let p = match required {
        Some(r) if r <= P_M61 => P_M61,
        Some(r) if r <= P_M107 => P_M107,
        _ => {
            return Err(Error::ModulusRange {
                required: required.unwrap_or(u128::MAX),
                limit: P_M107,
            })
        }
    };
    if t.sigma() as u128 > p {
        return Err(Error::AlphabetTooWide { sigma: t.sigma(), p });
    }
    let red = if p == P_M61 { Reduction::M61 } else { Reduction::M107 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rng.gen_range(1..p);
    let mut ctx = FpContext { p, x, xinv: 0, n, c, seed, red };
    ctx.xinv = ctx.mod_pow(x, p - 2);
    Ok(ctx)
}

impl FpContext {
    /// Fixed-parameter constructor for tests and experiments. `p` must be
    /// prime and either one of the two Mersenne constants or below 2^64.
    pub fn with_params(p: u128, x: u128, n: u64) -> Result<FpContext> {
        let red = match p {
            P_M61 => Reduction::M61,
            P_M107 => Reduction::M107,
            _ if (2..(1 << 64)).contains(&p) => Reduction::Custom,
            _ => return Err(invalid(format!("unsupported custom modulus {p}"))),
        };
        if x == 0 || x >= p {
            return Err(invalid(format!("base {x} outside [1, {})", p)));
        }
        let mut ctx = FpContext { p, x, xinv: 0, n, c: 0, seed: 0, red };
        ctx.xinv = ctx.mod_pow(x, p - 2);
        Ok(ctx)
    }

    pub fn p(&self) -> u128 {
        self.p
    }

    pub fn x(&self) -> u128 {
        self.x
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    #[inline]
    fn add(&self, a: u128, b: u128) -> u128 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    fn sub(&self, a: u128, b: u128) -> u128 {
        self.add(a, self.p - b)
    }

    #[inline]
    fn mul(&self, a: u128, b: u128) -> u128 {
        match self.red {
            Reduction::M61 => fold61((a as u64 as u128) * (b as u64 as u128)),
            Reduction::M107 => mul107(a, b),
            Reduction::Custom => (a * b) % self.p,
        }
    }

    /// A symbol's residue mod p — the identity for contexts from
    /// [`new_context`], which never picks p ≤ σ. Contexts built through
    /// [`FpContext::with_params`] may alias distinct symbols; the residue is
    /// the defining value of the map, so downstream arithmetic stays valid.
    #[inline]
    fn sym_residue(&self, sym: u64) -> u128 {
        let s = sym as u128;
        if s < self.p {
            s
        } else {
            s % self.p
        }
    }

    fn mod_pow(&self, mut base: u128, mut e: u128) -> u128 {
        let mut acc = 1u128;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Fingerprint of the empty string.
    pub fn empty(&self) -> Fingerprint {
        Fingerprint { value: 0, pow: 1, ipow: 1, len: 0 }
    }
}

/// Fingerprint `(value, x^len, x^-len, len)` of some string.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Fingerprint {
    pub value: u128,
    pub pow: u128,
    pub ipow: u128,
    pub len: u64,
}

/// Direct evaluation of the defining sum; O(|w|).
pub fn fp_of<I>(ctx: &FpContext, w: I) -> Fingerprint
where
    I: IntoIterator<Item = u64>,
{
    let mut value = 0u128;
    let mut pow = 1u128;
    let mut ipow = 1u128;
    let mut len = 0u64;
    for sym in w {
        let s = ctx.sym_residue(sym);
        value = ctx.add(value, ctx.mul(s, pow));
        pow = ctx.mul(pow, ctx.x);
        ipow = ctx.mul(ipow, ctx.xinv);
        len += 1;
    }
    Fingerprint { value, pow, ipow, len }
}

/// `φ(T[i..=j])` by scan; empty when `j < i`.
pub fn fp_of_fragment(ctx: &FpContext, t: &Text, i: Pos, j: Pos) -> Result<Fingerprint> {
    if j < i {
        return Ok(ctx.empty());
    }
    t.check_pos(i)?;
    t.check_pos(j)?;
    Ok(fp_of(ctx, (i..=j).map(|k| t.sym(k))))
}

/// Which of `u`, `v`, `w` (with `uv = w`) is unknown.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Missing {
    U,
    V,
    W,
}

/// Solves `uv = w` for the missing fingerprint in O(1).
///
/// The two known fingerprints are passed in `uvw` order: `(u, v)` when
/// solving for `w`, `(u, w)` for `v`, and `(v, w)` for `u`. Length
/// inconsistencies (`|w| < |u|` etc.) are errors.
pub fn fp_solve(
    ctx: &FpContext,
    a: &Fingerprint,
    b: &Fingerprint,
    missing: Missing,
) -> Result<Fingerprint> {
    match missing {
        Missing::W => {
            let (u, v) = (a, b);
            Ok(Fingerprint {
                value: ctx.add(u.value, ctx.mul(u.pow, v.value)),
                pow: ctx.mul(u.pow, v.pow),
                ipow: ctx.mul(u.ipow, v.ipow),
                len: u.len + v.len,
            })
        }
        Missing::V => {
            let (u, w) = (a, b);
            if w.len < u.len {
                return Err(Error::FingerprintLengths {
                    lu: u.len,
                    lv: w.len.saturating_sub(u.len),
                    lw: w.len,
                });
            }
            Ok(Fingerprint {
                value: ctx.mul(ctx.sub(w.value, u.value), u.ipow),
                pow: ctx.mul(w.pow, u.ipow),
                ipow: ctx.mul(w.ipow, u.pow),
                len: w.len - u.len,
            })
        }
        Missing::U => {
            let (v, w) = (a, b);
            if w.len < v.len {
                return Err(Error::FingerprintLengths {
                    lu: w.len.saturating_sub(v.len),
                    lv: v.len,
                    lw: w.len,
                });
            }
            let pow = ctx.mul(w.pow, v.ipow);
            Ok(Fingerprint {
                value: ctx.sub(w.value, ctx.mul(pow, v.value)),
                pow,
                ipow: ctx.mul(w.ipow, v.pow),
                len: w.len - v.len,
            })
        }
    }
}

/// `φ(uv)` from `φ(u)`, `φ(v)`.
pub fn fp_concat(ctx: &FpContext, u: &Fingerprint, v: &Fingerprint) -> Fingerprint {
    fp_solve(ctx, u, v, Missing::W).expect("concatenation is always consistent")
}

/// `φ(v)` from `φ(u)`, `φ(uv)`.
pub fn fp_strip_prefix(ctx: &FpContext, u: &Fingerprint, w: &Fingerprint) -> Result<Fingerprint> {
    fp_solve(ctx, u, w, Missing::V)
}

/// `φ(u)` from `φ(v)`, `φ(uv)`.
pub fn fp_strip_suffix(ctx: &FpContext, v: &Fingerprint, w: &Fingerprint) -> Result<Fingerprint> {
    fp_solve(ctx, v, w, Missing::U)
}

/// `φ(c·w)` from `φ(w)`: one leading symbol in O(1).
pub fn fp_prepend(ctx: &FpContext, sym: u64, w: &Fingerprint) -> Fingerprint {
    Fingerprint {
        value: ctx.add(ctx.sym_residue(sym), ctx.mul(ctx.x, w.value)),
        pow: ctx.mul(w.pow, ctx.x),
        ipow: ctx.mul(w.ipow, ctx.xinv),
        len: w.len + 1,
    }
}

/// Fingerprints of all r-aligned suffixes (`i ≡ r mod g`, `1 ≤ r ≤ g`)
/// plus `φ(T)`. Size Θ(n/g); advanced round to round, queried in O(1).
#[derive(Clone, Debug)]
pub struct PhiComponent {
    r: u32,
    g: u32,
    n: u32,
    /// `entries[k] = φ(T[r + k·g ..])`.
    entries: Vec<Fingerprint>,
    whole: Fingerprint,
}

impl PhiComponent {
    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn g(&self) -> u32 {
        self.g
    }

    pub fn whole_fp(&self) -> &Fingerprint {
        &self.whole
    }

    pub fn entries(&self) -> &[Fingerprint] {
        &self.entries
    }

    /// Stored suffix fingerprint at r-aligned position `i`.
    pub fn suffix_fp(&self, i: Pos) -> Result<&Fingerprint> {
        if i < self.r || !(i - self.r).is_multiple_of(self.g) {
            return Err(Error::NotAligned {
                r: self.r,
                g: self.g,
                what: "position",
                value: i as u64,
            });
        }
        let k = ((i - self.r) / self.g) as usize;
        self.entries.get(k).ok_or(Error::PositionOutOfRange { pos: i as u64, n: self.n as u64 })
    }
}

/// Builds Φ_1 in one right-to-left scan: O(n) time, ⌈n/g⌉ entries.
pub fn phi_build(ctx: &FpContext, t: &Text, g: u32) -> Result<PhiComponent> {
    let n = t.n() as u32;
    if n == 0 || g == 0 || g > n {
        return Err(invalid(format!("block length {g} outside 1..={n}")));
    }
    let count = ((n - 1) / g + 1) as usize;
    let mut entries = vec![ctx.empty(); count];
    // φ(T[i..]) = sym(i) + x·φ(T[i+1..]); powers track length.
    let mut cur = ctx.empty();
    for i in (1..=n).rev() {
        cur = Fingerprint {
            value: ctx.add(ctx.sym_residue(t.sym(i)), ctx.mul(ctx.x, cur.value)),
            pow: ctx.mul(cur.pow, ctx.x),
            ipow: ctx.mul(cur.ipow, ctx.xinv),
            len: cur.len + 1,
        };
        if (i - 1) % g == 0 {
            entries[((i - 1) / g) as usize] = cur;
        }
    }
    Ok(PhiComponent { r: 1, g, n, entries, whole: cur })
}

/// Derives Φ_{r+1} from Φ_r by stripping one leading character from each
/// entry; O(n/g) time. Consumes its input. `r = g` has no successor.
pub fn phi_advance(ctx: &FpContext, t: &Text, phi: PhiComponent) -> Result<PhiComponent> {
    if phi.r >= phi.g {
        return Err(Error::NotAligned {
            r: phi.r,
            g: phi.g,
            what: "round successor",
            value: phi.r as u64 + 1,
        });
    }
    let PhiComponent { r, g, n, mut entries, whole } = phi;
    // Entry k moves from position r + k·g to r+1 + k·g; the last entry
    // disappears when it was the final position of the text.
    if let Some(last) = entries.last() {
        if last.len == 1 {
            entries.pop();
        }
    }
    let mut steps = 0u64;
    for (k, e) in entries.iter_mut().enumerate() {
        let i = r + k as u32 * g;
        let c = ctx.sym_residue(t.sym(i));
        *e = Fingerprint {
            value: ctx.mul(ctx.sub(e.value, c), ctx.xinv),
            pow: ctx.mul(e.pow, ctx.xinv),
            ipow: ctx.mul(e.ipow, ctx.x),
            len: e.len - 1,
        };
        steps += 1;
    }
    crate::audit::PHI_ADVANCE_STEPS.fetch_add(steps, std::sync::atomic::Ordering::Relaxed);
    Ok(PhiComponent { r: r + 1, g, n, entries, whole })
}

/// `φ(T[i..=j])` in O(1) from stored suffix fingerprints. Requires `i`
/// r-aligned and either `j = n` or `j+1` r-aligned; `j = i−1` gives the
/// empty fingerprint.
pub fn phi_fragment(ctx: &FpContext, phi: &PhiComponent, i: Pos, j: Pos) -> Result<Fingerprint> {
    if j + 1 == i {
        // Still insist the left end is aligned, per the contract.
        phi.suffix_fp(i).map(|_| ())?;
        return Ok(ctx.empty());
    }
    if j < i {
        return Err(invalid(format!("fragment ({i},{j}) reversed")));
    }
    let w = phi.suffix_fp(i)?;
    if j == phi.n {
        return Ok(*w);
    }
    let v = phi.suffix_fp(j + 1)?;
    fp_strip_suffix(ctx, v, w)
}

/// 2^122-bit-safe reduction mod 2^61−1.
#[inline]
fn fold61(z: u128) -> u128 {
    let r = (z & P_M61) + (z >> 61);
    let r = (r & P_M61) + (r >> 61);
    if r >= P_M61 {
        r - P_M61
    } else {
        r
    }
}

#[inline]
fn fold107(z: u128) -> u128 {
    let r = (z & P_M107) + (z >> 107);
    let r = (r & P_M107) + (r >> 107);
    if r >= P_M107 {
        r - P_M107
    } else {
        r
    }
}

/// Product mod 2^107−1 for operands below 2^107, via 64-bit limbs.
#[inline]
fn mul107(a: u128, b: u128) -> u128 {
    const MASK64: u128 = (1 << 64) - 1;
    let (a1, a0) = (a >> 64, a & MASK64); // a1 < 2^43
    let (b1, b0) = (b >> 64, b & MASK64);
    let hi = a1 * b1; // < 2^86
    let mid = a1 * b0 + a0 * b1; // < 2^108
    let lo = a0 * b0; // full 128 bits, exact
    // a·b = hi·2^128 + mid·2^64 + lo; 2^107 ≡ 1, so 2^128 ≡ 2^21 and
    // mid·2^64 = (mid >> 43)·2^107 + (mid & (2^43−1))·2^64.
    let sum = fold107(lo) + ((mid & ((1 << 43) - 1)) << 64) + (mid >> 43) + (hi << 21);
    fold107(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::naive_lce;

    fn small_ctx() -> FpContext {
        FpContext::with_params(101, 7, 100).unwrap()
    }

    #[test]
    fn frozen_example_ab() {
        let ctx = small_ctx();
        let fp = fp_of(&ctx, [97u64, 98]);
        assert_eq!((fp.value, fp.pow, fp.ipow, fp.len), (76, 49, 33, 2));
        let e = fp_of(&ctx, []);
        assert_eq!((e.value, e.pow, e.ipow, e.len), (0, 1, 1, 0));
    }

    #[test]
    fn solve_examples() {
        let ctx = small_ctx();
        let a = fp_of(&ctx, [97u64]);
        let b = fp_of(&ctx, [98u64]);
        let ab = fp_solve(&ctx, &a, &b, Missing::W).unwrap();
        assert_eq!(ab.value, 76);

        let v = fp_solve(&ctx, &a, &ab, Missing::V).unwrap();
        assert_eq!(v.value, 98);
        assert_eq!(v, b);

        let u = fp_solve(&ctx, &b, &ab, Missing::U).unwrap();
        assert_eq!(u, a);

        // v = ε when |u| = |w|.
        let v0 = fp_solve(&ctx, &ab, &ab, Missing::V).unwrap();
        assert_eq!(v0, ctx.empty());

        // |w| < |u| is inconsistent.
        assert!(fp_solve(&ctx, &ab, &a, Missing::V).is_err());
    }

    #[test]
    fn concat_matches_direct_all_modes() {
        let texts: Vec<Vec<u64>> = vec![
            (0..200).map(|i| (i * 37 + 11) % 97).collect(),
            (0..200).map(|i| (i * i + 3) % 4).collect(),
        ];
        for p in [101, P_M61, P_M107, 1_000_000_007] {
            let ctx = FpContext::with_params(p, 7, 1000).unwrap();
            for w in &texts {
                for cut in [0, 1, 50, 199, 200] {
                    let u = fp_of(&ctx, w[..cut].iter().copied());
                    let v = fp_of(&ctx, w[cut..].iter().copied());
                    let whole = fp_of(&ctx, w.iter().copied());
                    assert_eq!(fp_concat(&ctx, &u, &v), whole);
                    assert_eq!(fp_strip_prefix(&ctx, &u, &whole).unwrap(), v);
                    assert_eq!(fp_strip_suffix(&ctx, &v, &whole).unwrap(), u);
                    // pow·ipow ≡ 1 after every operation.
                    assert_eq!(ctx.mul(whole.pow, whole.ipow), 1 % ctx.p());
                }
            }
        }
    }

    #[test]
    fn context_selection_and_determinism() {
        let t = Text::from_bytes(vec![b'a'; 4096]).unwrap();
        let ctx = new_context(&t, 1, DEFAULT_SEED).unwrap();
        assert_eq!(ctx.p(), P_M61); // 4096^4 = 2^48
        assert!(ctx.x() >= 1 && ctx.x() < ctx.p());

        let again = new_context(&t, 1, DEFAULT_SEED).unwrap();
        assert_eq!(ctx.x(), again.x());
        let other = new_context(&t, 1, DEFAULT_SEED + 1).unwrap();
        assert_ne!(ctx.x(), other.x());

        // n = 10^6 at c = 1 needs the wide modulus; accepted.
        let big = Text::from_bytes(vec![b'a'; 1_000_000]).unwrap();
        let wide = new_context(&big, 1, 0).unwrap();
        assert_eq!(wide.p(), P_M107);

        // Past the wide modulus the context is refused outright.
        let t_small = Text::from_bytes(vec![b'a'; 1000]).unwrap();
        assert!(matches!(
            new_context(&t_small, 9, 0), // 1000^12 = 10^36 > 2^107−1
            Err(Error::ModulusRange { .. })
        ));
    }

    #[test]
    fn wide_symbols_force_wide_modulus() {
        let t = Text::from_wide(vec![u64::MAX - 1, 5, u64::MAX - 3, 0, 17]).unwrap();
        let ctx = new_context(&t, 1, 3).unwrap();
        assert_eq!(ctx.p(), P_M107);
        let fp1 = fp_of(&ctx, [u64::MAX - 1, 5]);
        let fp2 = fp_of(&ctx, [u64::MAX - 1, 5]);
        let fp3 = fp_of(&ctx, [u64::MAX - 3, 5]);
        assert_eq!(fp1, fp2);
        assert_ne!(fp1.value, fp3.value);
    }

    #[test]
    fn m107_arithmetic_against_naive() {
        // Cross-check the limb multiply against a slow shift-and-add
        // double-width product on structured and extreme operands.
        let ctx = FpContext::with_params(P_M107, 3, 10).unwrap();
        let samples = [
            0u128,
            1,
            2,
            (1 << 61) - 1,
            (1 << 64) - 1,
            1 << 64,
            (1 << 64) + 1,
            P_M107 - 1,
            P_M107 / 2,
            0x1234_5678_9abc_def0_1234_5678,
        ];
        for &a in &samples {
            for &b in &samples {
                let expect = naive_mulmod(a, b, P_M107);
                assert_eq!(ctx.mul(a, b), expect, "a={a} b={b}");
            }
        }
    }

    fn naive_mulmod(mut a: u128, mut b: u128, p: u128) -> u128 {
        a %= p;
        let mut acc = 0u128;
        while b > 0 {
            if b & 1 == 1 {
                acc = (acc + a) % p;
            }
            a = (a + a) % p;
            b >>= 1;
        }
        acc
    }

    fn demo_text(n: usize, seed: u64) -> Text {
        let mut state = seed | 1;
        let bytes: Vec<u8> = (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                b'a' + ((state >> 33) % 4) as u8
            })
            .collect();
        Text::from_bytes(bytes).unwrap()
    }

    #[test]
    fn phi_structure_abab() {
        let t = Text::from_bytes(b"abab".to_vec()).unwrap();
        let ctx = new_context(&t, 1, 7).unwrap();
        let phi = phi_build(&ctx, &t, 2).unwrap();
        assert_eq!(phi.r(), 1);
        assert_eq!(phi.entries().len(), 2); // positions 1, 3
        assert_eq!(phi.entries()[0], fp_of(&ctx, b"abab".iter().map(|&b| b as u64)));
        assert_eq!(phi.entries()[1], fp_of(&ctx, b"ab".iter().map(|&b| b as u64)));
        assert_eq!(*phi.whole_fp(), phi.entries()[0]);

        let frag = phi_fragment(&ctx, &phi, 1, 2).unwrap();
        assert_eq!(frag, fp_of(&ctx, b"ab".iter().map(|&b| b as u64)));
        assert_eq!(phi_fragment(&ctx, &phi, 3, 4).unwrap(), phi.entries()[1]);
        assert_eq!(phi_fragment(&ctx, &phi, 1, 0).unwrap(), ctx.empty());
        assert!(phi_fragment(&ctx, &phi, 2, 4).is_err()); // i not 1-aligned
        assert!(phi_fragment(&ctx, &phi, 1, 1).is_err()); // j+1 not aligned

        let phi2 = phi_advance(&ctx, &t, phi).unwrap();
        assert_eq!(phi2.r(), 2);
        assert_eq!(phi2.entries()[0], fp_of(&ctx, b"bab".iter().map(|&b| b as u64)));
        assert_eq!(phi2.entries()[1], fp_of(&ctx, b"b".iter().map(|&b| b as u64)));
        assert!(phi_advance(&ctx, &t, phi2).is_err()); // r = g

        // g = n: a single entry, φ(T).
        let phi_n = phi_build(&ctx, &t, 4).unwrap();
        assert_eq!(phi_n.entries().len(), 1);
    }

    #[test]
    fn phi_matches_scan_exhaustively() {
        // Every aligned fragment on a 256-char text, several block sizes,
        // both modulus modes.
        let t = demo_text(256, 99);
        for (c, seed) in [(1u32, 5u64), (8, 6)] {
            let ctx = new_context(&t, c, seed).unwrap();
            for g in [1u32, 3, 16, 101, 256] {
                let mut phi = phi_build(&ctx, &t, g).unwrap();
                loop {
                    let r = phi.r();
                    assert_eq!(phi.entries().len(), ((256 - r) / g + 1) as usize);
                    let mut i = r;
                    while i <= 256 {
                        let mut j = i - 1;
                        loop {
                            let got = phi_fragment(&ctx, &phi, i, j).unwrap();
                            let want = fp_of_fragment(&ctx, &t, i, j).unwrap();
                            assert_eq!(got, want, "r={r} g={g} i={i} j={j}");
                            if j >= 256 {
                                break;
                            }
                            j = (j + g).min(256);
                        }
                        i += g;
                    }
                    if r == g {
                        break;
                    }
                    phi = phi_advance(&ctx, &t, phi).unwrap();
                }
            }
        }
    }

    #[test]
    fn unary_text_shares_fingerprints() {
        let t = Text::from_bytes(vec![b'z'; 64]).unwrap();
        let ctx = new_context(&t, 1, 11).unwrap();
        let phi = phi_build(&ctx, &t, 8).unwrap();
        let phi2 = phi_advance(&ctx, &t, phi).unwrap();
        // All suffixes here of equal length have equal fingerprints; entry k
        // of Φ_2 has the same length as entry k+1 of Φ_1 shifted — compare
        // equal lengths directly.
        for w in phi2.entries().windows(2) {
            assert_eq!(w[0].len, w[1].len + 8);
        }
        let a = phi_fragment(&ctx, &phi2, 2, 9).unwrap();
        let b = phi_fragment(&ctx, &phi2, 10, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collision_audit_default_context() {
        // All equal-length fragment pairs up to length 32 on a 4096-char
        // seeded random text: fingerprint equality must coincide with
        // string equality. Grouping by fingerprint keeps this quadratic-free.
        let t = demo_text(4096, 12345);
        let ctx = new_context(&t, DEFAULT_C, DEFAULT_SEED).unwrap();
        let n = t.n() as u32;
        let mut collisions = Vec::new();
        for len in 1..=32u32 {
            let mut fps: Vec<(u128, u32)> = Vec::with_capacity(n as usize);
            let mut cur = fp_of_fragment(&ctx, &t, 1, len).unwrap();
            let mut start = 1u32;
            loop {
                fps.push((cur.value, start));
                if start + len > n {
                    break;
                }
                // Slide: strip leading char, append trailing char.
                let head = fp_of(&ctx, [t.sym(start)]);
                let tail = fp_of(&ctx, [t.sym(start + len)]);
                cur = fp_concat(&ctx, &fp_strip_prefix(&ctx, &head, &cur).unwrap(), &tail);
                start += 1;
            }
            fps.sort_unstable();
            for w in fps.windows(2) {
                if w[0].0 == w[1].0 {
                    let (i, j) = (w[0].1, w[1].1);
                    if naive_lce(&t, i, j).unwrap() < len {
                        collisions.push((i, j, len));
                    }
                }
            }
        }
        assert!(collisions.is_empty(), "fingerprint collisions observed: {collisions:?}");
    }

    #[test]
    fn custom_prime_forces_collisions() {
        // Sanity for the forced-collision hook: with p = 5 on a 4-symbol
        // alphabet, honest collisions appear quickly.
        let ctx = FpContext::with_params(5, 2, 100).unwrap();
        let a = fp_of(&ctx, [1u64, 2]);
        let mut collided = false;
        for s in 0..5u64 {
            for t in 0..5u64 {
                if (s, t) != (1, 2) && fp_of(&ctx, [s, t]) == fp_of(&ctx, [1u64, 2]) {
                    collided = true;
                }
            }
        }
        assert!(collided);
        let _ = a;
    }
}
