//! Internal suffix-array construction (SA-IS, induced sorting) and the
//! Kasai LCP pass. Operates on integer rank sequences; the public pipeline
//! feeds it block ranks, never raw text slices.

/// Suffix array of `s` (alphabet `0..sigma`), linear time in `n + sigma`.
pub(crate) fn suffix_array(s: &[u32], sigma: u32) -> Vec<u32> {
    // Shift symbols up and append a unique smallest sentinel; SA-IS below
    // assumes the final symbol is the unique minimum.
    let mut t: Vec<u32> = Vec::with_capacity(s.len() + 1);
    t.extend(s.iter().map(|&c| c + 1));
    t.push(0);
    let sa = sais(&t, sigma as usize + 1);
    sa.into_iter().filter(|&p| (p as usize) < s.len()).collect()
}

fn sais(s: &[u32], sigma: usize) -> Vec<u32> {
    let n = s.len();
    if n == 1 {
        return vec![0];
    }

    // Suffix types: S if strictly smaller than its successor suffix.
    let mut is_s = vec![false; n];
    is_s[n - 1] = true;
    for i in (0..n - 1).rev() {
        is_s[i] = s[i] < s[i + 1] || (s[i] == s[i + 1] && is_s[i + 1]);
    }
    let is_lms = |i: usize| i > 0 && is_s[i] && !is_s[i - 1];

    let mut bucket_sizes = vec![0u32; sigma];
    for &c in s {
        bucket_sizes[c as usize] += 1;
    }
    let bucket_heads = |sizes: &[u32]| -> Vec<u32> {
        let mut heads = Vec::with_capacity(sizes.len());
        let mut sum = 0;
        for &c in sizes {
            heads.push(sum);
            sum += c;
        }
        heads
    };
    let bucket_tails = |sizes: &[u32]| -> Vec<u32> {
        let mut tails = Vec::with_capacity(sizes.len());
        let mut sum = 0;
        for &c in sizes {
            sum += c;
            tails.push(sum);
        }
        tails
    };

    const EMPTY: u32 = u32::MAX;
    let mut sa = vec![EMPTY; n];

    // Pass 1: drop LMS suffixes at their bucket tails (arbitrary relative
    // order), then induce L from the left and S from the right.
    let induce = |sa: &mut Vec<u32>| {
        let mut heads = bucket_heads(&bucket_sizes);
        for k in 0..n {
            let p = sa[k];
            if p != EMPTY && p > 0 && !is_s[p as usize - 1] {
                let c = s[p as usize - 1] as usize;
                sa[heads[c] as usize] = p - 1;
                heads[c] += 1;
            }
        }
        let mut tails = bucket_tails(&bucket_sizes);
        for k in (0..n).rev() {
            let p = sa[k];
            if p != EMPTY && p > 0 && is_s[p as usize - 1] {
                let c = s[p as usize - 1] as usize;
                tails[c] -= 1;
                sa[tails[c] as usize] = p - 1;
            }
        }
    };

    let mut tails = bucket_tails(&bucket_sizes);
    for i in (1..n).rev() {
        if is_lms(i) {
            let c = s[i] as usize;
            tails[c] -= 1;
            sa[tails[c] as usize] = i as u32;
        }
    }
    induce(&mut sa);

    // Summarize: name LMS substrings in their induced order.
    let lms_count = (1..n).filter(|&i| is_lms(i)).count();
    let mut names = vec![EMPTY; n];
    let mut name = 0u32;
    let mut prev: Option<usize> = None;
    for &p in sa.iter() {
        let p = p as usize;
        if !is_lms(p) {
            continue;
        }
        if let Some(q) = prev {
            if !lms_equal(s, &is_s, q, p) {
                name += 1;
            }
        }
        names[p] = name;
        prev = Some(p);
    }
    let lms_positions: Vec<u32> =
        (1..n).filter(|&i| is_lms(i)).map(|i| i as u32).collect();
    let summary: Vec<u32> =
        lms_positions.iter().map(|&p| names[p as usize]).collect();

    // Order the LMS suffixes exactly: directly if names are unique,
    // otherwise by recursion on the summary string.
    let lms_order: Vec<u32> = if (name as usize) + 1 == lms_count {
        let mut order = vec![0u32; lms_count];
        for (k, &nm) in summary.iter().enumerate() {
            order[nm as usize] = lms_positions[k];
        }
        order
    } else {
        let rec = sais(&summary, name as usize + 1);
        rec.into_iter().map(|k| lms_positions[k as usize]).collect()
    };

    // Pass 2: seed with LMS suffixes in true order, induce again.
    sa.fill(EMPTY);
    let mut tails = bucket_tails(&bucket_sizes);
    for &p in lms_order.iter().rev() {
        let c = s[p as usize] as usize;
        tails[c] -= 1;
        sa[tails[c] as usize] = p;
    }
    induce(&mut sa);
    sa
}

/// Equality of the LMS substrings starting at `a` and `b` (inclusive of the
/// terminating LMS position).
fn lms_equal(s: &[u32], is_s: &[bool], a: usize, b: usize) -> bool {
    let n = s.len();
    let is_lms = |i: usize| i > 0 && is_s[i] && !is_s[i - 1];
    if (a == n - 1) != (b == n - 1) {
        return false;
    }
    let mut k = 0;
    loop {
        let (pa, pb) = (a + k, b + k);
        if pa >= n || pb >= n || s[pa] != s[pb] || is_s[pa] != is_s[pb] {
            return false;
        }
        if k > 0 && is_lms(pa) && is_lms(pb) {
            return true;
        }
        if k > 0 && (is_lms(pa) || is_lms(pb)) {
            return false;
        }
        k += 1;
    }
}

/// LCP array by Kasai's telescoping scan: `lcp[k]` is the longest common
/// prefix of the suffixes at `sa[k-1]` and `sa[k]`; `lcp[0] = 0`.
pub(crate) fn lcp_kasai(s: &[u32], sa: &[u32]) -> Vec<u32> {
    let n = s.len();
    let mut rank = vec![0u32; n];
    for (k, &p) in sa.iter().enumerate() {
        rank[p as usize] = k as u32;
    }
    let mut lcp = vec![0u32; n];
    let mut h = 0usize;
    for i in 0..n {
        let r = rank[i] as usize;
        if r == 0 {
            h = 0;
            continue;
        }
        let j = sa[r - 1] as usize;
        while i + h < n && j + h < n && s[i + h] == s[j + h] {
            h += 1;
        }
        lcp[r] = h as u32;
        h = h.saturating_sub(1);
    }
    lcp
}
