//! Published reference figures for the embedded ratings, and brute-force
//! oracles for the exact statistics.

pub const MODELS: [&str; 3] = ["ChatGPT 4o", "Gemini 2.0 Flash Thinking", "Gemma3 27B"];

/// Mean accuracy per test (rows) and model (columns, in `MODELS` order).
pub const ACCURACY: [[f64; 3]; 8] = [
    [4.0, 4.0, 4.0],
    [5.0, 4.8, 4.8],
    [4.6, 4.6, 4.6],
    [4.6, 4.6, 4.6],
    [4.8, 4.8, 4.8],
    [4.2, 4.2, 4.0],
    [5.0, 5.0, 5.0],
    [5.0, 5.0, 5.0],
];

pub const COHERENCE: [[f64; 3]; 8] = [
    [4.0, 4.0, 4.0],
    [4.8, 5.0, 4.8],
    [4.6, 4.6, 4.6],
    [4.6, 4.6, 4.6],
    [4.8, 4.8, 4.8],
    [4.0, 4.2, 4.0],
    [5.0, 5.0, 5.0],
    [5.0, 5.0, 5.0],
];

/// Overall mean accuracy per model as published (two decimals).
pub const OVERALL_ACCURACY: [f64; 3] = [4.65, 4.63, 4.60];

/// Two-sided p by enumerating all `2^n` equiprobable sequences: the share of
/// sequences whose success count is no more likely than `k`.
pub fn brute_force_p(k: u32, n: u32) -> f64 {
    let mut per_count = vec![0u64; n as usize + 1];
    for seq in 0u64..(1u64 << n) {
        per_count[seq.count_ones() as usize] += 1;
    }
    let threshold = per_count[k as usize];
    let hits: u64 = per_count.iter().filter(|c| **c <= threshold).sum();
    hits as f64 / (1u64 << n) as f64
}

fn binom_pmf(i: u64, n: u64, p: f64) -> f64 {
    let mut ln = 0.0;
    for j in 0..i {
        ln += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
    }
    (ln + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp()
}

fn upper_tail(k: u64, n: u64, p: f64) -> f64 {
    (k..=n).map(|i| binom_pmf(i, n, p)).sum()
}

fn lower_tail(k: u64, n: u64, p: f64) -> f64 {
    (0..=k).map(|i| binom_pmf(i, n, p)).sum()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tail-inversion interval by bisection on directly summed binomial tails.
pub fn tail_inversion_ci(k: u64, n: u64, level: f64) -> (f64, f64) {
    let a = (1.0 - level) / 2.0;
    let lower = if k == 0 {
        0.0
    } else {
        bisect(0.0, 1.0, |p| upper_tail(k, n, p) >= a)
    };
    let upper = if k == n {
        1.0
    } else {
        bisect(0.0, 1.0, |p| lower_tail(k, n, p) <= a)
    };
    (lower, upper)
}
