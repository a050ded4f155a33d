//! Exact binomial tests and intervals at success probability one half.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use super::EvalError;

fn check_bounds(k: u64, n: u64) -> Result<(), EvalError> {
    if n == 0 || k > n {
        return Err(EvalError::InvalidBounds { k, n });
    }
    Ok(())
}

/// `C(n, i)` for every `i`, exactly, while it fits in `u128` (n up to 127).
fn binomial_row(n: u64) -> Option<Vec<u128>> {
    if n > 127 {
        return None;
    }
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    Some(row)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

/// Two-sided exact binomial p-value for `k` successes in `n` trials at
/// probability 0.5: the total mass of outcomes no more likely than `k`.
///
/// Up to n = 127 the mass is summed as an exact integer count over `2^n`.
pub fn binom_two_sided(k: u64, n: u64) -> Result<f64, EvalError> {
    check_bounds(k, n)?;
    if let Some(row) = binomial_row(n) {
        let threshold = row[k as usize];
        let count: u128 = row.iter().filter(|c| **c <= threshold).sum();
        // count <= 2^n, and the quotient is exact whenever the count fits a double.
        return Ok((count as f64 / 2f64.powi(n as i32)).min(1.0));
    }
    let ln_half = n as f64 * 0.5f64.ln();
    let mass = |i: u64| (ln_choose(n, i) + ln_half).exp();
    let threshold = ln_choose(n, k) * (1.0 + 1e-12);
    let p: f64 = (0..=n)
        .filter(|i| ln_choose(n, *i) <= threshold)
        .map(mass)
        .sum();
    Ok(p.min(1.0))
}

/// Clopper-Pearson interval for `k` successes in `n` trials at confidence
/// `level`.
pub fn exact_ci(k: u64, n: u64, level: f64) -> Result<(f64, f64), EvalError> {
    check_bounds(k, n)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::InvalidLevel(level));
    }
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else if k == n {
        (alpha / 2.0).powf(1.0 / nf)
    } else {
        Beta::new(kf, nf - kf + 1.0)
            .expect("positive shape parameters")
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if k == n {
        1.0
    } else if k == 0 {
        1.0 - (alpha / 2.0).powf(1.0 / nf)
    } else {
        Beta::new(kf + 1.0, nf - kf)
            .expect("positive shape parameters")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((lower, upper))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    Improve,
    Decline,
    Tie,
}

impl Sign {
    pub fn of(from: u8, to: u8) -> Sign {
        match to.cmp(&from) {
            std::cmp::Ordering::Greater => Sign::Improve,
            std::cmp::Ordering::Less => Sign::Decline,
            std::cmp::Ordering::Equal => Sign::Tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SignTestResult {
    pub improvements: u64,
    pub declines: u64,
    pub ties: u64,
    pub n_effective: u64,
    pub p_two_sided: f64,
    pub ci: (f64, f64),
    /// All pairs tied: p is 1 and the interval spans [0, 1].
    pub degenerate: bool,
}

impl SignTestResult {
    /// Sign test over the given signs; ties are excluded from the test.
    pub fn from_signs(signs: impl IntoIterator<Item = Sign>) -> SignTestResult {
        let (mut improvements, mut declines, mut ties) = (0, 0, 0);
        for s in signs {
            match s {
                Sign::Improve => improvements += 1,
                Sign::Decline => declines += 1,
                Sign::Tie => ties += 1,
            }
        }
        let n = improvements + declines;
        if n == 0 {
            return SignTestResult {
                improvements,
                declines,
                ties,
                n_effective: 0,
                p_two_sided: 1.0,
                ci: (0.0, 1.0),
                degenerate: true,
            };
        }
        SignTestResult {
            improvements,
            declines,
            ties,
            n_effective: n,
            p_two_sided: binom_two_sided(improvements, n).expect("k <= n"),
            ci: exact_ci(improvements, n, 0.95).expect("valid bounds"),
            degenerate: false,
        }
    }

    pub fn proportion(&self) -> Option<f64> {
        (self.n_effective > 0).then(|| self.improvements as f64 / self.n_effective as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(binom_two_sided(15, 15).unwrap(), 2.0 / 32768.0);
        assert_eq!(binom_two_sided(3, 4).unwrap(), 0.625);
        assert_eq!(binom_two_sided(3, 5).unwrap(), 1.0);
        let (lo, hi) = exact_ci(15, 15, 0.95).unwrap();
        assert!((lo - 0.025f64.powf(1.0 / 15.0)).abs() < 1e-15 && hi == 1.0);
        assert!(binom_two_sided(4, 3).is_err());
        assert!(exact_ci(1, 2, 1.0).is_err());
    }

    #[test]
    fn interior_interval_inverts_the_tails() {
        // At the bounds the one-sided binomial tails equal alpha / 2.
        let (k, n) = (7u64, 12u64);
        let (lo, hi) = exact_ci(k, n, 0.95).unwrap();
        let tail = |p: f64, from: u64, to: u64| -> f64 {
            (from..=to)
                .map(|i| (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp())
                .sum()
        };
        assert!((tail(lo, k, n) - 0.025).abs() < 1e-9);
        assert!((tail(hi, 0, k) - 0.025).abs() < 1e-9);
    }

    #[test]
    fn large_n_uses_log_masses() {
        let p = binom_two_sided(100, 200).unwrap();
        assert!(p == 1.0 || (p > 0.99 && p <= 1.0));
        assert!(binom_two_sided(200, 200).unwrap() < 1e-50);
    }
}
