//! Log-factorials and the combinatorial counts built from them.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

const TABLE_LEN: usize = 1 << 21;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln n!`.
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `ln n!!` for even `n`, i.e. `ln(2^(n/2) (n/2)!)`.
#[inline]
pub fn ln_double_factorial_even(n: u64) -> f64 {
    debug_assert!(n.is_multiple_of(2), "double factorial of odd edge count {n}");
    let half = n / 2;
    half as f64 * std::f64::consts::LN_2 + ln_factorial(half)
}

/// `ln C(n, k)`; zero outside the support.
#[inline]
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln` of the number of multisets of size `m` drawn from `n` kinds, `C(n+m-1, m)`.
///
/// `multiset(0, 0)` is taken as 1.
#[inline]
pub fn ln_multiset(n: u64, m: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ln_binomial(n + m - 1, m)
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-12);
        assert!((ln_double_factorial_even(6) - 48f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn table_and_gamma_agree_at_boundary() {
        let n = TABLE_LEN as u64 - 1;
        let from_table = ln_factorial(n);
        let from_gamma = ln_gamma(n as f64 + 1.0);
        assert!((from_table - from_gamma).abs() / from_gamma < 1e-12);
    }

    #[test]
    fn multiset_counts() {
        // C(3+2-1, 2) = 6
        assert!((ln_multiset(3, 2) - 6f64.ln()).abs() < 1e-12);
        assert_eq!(ln_multiset(4, 0), 0.0);
        assert_eq!(ln_multiset(0, 0), 0.0);
        assert_eq!(ln_multiset(1, 17), 0.0);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.1, -2.0, 1.5];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
    }
}
