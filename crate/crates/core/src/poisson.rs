//! Poisson probabilities in log space.
//!
//! Tails are summed term by term from the far end so that values far below
//! `f64::MIN_POSITIVE` keep full relative precision.

use crate::logspace::{log1m_exp, log_add_exp};
use statrs::function::gamma::ln_gamma;

/// `ln P(N = n)` for `N ~ Poisson(mean)`.
pub fn ln_pmf(n: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = n as f64;
    -mean + n * mean.ln() - ln_gamma(n + 1.0)
}

/// `ln P(N >= k)`.
pub fn ln_upper_tail(k: u64, mean: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if mean == 0.0 {
        return f64::NEG_INFINITY;
    }
    if (k as f64) <= mean {
        return log1m_exp(ln_lower_tail_int(k - 1, mean));
    }
    // terms decrease geometrically with ratio mean/(n+1) < 1
    let mut acc = f64::NEG_INFINITY;
    let mut term = ln_pmf(k, mean);
    let mut n = k;
    loop {
        acc = log_add_exp(acc, term);
        n += 1;
        term += mean.ln() - (n as f64).ln();
        if term < acc - 40.0 {
            break;
        }
    }
    acc
}

/// `ln P(N <= z)` for real `z`.
pub fn ln_lower_tail(z: f64, mean: f64) -> f64 {
    if z < 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_lower_tail_int(z.floor() as u64, mean)
}

fn ln_lower_tail_int(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    if (k as f64) >= mean {
        return log1m_exp(ln_upper_tail(k + 1, mean));
    }
    // below the mode, terms shrink walking down from k
    let mut acc = f64::NEG_INFINITY;
    let mut term = ln_pmf(k, mean);
    let mut n = k;
    loop {
        acc = log_add_exp(acc, term);
        if n == 0 {
            break;
        }
        term += (n as f64).ln() - mean.ln();
        n -= 1;
        if term < acc - 40.0 {
            break;
        }
    }
    acc
}

/// Smallest `n` with `P(N <= n) >= 1 - tol`.
pub fn quantile_upper(mean: f64, tol: f64) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    let ln_tol = tol.ln();
    let mut n = mean.floor() as u64;
    // step coarse then refine
    let step = (mean.sqrt().ceil() as u64).max(1);
    while ln_upper_tail(n + 1, mean) > ln_tol {
        n += step;
    }
    while n > 0 && ln_upper_tail(n, mean) <= ln_tol {
        n -= 1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_pmf(n: u64, mean: f64) -> f64 {
        let mut p = (-mean).exp();
        for i in 1..=n {
            p *= mean / i as f64;
        }
        p
    }

    #[test]
    fn pmf_matches_product_form() {
        for &mean in &[0.5, 1.0, 7.5, 30.0] {
            for n in 0..60 {
                let want = direct_pmf(n, mean);
                let got = ln_pmf(n, mean).exp();
                assert!(
                    (got - want).abs() <= 1e-12 * want.max(1e-300),
                    "n={n} mean={mean}"
                );
            }
        }
    }

    #[test]
    fn tails_complement() {
        for &mean in &[0.3, 2.0, 25.0] {
            for k in 0..80u64 {
                let up = ln_upper_tail(k, mean).exp();
                let lo = if k == 0 {
                    0.0
                } else {
                    ln_lower_tail((k - 1) as f64, mean).exp()
                };
                assert!((up + lo - 1.0).abs() < 1e-12, "k={k} mean={mean}");
            }
        }
    }

    #[test]
    fn upper_tail_of_unit_mean_at_ten() {
        let direct: f64 = (10..40).map(|n| direct_pmf(n, 1.0)).sum();
        assert!((ln_upper_tail(10, 1.0) - direct.ln()).abs() < 1e-12);
        assert!((ln_upper_tail(10, 1.0) - (-16.01)).abs() < 0.01);
    }

    #[test]
    fn deep_tail_stays_finite() {
        let v = ln_upper_tail(400, 16.0);
        assert!(v.is_finite() && v < -700.0);
    }

    #[test]
    fn quantile_is_minimal() {
        for &mean in &[0.01, 1.0, 20.0, 400.0] {
            let n = quantile_upper(mean, 1e-12);
            assert!(ln_upper_tail(n + 1, mean) <= 1e-12f64.ln());
            if n > 0 {
                assert!(ln_upper_tail(n, mean) > 1e-12f64.ln());
            }
        }
    }
}
