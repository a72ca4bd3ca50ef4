//! Log-domain probability helpers.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Natural logarithm of a probability (or of a bound on one).
///
/// Probabilities satisfy `value <= 0` up to rounding; bounds produced by
/// [`crate::rates`] may be positive, meaning the bound is vacuous.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProb(pub f64);

impl LogProb {
    pub const ZERO_PROB: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    pub fn from_prob(p: f64) -> Self {
        LogProb(p.ln())
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    /// True when the value can be the log of a probability (`<= 1e-12`).
    pub fn is_probability(self) -> bool {
        !self.0.is_nan() && self.0 <= 1e-12
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum exp(x_i))`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `x ln(x / y)` with the `x = 0` limit taken as 0.
pub fn xlogx_over(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_exp_handles_infinities() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -3.0), -3.0);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_add_exp(-1000.0, -1000.0) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log1m_exp_both_branches() {
        for &p in &[1e-300f64, 1e-10, 0.3, 0.6, 0.999] {
            let want = (-p).ln_1p();
            let got = log1m_exp(p.ln());
            assert!((got - want).abs() <= 1e-12 * want.abs(), "{p}");
        }
    }

    #[test]
    fn sum_exp_matches_direct() {
        let xs = [-1.0, -2.0, -3.0];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
