//! Exact transient distributions by uniformization.
//!
//! The process jumps at the ticks of a rate-`alpha` Poisson clock, so
//!
//! ```text
//! P(xi(t) = j) = sum_n  Poisson(n; alpha t) * P(eta_n = j)
//! ```
//!
//! where `eta` is the embedded jump chain. The chain's distribution is pushed
//! forward one step at a time with an O(N) suffix-sum kernel and accumulated
//! with its Poisson weight. Both the iterate and the accumulator carry their
//! own log scale so that weights like `e^{-alpha t}` at `alpha t = 1e5` and
//! tail entries near `e^{-700}` stay representable.
//!
//! Mass pushed above the top state, mass lost to underflow, and the Poisson
//! weight of the unevaluated series terms are booked in `truncation_mass`, so
//! the returned vector is a lower bound on the true distribution and
//! `total + truncation_mass == 1` up to rounding.

use crate::error::{Error, Result};
use crate::logspace::{log_add_exp, LogProb};
use crate::poisson;
use crate::process::ModelParams;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Truncated distribution over states `0..weights.len()`.
///
/// The probability of state `j` is `weights[j] * exp(log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionVector {
    pub weights: Vec<f64>,
    pub log_scale: f64,
    /// Probability not represented in `weights`.
    pub truncation_mass: f64,
    /// Log of a certified upper bound on `truncation_mass`.
    pub certified_log_bound: f64,
}

impl DistributionVector {
    pub fn point_mass(state: usize, n_states: usize) -> Result<Self> {
        if state >= n_states {
            return Err(Error::OutOfRange {
                index: state,
                len: n_states,
            });
        }
        let mut weights = vec![0.0; n_states];
        weights[state] = 1.0;
        Ok(DistributionVector {
            weights,
            log_scale: 0.0,
            truncation_mass: 0.0,
            certified_log_bound: f64::NEG_INFINITY,
        })
    }

    pub fn n_states(&self) -> usize {
        self.weights.len()
    }

    /// Probability of state `j` (may underflow to 0 for deep-tail states).
    pub fn probability(&self, j: usize) -> f64 {
        self.weights[j] * self.log_scale.exp()
    }

    pub fn log_probability(&self, j: usize) -> LogProb {
        LogProb(self.weights[j].ln() + self.log_scale)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let s = self.log_scale.exp();
        self.weights.iter().map(|w| w * s).collect()
    }

    /// Represented mass `sum(weights) * exp(log_scale)`.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.log_scale.exp()
    }

    /// `|total_mass + truncation_mass - 1|`.
    pub fn conservation_error(&self) -> f64 {
        (self.total_mass() + self.truncation_mass - 1.0).abs()
    }

    /// CSV dump: two `#` header lines, then `state,weight` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# log_scale={:.16e}", self.log_scale).unwrap();
        writeln!(out, "# truncation_mass={:.16e}", self.truncation_mass).unwrap();
        writeln!(
            out,
            "# certified_log_bound={:.16e}",
            self.certified_log_bound
        )
        .unwrap();
        out.push_str("state,weight\n");
        for (j, w) in self.weights.iter().enumerate() {
            writeln!(out, "{j},{w:.16e}").unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("distribution csv: {msg}"));
        let mut log_scale = None;
        let mut truncation_mass = None;
        let mut certified = f64::NEG_INFINITY;
        let mut weights = Vec::new();
        let mut saw_header = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest.trim().split_once('=').ok_or_else(|| bad(line))?;
                let value: f64 = value.trim().parse().map_err(|_| bad(line))?;
                match key.trim() {
                    "log_scale" => log_scale = Some(value),
                    "truncation_mass" => truncation_mass = Some(value),
                    "certified_log_bound" => certified = value,
                    other => return Err(bad(&format!("unknown header {other}"))),
                }
            } else if !saw_header {
                if line != "state,weight" {
                    return Err(bad("missing state,weight header"));
                }
                saw_header = true;
            } else {
                let (s, w) = line.split_once(',').ok_or_else(|| bad(line))?;
                let s: usize = s.parse().map_err(|_| bad(line))?;
                if s != weights.len() {
                    return Err(bad("states must be consecutive from 0"));
                }
                weights.push(w.parse().map_err(|_| bad(line))?);
            }
        }
        Ok(DistributionVector {
            weights,
            log_scale: log_scale.ok_or_else(|| bad("missing log_scale"))?,
            truncation_mass: truncation_mass.ok_or_else(|| bad("missing truncation_mass"))?,
            certified_log_bound: certified,
        })
    }
}

/// Solver knobs for [`transient_distribution_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Bound on the absolute truncation error (state space and series).
    pub tol: f64,
    /// Vectors are rescaled once their largest weight leaves
    /// `[10^-e, 10^e]`.
    pub rescale_exponent: i32,
    /// Series terms stop once every represented state changes by less
    /// than this relative amount.
    pub series_rel_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            rescale_exponent: 100,
            series_rel_tol: 1e-16,
        }
    }
}

/// Default state count for queries up to `threshold`:
/// `ceil(threshold + alpha t + 8 sqrt(alpha t)) + 1`, raised when needed so
/// that the state-space truncation bound from 0 stays below 1e-14.
pub fn default_n_states(params: &ModelParams, t: f64, threshold: u64) -> usize {
    let at = params.alpha() * t;
    let spread = (threshold as f64 + at + 8.0 * at.sqrt()).ceil() as usize + 1;
    let floor = poisson::quantile_upper(at, 1e-14) as usize + 1;
    spread.max(floor)
}

/// Log of `P(Poisson(alpha t) >= n_states - init)`, which bounds the
/// probability that the process leaves `0..n_states` by time `t` since it
/// can rise by at most one per clock tick.
pub fn truncation_error_bound(
    params: &ModelParams,
    t: f64,
    n_states: usize,
    init: usize,
) -> LogProb {
    if n_states <= init {
        return LogProb::ONE;
    }
    LogProb(poisson::ln_upper_tail(
        (n_states - init) as u64,
        params.alpha() * t,
    ))
}

/// Workspace for repeated pushforwards of the embedded chain.
struct Kernel {
    p_up: f64,
    p_cat: f64,
    inv: Vec<f64>,
}

impl Kernel {
    fn new(params: &ModelParams, n_states: usize) -> Self {
        let mut inv = vec![0.0; n_states];
        for (i, v) in inv.iter_mut().enumerate().skip(1) {
            *v = 1.0 / i as f64;
        }
        Kernel {
            p_up: params.p_up(),
            p_cat: params.mu() / (params.lambda() + params.mu()),
            inv,
        }
    }

    /// Pushes `old[0..=hi]` one step into `new`. Returns the mass leaving the
    /// top state and the new highest index that may be nonzero.
    fn push(&self, old: &[f64], hi: usize, new: &mut [f64]) -> (f64, usize) {
        let top = old.len() - 1;
        let mut suffix = 0.0;
        for j in (0..=hi).rev() {
            new[j] = self.p_cat * suffix;
            suffix += old[j] * self.inv[j];
        }
        let new_hi = (hi + 1).min(top);
        if hi < top {
            new[hi + 1] = 0.0;
        }
        if top >= 1 {
            new[1] += old[0];
        }
        for j in 2..=new_hi {
            new[j] += self.p_up * old[j - 1];
        }
        let leak = if hi < top {
            0.0
        } else if top == 0 {
            old[0]
        } else {
            self.p_up * old[top]
        };
        (leak, new_hi)
    }
}

/// One step of the embedded chain applied to a distribution.
///
/// Mass moved above the top state is added to `truncation_mass`.
pub fn pushforward_step(dist: &DistributionVector, params: &ModelParams) -> DistributionVector {
    let n = dist.n_states();
    let kernel = Kernel::new(params, n);
    let mut new = vec![0.0; n];
    let (leak, _) = kernel.push(&dist.weights, n - 1, &mut new);
    DistributionVector {
        weights: new,
        log_scale: dist.log_scale,
        truncation_mass: dist.truncation_mass + leak * dist.log_scale.exp(),
        certified_log_bound: dist.certified_log_bound,
    }
}

/// Log Poisson weights, normalized around the mode so that the evaluated
/// terms sum to one to rounding.
struct PoissonWeights {
    ln_mean: f64,
    log_rel: Vec<f64>,
    log_norm: f64,
}

impl PoissonWeights {
    fn new(mean: f64) -> Self {
        let ln_mean = mean.ln();
        let mode = mean.floor() as usize;
        let mut log_rel = vec![0.0; mode + 1];
        for n in (1..=mode).rev() {
            log_rel[n - 1] = log_rel[n] + (n as f64).ln() - ln_mean;
        }
        let mut w = PoissonWeights {
            ln_mean,
            log_rel,
            log_norm: 0.0,
        };
        // extend until the right tail is below 1e-30 of the mode
        let mut n = mode;
        while w.log_rel(n) > -70.0 {
            n += 1;
        }
        let mut norm = f64::NEG_INFINITY;
        for k in 0..=n {
            norm = log_add_exp(norm, w.log_rel[k]);
        }
        w.log_norm = norm;
        w
    }

    fn log_rel(&mut self, n: usize) -> f64 {
        while self.log_rel.len() <= n {
            let k = self.log_rel.len();
            let prev = self.log_rel[k - 1];
            self.log_rel.push(prev + self.ln_mean - (k as f64).ln());
        }
        self.log_rel[n]
    }

    fn log_weight(&mut self, n: usize) -> f64 {
        self.log_rel(n) - self.log_norm
    }

    /// `ln P(N > n)` for `n` at or above the mode.
    fn log_tail_above(&mut self, n: usize) -> f64 {
        let mut acc = f64::NEG_INFINITY;
        let mut k = n + 1;
        loop {
            let lw = self.log_weight(k);
            acc = log_add_exp(acc, lw);
            if lw < acc - 40.0 || lw == f64::NEG_INFINITY {
                return acc;
            }
            k += 1;
        }
    }
}

/// A weight vector with its own log scale and known support `0..=hi`.
struct Scaled {
    w: Vec<f64>,
    log_scale: f64,
    hi: usize,
}

impl Scaled {
    /// Rescales to max weight 1 when the max leaves `[lo, hi]`. Returns `false`
    /// when the vector is identically zero.
    fn renormalize(&mut self, lo: f64, hi_bound: f64) -> bool {
        let max = self.w[..=self.hi].iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return false;
        }
        if max < lo || max > hi_bound {
            let inv = 1.0 / max;
            for v in &mut self.w[..=self.hi] {
                *v *= inv;
            }
            self.log_scale += max.ln();
        }
        true
    }

    /// Zeroes subnormal entries, trims `hi`, and returns the dropped weight.
    fn flush(&mut self) -> f64 {
        let mut dropped = 0.0;
        for v in &mut self.w[..=self.hi] {
            if *v != 0.0 && *v < f64::MIN_POSITIVE {
                dropped += *v;
                *v = 0.0;
            }
        }
        while self.hi > 0 && self.w[self.hi] == 0.0 {
            self.hi -= 1;
        }
        dropped
    }
}

/// Transient law of `xi(t)` from `init` with default [`SolveOptions`] and the
/// given tolerance.
pub fn transient_distribution(
    params: &ModelParams,
    t: f64,
    init: usize,
    n_states: usize,
    tol: f64,
) -> Result<DistributionVector> {
    transient_distribution_with(
        params,
        t,
        init,
        n_states,
        &SolveOptions {
            tol,
            ..SolveOptions::default()
        },
    )
}

pub fn transient_distribution_with(
    params: &ModelParams,
    t: f64,
    init: usize,
    n_states: usize,
    opts: &SolveOptions,
) -> Result<DistributionVector> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and >= 0 (got {t})"
        )));
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be in (0, 1) (got {})",
            opts.tol
        )));
    }
    if init >= n_states {
        return Err(Error::OutOfRange {
            index: init,
            len: n_states,
        });
    }
    let mean = params.alpha() * t;
    if mean == 0.0 {
        return DistributionVector::point_mass(init, n_states);
    }
    let state_bound = truncation_error_bound(params, t, n_states, init).value();
    if state_bound > opts.tol.ln() {
        return Err(Error::Truncation {
            t,
            n_states,
            log_bound: state_bound,
            tol: opts.tol,
        });
    }

    let lo = 10f64.powi(-opts.rescale_exponent);
    let hi_bound = 10f64.powi(opts.rescale_exponent);
    let kernel = Kernel::new(params, n_states);
    let mut weights = PoissonWeights::new(mean);
    let n_min = poisson::quantile_upper(mean, opts.tol).max(mean.ceil() as u64) as usize;

    let mut iter = Scaled {
        w: vec![0.0; n_states],
        log_scale: 0.0,
        hi: init,
    };
    iter.w[init] = 1.0;
    let mut scratch = vec![0.0; n_states];
    let mut acc = Scaled {
        w: vec![0.0; n_states],
        log_scale: f64::NEG_INFINITY,
        hi: 0,
    };
    // absolute probability booked outside the accumulator
    let mut leaked = 0.0; // cumulative top-state leak of the chain iterate
    let mut weighted_leak = 0.0;
    let mut underflow = 0.0;
    let mut alive = true;

    let mut n = 0usize;
    loop {
        let log_w = weights.log_weight(n);
        let mut max_rel = 0.0f64;
        if alive {
            let log_f = log_w + iter.log_scale - acc.log_scale;
            if acc.log_scale == f64::NEG_INFINITY || log_f > hi_bound.ln() {
                // move the accumulator onto the incoming scale
                let shift = if acc.log_scale == f64::NEG_INFINITY {
                    0.0
                } else {
                    (-log_f).exp()
                };
                let old_scale = acc.log_scale;
                for v in &mut acc.w[..=acc.hi] {
                    *v *= shift;
                }
                acc.log_scale = log_w + iter.log_scale;
                let dropped = acc.flush();
                if old_scale.is_finite() {
                    underflow += dropped * acc.log_scale.exp();
                }
            }
            let f = (log_w + iter.log_scale - acc.log_scale).exp();
            if f == 0.0 {
                underflow +=
                    (log_w + iter.log_scale).exp() * iter.w[..=iter.hi].iter().sum::<f64>();
            } else {
                let check = n >= n_min;
                for j in 0..=iter.hi {
                    let inc = f * iter.w[j];
                    if inc < f64::MIN_POSITIVE {
                        if inc != 0.0 {
                            underflow += inc * acc.log_scale.exp();
                        }
                        continue;
                    }
                    acc.w[j] += inc;
                    if check {
                        max_rel = max_rel.max(inc / acc.w[j]);
                    }
                }
                acc.hi = acc.hi.max(iter.hi);
            }
        }
        weighted_leak += log_w.exp() * leaked;

        if n >= n_min && max_rel <= opts.series_rel_tol {
            break;
        }

        // advance the chain
        if alive {
            let (leak, new_hi) = kernel.push(&iter.w, iter.hi, &mut scratch);
            std::mem::swap(&mut iter.w, &mut scratch);
            iter.hi = new_hi;
            let scale = iter.log_scale.exp();
            leaked += leak * scale;
            leaked += iter.flush() * scale;
            alive = iter.renormalize(lo, hi_bound);
        }
        n += 1;
    }

    let series_tail = weights.log_tail_above(n).exp();
    let truncation_mass = weighted_leak + underflow + series_tail;
    // the top-state leak needs at least n_states - init ticks
    let certified = (state_bound.exp() + series_tail + underflow).ln();
    let mut out = DistributionVector {
        weights: acc.w,
        log_scale: acc.log_scale,
        truncation_mass,
        certified_log_bound: certified,
    };
    if out.log_scale == f64::NEG_INFINITY {
        out.log_scale = 0.0;
    }
    if truncation_mass > opts.tol {
        return Err(Error::Truncation {
            t,
            n_states,
            log_bound: truncation_mass.ln(),
            tol: opts.tol,
        });
    }
    Ok(out)
}

/// `ln P(xi >= m)` from the represented weights, summed smallest-first.
///
/// This is a lower bound; [`tail_bounds`] adds the truncation mass on top.
pub fn tail_probability(dist: &DistributionVector, m: usize) -> Result<LogProb> {
    if m >= dist.n_states() {
        return Err(Error::OutOfRange {
            index: m,
            len: dist.n_states(),
        });
    }
    let sum: f64 = dist.weights[m..].iter().rev().sum();
    if sum == 0.0 {
        return Ok(LogProb::ZERO_PROB);
    }
    Ok(LogProb(sum.ln() + dist.log_scale))
}

/// `(lower, upper)` log bounds on `P(xi >= m)`.
pub fn tail_bounds(dist: &DistributionVector, m: usize) -> Result<(LogProb, LogProb)> {
    let lower = tail_probability(dist, m)?;
    let upper = log_add_exp(lower.value(), dist.truncation_mass.ln()).min(0.0);
    Ok((lower, LogProb(upper)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_goes_to_one() {
        let d = DistributionVector::point_mass(0, 5).unwrap();
        let out = pushforward_step(&d, &unit());
        assert_eq!(out.weights, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn row_three_symmetric() {
        let d = DistributionVector::point_mass(3, 6).unwrap();
        let out = pushforward_step(&d, &unit());
        let want = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.0, 0.5, 0.0];
        for (a, b) in out.weights.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn leak_at_top_is_booked() {
        let d = DistributionVector::point_mass(3, 4).unwrap();
        let out = pushforward_step(&d, &unit());
        assert!((out.truncation_mass - 0.5).abs() < 1e-15);
        assert!((out.total_mass() + out.truncation_mass - 1.0).abs() < 1e-14);
        let d = DistributionVector::point_mass(0, 1).unwrap();
        let out = pushforward_step(&d, &unit());
        assert_eq!(out.truncation_mass, 1.0);
    }

    #[test]
    fn t_zero_is_point_mass() {
        let d = transient_distribution(&unit(), 0.0, 4, 10, 1e-12).unwrap();
        assert_eq!(d.probability(4), 1.0);
        assert_eq!(d.total_mass(), 1.0);
    }

    #[test]
    fn small_t_close_to_point_mass() {
        let t = 1e-3;
        let d = transient_distribution(&unit(), t, 2, 20, 1e-12).unwrap();
        let tv: f64 = d
            .probabilities()
            .iter()
            .enumerate()
            .map(|(j, p)| if j == 2 { (1.0 - p).abs() } else { *p })
            .sum::<f64>()
            / 2.0;
        assert!(tv <= t);
    }

    #[test]
    fn p_one_at_small_t() {
        let d = transient_distribution(&unit(), 0.01, 0, 10, 1e-12).unwrap();
        let want = (-0.01f64).exp() * 0.01;
        assert!((d.probability(1) - want).abs() < 1e-4 * 0.01);
        assert!((d.probability(1) - 0.00990).abs() < 1e-5);
    }

    #[test]
    fn insufficient_states_rejected() {
        let err = transient_distribution(&unit(), 50.0, 0, 20, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
        assert!(transient_distribution(&unit(), 1.0, 5, 5, 1e-12).is_err());
    }

    #[test]
    fn tail_queries() {
        let d = DistributionVector::point_mass(5, 8).unwrap();
        assert_eq!(tail_probability(&d, 3).unwrap().value(), 0.0);
        assert_eq!(tail_probability(&d, 6).unwrap().value(), f64::NEG_INFINITY);
        assert!(tail_probability(&d, 8).is_err());
        let d = transient_distribution(&unit(), 3.0, 0, 40, 1e-12).unwrap();
        assert!(tail_probability(&d, 0).unwrap().value().abs() < 1e-11);
    }

    #[test]
    fn truncation_bound_examples() {
        let p = unit();
        assert_eq!(truncation_error_bound(&p, 1.0, 3, 3).value(), 0.0);
        let v = truncation_error_bound(&p, 1.0, 10, 0).value();
        assert!((v - (-16.01)).abs() < 0.01, "{v}");
        let mut prev = 0.0;
        for n in 1..60 {
            let b = truncation_error_bound(&p, 4.0, n, 0).value();
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn csv_round_trip() {
        let d = transient_distribution(&unit(), 2.5, 1, 30, 1e-12).unwrap();
        let back = DistributionVector::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back, d);
        assert!(DistributionVector::from_csv("state,weight\n0,1\n").is_err());
    }
}
