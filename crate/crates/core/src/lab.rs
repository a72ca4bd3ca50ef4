//! Numerical experiments on the law of large numbers and the three
//! large-deviation regimes.
//!
//! All tail events are `{xi(T) >= ceil(x phi(T))}` for a process started at 0.

use crate::error::{Error, Result};
use crate::exact::{default_n_states, tail_probability, transient_distribution};
use crate::logspace::{log_add_exp, LogProb};
use crate::poisson;
use crate::process::{fold_decomposed, fold_embedded, sample_catastrophe, ModelParams};
use crate::rates::{poisson_chernoff_upper, ExtReal, Regime, RegimeRateFunction, ScalingSpec};
use crate::rng::replica_rng;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Integer threshold `ceil(x phi)`, with products within 1e-9 (relative) of an
/// integer snapped to it so that `1.5 * 100` is 150 and not 151.
pub fn tail_threshold(x: f64, phi: f64) -> u64 {
    let v = x * phi;
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r.max(0.0) as u64
    } else {
        v.ceil().max(0.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurvePoint {
    #[serde(rename = "T")]
    pub t: f64,
    pub psi: f64,
    pub threshold: u64,
    pub log_tail: f64,
    /// `-log_tail / psi`.
    pub normalized: f64,
    /// Log of the certified bound on total probability lost to truncation
    /// (absolute, not relative to the tail).
    pub truncation_certificate: f64,
    /// `|represented mass + booked truncation mass - 1|` of the solve.
    pub conservation_error: f64,
    pub n_states: usize,
}

/// Inputs of [`empirical_rate_curve`], echoed into its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub params: ModelParams,
    pub spec: ScalingSpec,
    pub x: f64,
    pub t_grid: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: CurveConfig,
    pub regime: Regime,
    pub reference_rate: ExtReal,
    pub points: Vec<RateCurvePoint>,
}

impl ExperimentResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Flat CSV: `T,psi,log_tail,normalized,reference`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,psi,log_tail,normalized,reference\n");
        let reference = self.reference_rate.value();
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.t, p.psi, p.log_tail, p.normalized, reference
            )
            .unwrap();
        }
        out
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.normalized).collect()
    }
}

/// Exact normalized log-tails `-ln P(xi(T) >= ceil(x phi(T))) / psi(T)` along
/// `t_grid`, next to the regime's rate at `x`.
pub fn empirical_rate_curve(
    params: &ModelParams,
    spec: &ScalingSpec,
    x: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<ExperimentResult> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::NonPositive {
            field: "x",
            value: x,
        });
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("T grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] > 0.0) {
        return Err(Error::InvalidArgument(
            "T grid must be positive and strictly increasing".into(),
        ));
    }
    let points = t_grid
        .par_iter()
        .map(|&t| curve_point(params, spec, x, t, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: CurveConfig {
            params: *params,
            spec: *spec,
            x,
            t_grid: t_grid.to_vec(),
            tol,
        },
        regime: spec.regime(),
        reference_rate: RegimeRateFunction::for_spec(spec, params).eval(x),
        points,
    })
}

fn curve_point(
    params: &ModelParams,
    spec: &ScalingSpec,
    x: f64,
    t: f64,
    tol: f64,
) -> Result<RateCurvePoint> {
    let psi = spec.psi(t)?;
    let threshold = tail_threshold(x, spec.phi(t));
    let n_states = default_n_states(params, t, threshold);
    let dist = transient_distribution(params, t, 0, n_states, tol)?;
    let log_tail = tail_probability(&dist, threshold as usize)?.value();
    Ok(RateCurvePoint {
        t,
        psi,
        threshold,
        log_tail,
        normalized: -log_tail / psi,
        truncation_certificate: dist.certified_log_bound,
        conservation_error: dist.conservation_error(),
        n_states,
    })
}

/// Least-squares fit of `normalized(T) = rate + c / psi(T)`; returns
/// `(rate, c)`. Heuristic: the correction order is not known.
pub fn richardson_fit(result: &ExperimentResult) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = result
        .points
        .iter()
        .filter(|p| p.normalized.is_finite())
        .map(|p| (1.0 / p.psi, p.normalized))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let c = sxy / sxx;
    Some((my - c * mx, c))
}

/// Lower and upper log bounds on `P(xi(T) >= ceil(x phi(T)))` from `xi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lower: LogProb,
    pub upper: LogProb,
    /// Length of the terminal window used by the lower bound.
    pub window: f64,
    /// True when `(x / alpha) phi(T)` exceeded `T` and the window was cut to `T`.
    pub clamped: bool,
    pub threshold: u64,
}

fn window_length(params: &ModelParams, spec: &ScalingSpec, x: f64, t: f64) -> (f64, bool) {
    let w = x / params.alpha() * spec.phi(t);
    if w > t {
        (t, true)
    } else {
        (w, false)
    }
}

/// Lower bound: the up-clock alone fires `threshold` times in the last
/// `window` time units while the catastrophe clock stays silent. Upper bound:
/// Chernoff bound on `P(N_up(T) >= threshold - 1)`, valid because the
/// process started at 0 never exceeds one plus the up-count.
pub fn ldp_sandwich(params: &ModelParams, spec: &ScalingSpec, x: f64, t: f64) -> Result<Sandwich> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "x must be finite and >= 0 (got {x})"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositive {
            field: "T",
            value: t,
        });
    }
    let threshold = tail_threshold(x, spec.phi(t));
    let (window, clamped) = window_length(params, spec, x, t);
    if threshold == 0 {
        return Ok(Sandwich {
            lower: LogProb::ONE,
            upper: LogProb::ONE,
            window,
            clamped,
            threshold,
        });
    }
    let lower = poisson::ln_upper_tail(threshold, params.rate_up() * window)
        - params.rate_catastrophe() * window;
    let upper = poisson_chernoff_upper(params.rate_up() * t, (threshold - 1) as f64);
    Ok(Sandwich {
        lower: LogProb(lower),
        upper,
        window,
        clamped,
        threshold,
    })
}

/// How the catastrophe clock is slowed on the terminal window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Thinning {
    /// Catastrophe rate multiplied by a constant in `(0, 1]`.
    Constant { factor: f64 },
    /// From state `s >= 1` the rate is multiplied by
    /// `min(1, (rho + ... + rho^s) / s)` with `rho` the inverse up-rate
    /// factor: a catastrophe costing `d` units needs `d` extra up-jumps, each
    /// worth `rho` in likelihood. State 0 keeps the natural rate.
    StateDependent,
}

/// How the up clock is sped up on the terminal window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpSchedule {
    /// Up rate multiplied by the tilt factor throughout.
    Constant,
    /// Up rate `(threshold - state) / (time left)`, clamped between the
    /// natural rate and four times the tilted rate; natural once the
    /// threshold is reached.
    Adaptive,
}

/// Change of measure on the terminal window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsTilt {
    /// Multiplier of the up rate on the window; `None` centers the up count
    /// on the threshold.
    pub up_factor: Option<f64>,
    pub schedule: UpSchedule,
    pub thinning: Thinning,
}

impl Default for IsTilt {
    fn default() -> Self {
        IsTilt {
            up_factor: None,
            schedule: UpSchedule::Adaptive,
            thinning: Thinning::StateDependent,
        }
    }
}

impl IsTilt {
    pub const NEUTRAL: IsTilt = IsTilt {
        up_factor: Some(1.0),
        schedule: UpSchedule::Constant,
        thinning: Thinning::Constant { factor: 1.0 },
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsEstimate {
    pub estimate: LogProb,
    pub rel_std_err: f64,
    pub samples: usize,
    pub hits: usize,
}

/// Importance-sampling estimate of `P(xi(T) >= ceil(x phi(T)))` with the
/// default [`IsTilt`].
pub fn is_estimate_tail(
    params: &ModelParams,
    spec: &ScalingSpec,
    x: f64,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<IsEstimate> {
    is_estimate_tail_with(params, spec, x, t, n, seed, &IsTilt::default())
}

/// Runs the unmodified process up to `T - window`, then both clocks with
/// tilted rates on the window, and weights each hit by the exact likelihood
/// ratio of the window path.
pub fn is_estimate_tail_with(
    params: &ModelParams,
    spec: &ScalingSpec,
    x: f64,
    t: f64,
    n: usize,
    seed: u64,
    tilt: &IsTilt,
) -> Result<IsEstimate> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 samples (got {n})"
        )));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::NonPositive {
            field: "x",
            value: x,
        });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositive {
            field: "T",
            value: t,
        });
    }
    if let Thinning::Constant { factor } = tilt.thinning {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "thinning factor must lie in (0, 1] (got {factor})"
            )));
        }
    }
    let threshold = tail_threshold(x, spec.phi(t));
    let (window, _) = window_length(params, spec, x, t);
    let r_up = params.rate_up();
    let up_factor = match tilt.up_factor {
        Some(f) if f > 0.0 && f.is_finite() => f,
        Some(f) => {
            return Err(Error::NonPositive {
                field: "up_factor",
                value: f,
            })
        }
        None => (threshold as f64 / (r_up * window)).max(1.0),
    };
    let proposal = Proposal::new(params, up_factor, tilt, threshold);
    let pre = t - window;

    let log_weights: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i as u64);
            let start = if pre > 0.0 {
                fold_decomposed(params, pre, 0, &mut rng, 0u64, |_, _, s| s)
            } else {
                0
            };
            let (state, log_lr) = proposal.run(start, window, &mut rng);
            (state >= threshold).then_some(log_lr)
        })
        .collect();

    let hits = log_weights.iter().flatten().count();
    let (mut s1, mut s2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for lw in log_weights.iter().flatten() {
        s1 = log_add_exp(s1, *lw);
        s2 = log_add_exp(s2, 2.0 * lw);
    }
    let ln_n = (n as f64).ln();
    let log_mean = s1 - ln_n;
    let rel_std_err = if hits == 0 {
        f64::INFINITY
    } else {
        // Var(W) / E[W]^2 = E[W^2] / E[W]^2 - 1
        let ratio = ((s2 - ln_n) - 2.0 * log_mean).exp();
        ((ratio - 1.0).max(0.0) / n as f64).sqrt()
    };
    Ok(IsEstimate {
        estimate: LogProb(log_mean),
        rel_std_err,
        samples: n,
        hits,
    })
}

/// Window dynamics under the proposal measure.
struct Proposal {
    r_up: f64,
    q_up: f64,
    r_cat: f64,
    thinning: Thinning,
    schedule: UpSchedule,
    threshold: u64,
}

impl Proposal {
    fn new(params: &ModelParams, up_factor: f64, tilt: &IsTilt, threshold: u64) -> Self {
        Proposal {
            r_up: params.rate_up(),
            q_up: params.rate_up() * up_factor,
            r_cat: params.rate_catastrophe(),
            thinning: tilt.thinning,
            schedule: tilt.schedule,
            threshold,
        }
    }

    fn cat_factor(&self, state: u64, rho: f64) -> f64 {
        match self.thinning {
            Thinning::Constant { factor } => factor,
            Thinning::StateDependent => {
                if state == 0 || rho >= 1.0 {
                    return 1.0;
                }
                let s = state as f64;
                let geometric = rho * (1.0 - rho.powf(s)) / (1.0 - rho);
                (geometric / s).min(1.0)
            }
        }
    }

    /// Up rate at window time `now` from `state`: the constant tilt, or the
    /// rate that would reach the threshold exactly on time.
    fn up_rate(&self, state: u64, now: f64, window: f64) -> f64 {
        match self.schedule {
            UpSchedule::Constant => self.q_up,
            UpSchedule::Adaptive => {
                let need = self.threshold as f64 - state as f64;
                let left = window - now;
                if need <= 0.0 {
                    self.r_up
                } else {
                    (need / left).clamp(self.r_up, 4.0 * self.q_up)
                }
            }
        }
    }

    /// Simulates the window from `start`; returns the final state and the
    /// log-likelihood ratio of the original law against the proposal.
    ///
    /// Rates are frozen between events, so the ratio is exact.
    fn run<R: Rng + ?Sized>(&self, start: u64, window: f64, rng: &mut R) -> (u64, f64) {
        let mut log_lr = 0.0;
        let (mut state, mut now) = (start, 0.0);
        loop {
            let q_up = self.up_rate(state, now, window);
            let f = self.cat_factor(state, self.r_up / q_up);
            let q_cat = self.r_cat * f;
            let total = q_up + q_cat;
            let hold = Exp::new(total).expect("positive rate").sample(rng);
            let dt = hold.min(window - now);
            log_lr -= (self.r_up - q_up + self.r_cat - q_cat) * dt;
            now += hold;
            if now >= window {
                return (state, log_lr);
            }
            if rng.random::<f64>() * total < q_up {
                state += 1;
                log_lr += (self.r_up / q_up).ln();
            } else {
                let size = sample_catastrophe(state, rng);
                state = crate::process::apply_catastrophe(state, size);
                log_lr -= f.ln();
            }
        }
    }
}

/// Running maximum of `n` independent paths from 0 over `[0, T]`; path `i`
/// uses stream `i` of `seed`.
pub fn path_maxima(params: &ModelParams, t: f64, n: usize, seed: u64) -> Vec<u64> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i as u64);
            fold_embedded(params, t, 0, &mut rng, 0u64, |m, _, s| m.max(s))
        })
        .collect()
}

/// Fraction of maxima with `max / phi > eps`.
pub fn exceedance_fraction(maxima: &[u64], phi: f64, eps: f64) -> f64 {
    if maxima.is_empty() {
        return 0.0;
    }
    let hits = maxima.iter().filter(|&&m| m as f64 / phi > eps).count();
    hits as f64 / maxima.len() as f64
}

/// Fraction of `n` paths whose supremum over `[0, T]` of `xi(t) / phi(T)`
/// exceeds `eps`, for a sublinear scale.
pub fn lln_sup_check(
    params: &ModelParams,
    spec: &ScalingSpec,
    t: f64,
    eps: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if spec.regime() != Regime::Sublinear {
        return Err(Error::InvalidArgument(
            "the supremum check applies to sublinear scales (a < 1)".into(),
        ));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositive {
            field: "T",
            value: t,
        });
    }
    if !(eps > 0.0) {
        return Err(Error::NonPositive {
            field: "eps",
            value: eps,
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let maxima = path_maxima(params, t, n, seed);
    Ok(exceedance_fraction(&maxima, spec.phi(t), eps))
}
