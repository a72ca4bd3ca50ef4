//! Model parameters and trajectory samplers.
//!
//! Two samplers produce the same law:
//!
//! - [`simulate_embedded`] runs a single rate-`alpha` clock and applies one
//!   step of the embedded jump chain at every tick.
//! - [`simulate_decomposed`] superposes an up-clock of rate
//!   `alpha * lambda / (lambda + mu)` and a catastrophe clock of rate
//!   `alpha * mu / (lambda + mu)`; a catastrophe at state `m >= 1` removes a
//!   uniform amount in `1..=m`, and at state 0 it reflects the process to 1.

use crate::error::{Error, Result};
use crate::rng::{replica_rng, ReplicaRng};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    lambda: f64,
    mu: f64,
    alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    lambda: f64,
    mu: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.lambda, raw.mu, raw.alpha)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            lambda: p.lambda,
            mu: p.mu,
            alpha: p.alpha,
        }
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite { field, value });
    }
    if value <= 0.0 {
        return Err(Error::NonPositive { field, value });
    }
    Ok(())
}

impl ModelParams {
    /// Validates `(lambda, mu, alpha)`; each must be finite and strictly positive.
    pub fn new(lambda: f64, mu: f64, alpha: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("mu", mu)?;
        check_positive("alpha", alpha)?;
        Ok(ModelParams { lambda, mu, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Probability that a tick of the clock is an up move.
    pub fn p_up(&self) -> f64 {
        self.lambda / (self.lambda + self.mu)
    }

    /// Rate of the up-clock.
    pub fn rate_up(&self) -> f64 {
        self.alpha * self.lambda / (self.lambda + self.mu)
    }

    /// Rate of the catastrophe clock.
    pub fn rate_catastrophe(&self) -> f64 {
        self.alpha * self.mu / (self.lambda + self.mu)
    }
}

/// `validate_params` under its operational name.
pub fn validate_params(lambda: f64, mu: f64, alpha: f64) -> Result<ModelParams> {
    ModelParams::new(lambda, mu, alpha)
}

/// Piecewise-constant path: the state is `initial_state` until the first
/// event time, then each event's state until the next one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial_state: u64,
    pub events: Vec<(f64, u64)>,
    pub horizon: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> u64 {
        self.events.last().map_or(self.initial_state, |&(_, s)| s)
    }

    /// State at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> u64 {
        let idx = self.events.partition_point(|&(time, _)| time <= t);
        if idx == 0 {
            self.initial_state
        } else {
            self.events[idx - 1].1
        }
    }

    /// Largest state visited on `[0, horizon]`.
    pub fn max_state(&self) -> u64 {
        self.events
            .iter()
            .map(|&(_, s)| s)
            .fold(self.initial_state, u64::max)
    }

    pub fn jump_count(&self) -> usize {
        self.events.len()
    }

    /// Checks ordering, horizon and the single-jump structure.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut prev_t = 0.0;
        let mut prev = self.initial_state;
        for (i, &(t, s)) in self.events.iter().enumerate() {
            if !(t > prev_t || (i == 0 && t >= 0.0)) || t > self.horizon {
                return Err(format!("event {i}: bad time {t}"));
            }
            if !valid_jump(prev, s) {
                return Err(format!("event {i}: invalid jump {prev} -> {s}"));
            }
            prev_t = t;
            prev = s;
        }
        Ok(())
    }
}

/// Allowed single-event moves: `+1`, or a drop to any lower state.
pub fn valid_jump(from: u64, to: u64) -> bool {
    to == from + 1 || to < from
}

/// One step of the embedded jump chain from `state`.
pub fn embedded_step<R: Rng + ?Sized>(params: &ModelParams, state: u64, rng: &mut R) -> u64 {
    if state == 0 {
        return 1;
    }
    if rng.random_bool(params.p_up()) {
        state + 1
    } else {
        rng.random_range(0..state)
    }
}

/// Uniform catastrophe size on `1..=m`; `-1` (reflection) when `m == 0`.
pub fn sample_catastrophe<R: Rng + ?Sized>(m: u64, rng: &mut R) -> i64 {
    if m == 0 {
        return -1;
    }
    rng.random_range(1..=m) as i64
}

/// Applies a catastrophe of size `size` (as returned by [`sample_catastrophe`]).
pub(crate) fn apply_catastrophe(state: u64, size: i64) -> u64 {
    if size < 0 {
        state + 1
    } else {
        state - size as u64
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    check_positive("horizon", horizon)
}

/// Streams the embedded-chain sampler through `f(acc, time, new_state)`
/// without storing the path.
pub fn fold_embedded<A, R, F>(
    params: &ModelParams,
    horizon: f64,
    init: u64,
    rng: &mut R,
    mut acc: A,
    mut f: F,
) -> A
where
    R: Rng + ?Sized,
    F: FnMut(A, f64, u64) -> A,
{
    let clock = Exp::new(params.alpha).expect("alpha validated positive");
    let mut t = 0.0;
    let mut state = init;
    loop {
        t += clock.sample(rng);
        if t > horizon {
            return acc;
        }
        state = embedded_step(params, state, rng);
        acc = f(acc, t, state);
    }
}

/// Streams the two-clock sampler through `f(acc, time, new_state)`.
pub fn fold_decomposed<A, R, F>(
    params: &ModelParams,
    horizon: f64,
    init: u64,
    rng: &mut R,
    mut acc: A,
    mut f: F,
) -> A
where
    R: Rng + ?Sized,
    F: FnMut(A, f64, u64) -> A,
{
    let up = Exp::new(params.rate_up()).expect("positive rate");
    let cat = Exp::new(params.rate_catastrophe()).expect("positive rate");
    let mut next_up = up.sample(rng);
    let mut next_cat = cat.sample(rng);
    let mut state = init;
    loop {
        let t = next_up.min(next_cat);
        if t > horizon {
            return acc;
        }
        if next_up <= next_cat {
            state += 1;
            next_up += up.sample(rng);
        } else {
            let size = sample_catastrophe(state, rng);
            state = apply_catastrophe(state, size);
            next_cat += cat.sample(rng);
        }
        acc = f(acc, t, state);
    }
}

fn collect_path(events: Vec<(f64, u64)>, t: f64, s: u64) -> Vec<(f64, u64)> {
    let mut events = events;
    events.push((t, s));
    events
}

pub fn simulate_embedded_with<R: Rng + ?Sized>(
    params: &ModelParams,
    horizon: f64,
    init: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    let events = fold_embedded(params, horizon, init, rng, Vec::new(), collect_path);
    Ok(Trajectory {
        initial_state: init,
        events,
        horizon,
    })
}

pub fn simulate_decomposed_with<R: Rng + ?Sized>(
    params: &ModelParams,
    horizon: f64,
    init: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    let events = fold_decomposed(params, horizon, init, rng, Vec::new(), collect_path);
    Ok(Trajectory {
        initial_state: init,
        events,
        horizon,
    })
}

/// Embedded-chain sampler on stream 0 of `seed`.
pub fn simulate_embedded(
    params: &ModelParams,
    horizon: f64,
    init: u64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_embedded_with(params, horizon, init, &mut replica_rng(seed, 0))
}

/// Two-clock sampler on stream 0 of `seed`.
pub fn simulate_decomposed(
    params: &ModelParams,
    horizon: f64,
    init: u64,
    seed: u64,
) -> Result<Trajectory> {
    simulate_decomposed_with(params, horizon, init, &mut replica_rng(seed, 0))
}

/// Which sampler to use for replicated runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Embedded,
    Decomposed,
}

/// Terminal states `xi(horizon)` of `replicas` independent paths; replica `i`
/// uses stream `i` of `seed`, so the output does not depend on threading.
pub fn terminal_states(
    params: &ModelParams,
    sampler: Sampler,
    horizon: f64,
    init: u64,
    seed: u64,
    replicas: usize,
) -> Result<Vec<u64>> {
    check_horizon(horizon)?;
    let out = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng: ReplicaRng = replica_rng(seed, i as u64);
            let last = |_: u64, _: f64, s: u64| s;
            match sampler {
                Sampler::Embedded => fold_embedded(params, horizon, init, &mut rng, init, last),
                Sampler::Decomposed => fold_decomposed(params, horizon, init, &mut rng, init, last),
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn params_symmetric_case() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.p_up(), 0.5);
        assert_eq!(p.rate_up(), 0.5);
        assert_eq!(p.rate_catastrophe(), 0.5);
    }

    #[test]
    fn params_derived_rates() {
        let p = ModelParams::new(2.0, 1.0, 3.0).unwrap();
        assert_relative_eq!(p.p_up(), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p.rate_up(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(p.rate_catastrophe(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            p.rate_up() + p.rate_catastrophe(),
            p.alpha(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn params_rejections_name_the_field() {
        let e = ModelParams::new(0.0, 1.0, 1.0).unwrap_err();
        assert_eq!(e.to_string(), "lambda must be positive (got 0)");
        assert!(ModelParams::new(1.0, -1.0, 1.0)
            .unwrap_err()
            .to_string()
            .starts_with("mu"));
        assert!(ModelParams::new(1.0, 1.0, f64::NAN)
            .unwrap_err()
            .to_string()
            .starts_with("alpha"));
        assert!(matches!(
            ModelParams::new(f64::INFINITY, 1.0, 1.0),
            Err(Error::NonFinite {
                field: "lambda",
                ..
            })
        ));
    }

    #[test]
    fn params_deserialize_validates() {
        let ok: ModelParams = serde_json::from_str(r#"{"lambda":1,"mu":2,"alpha":3}"#).unwrap();
        assert_eq!(ok.mu(), 2.0);
        assert!(serde_json::from_str::<ModelParams>(r#"{"lambda":0,"mu":2,"alpha":3}"#).is_err());
        assert!(
            serde_json::from_str::<ModelParams>(r#"{"lambda":1,"mu":2,"alpha":3,"k":1}"#).is_err()
        );
    }

    #[test]
    fn state_zero_always_goes_to_one() {
        let p = ModelParams::new(1.0, 5.0, 1.0).unwrap();
        let mut rng = replica_rng(1, 0);
        for _ in 0..1000 {
            assert_eq!(embedded_step(&p, 0, &mut rng), 1);
        }
    }

    #[test]
    fn embedded_step_frequencies_from_three() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let mut rng = replica_rng(11, 0);
        let n = 1_000_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[embedded_step(&p, 3, &mut rng) as usize] += 1;
        }
        assert_eq!(counts[3], 0);
        let f = |c: usize| c as f64 / n as f64;
        assert!((f(counts[4]) - 0.5).abs() < 0.002);
        for j in 0..3 {
            assert!(
                (f(counts[j]) - 1.0 / 6.0).abs() < 0.002,
                "{j}: {}",
                f(counts[j])
            );
        }
    }

    #[test]
    fn catastrophe_sizes() {
        let mut rng = replica_rng(5, 0);
        assert_eq!(sample_catastrophe(0, &mut rng), -1);
        for _ in 0..100 {
            assert_eq!(sample_catastrophe(1, &mut rng), 1);
        }
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[sample_catastrophe(4, &mut rng) as usize] += 1;
        }
        assert_eq!(counts[0], 0);
        for c in &counts[1..] {
            assert!((*c as f64 / n as f64 - 0.25).abs() < 0.005);
        }
    }

    #[test]
    fn tiny_horizon_gives_constant_path() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let tr = simulate_embedded(&p, 1e-12, 7, 3).unwrap();
        assert!(tr.events.is_empty());
        assert_eq!(tr.final_state(), 7);
        assert_eq!(tr.state_at(1e-13), 7);
        let tr = simulate_decomposed(&p, 1e-12, 7, 3).unwrap();
        assert!(tr.events.is_empty());
    }

    #[test]
    fn horizon_must_be_positive() {
        let p = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(simulate_embedded(&p, 0.0, 0, 1).is_err());
        assert!(simulate_decomposed(&p, -1.0, 0, 1).is_err());
    }

    #[test]
    fn samplers_are_reproducible() {
        let p = ModelParams::new(2.0, 1.0, 1.5).unwrap();
        assert_eq!(
            simulate_embedded(&p, 50.0, 2, 99).unwrap(),
            simulate_embedded(&p, 50.0, 2, 99).unwrap()
        );
        assert_eq!(
            simulate_decomposed(&p, 50.0, 2, 99).unwrap(),
            simulate_decomposed(&p, 50.0, 2, 99).unwrap()
        );
    }

    #[test]
    fn jump_count_moments() {
        let p = ModelParams::new(1.0, 1.0, 2.0).unwrap();
        let horizon = 5.0;
        let n = 100_000usize;
        let counts: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| {
                fold_embedded(
                    &p,
                    horizon,
                    0,
                    &mut replica_rng(4, i as u64),
                    0usize,
                    |c, _, _| c + 1,
                )
            })
            .collect();
        let mean = counts.iter().sum::<usize>() as f64 / n as f64;
        let at = p.alpha() * horizon;
        assert!((mean - at).abs() < 3.0 * (at / n as f64).sqrt() * at.sqrt());
    }

    #[test]
    fn state_lookup() {
        let tr = Trajectory {
            initial_state: 0,
            events: vec![(0.5, 1), (1.0, 2), (2.0, 0)],
            horizon: 3.0,
        };
        assert_eq!(tr.state_at(0.0), 0);
        assert_eq!(tr.state_at(0.5), 1);
        assert_eq!(tr.state_at(1.5), 2);
        assert_eq!(tr.state_at(2.5), 0);
        assert_eq!(tr.max_state(), 2);
        assert!(tr.check_invariants().is_ok());
        let bad = Trajectory {
            initial_state: 1,
            events: vec![(0.5, 3)],
            horizon: 1.0,
        };
        assert!(bad.check_invariants().is_err());
    }
}
