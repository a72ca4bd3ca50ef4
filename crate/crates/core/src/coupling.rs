//! Shared-clock coupling of two copies of the process.
//!
//! Both copies see the same up-clock and catastrophe clock. When both are
//! positive at a catastrophe, a single uniform draw on `1..=x*y` is split
//! into the two catastrophe sizes so that the larger copy never loses less
//! than the smaller one, and never more than the gap plus the smaller loss.
//! The path-wise gap therefore never exceeds the initial gap.

use crate::error::{Error, Result};
use crate::process::{apply_catastrophe, sample_catastrophe, ModelParams};
use crate::rng::replica_rng;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    pub x0: u64,
    pub y0: u64,
    /// `(time, state_x, state_y)` after each shared event.
    pub events: Vec<(f64, u64, u64)>,
    pub horizon: f64,
}

impl CoupledTrajectory {
    pub fn final_states(&self) -> (u64, u64) {
        self.events
            .last()
            .map_or((self.x0, self.y0), |&(_, x, y)| (x, y))
    }

    pub fn marginal_x(&self) -> crate::process::Trajectory {
        crate::process::Trajectory {
            initial_state: self.x0,
            events: self.events.iter().map(|&(t, x, _)| (t, x)).collect(),
            horizon: self.horizon,
        }
    }

    pub fn marginal_y(&self) -> crate::process::Trajectory {
        crate::process::Trajectory {
            initial_state: self.y0,
            events: self.events.iter().map(|&(t, _, y)| (t, y)).collect(),
            horizon: self.horizon,
        }
    }
}

/// Splits a draw `z` in `1..=x*y` into the catastrophe sizes of the two copies.
pub fn split_catastrophe(z: u64, x: u64, y: u64) -> (u64, u64) {
    ((z - 1) / y + 1, (z - 1) / x + 1)
}

/// Jointly draws catastrophe sizes for copies at states `x, y >= 1`.
///
/// Each marginal is uniform on its own range. Copies at state 0 reflect and
/// must be handled by the caller.
pub fn coupled_catastrophe<R: Rng + ?Sized>(x: u64, y: u64, rng: &mut R) -> Result<(u64, u64)> {
    if x == 0 || y == 0 {
        return Err(Error::InvalidArgument(format!(
            "coupled catastrophe needs both states positive (got {x}, {y})"
        )));
    }
    let range = x.checked_mul(y).ok_or(Error::ProductOverflow { x, y })?;
    let z = rng.random_range(1..=range);
    Ok(split_catastrophe(z, x, y))
}

/// One coupled catastrophe event applied to the pre-jump pair.
fn coupled_transition<R: Rng + ?Sized>(sx: u64, sy: u64, rng: &mut R) -> Result<(u64, u64)> {
    Ok(match (sx, sy) {
        (0, 0) => (1, 1),
        (0, _) => (1, apply_catastrophe(sy, sample_catastrophe(sy, rng))),
        (_, 0) => (apply_catastrophe(sx, sample_catastrophe(sx, rng)), 1),
        _ => {
            let (dx, dy) = coupled_catastrophe(sx, sy, rng)?;
            (sx - dx, sy - dy)
        }
    })
}

/// Streams a coupled run through `f(acc, time, state_x, state_y)`.
pub fn fold_coupled<A, R, F>(
    params: &ModelParams,
    x0: u64,
    y0: u64,
    horizon: f64,
    rng: &mut R,
    mut acc: A,
    mut f: F,
) -> Result<A>
where
    R: Rng + ?Sized,
    F: FnMut(A, f64, u64, u64) -> A,
{
    let up = Exp::new(params.rate_up()).expect("positive rate");
    let cat = Exp::new(params.rate_catastrophe()).expect("positive rate");
    let mut next_up = up.sample(rng);
    let mut next_cat = cat.sample(rng);
    let (mut sx, mut sy) = (x0, y0);
    loop {
        let t = next_up.min(next_cat);
        if t > horizon {
            return Ok(acc);
        }
        if next_up <= next_cat {
            sx += 1;
            sy += 1;
            next_up += up.sample(rng);
        } else {
            (sx, sy) = coupled_transition(sx, sy, rng)?;
            next_cat += cat.sample(rng);
        }
        acc = f(acc, t, sx, sy);
    }
}

pub fn simulate_coupled_with<R: Rng + ?Sized>(
    params: &ModelParams,
    x0: u64,
    y0: u64,
    horizon: f64,
    rng: &mut R,
) -> Result<CoupledTrajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonPositive {
            field: "horizon",
            value: horizon,
        });
    }
    let events = fold_coupled(
        params,
        x0,
        y0,
        horizon,
        rng,
        Vec::new(),
        |mut v, t, x, y| {
            v.push((t, x, y));
            v
        },
    )?;
    Ok(CoupledTrajectory {
        x0,
        y0,
        events,
        horizon,
    })
}

/// Coupled pair started at `(x0, y0)` on stream 0 of `seed`.
pub fn simulate_coupled(
    params: &ModelParams,
    x0: u64,
    y0: u64,
    horizon: f64,
    seed: u64,
) -> Result<CoupledTrajectory> {
    simulate_coupled_with(params, x0, y0, horizon, &mut replica_rng(seed, 0))
}

/// Largest `|state_x - state_y|` along the path, including the start.
pub fn max_discrepancy(ct: &CoupledTrajectory) -> u64 {
    ct.events
        .iter()
        .map(|&(_, x, y)| x.abs_diff(y))
        .fold(ct.x0.abs_diff(ct.y0), u64::max)
}
