//! Closed-form rate functions, scaling regimes and auxiliary tail bounds.
//!
//! With space scale `phi(T) = b T^a` the normalized tail
//! `-ln P(xi(T) >= x phi(T)) / psi(T)` converges to
//!
//! | regime       | `psi(T)`                | rate                 |
//! |--------------|-------------------------|----------------------|
//! | `a < 1`      | `phi(T)`                | [`rate_i1`]          |
//! | `a = 1`      | `phi(T)`                | [`rate_jk`], `k = b` |
//! | `a > 1`      | `phi(T) ln(phi(T)/T)`   | [`rate_i2`]          |

use crate::error::{Error, Result};
use crate::logspace::{xlogx_over, LogProb};
use crate::process::ModelParams;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Extended real in `[0, +inf]` with an explicit infinity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn value(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ExtReal::Finite(v)),
            Repr::Str(s) if s == "inf" => Ok(ExtReal::PosInf),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    Sublinear,
    Linear { k: f64 },
    Superlinear,
}

/// Power-law space scale `phi(T) = b T^a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ScalingSpec {
    b: f64,
    a: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    b: f64,
    a: f64,
}

impl TryFrom<RawSpec> for ScalingSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        ScalingSpec::new(r.b, r.a)
    }
}

impl From<ScalingSpec> for RawSpec {
    fn from(s: ScalingSpec) -> Self {
        RawSpec { b: s.b, a: s.a }
    }
}

impl ScalingSpec {
    pub fn new(b: f64, a: f64) -> Result<Self> {
        for (field, v) in [("b", b), ("a", a)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { field, value: v });
            }
            if v <= 0.0 {
                return Err(Error::NonPositive { field, value: v });
            }
        }
        Ok(ScalingSpec { b, a })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn regime(&self) -> Regime {
        if self.a < 1.0 {
            Regime::Sublinear
        } else if self.a == 1.0 {
            Regime::Linear { k: self.b }
        } else {
            Regime::Superlinear
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        if self.a == 1.0 {
            self.b * t
        } else {
            self.b * t.powf(self.a)
        }
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        normalizer_psi(self, t)
    }
}

/// `psi(T)`: `phi(T)` for sub- and linear scales, `phi(T) ln(phi(T)/T)` above.
pub fn normalizer_psi(spec: &ScalingSpec, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositive {
            field: "T",
            value: t,
        });
    }
    let phi = spec.phi(t);
    match spec.regime() {
        Regime::Sublinear | Regime::Linear { .. } => Ok(phi),
        Regime::Superlinear => {
            if phi <= t {
                return Err(Error::PreAsymptotic { t, phi });
            }
            Ok(phi * (phi / t).ln())
        }
    }
}

fn growth_slope(params: &ModelParams) -> f64 {
    ((params.lambda() + params.mu()) / params.lambda()).ln()
}

/// Moderate-deviation rate: `x ln((lambda + mu) / lambda)` on `x >= 0`.
pub fn rate_i1(x: f64, params: &ModelParams) -> ExtReal {
    if x < 0.0 {
        return ExtReal::PosInf;
    }
    ExtReal::Finite(x * growth_slope(params))
}

/// Large-deviation rate at linear scale `phi(T) ~ k T`.
pub fn rate_jk(x: f64, params: &ModelParams, k: f64) -> ExtReal {
    if x < 0.0 {
        return ExtReal::PosInf;
    }
    let kink = params.alpha() / k;
    if x < kink {
        return ExtReal::Finite(x * growth_slope(params));
    }
    let scale = params.alpha() * params.lambda() / (k * (params.lambda() + params.mu()));
    ExtReal::Finite(xlogx_over(x, scale) - x + kink)
}

/// Superlarge-deviation rate: `x` on `x >= 0`.
pub fn rate_i2(x: f64) -> ExtReal {
    if x < 0.0 {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(x)
    }
}

/// Rate of the up-clock count over a window of length `c phi(T)`, scaled by
/// `phi(T)`: `x ln(x / m) - x + m` with `m = alpha lambda c / (lambda + mu)`.
pub fn rate_poisson_window(x: f64, params: &ModelParams, c: f64) -> ExtReal {
    if x < 0.0 {
        return ExtReal::PosInf;
    }
    let m = params.rate_up() * c;
    ExtReal::Finite(xlogx_over(x, m) - x + m)
}

/// The rate function that applies to a scaling regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rate", rename_all = "snake_case")]
pub enum RegimeRateFunction {
    I1 { params: ModelParams },
    Jk { params: ModelParams, k: f64 },
    I2,
}

impl RegimeRateFunction {
    pub fn for_spec(spec: &ScalingSpec, params: &ModelParams) -> Self {
        match spec.regime() {
            Regime::Sublinear => RegimeRateFunction::I1 { params: *params },
            Regime::Linear { k } => RegimeRateFunction::Jk { params: *params, k },
            Regime::Superlinear => RegimeRateFunction::I2,
        }
    }

    pub fn eval(&self, x: f64) -> ExtReal {
        match self {
            RegimeRateFunction::I1 { params } => rate_i1(x, params),
            RegimeRateFunction::Jk { params, k } => rate_jk(x, params, *k),
            RegimeRateFunction::I2 => rate_i2(x),
        }
    }
}

/// Log of the Chernoff bound `P(N <= z) <= exp(-beta (1 - u) - z ln u)` for
/// `N ~ Poisson(beta)` and `u in [0, 1)`. At `u = 0` the bound is `+inf`.
pub fn poisson_lower_tail_bound(beta: f64, z: f64, u: f64) -> Result<LogProb> {
    if !(beta > 0.0) {
        return Err(Error::NonPositive {
            field: "beta",
            value: beta,
        });
    }
    if !(z > 0.0) {
        return Err(Error::NonPositive {
            field: "z",
            value: z,
        });
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::InvalidArgument(format!(
            "u must lie in [0, 1) (got {u})"
        )));
    }
    if u == 0.0 {
        return Ok(LogProb(f64::INFINITY));
    }
    Ok(LogProb(-beta * (1.0 - u) - z * u.ln()))
}

/// Log of the bound
/// `P(sum_{k <= floor(v phi)} U_k <= 2 a phi) <= floor(delta phi)^{-floor(v phi)} e^{2 a phi}`
/// for i.i.d. `U_k` uniform on `1..=floor(delta phi)`.
pub fn catastrophe_sum_bound(a: f64, v: f64, delta: f64, phi_t: f64) -> Result<LogProb> {
    let draws = (v * phi_t).floor();
    let size = (delta * phi_t).floor();
    if !(draws >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "floor(v * phiT) must be >= 1 (got {draws})"
        )));
    }
    if !(size >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "floor(delta * phiT) must be >= 1 (got {size})"
        )));
    }
    Ok(LogProb(-draws * size.ln() + 2.0 * a * phi_t))
}

/// Chernoff upper bound on `ln P(N >= k)` for `N ~ Poisson(mean)`:
/// `-(k ln(k / mean) - k + mean)` when `k > mean`, otherwise 0.
pub fn poisson_chernoff_upper(mean: f64, k: f64) -> LogProb {
    if k <= mean {
        return LogProb::ONE;
    }
    LogProb(-(xlogx_over(k, mean) - k + mean))
}
