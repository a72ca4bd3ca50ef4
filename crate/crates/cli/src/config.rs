//! Resolved run configurations. Each is built from an optional JSON file and
//! then overridden by any flag given on the command line; the resolved value
//! is echoed in JSON output and can be fed back through `--config`.

use catastrophe_core::ModelParams;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Copies every `Some` flag over the matching config field.
macro_rules! overlay {
    ($cfg:expr, $args:expr; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v.into(); })*
    };
}
pub(crate) use overlay;

pub fn params(lambda: f64, mu: f64, alpha: f64) -> Result<ModelParams, CliError> {
    ModelParams::new(lambda, mu, alpha).map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Embedded,
    Decomposed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub init: u64,
    pub sampler: SamplerKind,
    /// One replica writes the path; more write a terminal-state histogram.
    pub replicas: usize,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            lambda: 1.0,
            mu: 1.0,
            alpha: 1.0,
            horizon: 10.0,
            init: 0,
            sampler: SamplerKind::Embedded,
            replicas: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub t: f64,
    pub init: usize,
    pub n_states: Option<usize>,
    pub tol: f64,
    /// When set, report `P(xi(t) >= threshold)` instead of the full law.
    pub threshold: Option<usize>,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            lambda: 1.0,
            mu: 1.0,
            alpha: 1.0,
            t: 1.0,
            init: 0,
            n_states: None,
            tol: 1e-12,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum RateKind {
    I1,
    Jk,
    I2,
    #[value(name = "window")]
    #[serde(rename = "window")]
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub which: RateKind,
    pub k: f64,
    pub c: f64,
    /// `start:stop:step`, both ends included.
    pub x_grid: String,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            lambda: 1.0,
            mu: 1.0,
            alpha: 1.0,
            which: RateKind::Jk,
            k: 1.0,
            c: 1.0,
            x_grid: "0:3:0.5".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    PoissonLower,
    CatastropheSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub which: BoundKind,
    pub beta: f64,
    pub z: f64,
    pub u: f64,
    pub a: f64,
    pub v: f64,
    pub delta: f64,
    pub phi: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            which: BoundKind::PoissonLower,
            beta: 1.0,
            z: 0.5,
            u: 0.5,
            a: 0.1,
            v: 1.0,
            delta: 1.0,
            phi: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub x0: u64,
    pub y0: u64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl Default for CoupleConfig {
    fn default() -> Self {
        CoupleConfig {
            lambda: 1.0,
            mu: 1.0,
            alpha: 1.0,
            x0: 0,
            y0: 5,
            horizon: 10.0,
            replicas: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Curve,
    Sandwich,
    Is,
    Lln,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub mode: VerifyMode,
    /// Scale `phi(T) = b T^a`.
    pub b: f64,
    pub a: f64,
    pub x: f64,
    pub t_grid: Vec<f64>,
    pub tol: f64,
    pub n: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            lambda: 1.0,
            mu: 1.0,
            alpha: 1.0,
            mode: VerifyMode::Curve,
            b: 1.0,
            a: 1.0,
            x: 1.5,
            t_grid: vec![25.0, 50.0, 100.0, 200.0, 400.0],
            tol: 1e-12,
            n: 10_000,
            eps: 1.0,
            seed: 0,
        }
    }
}

/// Parses `start:stop:step` into its points, endpoints included.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Config(format!(
            "grid must look like start:stop:step (got {spec:?})"
        ))
    };
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_both_ends() {
        assert_eq!(parse_grid("0:3:0.5").unwrap().len(), 7);
        assert_eq!(parse_grid("1:1:1").unwrap(), vec![1.0]);
        assert!(parse_grid("0:3").is_err());
        assert!(parse_grid("3:0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ExactConfig>(r#"{"t": 1.0, "bogus": 2}"#).is_err());
        let c: ExactConfig = serde_json::from_str(r#"{"t": 2.0, "lambda": 3.0}"#).unwrap();
        assert_eq!(c.t, 2.0);
        assert_eq!(c.lambda, 3.0);
        assert_eq!(c.mu, 1.0);
    }
}
