use std::fmt;

use clap::ValueEnum;
use harq_core::ScenarioConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Method {
    /// Every block at full power; no optimization.
    MaxPower,
    /// GP with the unbounded-power bound.
    GpClassic,
    /// GP with the power-capped bound.
    GpNew,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MaxPower => "max_power",
            Method::GpClassic => "gp_classic",
            Method::GpNew => "gp_new",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParameter {
    Snr,
    LatencyTarget,
    MessageBits,
    MaxPower,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Snr => "snr",
            SweepParameter::LatencyTarget => "latency_target",
            SweepParameter::MessageBits => "message_bits",
            SweepParameter::MaxPower => "max_power",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("sweep values must be strictly increasing or strictly decreasing")]
    NotMonotone,
    #[error("sweep value {0} is not finite")]
    NotFinite(f64),
    #[error("sweep needs at least one method")]
    NoMethods,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    parameter: SweepParameter,
    values: Vec<f64>,
    methods: Vec<Method>,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, values: Vec<f64>, methods: Vec<Method>) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::NoValues);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(SweepError::NotFinite(*v));
        }
        let up = values.windows(2).all(|w| w[1] > w[0]);
        let down = values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(SweepError::NotMonotone);
        }
        if methods.is_empty() {
            return Err(SweepError::NoMethods);
        }
        Ok(SweepSpec { parameter, values, methods })
    }

    pub fn parameter(&self) -> SweepParameter {
        self.parameter
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    /// `cfg` with the swept parameter set to `x` (unvalidated).
    pub fn apply(&self, cfg: &ScenarioConfig, x: f64) -> ScenarioConfig {
        match self.parameter {
            SweepParameter::Snr => cfg.with_snr(x),
            SweepParameter::LatencyTarget => ScenarioConfig { latency_target: x, ..cfg.clone() },
            SweepParameter::MessageBits => ScenarioConfig { message_bits: x, ..cfg.clone() },
            SweepParameter::MaxPower => ScenarioConfig { max_power: x, ..cfg.clone() },
        }
    }
}

/// Parses `a,b,c` or an inclusive range `start:stop:step`.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, h] = parts.as_slice() else {
            return Err(format!("range `{s}` must look like start:stop:step"));
        };
        let (a, b, h) = (parse_f64(a)?, parse_f64(b)?, parse_f64(h)?);
        if !(h > 0.0) {
            return Err(format!("range step {h} must be positive"));
        }
        let count = ((b - a) / h + 1e-9).floor();
        if !(count >= 0.0) {
            return Err(format!("range `{s}` is empty"));
        }
        return Ok((0..=count as usize).map(|k| a + k as f64 * h).collect());
    }
    s.split(',').map(parse_f64).collect()
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
}
