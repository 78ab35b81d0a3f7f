//! Problem instances and their JSON representation.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fading::{BlockChannel, FadingError, FadingModel};

pub const DEFAULT_GRID_POINTS: usize = 4096;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {field}: {reason}")]
    Validation { field: &'static str, reason: String },
}

impl ScenarioError {
    fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ScenarioError::Validation { field, reason: reason.into() }
    }

    /// Name of the violated field, for validation errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ScenarioError::Validation { field, .. } => Some(field),
            ScenarioError::Parse(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarqType {
    IncrementalRedundancy,
    ChaseCombining,
}

/// One receiver of a broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Receiver {
    pub snr: f64,
    pub fading: FadingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_blocks: usize,
    pub block_lengths: Vec<f64>,
    /// Pathloss-to-noise ratio S, linear.
    pub snr: f64,
    pub max_power: f64,
    pub message_bits: f64,
    pub outage_target: f64,
    pub latency_target: f64,
    #[serde(default)]
    pub feedback_delay_mean: f64,
    pub harq_type: HarqType,
    pub fading: FadingModel,
    /// Broadcast receivers; empty for a point-to-point link.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub receivers: Vec<Receiver>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

/// Per-block transmit powers p₁..p_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerSchedule {
    powers: Vec<f64>,
}

impl PowerSchedule {
    /// Strictly positive, finite powers. The cap is checked separately by
    /// [`ScenarioConfig::check_schedule`] since unconstrained solves exceed it.
    pub fn new(powers: Vec<f64>) -> Result<Self, ScenarioError> {
        if powers.is_empty() {
            return Err(ScenarioError::invalid("powers", "schedule is empty"));
        }
        if let Some(p) = powers.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(ScenarioError::invalid("powers", format!("power {p} is not positive and finite")));
        }
        Ok(PowerSchedule { powers })
    }

    pub fn uniform(n: usize, power: f64) -> Result<Self, ScenarioError> {
        PowerSchedule::new(vec![power; n])
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// All powers equal within `tol`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let p0 = self.powers[0];
        self.powers.iter().all(|p| (p - p0).abs() <= tol)
    }
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

/// Parses and validates a JSON scenario.
pub fn load_scenario<R: Read>(source: R) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_reader(source)?;
    cfg.validate()?;
    Ok(cfg)
}

/// The reference setting: N = 5 unit blocks, t = 4 bits, ε = 1e-5, δ = 3,
/// no feedback delay, P = 1, Rayleigh fading with incremental redundancy.
pub fn paper_default_scenario(snr: f64) -> Result<ScenarioConfig, ScenarioError> {
    let cfg = ScenarioConfig {
        n_blocks: 5,
        block_lengths: vec![1.0; 5],
        snr,
        max_power: 1.0,
        message_bits: 4.0,
        outage_target: 1e-5,
        latency_target: 3.0,
        feedback_delay_mean: 0.0,
        harq_type: HarqType::IncrementalRedundancy,
        fading: FadingModel::Rayleigh,
        receivers: Vec::new(),
        grid_points: DEFAULT_GRID_POINTS,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn positive(field: &'static str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn fading_ok(field: &'static str, f: &FadingModel) -> Result<(), ScenarioError> {
    f.validate().map_err(|e: FadingError| ScenarioError::invalid(field, e.to_string()))
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ScenarioError> {
        load_scenario(s.as_bytes())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_blocks == 0 {
            return Err(ScenarioError::invalid("n_blocks", "at least one block is required"));
        }
        if self.block_lengths.len() != self.n_blocks {
            return Err(ScenarioError::invalid(
                "block_lengths",
                format!("expected {} entries, got {}", self.n_blocks, self.block_lengths.len()),
            ));
        }
        for &l in &self.block_lengths {
            positive("block_lengths", l)?;
        }
        if self.harq_type == HarqType::ChaseCombining
            && self.block_lengths.iter().any(|&l| l != self.block_lengths[0])
        {
            return Err(ScenarioError::invalid(
                "block_lengths",
                "chase combining repeats the first block, so all lengths must be equal",
            ));
        }
        positive("snr", self.snr)?;
        positive("max_power", self.max_power)?;
        positive("message_bits", self.message_bits)?;
        if !(self.outage_target > 0.0 && self.outage_target < 1.0) {
            return Err(ScenarioError::invalid(
                "outage_target",
                format!("must lie in (0, 1), got {}", self.outage_target),
            ));
        }
        positive("latency_target", self.latency_target)?;
        if self.latency_target < self.block_lengths[0] {
            return Err(ScenarioError::invalid(
                "latency_target",
                format!("{} is shorter than the first block", self.latency_target),
            ));
        }
        if !(self.feedback_delay_mean >= 0.0 && self.feedback_delay_mean.is_finite()) {
            return Err(ScenarioError::invalid("feedback_delay_mean", "must be finite and nonnegative"));
        }
        fading_ok("fading", &self.fading)?;
        if self.receivers.len() == 1 {
            return Err(ScenarioError::invalid("receivers", "a broadcast needs at least two receivers"));
        }
        for r in &self.receivers {
            positive("receivers", r.snr)?;
            fading_ok("receivers", &r.fading)?;
        }
        if self.grid_points < 2 {
            return Err(ScenarioError::invalid("grid_points", "at least two grid intervals are required"));
        }
        Ok(())
    }

    pub fn is_broadcast(&self) -> bool {
        !self.receivers.is_empty()
    }

    /// The links whose outages matter: the receivers for a broadcast, the
    /// single (snr, fading) link otherwise.
    pub fn links(&self) -> Vec<Receiver> {
        if self.receivers.is_empty() {
            vec![Receiver { snr: self.snr, fading: self.fading }]
        } else {
            self.receivers.clone()
        }
    }

    /// Per-block channel statistics of one link.
    pub fn channels(&self, link: &Receiver) -> Vec<BlockChannel> {
        self.block_lengths.iter().map(|&l| BlockChannel::new(&link.fading, l, link.snr)).collect()
    }

    pub fn has_equal_blocks(&self) -> bool {
        self.block_lengths.iter().all(|&l| l == self.block_lengths[0])
    }

    /// Copy with S replaced on the link and on every receiver.
    pub fn with_snr(&self, snr: f64) -> Self {
        let mut cfg = self.clone();
        cfg.snr = snr;
        for r in &mut cfg.receivers {
            r.snr = snr;
        }
        cfg
    }

    /// Checks length N and 0 < p_n ≤ P.
    pub fn check_schedule(&self, schedule: &PowerSchedule) -> Result<(), ScenarioError> {
        if schedule.len() != self.n_blocks {
            return Err(ScenarioError::invalid(
                "powers",
                format!("expected {} powers, got {}", self.n_blocks, schedule.len()),
            ));
        }
        if let Some(p) = schedule.powers().iter().find(|&&p| p > self.max_power) {
            return Err(ScenarioError::invalid(
                "powers",
                format!("power {p} exceeds max_power {}", self.max_power),
            ));
        }
        Ok(())
    }

    /// Energy of one full-power first block, E₀ = P·L₁.
    pub fn unit_energy(&self) -> f64 {
        self.max_power * self.block_lengths[0]
    }
}
