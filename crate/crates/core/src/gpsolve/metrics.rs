use serde::Serialize;

use super::GpError;
use crate::outage::{aggregate_bound, exact_outage_profile, BoundSet};
use crate::scenario::{PowerSchedule, ScenarioConfig};

/// Where the outage profile Q_1..Q_N comes from.
#[derive(Debug, Clone, Copy)]
pub enum MetricSource<'a> {
    /// The bound surrogate, summed over links.
    Bound(&'a [BoundSet]),
    /// Convolution-exact outage (union over links).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Q_1..Q_N
    pub profile: Vec<f64>,
    /// Q_N
    pub outage: f64,
    /// p_1L_1 + Σ_{n≥2} p_n L_n Q_{n−1}
    pub energy: f64,
    /// L_1 + Σ_{n<N} (L_{n+1} + π̄) Q_n
    pub latency: f64,
}

pub fn metrics_from_profile(cfg: &ScenarioConfig, schedule: &PowerSchedule, profile: &[f64]) -> Metrics {
    let l = &cfg.block_lengths;
    let p = schedule.powers();
    let n = cfg.n_blocks;
    let energy = p[0] * l[0] + (1..n).map(|i| p[i] * l[i] * profile[i - 1]).sum::<f64>();
    let latency = l[0] + (1..n).map(|i| (l[i] + cfg.feedback_delay_mean) * profile[i - 1]).sum::<f64>();
    Metrics { profile: profile.to_vec(), outage: profile[n - 1], energy, latency }
}

/// Expected outage, energy and latency of `schedule`.
pub fn predicted_metrics(cfg: &ScenarioConfig, source: MetricSource<'_>, schedule: &PowerSchedule) -> Result<Metrics, GpError> {
    let profile = match source {
        MetricSource::Exact => exact_outage_profile(cfg, schedule)?,
        MetricSource::Bound(terms) => {
            (1..=cfg.n_blocks).map(|n| aggregate_bound(terms, schedule, n)).collect::<Result<Vec<_>, _>>()?
        }
    };
    Ok(metrics_from_profile(cfg, schedule, &profile))
}
