//! Exact outage probabilities.

use super::{chain_values, ChainStage, OutageError};
use crate::fading::special::reg_lower_gamma;
use crate::fading::GammaLaw;
use crate::scenario::{HarqType, PowerSchedule, Receiver, ScenarioConfig};

/// Relative power gap below which chase-combining powers count as equal.
const EQUAL_POWER_TOL: f64 = 1e-9;
/// Largest tolerated cancellation factor in the hypoexponential sum.
const MAX_HYPOEXP_CONDITION: f64 = 1e6;

/// Q_n for one block index (1-based).
pub fn exact_outage(cfg: &ScenarioConfig, schedule: &PowerSchedule, n: usize) -> Result<f64, OutageError> {
    if n == 0 || n > cfg.n_blocks {
        return Err(OutageError::IndexOutOfRange { index: n, max: cfg.n_blocks });
    }
    let prefix = PowerSchedule::new(schedule.powers()[..n.min(schedule.len())].to_vec())
        .map_err(|_| OutageError::ScheduleLength { expected: n, got: schedule.len() })?;
    if prefix.len() < n {
        return Err(OutageError::ScheduleLength { expected: n, got: schedule.len() });
    }
    Ok(*exact_outage_profile(cfg, &prefix)?.last().expect("n ≥ 1"))
}

/// Q_1..Q_m where m is the schedule length (at most N). For a broadcast
/// this is the probability that at least one receiver is still in outage.
pub fn exact_outage_profile(cfg: &ScenarioConfig, schedule: &PowerSchedule) -> Result<Vec<f64>, OutageError> {
    let per_link = cfg
        .links()
        .iter()
        .map(|link| link_exact_outage_profile(cfg, link, schedule))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(union_outage(&per_link))
}

/// 1 − ∏_k (1 − Q_kn) for independent receivers.
pub fn union_outage(per_link: &[Vec<f64>]) -> Vec<f64> {
    if per_link.len() == 1 {
        return per_link[0].clone();
    }
    let m = per_link[0].len();
    (0..m)
        .map(|n| {
            let log_success: f64 = per_link.iter().map(|q| (-q[n].min(1.0)).ln_1p()).sum();
            -log_success.exp_m1()
        })
        .collect()
}

/// Exact outage profile of a single link.
pub fn link_exact_outage_profile(
    cfg: &ScenarioConfig,
    link: &Receiver,
    schedule: &PowerSchedule,
) -> Result<Vec<f64>, OutageError> {
    let m = schedule.len();
    if m == 0 || m > cfg.n_blocks {
        return Err(OutageError::ScheduleLength { expected: cfg.n_blocks, got: m });
    }
    match cfg.harq_type {
        HarqType::IncrementalRedundancy => Ok(incremental_profile(cfg, link, schedule)),
        HarqType::ChaseCombining => Ok(chase_profile(cfg, link, schedule)),
    }
}

fn incremental_profile(cfg: &ScenarioConfig, link: &Receiver, schedule: &PowerSchedule) -> Vec<f64> {
    let channels = cfg.channels(link);
    let p = schedule.powers();
    let shape = link.fading.law().shape;
    let first = |x: f64| channels[0].cdf(p[0], x);
    let stages: Vec<ChainStage> = (1..p.len())
        .map(|i| {
            let (ch, pi) = (channels[i], p[i]);
            ChainStage {
                pdf: Box::new(move |x| ch.pdf(pi, x)),
                cdf: Box::new(move |x| ch.cdf(pi, x)),
                shape,
            }
        })
        .collect();
    chain_values(cfg.message_bits, cfg.grid_points, &first, &stages)
}

/// Chase combining decodes once S Σ λ_i p_i reaches 2^{t/L} − 1.
fn chase_profile(cfg: &ScenarioConfig, link: &Receiver, schedule: &PowerSchedule) -> Vec<f64> {
    let law = link.fading.law();
    let threshold = (cfg.message_bits * std::f64::consts::LN_2 / cfg.block_lengths[0]).exp_m1() / link.snr;
    let p = schedule.powers();
    let tol = EQUAL_POWER_TOL * cfg.max_power;
    (1..=p.len())
        .map(|n| {
            let prefix = &p[..n];
            if prefix.iter().all(|&q| (q - prefix[0]).abs() <= tol) {
                // Σλ_i ~ Gamma(n·a, θ)
                return reg_lower_gamma(n as f64 * law.shape, law.rate * threshold / prefix[0]);
            }
            if law.shape == 1.0 {
                if let Some(q) = hypoexponential_cdf(prefix, law.rate, threshold, tol) {
                    return q;
                }
            }
            energy_convolution(law, prefix, threshold, cfg.grid_points)
        })
        .collect()
}

/// Pr[Σ p_i X_i < b] for X_i ~ Exp(rate), distinct p_i. `None` when two
/// powers are too close or the alternating sum loses too many digits.
fn hypoexponential_cdf(powers: &[f64], rate: f64, b: f64, tol: f64) -> Option<f64> {
    let means: Vec<f64> = powers.iter().map(|p| p / rate).collect();
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for (i, &mi) in means.iter().enumerate() {
        let mut c = 1.0;
        for (j, &mj) in means.iter().enumerate() {
            if i != j {
                if (powers[i] - powers[j]).abs() <= tol {
                    return None;
                }
                c *= mi / (mi - mj);
            }
        }
        let term = c * -(-b / mi).exp_m1();
        total += term;
        magnitude += term.abs();
    }
    if total <= 0.0 || magnitude / total > MAX_HYPOEXP_CONDITION {
        return None;
    }
    Some(total.min(1.0))
}

/// Successive convolution of the received-energy densities p_i λ_i on [0, b].
fn energy_convolution(law: GammaLaw, powers: &[f64], b: f64, intervals: usize) -> f64 {
    let p0 = powers[0];
    let first = move |y: f64| law.cdf(y / p0);
    let stages: Vec<ChainStage> = powers[1..]
        .iter()
        .map(|&pi| ChainStage {
            pdf: Box::new(move |y| law.pdf(y / pi) / pi),
            cdf: Box::new(move |y| law.cdf(y / pi)),
            shape: law.shape,
        })
        .collect();
    *chain_values(b, intervals, &first, &stages).last().expect("non-empty")
}
