//! Monte Carlo HARQ: draws fading block by block, accumulates decodable
//! bits, and stops at the first block where every receiver can decode.
//! Independent of the convolution engine, so it can be used to check it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fading::PowerSampler;
use crate::gpsolve::{predicted_metrics, GpError, MetricSource, Metrics};
use crate::outage::{aggregate_bound, bound_terms, BoundFlavor};
use crate::scenario::{HarqType, PowerSchedule, ScenarioConfig, ScenarioError};

/// Trials per RNG stream. Results depend on it, not on the thread count.
pub const DEFAULT_BATCH: usize = 8192;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("need at least one trial")]
    NoTrials,
    #[error(transparent)]
    Schedule(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] GpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackDelay {
    /// Every continued round waits exactly π̄.
    #[default]
    Deterministic,
    /// Exponential with mean π̄.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    pub batch: usize,
    pub feedback: FeedbackDelay,
}

impl SimOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimOptions { trials, seed, batch: DEFAULT_BATCH, feedback: FeedbackDelay::Deterministic }
    }
}

/// Sample mean with its standard error and 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub half_width: f64,
}

impl Estimate {
    fn from_sums(n: u64, sum: f64, sum_sq: f64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        let std_error = (var / nf).sqrt();
        Estimate { mean, std_error, half_width: Z95 * std_error }
    }

    /// |mean − target| within k standard errors.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + 1e-12 * target.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub seed: u64,
    pub outages: u64,
    pub outage: Estimate,
    /// 95% upper confidence limit on the outage probability; the one-sided
    /// Clopper–Pearson bound 1 − 0.05^{1/n} when no outage was seen.
    pub outage_upper: f64,
    /// In units of E₀ = P·L₁.
    pub energy: Estimate,
    /// In the time unit of the block lengths.
    pub latency: Estimate,
    /// Fraction of trials that transmitted block n, n = 1..N.
    pub usage: Vec<f64>,
    /// Too few trials for a meaningful interval.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    outages: u64,
    energy: f64,
    energy_sq: f64,
    latency: f64,
    latency_sq: f64,
    used: Vec<u64>,
}

impl Tally {
    fn merge(&mut self, other: &Tally) {
        self.outages += other.outages;
        self.energy += other.energy;
        self.energy_sq += other.energy_sq;
        self.latency += other.latency;
        self.latency_sq += other.latency_sq;
        for (a, b) in self.used.iter_mut().zip(&other.used) {
            *a += b;
        }
    }
}

/// The outcome of one HARQ round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub blocks_used: usize,
    pub outage: bool,
    pub energy: f64,
    pub latency: f64,
}

struct Protocol<'a> {
    cfg: &'a ScenarioConfig,
    powers: &'a [f64],
    samplers: Vec<PowerSampler>,
    snrs: Vec<f64>,
    feedback: FeedbackDelay,
}

impl Protocol<'_> {
    // Every trial consumes the same draws whatever happens, so two
    // schedules run from one seed see identical fading.
    fn trial(&self, rng: &mut ChaCha8Rng, fading: &mut [f64], acc: &mut [f64]) -> TrialOutcome {
        let cfg = self.cfg;
        let n_blocks = cfg.n_blocks;
        let k = self.samplers.len();
        for n in 0..n_blocks {
            for (r, s) in self.samplers.iter().enumerate() {
                fading[n * k + r] = s.draw(rng);
            }
        }
        let mut delay_draws = Vec::new();
        if self.feedback == FeedbackDelay::Exponential {
            delay_draws = (1..n_blocks).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
        }
        acc.iter_mut().for_each(|a| *a = 0.0);

        let l = &cfg.block_lengths;
        let mut energy = 0.0;
        let mut latency = 0.0;
        for n in 0..n_blocks {
            energy += self.powers[n] * l[n];
            latency += l[n];
            if n > 0 {
                latency += match self.feedback {
                    FeedbackDelay::Deterministic => cfg.feedback_delay_mean,
                    FeedbackDelay::Exponential => cfg.feedback_delay_mean * delay_draws[n - 1],
                };
            }
            let mut all = true;
            for r in 0..k {
                let lam = fading[n * k + r];
                let bits = match cfg.harq_type {
                    HarqType::IncrementalRedundancy => {
                        acc[r] += l[n] * (self.snrs[r] * lam * self.powers[n]).ln_1p() / std::f64::consts::LN_2;
                        acc[r]
                    }
                    HarqType::ChaseCombining => {
                        acc[r] += lam * self.powers[n];
                        l[0] * (self.snrs[r] * acc[r]).ln_1p() / std::f64::consts::LN_2
                    }
                };
                all &= bits >= cfg.message_bits;
            }
            if all {
                return TrialOutcome { blocks_used: n + 1, outage: false, energy, latency };
            }
        }
        TrialOutcome { blocks_used: n_blocks, outage: true, energy, latency }
    }

    fn batch(&self, seed: u64, stream: u64, trials: usize) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let k = self.samplers.len();
        let mut fading = vec![0.0; k * self.cfg.n_blocks];
        let mut acc = vec![0.0; k];
        let e0 = self.cfg.unit_energy();
        let mut t = Tally { used: vec![0; self.cfg.n_blocks], ..Tally::default() };
        for _ in 0..trials {
            let o = self.trial(&mut rng, &mut fading, &mut acc);
            let e = o.energy / e0;
            t.outages += o.outage as u64;
            t.energy += e;
            t.energy_sq += e * e;
            t.latency += o.latency;
            t.latency_sq += o.latency * o.latency;
            t.used[..o.blocks_used].iter_mut().for_each(|u| *u += 1);
        }
        t
    }
}

/// Runs `opts.trials` independent HARQ rounds. Batches run in parallel with
/// one ChaCha stream each and are summed in batch order, so the report is
/// bit-identical for a fixed (seed, batch) on any number of threads.
pub fn run_trials_with(cfg: &ScenarioConfig, schedule: &PowerSchedule, opts: &SimOptions) -> Result<SimulationReport, SimError> {
    if opts.trials == 0 || opts.batch == 0 {
        return Err(SimError::NoTrials);
    }
    cfg.check_schedule(schedule)?;
    let links = cfg.links();
    let proto = Protocol {
        cfg,
        powers: schedule.powers(),
        samplers: links.iter().map(|r| PowerSampler::new(&r.fading)).collect(),
        snrs: links.iter().map(|r| r.snr).collect(),
        feedback: opts.feedback,
    };
    let batch = opts.batch as u64;
    let batches = opts.trials.div_ceil(batch);
    let tallies: Vec<Tally> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = batch.min(opts.trials - b * batch) as usize;
            proto.batch(opts.seed, b, size)
        })
        .collect();
    let mut total = Tally { used: vec![0; cfg.n_blocks], ..Tally::default() };
    for t in &tallies {
        total.merge(t);
    }

    let n = opts.trials;
    let nf = n as f64;
    let outage = Estimate::from_sums(n, total.outages as f64, total.outages as f64);
    let outage_upper = if total.outages == 0 { 1.0 - 0.05f64.powf(1.0 / nf) } else { (outage.mean + outage.half_width).min(1.0) };
    Ok(SimulationReport {
        trials: n,
        seed: opts.seed,
        outages: total.outages,
        outage,
        outage_upper,
        energy: Estimate::from_sums(n, total.energy, total.energy_sq),
        latency: Estimate::from_sums(n, total.latency, total.latency_sq),
        usage: total.used.iter().map(|&u| u as f64 / nf).collect(),
        degenerate: n < 2,
    })
}

/// [`run_trials_with`] using the default batch size and deterministic
/// feedback delay.
pub fn run_trials(cfg: &ScenarioConfig, schedule: &PowerSchedule, trials: u64, seed: u64) -> Result<SimulationReport, SimError> {
    run_trials_with(cfg, schedule, &SimOptions::new(trials, seed))
}

/// Simulation next to every model prediction for the same schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRecord {
    pub empirical: SimulationReport,
    pub exact: Metrics,
    /// Q̂_N under the new bound, summed over receivers.
    pub new_bound: f64,
    /// Q̂_N under the classic bound; absent when it does not apply.
    pub classic_bound: Option<f64>,
    /// Surrogate (E, D) from the new bound.
    pub surrogate: Metrics,
    /// Empirical outage, energy and latency within 3σ of the exact model.
    pub outage_consistent: bool,
    pub energy_consistent: bool,
    pub latency_consistent: bool,
    /// Empirical outage does not exceed the new bound beyond 3σ.
    pub below_bound: bool,
}

pub fn validate_schedule(cfg: &ScenarioConfig, schedule: &PowerSchedule, trials: u64, seed: u64) -> Result<ValidationRecord, SimError> {
    let empirical = run_trials(cfg, schedule, trials, seed)?;
    let exact = predicted_metrics(cfg, MetricSource::Exact, schedule)?;
    let new_terms = bound_terms(cfg, BoundFlavor::New).map_err(GpError::from)?;
    let surrogate = predicted_metrics(cfg, MetricSource::Bound(&new_terms), schedule)?;
    let n = cfg.n_blocks;
    let new_bound = aggregate_bound(&new_terms, schedule, n).map_err(GpError::from)?;
    let classic_bound = bound_terms(cfg, BoundFlavor::Classic).ok().and_then(|t| aggregate_bound(&t, schedule, n).ok());
    let e0 = cfg.unit_energy();
    // with no outage observed the normal interval collapses; use the exact
    // binomial upper limit instead
    let outage_consistent = if empirical.outages == 0 {
        exact.outage <= 3.0 * empirical.outage_upper
    } else {
        empirical.outage.agrees_with(exact.outage, 3.0)
    };
    Ok(ValidationRecord {
        outage_consistent,
        energy_consistent: empirical.energy.agrees_with(exact.energy / e0, 3.0),
        latency_consistent: empirical.latency.agrees_with(exact.latency, 3.0),
        below_bound: empirical.outage.mean <= new_bound + 3.0 * empirical.outage.std_error,
        empirical,
        exact,
        new_bound,
        classic_bound,
        surrogate,
    })
}
