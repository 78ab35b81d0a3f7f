//! Monomial outage bounds Q̂_n = A_n / ∏_{i≤n} p_i^e.
//!
//! The coefficients come from convolving power-stripped kernels: the relaxed
//! CDF and densities evaluated at p = 1, which is exactly what remains once
//! the p^{−e} factors are pulled out of the chain. The classic bound uses
//! the P → ∞ limits of the same kernels.

use serde::Serialize;

use super::{chain_values, ChainStage, OutageError};
use crate::fading::special::{ln_gamma, reg_lower_gamma};
use crate::scenario::{HarqType, PowerSchedule, Receiver, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFlavor {
    /// Power-cap-aware bound.
    New,
    /// Unbounded-power bound, the P → ∞ limit of `New`.
    Classic,
}

/// Coefficients A_1..A_N of one link's bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSet {
    coefficients: Vec<f64>,
    exponent: f64,
    flavor: BoundFlavor,
    combining: HarqType,
}

impl BoundSet {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// A_n, 1-based.
    pub fn coefficient(&self, n: usize) -> f64 {
        self.coefficients[n - 1]
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn flavor(&self) -> BoundFlavor {
        self.flavor
    }

    pub fn combining(&self) -> HarqType {
        self.combining
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Same bound with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> BoundSet {
        BoundSet { coefficients: self.coefficients.iter().map(|a| a * factor).collect(), ..self.clone() }
    }
}

/// New-bound coefficients for the scenario's own (snr, fading) link.
pub fn new_bound_coefficients(cfg: &ScenarioConfig) -> Result<BoundSet, OutageError> {
    link_bound(cfg, &Receiver { snr: cfg.snr, fading: cfg.fading }, BoundFlavor::New)
}

/// Classic-bound coefficients for the scenario's own link; requires equal
/// block lengths.
pub fn classic_bound_coefficients(cfg: &ScenarioConfig) -> Result<BoundSet, OutageError> {
    link_bound(cfg, &Receiver { snr: cfg.snr, fading: cfg.fading }, BoundFlavor::Classic)
}

/// One bound per link of the scenario (one for point-to-point).
pub fn bound_terms(cfg: &ScenarioConfig, flavor: BoundFlavor) -> Result<Vec<BoundSet>, OutageError> {
    cfg.links().iter().map(|link| link_bound(cfg, link, flavor)).collect()
}

/// Per-receiver new bounds; their sum bounds the broadcast outage.
pub fn broadcast_bound_terms(cfg: &ScenarioConfig) -> Result<Vec<BoundSet>, OutageError> {
    if cfg.receivers.is_empty() {
        return Err(OutageError::NoReceivers);
    }
    bound_terms(cfg, BoundFlavor::New)
}

fn link_bound(cfg: &ScenarioConfig, link: &Receiver, flavor: BoundFlavor) -> Result<BoundSet, OutageError> {
    if flavor == BoundFlavor::Classic && !cfg.has_equal_blocks() {
        return Err(OutageError::UnequalBlockLengths);
    }
    let law = link.fading.law();
    let coefficients = match cfg.harq_type {
        HarqType::IncrementalRedundancy => incremental_coefficients(cfg, link, flavor),
        HarqType::ChaseCombining => {
            let b = chase_threshold(cfg, link);
            (1..=cfg.n_blocks)
                .map(|n| chase_coefficient(n as f64 * law.shape, law.rate * b, cfg.max_power, flavor))
                .collect()
        }
    };
    Ok(BoundSet { coefficients, exponent: law.shape, flavor, combining: cfg.harq_type })
}

fn incremental_coefficients(cfg: &ScenarioConfig, link: &Receiver, flavor: BoundFlavor) -> Vec<f64> {
    let channels = cfg.channels(link);
    let cap = cfg.max_power;
    let shape = link.fading.law().shape;
    let ch0 = channels[0];
    let first: Box<dyn Fn(f64) -> f64> = match flavor {
        BoundFlavor::New => Box::new(move |x| ch0.relaxed_cdf(1.0, cap, x)),
        BoundFlavor::Classic => Box::new(move |x| ch0.unbounded_cdf(1.0, x)),
    };
    let stages: Vec<ChainStage> = channels[1..]
        .iter()
        .map(|&ch| match flavor {
            BoundFlavor::New => ChainStage {
                pdf: Box::new(move |x| ch.relaxed_pdf(1.0, cap, x)),
                cdf: Box::new(move |x| ch.relaxed_cdf(1.0, cap, x)),
                shape,
            },
            BoundFlavor::Classic => ChainStage {
                pdf: Box::new(move |x| ch.unbounded_pdf(1.0, x)),
                cdf: Box::new(move |x| ch.unbounded_cdf(1.0, x)),
                shape,
            },
        })
        .collect();
    chain_values(cfg.message_bits, cfg.grid_points, &*first, &stages)
}

fn chase_threshold(cfg: &ScenarioConfig, link: &Receiver) -> f64 {
    (cfg.message_bits * std::f64::consts::LN_2 / cfg.block_lengths[0]).exp_m1() / link.snr
}

// New: P^{s} P(s, θb/P). Classic: (θb)^{s} / Γ(s + 1).
fn chase_coefficient(s: f64, theta_b: f64, cap: f64, flavor: BoundFlavor) -> f64 {
    match flavor {
        BoundFlavor::New => cap.powf(s) * reg_lower_gamma(s, theta_b / cap),
        BoundFlavor::Classic => (s * theta_b.ln() - ln_gamma(s + 1.0)).exp(),
    }
}

fn check_index(len: usize, schedule: &PowerSchedule, n: usize) -> Result<(), OutageError> {
    if n == 0 || n > len {
        return Err(OutageError::IndexOutOfRange { index: n, max: len });
    }
    if schedule.len() < n {
        return Err(OutageError::ScheduleLength { expected: n, got: schedule.len() });
    }
    Ok(())
}

/// Q̂_n = A_n / ∏_{i≤n} p_i^e. Not a probability: it may exceed one.
pub fn bound_outage(bounds: &BoundSet, schedule: &PowerSchedule, n: usize) -> Result<f64, OutageError> {
    check_index(bounds.len(), schedule, n)?;
    let p = &schedule.powers()[..n];
    if bounds.combining == HarqType::ChaseCombining && p.iter().any(|&q| (q - p[0]).abs() > 1e-12 * p[0]) {
        return Err(OutageError::NonUniformSchedule);
    }
    let log_prod: f64 = p.iter().map(|q| q.ln()).sum();
    Ok((bounds.coefficient(n).ln() - bounds.exponent * log_prod).exp())
}

/// Σ_k Q̂_kn over the links of a broadcast.
pub fn aggregate_bound(terms: &[BoundSet], schedule: &PowerSchedule, n: usize) -> Result<f64, OutageError> {
    terms.iter().map(|b| bound_outage(b, schedule, n)).sum()
}

/// Closed-form chase-combining bound for a shared power p:
/// Q̂_n = (P/p)^{n a} P(n a, θ(2^{t/L} − 1)/(S P)).
pub fn cc_bound_outage(cfg: &ScenarioConfig, power: f64, n: usize) -> Result<f64, OutageError> {
    if cfg.harq_type != HarqType::ChaseCombining {
        return Err(OutageError::NotChaseCombining);
    }
    if n == 0 || n > cfg.n_blocks {
        return Err(OutageError::IndexOutOfRange { index: n, max: cfg.n_blocks });
    }
    if !(power > 0.0) {
        return Err(OutageError::InvalidPower(power));
    }
    let law = cfg.fading.law();
    let s = n as f64 * law.shape;
    let b = chase_threshold(cfg, &Receiver { snr: cfg.snr, fading: cfg.fading });
    Ok((cfg.max_power / power).powf(s) * reg_lower_gamma(s, law.rate * b / cfg.max_power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::{BlockChannel, FadingModel};
    use crate::outage::{convolve_pdf, exact_outage_profile, DensityGrid, GridKind};
    use crate::scenario::paper_default_scenario;
    use crate::testutil::{adaptive_simpson, triangle_integral};
    use std::f64::consts::LN_2;

    fn small(n: usize, t: f64) -> ScenarioConfig {
        let mut cfg = paper_default_scenario(2.0).unwrap();
        cfg.n_blocks = n;
        cfg.block_lengths = vec![1.0; n];
        cfg.message_bits = t;
        cfg.latency_target = 10.0;
        cfg
    }

    #[test]
    fn first_coefficient_closed_form() {
        let b = new_bound_coefficients(&small(1, 1.0)).unwrap();
        assert!((b.coefficient(1) - 0.393_469_3).abs() < 1e-7);
        let q = bound_outage(&b, &PowerSchedule::uniform(1, 0.5).unwrap(), 1).unwrap();
        assert!((q - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn second_coefficient_against_double_integral() {
        // A₂ = ∫∫_{x₁+x₂<1} f̂₁ f̂₂ at p = P = 1
        let fh = |x: f64| 2f64.powf(x) * LN_2 / 2.0 * (-(2f64.powf(x) - 1.0) / 2.0).exp();
        let oracle = triangle_integral(&|x2, x1| fh(x1) * fh(x2), 0.0, 1.0, &|x2| 1.0 - x2, 1e-13);
        assert!((oracle - 0.072_357_675_672_982_09).abs() < 1e-11, "oracle {oracle}");
        let a2 = new_bound_coefficients(&small(2, 1.0)).unwrap().coefficient(2);
        assert!((a2 / oracle - 1.0).abs() < 1e-7, "{a2} vs {oracle}");
    }

    #[test]
    fn classic_closed_forms() {
        let c = classic_bound_coefficients(&small(2, 1.0)).unwrap();
        assert!((c.coefficient(1) - 0.5).abs() < 1e-15);
        // (ln2/4)∫₀¹ (2^{1−τ} − 1) 2^τ dτ, checked by quadrature and closed form (2 ln2 − 1)/4
        let oracle = LN_2 / 4.0 * adaptive_simpson(&|tau| (2f64.powf(1.0 - tau) - 1.0) * 2f64.powf(tau), 0.0, 1.0, 1e-14);
        assert!((oracle - (2.0 * LN_2 - 1.0) / 4.0).abs() < 1e-13);
        assert!((c.coefficient(2) / oracle - 1.0).abs() < 1e-7);
    }

    #[test]
    fn classic_rejects_unequal_blocks() {
        let mut cfg = small(2, 1.0);
        cfg.block_lengths = vec![1.0, 2.0];
        assert_eq!(classic_bound_coefficients(&cfg), Err(OutageError::UnequalBlockLengths));
        assert!(new_bound_coefficients(&cfg).is_ok());
    }

    #[test]
    fn coefficients_match_direct_relaxed_chain() {
        // Q̂_n from the relaxed kernels with the probe powers left inside.
        let mut cfg = small(4, 3.0);
        cfg.block_lengths = vec![1.0, 0.5, 2.0, 1.0];
        cfg.latency_target = 10.0;
        for fading in [FadingModel::Rayleigh, FadingModel::Nakagami { kappa: 0.7 }, FadingModel::RayleighDiversity { antennas: 3 }] {
            cfg.fading = fading;
            let bounds = new_bound_coefficients(&cfg).unwrap();
            let probe = [0.7, 0.35, 0.9, 0.5];
            let ch = cfg.channels(&Receiver { snr: cfg.snr, fading });
            let cap = cfg.max_power;
            let shape = fading.law().shape;
            let first = |x: f64| ch[0].relaxed_cdf(probe[0], cap, x);
            let stages: Vec<ChainStage> = (1..4)
                .map(|i| {
                    let (c, p) = (ch[i], probe[i]);
                    ChainStage { pdf: Box::new(move |x| c.relaxed_pdf(p, cap, x)), cdf: Box::new(move |x| c.relaxed_cdf(p, cap, x)), shape }
                })
                .collect();
            let direct = chain_values(cfg.message_bits, cfg.grid_points, &first, &stages);
            let sched = PowerSchedule::new(probe.to_vec()).unwrap();
            for n in 1..=4 {
                let q = bound_outage(&bounds, &sched, n).unwrap();
                assert!((q / direct[n - 1] - 1.0).abs() < 1e-10, "{fading:?} n={n}");
            }
        }
    }

    // Explicit prefactor × convolution of the unit-free kernels, discretized
    // with the plain trapezoid convolution instead of the chain engine.
    fn expanded_coefficient(cfg: &ScenarioConfig, n: usize) -> f64 {
        let law = cfg.fading.law();
        let (a, theta) = (law.shape, law.rate);
        let (s, cap, l) = (cfg.snr, cfg.max_power, &cfg.block_lengths);
        let g = cfg.grid_points;
        let first = |x: f64| {
            let v = theta * (2f64.powf(x / l[0]) - 1.0) / (s * cap);
            crate::fading::lower_incomplete_gamma(a, v).unwrap()
        };
        let mut acc = DensityGrid::sample(first, cfg.message_bits, g, GridKind::Cdf).unwrap();
        for li in &l[1..n] {
            let li = *li;
            let kernel = move |x: f64| {
                let z = 2f64.powf(x / li);
                (z - 1.0).powf(a - 1.0) * z * (-theta * (z - 1.0) / (s * cap)).exp()
            };
            let k = DensityGrid::sample(kernel, cfg.message_bits, g, GridKind::Pdf).unwrap();
            acc = convolve_pdf(&acc, &k).unwrap();
        }
        let gamma_a = crate::fading::gamma_fn(a).unwrap();
        let prefactor = cap.powf(a) * (theta.powf(a) * LN_2).powi(n as i32 - 1)
            / (gamma_a.powi(n as i32) * s.powf(a * (n as f64 - 1.0)) * l[1..n].iter().product::<f64>());
        prefactor * acc.last()
    }

    #[test]
    fn coefficients_match_expanded_formula() {
        let mut cfg = small(3, 4.0);
        cfg.snr = 8.0;
        cfg.block_lengths = vec![1.0, 0.8, 1.3];
        cfg.latency_target = 10.0;
        for fading in [FadingModel::Rayleigh, FadingModel::Nakagami { kappa: 2.5 }, FadingModel::RayleighDiversity { antennas: 2 }] {
            cfg.fading = fading;
            let b = new_bound_coefficients(&cfg).unwrap();
            for n in 1..=3 {
                let e = expanded_coefficient(&cfg, n);
                assert!((b.coefficient(n) / e - 1.0).abs() < 1e-6, "{fading:?} n={n}: {} vs {e}", b.coefficient(n));
            }
        }
    }

    #[test]
    fn unit_shape_reductions_are_exact() {
        let mut cfg = small(5, 4.0);
        cfg.snr = 8.0;
        let base = new_bound_coefficients(&cfg).unwrap();
        for fading in [FadingModel::Nakagami { kappa: 1.0 }, FadingModel::RayleighDiversity { antennas: 1 }] {
            cfg.fading = fading;
            let other = new_bound_coefficients(&cfg).unwrap();
            for n in 1..=5 {
                assert!((base.coefficient(n) / other.coefficient(n) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ordering_exact_new_classic() {
        let mut cfg = small(5, 4.0);
        cfg.snr = 2.0;
        let sched = PowerSchedule::uniform(5, 0.8).unwrap();
        for fading in [FadingModel::Rayleigh, FadingModel::Nakagami { kappa: 2.0 }, FadingModel::RayleighDiversity { antennas: 3 }] {
            cfg.fading = fading;
            let exact = exact_outage_profile(&cfg, &sched).unwrap();
            let new = new_bound_coefficients(&cfg).unwrap();
            let classic = classic_bound_coefficients(&cfg).unwrap();
            for n in 1..=5 {
                let (qn, qc) = (bound_outage(&new, &sched, n).unwrap(), bound_outage(&classic, &sched, n).unwrap());
                assert!(exact[n - 1] < qn && qn < qc, "{fading:?} n={n}");
            }
        }
    }

    #[test]
    fn new_bound_grows_with_cap_towards_classic() {
        let mut cfg = small(4, 3.0);
        cfg.snr = 4.0;
        let sched = PowerSchedule::uniform(4, 0.5).unwrap();
        let classic = classic_bound_coefficients(&cfg).unwrap();
        let mut prev = vec![0.0; 4];
        for cap in [0.5, 1.0, 4.0, 100.0, 1e6] {
            cfg.max_power = cap;
            let b = new_bound_coefficients(&cfg).unwrap();
            for n in 1..=4 {
                let q = bound_outage(&b, &sched, n).unwrap();
                assert!(q >= prev[n - 1]);
                prev[n - 1] = q;
            }
        }
        for n in 1..=4 {
            let qc = bound_outage(&classic, &sched, n).unwrap();
            assert!((prev[n - 1] / qc - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn homogeneity() {
        let mut cfg = small(3, 2.0);
        cfg.fading = FadingModel::RayleighDiversity { antennas: 2 };
        let b = new_bound_coefficients(&cfg).unwrap();
        let full = bound_outage(&b, &PowerSchedule::uniform(3, 1.0).unwrap(), 3).unwrap();
        assert!((full - b.coefficient(3)).abs() < 1e-15 * full.max(1e-300) * 10.0);
        let base = PowerSchedule::new(vec![0.9, 0.6, 0.8]).unwrap();
        let scaled = PowerSchedule::new(vec![0.45, 0.3, 0.4]).unwrap();
        for n in 1..=3 {
            let r = bound_outage(&b, &scaled, n).unwrap() / bound_outage(&b, &base, n).unwrap();
            assert!((r - 2f64.powf(2.0 * n as f64)).abs() < 1e-9 * r);
        }
    }

    #[test]
    fn chase_bound_closed_form() {
        let mut cfg = small(5, 1.0);
        cfg.harq_type = HarqType::ChaseCombining;
        // n = 1 coincides with the incremental single-block bound
        let ir = new_bound_coefficients(&small(5, 1.0)).unwrap();
        let q1 = cc_bound_outage(&cfg, 0.6, 1).unwrap();
        let q1_ir = bound_outage(&ir, &PowerSchedule::uniform(5, 0.6).unwrap(), 1).unwrap();
        assert!((q1 - q1_ir).abs() < 1e-14);
        // n = 2 at p = P: γ(2, 1/2)/1!
        let q2 = cc_bound_outage(&cfg, 1.0, 2).unwrap();
        assert!((q2 - (1.0 - (-0.5f64).exp() * 1.5)).abs() < 1e-15);
        assert!((q2 - 0.090_204).abs() < 1e-6);
        let exact = exact_outage_profile(&cfg, &PowerSchedule::uniform(5, 1.0).unwrap()).unwrap();
        assert!((q2 - exact[1]).abs() < 1e-12);
        // halving p multiplies by 2^n
        for n in 1..=5 {
            let r = cc_bound_outage(&cfg, 0.5, n).unwrap() / cc_bound_outage(&cfg, 1.0, n).unwrap();
            assert!((r / 2f64.powi(n as i32) - 1.0).abs() < 1e-12);
        }
        // the BoundSet route agrees and refuses non-uniform schedules
        let set = new_bound_coefficients(&cfg).unwrap();
        let u = PowerSchedule::uniform(5, 0.7).unwrap();
        for n in 1..=5 {
            assert!((bound_outage(&set, &u, n).unwrap() / cc_bound_outage(&cfg, 0.7, n).unwrap() - 1.0).abs() < 1e-12);
        }
        let uneven = PowerSchedule::new(vec![0.7, 0.6, 0.7, 0.7, 0.7]).unwrap();
        assert_eq!(bound_outage(&set, &uneven, 2), Err(OutageError::NonUniformSchedule));
        assert_eq!(cc_bound_outage(&small(2, 1.0), 0.5, 1), Err(OutageError::NotChaseCombining));
    }

    #[test]
    fn broadcast_terms() {
        let mut cfg = small(3, 3.0);
        cfg.snr = 8.0;
        assert_eq!(broadcast_bound_terms(&cfg), Err(OutageError::NoReceivers));
        let single = new_bound_coefficients(&cfg).unwrap();
        let sched = PowerSchedule::new(vec![0.8, 0.5, 1.0]).unwrap();
        cfg.receivers = vec![Receiver { snr: 8.0, fading: FadingModel::Rayleigh }; 3];
        let terms = broadcast_bound_terms(&cfg).unwrap();
        for n in 1..=3 {
            let agg = aggregate_bound(&terms, &sched, n).unwrap();
            let one = bound_outage(&single, &sched, n).unwrap();
            assert!((agg / (3.0 * one) - 1.0).abs() < 1e-14);
            assert!((aggregate_bound(&terms[..1], &sched, n).unwrap() - one).abs() < 1e-15);
        }
        cfg.receivers = vec![
            Receiver { snr: 8.0, fading: FadingModel::Rayleigh },
            Receiver { snr: 8.0, fading: FadingModel::RayleighDiversity { antennas: 4 } },
        ];
        let terms = broadcast_bound_terms(&cfg).unwrap();
        assert_eq!(terms[1].exponent(), 4.0);
        for n in 1..=3 {
            let agg = aggregate_bound(&terms, &sched, n).unwrap();
            for t in &terms {
                assert!(agg >= bound_outage(t, &sched, n).unwrap());
            }
        }
    }

    #[test]
    fn singular_kernel_chain_converges() {
        let mut cfg = small(3, 3.0);
        cfg.fading = FadingModel::Nakagami { kappa: 0.6 };
        let at = |g: usize| {
            let mut c = cfg.clone();
            c.grid_points = g;
            new_bound_coefficients(&c).unwrap().coefficient(3)
        };
        let (a, b, c) = (at(512), at(1024), at(2048));
        assert!((b - c).abs() < (a - b).abs());
        assert!(((b - c) / c).abs() < 1e-4);
        let _ = BlockChannel::new(&cfg.fading, 1.0, 2.0);
    }
}
