use nalgebra::DVector;
use serde::Serialize;

use super::posy::{Monomial, Posynomial};
use super::GpError;
use crate::outage::{bound_outage, BoundSet};
use crate::scenario::{HarqType, PowerSchedule, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnconstrainedSolution {
    pub schedule: PowerSchedule,
    pub objective_value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Energy minimization with only the outage constraint, which is tight at
/// the optimum: p_N = (A_N/(ε ∏_{i<N} p_i^e))^{1/e} is substituted and the
/// remaining problem in p_1..p_{N−1} is solved by Newton's method on the
/// log objective. Powers may exceed P.
pub fn solve_unconstrained(cfg: &ScenarioConfig, bounds: &BoundSet) -> Result<UnconstrainedSolution, GpError> {
    let n = cfg.n_blocks;
    if bounds.combining() != HarqType::IncrementalRedundancy || bounds.len() != n {
        return Err(GpError::NotIncremental);
    }
    let e = bounds.exponent();
    let l = &cfg.block_lengths;
    let tail = (bounds.coefficient(n) / cfg.outage_target).powf(1.0 / e);
    if n == 1 {
        return Ok(UnconstrainedSolution {
            schedule: PowerSchedule::new(vec![tail]).map_err(|e| GpError::InvalidModel(e.to_string()))?,
            objective_value: tail * l[0],
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let vars = n - 1;
    let mut terms = vec![Monomial::unit(vars).times(l[0]).times_var(0, 1.0)];
    for m in 2..n {
        let mut exps = vec![0.0; vars];
        exps[..m - 1].iter_mut().for_each(|a| *a = -e);
        exps[m - 1] = 1.0;
        terms.push(Monomial::new(l[m - 1] * bounds.coefficient(m - 1), exps)?);
    }
    terms.push(Monomial::new(l[n - 1] * bounds.coefficient(n - 1) * tail, vec![-(1.0 + e); vars])?);
    let objective = Posynomial::new(terms);

    let mut y = vec![cfg.max_power.ln(); vars];
    let mut iterations = 0;
    let mut gradient_norm = f64::INFINITY;
    while iterations < 500 {
        let (v, g, h) = objective.log_eval_derivs(&y);
        gradient_norm = g.amax();
        let dir: DVector<f64> = match h.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&dir);
        if -slope < 1e-28 || gradient_norm < 1e-15 {
            break;
        }
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if objective.log_eval(&cand) <= v + 0.25 * step * slope || step < 1e-12 {
                y = cand;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
    }

    let mut powers: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    powers.push(tail / powers.iter().product::<f64>());
    Ok(UnconstrainedSolution {
        objective_value: objective.log_eval(&y).exp(),
        schedule: PowerSchedule::new(powers).map_err(|e| GpError::InvalidModel(e.to_string()))?,
        iterations,
        gradient_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// |T_n − (1+e)T_{n+1} − η e (L_{n+1}+π̄) Q̂_n| / T_n for n = 1..N−1,
    /// where T_n = L_n p_n Q̂_{n−1}.
    pub residuals: Vec<f64>,
    /// With η = 0: relative error of p_N/p_1 against L_1/((1+e)^{N−1} Q̂_{N−1} L_N).
    pub ratio_residual: Option<f64>,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

/// Stationarity of the box-free problem at `schedule` with latency
/// multiplier `eta`.
pub fn kkt_check_unconstrained(cfg: &ScenarioConfig, bounds: &BoundSet, schedule: &PowerSchedule, eta: f64) -> KktReport {
    let n = cfg.n_blocks;
    let e = bounds.exponent();
    let l = &cfg.block_lengths;
    let p = schedule.powers();
    let q: Vec<f64> = (1..=n).map(|m| bound_outage(bounds, schedule, m).unwrap_or(f64::NAN)).collect();
    let q_prev = |m: usize| if m == 1 { 1.0 } else { q[m - 2] };
    let t = |m: usize| l[m - 1] * p[m - 1] * q_prev(m);
    let residuals = (1..n)
        .map(|m| {
            let rhs = (1.0 + e) * t(m + 1) + eta * e * (l[m] + cfg.feedback_delay_mean) * q[m - 1];
            (t(m) - rhs).abs() / t(m)
        })
        .collect();
    let ratio_residual = (eta == 0.0 && n >= 2).then(|| {
        let predicted = l[0] / ((1.0 + e).powi(n as i32 - 1) * q[n - 2] * l[n - 1]);
        ((p[n - 1] / p[0]) / predicted - 1.0).abs()
    });
    KktReport { residuals, ratio_residual }
}
