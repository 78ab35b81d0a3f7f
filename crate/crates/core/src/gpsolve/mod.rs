//! Energy-minimizing power allocation as a geometric program.
//!
//! With the monomial bounds Q̂_n = A_n/∏ p_i^e, the expected energy, the
//! outage target and the latency budget are all posynomials in the powers.
//! After y = ln p every posynomial becomes a log-sum-exp of affine terms and
//! the problem is convex; it is solved with a log-barrier Newton method.

mod metrics;
mod posy;
mod solver;
mod unconstrained;

use thiserror::Error;

use crate::outage::{bound_terms, BoundFlavor, BoundSet, OutageError};
use crate::scenario::{HarqType, ScenarioConfig};

pub use metrics::{metrics_from_profile, predicted_metrics, MetricSource, Metrics};
pub use posy::{Monomial, Posynomial};
pub use solver::{solve_gp, ConstraintSlack, SolveOptions, SolveReport, SolveStatus};
pub use unconstrained::{kkt_check_unconstrained, solve_unconstrained, KktReport, UnconstrainedSolution};

/// Lower end of every power variable, as a fraction of P.
pub const MIN_POWER_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("latency target {latency_target} leaves no room after the first block of length {first_block}")]
    InfeasibleLatency { latency_target: f64, first_block: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unconstrained mode needs a single incremental-redundancy bound")]
    NotIncremental,
    #[error(transparent)]
    Outage(#[from] OutageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Outage,
    Latency,
    Other,
}

/// f(p) ≤ bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GpConstraint {
    pub kind: ConstraintKind,
    pub posynomial: Posynomial,
    pub bound: f64,
}

/// Minimize a posynomial subject to posynomial upper bounds and a box.
///
/// Blocks map onto variables through `block_map`; chase combining shares a
/// single variable among all blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    objective: Posynomial,
    constraints: Vec<GpConstraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    block_map: Vec<usize>,
    latency_base: f64,
}

impl GpModel {
    /// A model whose variables are the blocks themselves.
    pub fn new(objective: Posynomial, constraints: Vec<GpConstraint>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GpError> {
        let block_map = (0..lower.len()).collect();
        GpModel::with_block_map(objective, constraints, lower, upper, block_map, 0.0)
    }

    fn with_block_map(
        objective: Posynomial,
        constraints: Vec<GpConstraint>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        block_map: Vec<usize>,
        latency_base: f64,
    ) -> Result<Self, GpError> {
        let n = lower.len();
        if n == 0 || upper.len() != n {
            return Err(GpError::InvalidModel("box must have one (lower, upper) pair per variable".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(*l > 0.0 && l < u && u.is_finite())) {
            return Err(GpError::InvalidModel("box needs 0 < lower < upper < ∞".into()));
        }
        if objective.is_empty() || objective.variables() != n {
            return Err(GpError::InvalidModel("objective must be a nonempty posynomial over every variable".into()));
        }
        for c in &constraints {
            if !(c.bound > 0.0 && c.bound.is_finite()) {
                return Err(GpError::InvalidModel(format!("constraint bound {} is not positive", c.bound)));
            }
            if c.posynomial.variables() != n {
                return Err(GpError::InvalidModel("constraint has the wrong number of variables".into()));
            }
        }
        if block_map.iter().any(|&v| v >= n) {
            return Err(GpError::InvalidModel("block maps to a missing variable".into()));
        }
        Ok(GpModel { objective, constraints, lower, upper, block_map, latency_base })
    }

    pub fn objective(&self) -> &Posynomial {
        &self.objective
    }

    pub fn constraints(&self) -> &[GpConstraint] {
        &self.constraints
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn variables(&self) -> usize {
        self.lower.len()
    }

    /// Variable index used by each block.
    pub fn block_map(&self) -> &[usize] {
        &self.block_map
    }

    pub fn constraint(&self, kind: ConstraintKind) -> Option<&GpConstraint> {
        self.constraints.iter().find(|c| c.kind == kind)
    }

    /// Per-block powers from a variable vector.
    pub fn expand(&self, vars: &[f64]) -> Vec<f64> {
        self.block_map.iter().map(|&v| vars[v]).collect()
    }

    /// Expected latency implied by the model: L₁ plus the latency posynomial.
    pub fn latency_at(&self, vars: &[f64]) -> f64 {
        self.latency_base + self.constraint(ConstraintKind::Latency).map_or(0.0, |c| c.posynomial.eval(vars))
    }

    /// Same model with every constraint (posynomial and bound) scaled by
    /// its own factor and the objective by `objective_factor`.
    pub fn rescaled(&self, objective_factor: f64, constraint_factors: &[f64]) -> GpModel {
        let mut out = self.clone();
        out.objective = self.objective.scaled(objective_factor);
        for (c, f) in out.constraints.iter_mut().zip(constraint_factors) {
            c.posynomial = c.posynomial.scaled(*f);
            c.bound *= f;
        }
        out
    }
}

/// Problem over the given bounds (one per link; a broadcast sums them):
/// minimize p₁L₁ + Σ_{n≥2} L_n p_n Q̂_{n−1} subject to Q̂_N ≤ ε,
/// Σ_{n<N} (L_{n+1} + π̄) Q̂_n ≤ δ − L₁ and MIN_POWER_FRACTION·P ≤ p_n ≤ P.
pub fn build_gp(cfg: &ScenarioConfig, terms: &[BoundSet]) -> Result<GpModel, GpError> {
    let n = cfg.n_blocks;
    if terms.is_empty() {
        return Err(GpError::InvalidModel("no bound terms".into()));
    }
    if terms.iter().any(|t| t.len() != n || t.combining() != cfg.harq_type) {
        return Err(GpError::InvalidModel("bounds do not match the scenario".into()));
    }
    let l = &cfg.block_lengths;
    if n >= 2 && cfg.latency_target <= l[0] {
        return Err(GpError::InfeasibleLatency { latency_target: cfg.latency_target, first_block: l[0] });
    }
    let block_map: Vec<usize> = match cfg.harq_type {
        HarqType::IncrementalRedundancy => (0..n).collect(),
        HarqType::ChaseCombining => vec![0; n],
    };
    let vars = block_map.iter().max().map_or(0, |m| m + 1);

    // Q̂_m as a posynomial, summed over links
    let q_hat = |m: usize| -> Posynomial {
        let mut monos = Vec::new();
        for t in terms {
            let a = t.coefficient(m);
            if a > 0.0 {
                let mut exps = vec![0.0; vars];
                for &v in &block_map[..m] {
                    exps[v] -= t.exponent();
                }
                monos.push(Monomial::new(a, exps).expect("positive coefficient"));
            }
        }
        Posynomial::new(monos)
    };

    let mut objective = vec![Monomial::unit(vars).times(l[0]).times_var(block_map[0], 1.0)];
    for m in 2..=n {
        for mono in q_hat(m - 1).terms() {
            objective.push(mono.times(l[m - 1]).times_var(block_map[m - 1], 1.0));
        }
    }

    let mut constraints = Vec::new();
    let outage = q_hat(n);
    if !outage.is_empty() {
        constraints.push(GpConstraint { kind: ConstraintKind::Outage, posynomial: outage, bound: cfg.outage_target });
    }
    let latency = Posynomial::new(
        (1..n)
            .flat_map(|m| {
                let w = l[m] + cfg.feedback_delay_mean;
                q_hat(m).terms().iter().map(move |t| t.times(w)).collect::<Vec<_>>()
            })
            .collect(),
    );
    if !latency.is_empty() {
        constraints.push(GpConstraint {
            kind: ConstraintKind::Latency,
            posynomial: latency,
            bound: cfg.latency_target - l[0],
        });
    }

    let cap = cfg.max_power;
    GpModel::with_block_map(
        Posynomial::new(objective),
        constraints,
        vec![MIN_POWER_FRACTION * cap; vars],
        vec![cap; vars],
        block_map,
        l[0],
    )
}

/// Bounds of the requested flavor for every link, then [`build_gp`] and
/// [`solve_gp`].
pub fn optimize(cfg: &ScenarioConfig, flavor: BoundFlavor, opts: &SolveOptions) -> Result<SolveReport, GpError> {
    let terms = bound_terms(cfg, flavor)?;
    let model = build_gp(cfg, &terms)?;
    Ok(solve_gp(&model, opts))
}

#[cfg(test)]
mod tests;
