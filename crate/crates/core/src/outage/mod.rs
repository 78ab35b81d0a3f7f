//! Outage probabilities: the exact values by successive convolution and the
//! monomial upper bounds used by the power optimizer.
//!
//! With incremental redundancy the accumulated bits after n blocks are a sum
//! of independent per-block rates, so Q_n = (F₁ * f₂ * ⋯ * f_n)(t). The
//! bounds replace every density by its power-relaxed version, after which
//! the powers factor out of the convolution chain and Q̂_n = A_n / ∏ p_i^e.

mod bounds;
mod exact;
mod grid;

use thiserror::Error;

pub use bounds::{
    aggregate_bound, bound_outage, bound_terms, broadcast_bound_terms, cc_bound_outage,
    classic_bound_coefficients, new_bound_coefficients, BoundFlavor, BoundSet,
};
pub use exact::{exact_outage, exact_outage_profile, link_exact_outage_profile, union_outage};
pub use grid::{convolve_pdf, DensityGrid, GridKind};

pub(crate) use grid::{convolve_cdf, Kernel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OutageError {
    #[error("grids differ in step or length")]
    MismatchedGrids,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("block index {index} outside 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("the unbounded-power bound assumes equal block lengths")]
    UnequalBlockLengths,
    #[error("the chase-combining bound needs one power shared by all blocks")]
    NonUniformSchedule,
    #[error("scenario does not use chase combining")]
    NotChaseCombining,
    #[error("scenario has no broadcast receivers")]
    NoReceivers,
    #[error("schedule has {got} powers, expected at least {expected}")]
    ScheduleLength { expected: usize, got: usize },
    #[error("power {0} is not positive")]
    InvalidPower(f64),
}

/// Q_n for every prefix n = 1..=stages of a convolution chain evaluated at
/// `upper`. The first stage enters through its CDF, later ones through
/// their densities (and CDFs for the first-cell mass).
pub(crate) fn chain_values(
    upper: f64,
    intervals: usize,
    first_cdf: &dyn Fn(f64) -> f64,
    stages: &[ChainStage<'_>],
) -> Vec<f64> {
    let step = upper / intervals as f64;
    let mut g: Vec<f64> = (0..=intervals).map(|j| first_cdf(j as f64 * step)).collect();
    let mut out = Vec::with_capacity(stages.len() + 1);
    out.push(first_cdf(upper));
    for stage in stages {
        let kernel = Kernel::sample(&stage.pdf, &stage.cdf, stage.shape, step, intervals);
        g = convolve_cdf(&g, &kernel);
        out.push(*g.last().expect("non-empty grid"));
    }
    out
}

pub(crate) struct ChainStage<'a> {
    pub pdf: Box<dyn Fn(f64) -> f64 + 'a>,
    pub cdf: Box<dyn Fn(f64) -> f64 + 'a>,
    pub shape: f64,
}
