//! Fading-power samplers.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::FadingModel;

/// Draws the fading power λ = |z|² for one block of one link.
#[derive(Debug, Clone)]
pub enum PowerSampler {
    /// Exponential(1) by inversion.
    Exponential,
    /// Sum of `branches` independent Exponential(1) draws.
    ExponentialSum { branches: u32 },
    /// Gamma(shape κ, rate κ).
    Gamma(Gamma<f64>),
}

impl PowerSampler {
    pub fn new(model: &FadingModel) -> Self {
        match *model {
            FadingModel::Rayleigh | FadingModel::RayleighDiversity { antennas: 1 } => PowerSampler::Exponential,
            FadingModel::RayleighDiversity { antennas } => PowerSampler::ExponentialSum { branches: antennas },
            FadingModel::Nakagami { .. } | FadingModel::Rician { .. } => {
                let law = model.law();
                if law.shape == 1.0 {
                    PowerSampler::Exponential
                } else {
                    PowerSampler::Gamma(Gamma::new(law.shape, 1.0 / law.rate).expect("validated shape"))
                }
            }
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PowerSampler::Exponential => exponential(rng),
            PowerSampler::ExponentialSum { branches } => (0..*branches).map(|_| exponential(rng)).sum(),
            PowerSampler::Gamma(g) => g.sample(rng),
        }
    }
}

#[inline]
fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1], so the logarithm is finite.
    -(1.0 - rng.random::<f64>()).ln()
}
