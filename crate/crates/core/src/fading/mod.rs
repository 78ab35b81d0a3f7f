//! Per-block mutual-information distributions.
//!
//! Every supported fading family gives a fading power λ = |z|² that is
//! Gamma distributed with some shape `a` and rate `θ`:
//!
//! | family                   | shape | rate |
//! |--------------------------|-------|------|
//! | Rayleigh                 | 1     | 1    |
//! | Nakagami(κ)              | κ     | κ    |
//! | Rician(μ) → Nakagami(κ)  | κ     | κ    |
//! | Rayleigh diversity (M)   | M     | 1    |
//!
//! A block of length L at power p carries c = L log₂(1 + S λ p) bits, so with
//! u(x) = (2^{x/L} − 1)/(S p) the CDF is the regularized incomplete gamma
//! P(a, θ u(x)). The power-relaxed density replaces p by the cap P inside
//! the exponential only, which makes the result a monomial in p times a
//! power-free kernel.

pub mod sample;
pub mod special;

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use thiserror::Error;

pub use sample::PowerSampler;
pub use special::{gamma_fn, ln_gamma, lower_incomplete_gamma, regularized_lower_gamma, SpecialError};

use special::reg_lower_gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FadingError {
    #[error("Nakagami parameter must exceed 1/2, got {0}")]
    Kappa(f64),
    #[error("Rician parameter must be finite and nonnegative, got {0}")]
    Mu(f64),
    #[error("diversity order must be at least 1")]
    Antennas,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("power {power} exceeds the cap {cap}")]
    PowerAboveCap { power: f64, cap: f64 },
}

/// Fading family of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FadingModel {
    Rayleigh,
    Nakagami { kappa: f64 },
    Rician { mu: f64 },
    RayleighDiversity { antennas: u32 },
}

impl FadingModel {
    pub fn validate(&self) -> Result<(), FadingError> {
        match *self {
            FadingModel::Rayleigh => Ok(()),
            FadingModel::Nakagami { kappa } if kappa > 0.5 && kappa.is_finite() => Ok(()),
            FadingModel::Nakagami { kappa } => Err(FadingError::Kappa(kappa)),
            FadingModel::Rician { mu } if mu >= 0.0 && mu.is_finite() => Ok(()),
            FadingModel::Rician { mu } => Err(FadingError::Mu(mu)),
            FadingModel::RayleighDiversity { antennas } if antennas >= 1 => Ok(()),
            FadingModel::RayleighDiversity { .. } => Err(FadingError::Antennas),
        }
    }

    /// Gamma law of the fading power.
    pub fn law(&self) -> GammaLaw {
        match *self {
            FadingModel::Rayleigh => GammaLaw::EXPONENTIAL,
            FadingModel::Nakagami { kappa } => GammaLaw { shape: kappa, rate: kappa },
            FadingModel::Rician { mu } => {
                let kappa = rician_to_nakagami(mu);
                GammaLaw { shape: kappa, rate: kappa }
            }
            FadingModel::RayleighDiversity { antennas } => {
                GammaLaw { shape: f64::from(antennas), rate: 1.0 }
            }
        }
    }

    /// Exponent e carried by each power variable in the monomial bounds.
    pub fn power_exponent(&self) -> f64 {
        self.law().shape
    }
}

/// κ = (μ + 1)² / (2μ + 1)
pub fn rician_to_nakagami(mu: f64) -> f64 {
    (mu + 1.0).powi(2) / (2.0 * mu + 1.0)
}

/// Gamma(shape, rate) law of the fading power λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaLaw {
    pub shape: f64,
    pub rate: f64,
}

impl GammaLaw {
    pub const EXPONENTIAL: GammaLaw = GammaLaw { shape: 1.0, rate: 1.0 };

    pub fn cdf(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        reg_lower_gamma(self.shape, self.rate * lambda)
    }

    pub fn pdf(&self, lambda: f64) -> f64 {
        if lambda < 0.0 {
            return 0.0;
        }
        if lambda == 0.0 {
            return self.density_at_zero(self.rate.powf(self.shape) / gamma_fn(self.shape).unwrap_or(f64::NAN));
        }
        let a = self.shape;
        (a * self.rate.ln() + (a - 1.0) * lambda.ln() - self.rate * lambda - ln_gamma(a)).exp()
    }

    fn density_at_zero(&self, leading: f64) -> f64 {
        if self.shape < 1.0 {
            f64::INFINITY
        } else if self.shape > 1.0 {
            0.0
        } else {
            leading
        }
    }
}

/// A link's per-block statistics, independent of the transmit power.
///
/// Methods take the power explicitly so the same object serves the exact
/// law (power p), the relaxed bound (p with cap P), and the power-stripped
/// kernels used to build bound coefficients (p = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockChannel {
    pub law: GammaLaw,
    pub block_length: f64,
    pub snr: f64,
}

impl BlockChannel {
    pub fn new(model: &FadingModel, block_length: f64, snr: f64) -> Self {
        BlockChannel { law: model.law(), block_length, snr }
    }

    /// w(x) = (2^{x/L} − 1)/S, the fading-power·power product that yields x bits.
    #[inline]
    pub fn threshold(&self, x: f64) -> f64 {
        (x * LN_2 / self.block_length).exp_m1() / self.snr
    }

    #[inline]
    fn threshold_slope(&self, x: f64) -> f64 {
        (x * LN_2 / self.block_length).exp() * LN_2 / (self.block_length * self.snr)
    }

    /// F(x) = P(a, θ w(x)/p).
    pub fn cdf(&self, power: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.law.cdf(self.threshold(x) / power)
    }

    /// f(x) = dF/dx; infinite at x = 0 when the shape is below one.
    pub fn pdf(&self, power: f64, x: f64) -> f64 {
        self.relaxed_pdf(power, power, x)
    }

    /// f̂(x): the exact density with p replaced by `cap` in the exponential.
    pub fn relaxed_pdf(&self, power: f64, cap: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let GammaLaw { shape: a, rate } = self.law;
        let w = self.threshold(x);
        let slope = self.threshold_slope(x);
        if w == 0.0 {
            let leading = rate.powf(a) * slope / (gamma_fn(a).unwrap_or(f64::NAN) * power.powf(a));
            return self.law.density_at_zero(leading);
        }
        let log = a * rate.ln() + (a - 1.0) * w.ln() - rate * w / cap - ln_gamma(a) - a * power.ln()
            + slope.ln();
        log.exp()
    }

    /// F̂(x) = (P/p)^a P(a, θ w(x)/P).
    pub fn relaxed_cdf(&self, power: f64, cap: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (cap / power).powf(self.law.shape) * self.law.cdf(self.threshold(x) / cap)
    }

    /// Limit of `relaxed_pdf` as the cap goes to infinity.
    pub fn unbounded_pdf(&self, power: f64, x: f64) -> f64 {
        self.relaxed_pdf(power, f64::INFINITY, x)
    }

    /// Limit of `relaxed_cdf` as the cap goes to infinity: θ^a w^a / (Γ(a+1) p^a).
    pub fn unbounded_cdf(&self, power: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let a = self.law.shape;
        let w = self.threshold(x);
        (a * (self.law.rate * w / power).ln() - ln_gamma(a + 1.0)).exp()
    }
}

/// Distribution of the bits c_n carried by one block at a fixed power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDistribution {
    model: FadingModel,
    channel: BlockChannel,
    power: f64,
    power_cap: f64,
}

impl RateDistribution {
    pub fn new(
        model: FadingModel,
        block_length: f64,
        snr: f64,
        power: f64,
        power_cap: f64,
    ) -> Result<Self, FadingError> {
        model.validate()?;
        for (name, value) in [
            ("block_length", block_length),
            ("snr", snr),
            ("power", power),
            ("power_cap", power_cap),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(FadingError::NonPositive { name, value });
            }
        }
        if power > power_cap {
            return Err(FadingError::PowerAboveCap { power, cap: power_cap });
        }
        Ok(RateDistribution {
            model,
            channel: BlockChannel::new(&model, block_length, snr),
            power,
            power_cap,
        })
    }

    pub fn model(&self) -> FadingModel {
        self.model
    }

    pub fn channel(&self) -> &BlockChannel {
        &self.channel
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn power_cap(&self) -> f64 {
        self.power_cap
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.channel.cdf(self.power, x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.channel.pdf(self.power, x)
    }

    pub fn relaxed_pdf(&self, x: f64) -> f64 {
        self.channel.relaxed_pdf(self.power, self.power_cap, x)
    }

    pub fn relaxed_cdf(&self, x: f64) -> f64 {
        self.channel.relaxed_cdf(self.power, self.power_cap, x)
    }

    /// Probability mass of c_n on [lo, hi]. Finite even where the density
    /// is not (shape < 1 at x = 0).
    pub fn cell_mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// One draw of c_n.
    pub fn sample<R: rand::Rng + ?Sized>(&self, sampler: &PowerSampler, rng: &mut R) -> f64 {
        let lambda = sampler.draw(rng);
        self.channel.block_length * (self.channel.snr * lambda * self.power).ln_1p() / LN_2
    }
}
