//! Uniform grids on [0, t] and the discrete convolutions used by the
//! outage engine.

use super::OutageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Pdf,
    /// A CDF or a CDF-like bound (may exceed one).
    Cdf,
}

/// Samples of a function at x_j = j·step, j = 0..=intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    values: Vec<f64>,
    step: f64,
    kind: GridKind,
}

impl DensityGrid {
    pub fn new(values: Vec<f64>, step: f64, kind: GridKind) -> Result<Self, OutageError> {
        if values.len() < 2 {
            return Err(OutageError::InvalidGrid("need at least two samples".into()));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(OutageError::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(OutageError::InvalidGrid(format!("sample {v} is not finite and nonnegative")));
        }
        Ok(DensityGrid { values, step, kind })
    }

    /// Samples `f` on [0, upper] with `intervals` cells.
    pub fn sample(f: impl Fn(f64) -> f64, upper: f64, intervals: usize, kind: GridKind) -> Result<Self, OutageError> {
        let step = upper / intervals as f64;
        DensityGrid::new((0..=intervals).map(|j| f(j as f64 * step)).collect(), step, kind)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn upper(&self) -> f64 {
        self.step * self.intervals() as f64
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }
}

/// Trapezoid-rule convolution of two densities on the same grid, truncated
/// to [0, upper]. Exact truncation: (a*b)(x) only involves values on [0, x].
pub fn convolve_pdf(a: &DensityGrid, b: &DensityGrid) -> Result<DensityGrid, OutageError> {
    if a.values.len() != b.values.len() || a.step != b.step {
        return Err(OutageError::MismatchedGrids);
    }
    let (av, bv) = (&a.values, &b.values);
    let mut out = vec![0.0; av.len()];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let inner: f64 = av[..=j].iter().rev().zip(&bv[..=j]).map(|(x, y)| x * y).sum();
        *slot = a.step * (inner - 0.5 * (av[j] * bv[0] + av[0] * bv[j]));
    }
    DensityGrid::new(out, a.step, GridKind::Pdf)
}

/// A density prepared as the right operand of [`convolve_cdf`]: exact
/// probability mass per cell plus an estimate of where in the cell that
/// mass sits.
///
/// The first cell uses a local x^{shape−1} model, which stays valid when
/// the density is unbounded at zero; later cells assume the density is
/// linear across the cell.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    near: Vec<f64>,
    far: Vec<f64>,
}

impl Kernel {
    pub fn sample(pdf: impl Fn(f64) -> f64, cdf: impl Fn(f64) -> f64, shape: f64, step: f64, intervals: usize) -> Self {
        let mut near = vec![0.0; intervals + 1];
        let mut far = vec![0.0; intervals + 1];
        let mut prev_cdf = 0.0;
        let mut prev_pdf = 0.0;
        for k in 1..=intervals {
            let x = k as f64 * step;
            let (c, f) = (cdf(x), pdf(x));
            let mass = (c - prev_cdf).max(0.0);
            // fraction of the cell width from its left edge to the centroid
            let centroid = if k == 1 {
                shape / (shape + 1.0)
            } else if prev_pdf + f > 0.0 {
                (prev_pdf + 2.0 * f) / (3.0 * (prev_pdf + f))
            } else {
                0.5
            };
            near[k] = mass * (1.0 - centroid);
            far[k] = mass * centroid;
            prev_cdf = c;
            prev_pdf = f;
        }
        Kernel { near, far }
    }
}

/// (G * f)(x_j) for a CDF-like G and kernel density f, with G linear
/// between grid points.
pub(crate) fn convolve_cdf(cdf: &[f64], kernel: &Kernel) -> Vec<f64> {
    let n = cdf.len();
    debug_assert_eq!(kernel.near.len(), n);
    let mut out = vec![0.0; n];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        // cell k covers τ ∈ [x_{k−1}, x_k], where G(x_j − τ) runs from G[j−k+1] to G[j−k]
        let near: f64 = cdf[1..=j].iter().rev().zip(&kernel.near[1..=j]).map(|(g, w)| g * w).sum();
        let far: f64 = cdf[..j].iter().rev().zip(&kernel.far[1..=j]).map(|(g, w)| g * w).sum();
        *slot = near + far;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(DensityGrid::new(vec![1.0], 0.1, GridKind::Pdf).is_err());
        assert!(DensityGrid::new(vec![1.0, f64::NAN], 0.1, GridKind::Pdf).is_err());
        assert!(DensityGrid::new(vec![1.0, -1.0], 0.1, GridKind::Pdf).is_err());
        assert!(DensityGrid::new(vec![1.0, 1.0], 0.0, GridKind::Pdf).is_err());
        let a = DensityGrid::new(vec![1.0; 5], 0.1, GridKind::Pdf).unwrap();
        let b = DensityGrid::new(vec![1.0; 6], 0.1, GridKind::Pdf).unwrap();
        assert!(matches!(convolve_pdf(&a, &b), Err(OutageError::MismatchedGrids)));
    }

    #[test]
    fn near_delta_shifts_by_one_cell() {
        let n = 1000;
        let a = DensityGrid::sample(|x| (-x).exp() * (3.0 * x).sin().abs(), 5.0, n, GridKind::Pdf).unwrap();
        let step = a.step();
        let mut delta = vec![0.0; n + 1];
        delta[1] = 1.0 / step;
        let b = DensityGrid::new(delta, step, GridKind::Pdf).unwrap();
        let c = convolve_pdf(&a, &b).unwrap();
        // sup |a'| ≤ 3 + 1 on [0, 5]
        let tol = 2.0 * step * 4.0;
        for j in 2..=n {
            assert!((c.values()[j] - a.values()[j]).abs() <= tol, "j={j}");
        }
    }

    #[test]
    fn exponentials_convolve_to_gamma2() {
        let n = 4000;
        let e = DensityGrid::sample(|x| (-x).exp(), 10.0, n, GridKind::Pdf).unwrap();
        let c = convolve_pdf(&e, &e).unwrap();
        let sup = c
            .values()
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x = j as f64 * c.step();
                (v - x * (-x).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(sup < 1e-4, "sup-norm {sup}");
    }

    #[test]
    fn convolution_commutes() {
        let a = DensityGrid::sample(|x| (1.0 + x).recip(), 3.0, 500, GridKind::Pdf).unwrap();
        let b = DensityGrid::sample(|x| x * x * (-x).exp(), 3.0, 500, GridKind::Pdf).unwrap();
        let ab = convolve_pdf(&a, &b).unwrap();
        let ba = convolve_pdf(&b, &a).unwrap();
        for (x, y) in ab.values().iter().zip(ba.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn cdf_convolution_of_exponentials() {
        // (F * f)(x) for Exp(1) is the Gamma(2) CDF 1 − e^{−x}(1 + x).
        let n = 2000;
        let upper = 6.0;
        let step = upper / n as f64;
        let cdf: Vec<f64> = (0..=n).map(|j| -(-(j as f64 * step)).exp_m1()).collect();
        let kernel = Kernel::sample(|x| (-x).exp(), |x| -(-x).exp_m1(), 1.0, step, n);
        let out = convolve_cdf(&cdf, &kernel);
        for (j, v) in out.iter().enumerate() {
            let x = j as f64 * step;
            let exact = 1.0 - (-x).exp() * (1.0 + x);
            assert!((v - exact).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn singular_kernel_keeps_second_order() {
        // Gamma(1/2, 1) density convolved with the Exp(1) CDF gives the
        // Gamma(3/2) CDF, P(3/2, x).
        use crate::fading::special::reg_lower_gamma;
        let upper = 2.0;
        let err = |n: usize| {
            let step = upper / n as f64;
            let cdf: Vec<f64> = (0..=n).map(|j| -(-(j as f64 * step)).exp_m1()).collect();
            let law = crate::fading::GammaLaw { shape: 0.5, rate: 1.0 };
            let kernel = Kernel::sample(|x| law.pdf(x), |x| law.cdf(x), 0.5, step, n);
            let out = convolve_cdf(&cdf, &kernel);
            (out[n] - reg_lower_gamma(1.5, upper)).abs()
        };
        let (e1, e2) = (err(400), err(800));
        assert!(e2 < 1e-5, "error {e2}");
        assert!(e1 / e2 > 2.5, "convergence ratio {} ({e1} {e2})", e1 / e2);
    }
}
