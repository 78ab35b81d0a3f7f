use nalgebra::{DMatrix, DVector};

use super::GpError;

/// c · ∏ x_i^{a_i} with c > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    coefficient: f64,
    exponents: Vec<f64>,
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: Vec<f64>) -> Result<Self, GpError> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(GpError::InvalidModel(format!("monomial coefficient {coefficient} must be positive")));
        }
        if exponents.iter().any(|a| !a.is_finite()) {
            return Err(GpError::InvalidModel("monomial exponent is not finite".into()));
        }
        Ok(Monomial { coefficient, exponents })
    }

    /// The constant 1 over `vars` variables.
    pub fn unit(vars: usize) -> Self {
        Monomial { coefficient: 1.0, exponents: vec![0.0; vars] }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn times(&self, factor: f64) -> Self {
        Monomial { coefficient: self.coefficient * factor, exponents: self.exponents.clone() }
    }

    /// Multiplies by x_var^power.
    pub fn times_var(mut self, var: usize, power: f64) -> Self {
        self.exponents[var] += power;
        self
    }

    /// ln c + a·y
    pub fn log_eval(&self, y: &[f64]) -> f64 {
        self.coefficient.ln() + self.exponents.iter().zip(y).map(|(a, v)| a * v).sum::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        self.log_eval(&y).exp()
    }
}

/// A sum of monomials over the same variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Posynomial {
    terms: Vec<Monomial>,
}

impl Posynomial {
    /// Terms with identical exponents are merged.
    pub fn new(monomials: Vec<Monomial>) -> Self {
        let mut terms: Vec<Monomial> = Vec::with_capacity(monomials.len());
        for m in monomials {
            match terms.iter_mut().find(|t| t.exponents == m.exponents) {
                Some(t) => t.coefficient += m.coefficient,
                None => terms.push(m),
            }
        }
        Posynomial { terms }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn variables(&self) -> usize {
        self.terms.first().map_or(0, |t| t.exponents.len())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Posynomial { terms: self.terms.iter().map(|t| t.times(factor)).collect() }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        self.log_eval(&y).exp()
    }

    /// ln f(e^y) as a log-sum-exp.
    pub fn log_eval(&self, y: &[f64]) -> f64 {
        let z: Vec<f64> = self.terms.iter().map(|t| t.log_eval(y)).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
    }

    /// ln f(e^{y+d}) − ln f(e^y), accurate even when the change is far
    /// below the rounding error of ln f itself.
    pub fn log_ratio(&self, y: &[f64], d: &[f64]) -> f64 {
        let z: Vec<f64> = self.terms.iter().map(|t| t.log_eval(y)).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = w.iter().sum();
        let change: f64 = self
            .terms
            .iter()
            .zip(&w)
            .map(|(t, wk)| wk * t.exponents.iter().zip(d).map(|(a, dv)| a * dv).sum::<f64>().exp_m1())
            .sum();
        (change / s).ln_1p()
    }

    /// ln f(e^y) with its gradient and Hessian in y.
    pub fn log_eval_derivs(&self, y: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = y.len();
        let z: Vec<f64> = self.terms.iter().map(|t| t.log_eval(y)).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = w.iter().sum();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (t, wk) in self.terms.iter().zip(&w) {
            let a = DVector::from_column_slice(&t.exponents);
            let wk = wk / s;
            grad.axpy(wk, &a, 1.0);
            hess.ger(wk, &a, &a, 1.0);
        }
        hess.ger(-1.0, &grad.clone(), &grad.clone(), 1.0);
        (m + s.ln(), grad, hess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_like_terms_and_evaluates() {
        let p = Posynomial::new(vec![
            Monomial::new(1.0, vec![1.0, -1.0]).unwrap(),
            Monomial::new(2.0, vec![1.0, -1.0]).unwrap(),
            Monomial::new(0.5, vec![0.0, 2.0]).unwrap(),
        ]);
        assert_eq!(p.terms().len(), 2);
        let v = p.eval(&[2.0, 4.0]);
        assert!((v - (3.0 * 0.5 + 0.5 * 16.0)).abs() < 1e-12);
        assert!(Monomial::new(0.0, vec![1.0]).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = Posynomial::new(vec![
            Monomial::new(1.5, vec![1.0, -2.0]).unwrap(),
            Monomial::new(0.3, vec![-1.0, 0.5]).unwrap(),
            Monomial::new(2.0, vec![0.0, 1.0]).unwrap(),
        ]);
        let y = [0.3, -0.7];
        let (v, g, h) = p.log_eval_derivs(&y);
        assert!((v - p.log_eval(&y)).abs() < 1e-14);
        let r = p.log_ratio(&y, &[0.1, -0.2]);
        assert!((r - (p.log_eval(&[0.4, -0.9]) - v)).abs() < 1e-14);
        let tiny = p.log_ratio(&y, &[1e-13, 0.0]);
        assert!((tiny / 1e-13 - g[0]).abs() < 1e-6);
        let d = 1e-5;
        for i in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[i] += d;
            ym[i] -= d;
            assert!((g[i] - (p.log_eval(&yp) - p.log_eval(&ym)) / (2.0 * d)).abs() < 1e-8);
            let (_, gp, _) = p.log_eval_derivs(&yp);
            let (_, gm, _) = p.log_eval_derivs(&ym);
            for j in 0..2 {
                assert!((h[(j, i)] - (gp[j] - gm[j]) / (2.0 * d)).abs() < 1e-7);
            }
        }
    }
}
