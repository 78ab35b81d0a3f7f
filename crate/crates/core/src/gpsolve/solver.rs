use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{ConstraintKind, GpModel};
use crate::scenario::PowerSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop once the duality-gap proxy m/τ falls below tol·(1 + |ln f₀|).
    pub tol: f64,
    /// Cap on the total number of Newton steps.
    pub max_iterations: usize,
    /// Relative slack under which a constraint is reported tight.
    pub tight_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-9, max_iterations: 5000, tight_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// 1 − f(p)/bound for one constraint; negative means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintSlack {
    pub kind: ConstraintKind,
    pub relative: f64,
    pub tight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub schedule: PowerSchedule,
    /// Objective (expected energy for models from `build_gp`).
    pub objective_value: f64,
    pub status: SolveStatus,
    pub constraint_slacks: Vec<ConstraintSlack>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub predicted_latency: f64,
}

impl SolveReport {
    pub fn slack(&self, kind: ConstraintKind) -> Option<ConstraintSlack> {
        self.constraint_slacks.iter().copied().find(|s| s.kind == kind)
    }

    pub fn is_tight(&self, kind: ConstraintKind) -> bool {
        self.slack(kind).is_some_and(|s| s.tight)
    }
}

// Past this the Newton decrement sits at the rounding floor of the log
// posynomials and further steps only shuffle noise.
const MAX_CENTERING_STEPS: usize = 50;

struct Barrier<'a> {
    model: &'a GpModel,
    lo: Vec<f64>,
    hi: Vec<f64>,
    log_bounds: Vec<f64>,
}

struct Eval {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// An interior point with its distances to every barrier wall. The
/// distances are updated by exact increments rather than recomputed, so
/// they keep full relative precision as they shrink toward zero.
#[derive(Clone)]
struct Point {
    y: Vec<f64>,
    slack: Vec<f64>,
    below: Vec<f64>,
    above: Vec<f64>,
}

impl Barrier<'_> {
    fn terms(&self) -> usize {
        self.model.constraints().len() + 2 * self.lo.len()
    }

    fn log_objective(&self, y: &[f64]) -> f64 {
        self.model.objective().log_eval(y)
    }

    // ln f_i − ln b_i for every constraint
    fn constraint_values(&self, y: &[f64]) -> Vec<f64> {
        self.model.constraints().iter().zip(&self.log_bounds).map(|(c, b)| c.posynomial.log_eval(y) - b).collect()
    }

    fn point(&self, y: Vec<f64>) -> Option<Point> {
        let slack: Vec<f64> = self.constraint_values(&y).iter().map(|f| -f).collect();
        let below: Vec<f64> = y.iter().zip(&self.lo).map(|(v, l)| v - l).collect();
        let above: Vec<f64> = y.iter().zip(&self.hi).map(|(v, h)| h - v).collect();
        let inside = slack.iter().chain(&below).chain(&above).all(|&v| v > 0.0);
        inside.then_some(Point { y, slack, below, above })
    }

    /// The point y + d and the change of the barrier objective, or None
    /// when y + d leaves the interior.
    fn step(&self, tau: f64, at: &Point, d: &[f64]) -> Option<(Point, f64)> {
        let mut next = at.clone();
        let mut delta = tau * self.model.objective().log_ratio(&at.y, d);
        for (i, c) in self.model.constraints().iter().enumerate() {
            let ds = -c.posynomial.log_ratio(&at.y, d);
            if !(ds / at.slack[i] > -1.0) {
                return None;
            }
            delta -= (ds / at.slack[i]).ln_1p();
            next.slack[i] += ds;
        }
        for j in 0..d.len() {
            if !(d[j] / at.below[j] > -1.0 && -d[j] / at.above[j] > -1.0) {
                return None;
            }
            delta -= (d[j] / at.below[j]).ln_1p() + (-d[j] / at.above[j]).ln_1p();
            next.y[j] += d[j];
            next.below[j] += d[j];
            next.above[j] -= d[j];
        }
        Some((next, delta))
    }

    fn eval(&self, tau: f64, at: &Point) -> Eval {
        let (_, g0, h0) = self.model.objective().log_eval_derivs(&at.y);
        let mut grad = g0 * tau;
        let mut hess = h0 * tau;
        for (c, s) in self.model.constraints().iter().zip(&at.slack) {
            let (_, gi, hi) = c.posynomial.log_eval_derivs(&at.y);
            grad.axpy(1.0 / s, &gi, 1.0);
            hess += hi / *s;
            hess.ger(1.0 / (s * s), &gi, &gi, 1.0);
        }
        for j in 0..at.y.len() {
            let (dl, dh) = (at.below[j], at.above[j]);
            grad[j] += -1.0 / dl + 1.0 / dh;
            hess[(j, j)] += 1.0 / (dl * dl) + 1.0 / (dh * dh);
        }
        Eval { grad, hess }
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let scale = hess.diagonal().amax().max(1.0);
    let mut ridge = 0.0;
    loop {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            return -ch.solve(grad);
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 10.0 };
    }
}

/// Log-barrier interior-point solve in y = ln p.
///
/// Every constraint from `build_gp` is nonincreasing in each power, so the
/// problem is feasible exactly when it is feasible at p = P; that point is
/// checked first.
pub fn solve_gp(model: &GpModel, opts: &SolveOptions) -> SolveReport {
    let barrier = Barrier {
        model,
        lo: model.lower().iter().map(|v| v.ln()).collect(),
        hi: model.upper().iter().map(|v| v.ln()).collect(),
        log_bounds: model.constraints().iter().map(|c| c.bound.ln()).collect(),
    };
    let top = barrier.hi.clone();
    let at_top = barrier.constraint_values(&top);
    if at_top.iter().any(|&f| f > 0.0) {
        return report(model, &top, SolveStatus::Infeasible, f64::INFINITY, 0, opts);
    }

    // ln(0.9 P), pulled toward ln P until strictly feasible
    let mut start = None;
    let mut margin = 0.9f64.ln();
    for _ in 0..60 {
        let cand: Vec<f64> = top.iter().zip(&barrier.lo).map(|(h, l)| (h + margin).max(0.5 * (h + l))).collect();
        start = barrier.point(cand);
        if start.is_some() {
            break;
        }
        margin *= 0.5;
    }
    let Some(mut x) = start else {
        // only the corner p = P is feasible
        return report(model, &top, SolveStatus::Optimal, 0.0, 0, opts);
    };

    let m = barrier.terms() as f64;
    let mut tau = m / (1.0 + barrier.log_objective(&x.y).abs());
    let mut iterations = 0;
    loop {
        for _ in 0..MAX_CENTERING_STEPS {
            if iterations >= opts.max_iterations {
                let kkt = barrier.eval(tau, &x).grad.amax() / tau + m / tau;
                return report(model, &x.y, SolveStatus::MaxIterations, kkt, iterations, opts);
            }
            let ev = barrier.eval(tau, &x);
            let dir = newton_direction(&ev.hess, &ev.grad);
            let slope = ev.grad.dot(&dir);
            if -slope <= 1e-20 {
                break;
            }
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-16 {
                let d: Vec<f64> = dir.iter().map(|v| step * v).collect();
                if let Some((next, delta)) = barrier.step(tau, &x, &d) {
                    if delta <= 0.25 * step * slope {
                        x = next;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            iterations += 1;
            if !moved {
                break;
            }
        }
        let gap = m / tau;
        if gap < opts.tol * (1.0 + barrier.log_objective(&x.y).abs()) {
            let kkt = (barrier.eval(tau, &x).grad.amax() / tau).max(gap);
            return report(model, &x.y, SolveStatus::Optimal, kkt, iterations, opts);
        }
        tau *= 10.0;
    }
}

fn report(model: &GpModel, y: &[f64], status: SolveStatus, kkt: f64, iterations: usize, opts: &SolveOptions) -> SolveReport {
    let vars: Vec<f64> = y.iter().map(|v| v.exp()).collect();
    let constraint_slacks = model
        .constraints()
        .iter()
        .map(|c| {
            let relative = -(c.posynomial.log_eval(y) - c.bound.ln()).exp_m1();
            ConstraintSlack { kind: c.kind, relative, tight: relative.abs() <= opts.tight_tol }
        })
        .collect();
    SolveReport {
        schedule: PowerSchedule::new(model.expand(&vars)).expect("positive powers"),
        objective_value: model.objective().eval(&vars),
        status,
        constraint_slacks,
        kkt_residual: kkt,
        iterations,
        predicted_latency: model.latency_at(&vars),
    }
}
