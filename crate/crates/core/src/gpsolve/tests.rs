use super::*;
use crate::fading::FadingModel;
use crate::outage::{broadcast_bound_terms, classic_bound_coefficients, new_bound_coefficients};
use crate::scenario::{paper_default_scenario, PowerSchedule, Receiver};

fn one_block(eps: f64) -> ScenarioConfig {
    let mut cfg = paper_default_scenario(2.0).unwrap();
    cfg.n_blocks = 1;
    cfg.block_lengths = vec![1.0];
    cfg.message_bits = 1.0;
    cfg.outage_target = eps;
    cfg.latency_target = 1.0;
    cfg
}

fn solve(cfg: &ScenarioConfig, flavor: BoundFlavor) -> SolveReport {
    optimize(cfg, flavor, &SolveOptions::default()).unwrap()
}

#[test]
fn model_shapes() {
    let cfg = one_block(0.5);
    let m = build_gp(&cfg, &[new_bound_coefficients(&cfg).unwrap()]).unwrap();
    assert_eq!(m.objective().terms().len(), 1);
    assert_eq!(m.constraints().len(), 1);
    assert_eq!(m.constraints()[0].kind, ConstraintKind::Outage);

    let cfg = paper_default_scenario(8.0).unwrap();
    let b = new_bound_coefficients(&cfg).unwrap();
    let m = build_gp(&cfg, std::slice::from_ref(&b)).unwrap();
    assert_eq!(m.objective().terms().len(), 5);
    assert_eq!(m.constraint(ConstraintKind::Latency).unwrap().posynomial.terms().len(), 4);
    assert_eq!(m.constraint(ConstraintKind::Latency).unwrap().bound, 2.0);
    assert_eq!(m.lower()[0], 1e-8);

    let mut bc = cfg.clone();
    bc.receivers = vec![Receiver { snr: 8.0, fading: FadingModel::Rayleigh }; 3];
    let mb = build_gp(&bc, &broadcast_bound_terms(&bc).unwrap()).unwrap();
    let single = m.constraint(ConstraintKind::Outage).unwrap().posynomial.terms()[0].coefficient();
    let triple = mb.constraint(ConstraintKind::Outage).unwrap().posynomial.terms()[0].coefficient();
    assert!((triple / single - 3.0).abs() < 1e-12);
}

#[test]
fn latency_budget_must_exceed_first_block() {
    let mut cfg = paper_default_scenario(8.0).unwrap();
    cfg.latency_target = 1.0;
    let b = new_bound_coefficients(&cfg).unwrap();
    assert!(matches!(build_gp(&cfg, &[b]), Err(GpError::InfeasibleLatency { .. })));
}

#[test]
fn one_block_analytic_optimum() {
    let r = solve(&one_block(0.5), BoundFlavor::New);
    assert_eq!(r.status, SolveStatus::Optimal);
    let a1 = 1.0 - (-0.5f64).exp();
    assert!((r.schedule.powers()[0] - a1 / 0.5).abs() < 1e-6);
    assert!((r.schedule.powers()[0] - 0.786_938_7).abs() < 1e-6);
    assert!(r.is_tight(ConstraintKind::Outage));
    assert!(r.kkt_residual <= 1e-6, "kkt {} iters {}", r.kkt_residual, r.iterations);
    assert!((r.predicted_latency - 1.0).abs() < 1e-15);

    let r = solve(&one_block(0.3), BoundFlavor::New);
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn chase_one_block_matches_incremental() {
    let mut cfg = one_block(0.5);
    cfg.harq_type = HarqType::ChaseCombining;
    let r = solve(&cfg, BoundFlavor::New);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.schedule.powers()[0] - 0.786_938_7).abs() < 1e-6);
    assert!(r.is_tight(ConstraintKind::Outage));
}

#[test]
fn chase_multi_block_uses_one_power() {
    let mut cfg = paper_default_scenario(30.0).unwrap();
    cfg.harq_type = HarqType::ChaseCombining;
    cfg.outage_target = 1e-3;
    cfg.latency_target = 4.0;
    let r = solve(&cfg, BoundFlavor::New);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.schedule.is_uniform(0.0));
    for s in &r.constraint_slacks {
        assert!(s.relative >= -1e-8);
    }
}

#[test]
fn reference_optimum_structure() {
    let cfg = paper_default_scenario(20.0).unwrap();
    for flavor in [BoundFlavor::New, BoundFlavor::Classic] {
        let r = solve(&cfg, flavor);
        assert_eq!(r.status, SolveStatus::Optimal, "{flavor:?}");
        let p = r.schedule.powers();
        assert!((p[4] - 1.0).abs() < 1e-6, "{flavor:?} {p:?}");
        assert!(p[0] > p[1], "{flavor:?} {p:?}");
        for s in &r.constraint_slacks {
            assert!(s.relative >= -1e-8);
        }
        assert!(r.kkt_residual <= 1e-6);
    }
}

#[test]
fn reference_setting_needs_enough_snr() {
    // even full power misses ε = 1e-5 at S = 8, so no bound can certify it
    let cfg = paper_default_scenario(8.0).unwrap();
    let exact = crate::outage::exact_outage(&cfg, &PowerSchedule::uniform(5, 1.0).unwrap(), 5).unwrap();
    assert!(exact > 1e-4);
    assert_eq!(solve(&cfg, BoundFlavor::New).status, SolveStatus::Infeasible);
}

#[test]
fn tight_outage_when_last_power_is_interior() {
    let mut cfg = paper_default_scenario(30.0).unwrap();
    cfg.outage_target = 1e-3;
    let r = solve(&cfg, BoundFlavor::New);
    assert_eq!(r.status, SolveStatus::Optimal);
    let p = r.schedule.powers();
    assert!(p[4] < 1.0 - 1e-6, "{p:?}");
    assert!(r.slack(ConstraintKind::Outage).unwrap().relative <= 1e-6);
}

#[test]
fn new_bound_dominates_classic() {
    for snr in [6.0, 10.0, 20.0, 40.0] {
        let cfg = paper_default_scenario(snr).unwrap();
        let new = solve(&cfg, BoundFlavor::New);
        let classic = solve(&cfg, BoundFlavor::Classic);
        if classic.status == SolveStatus::Optimal {
            assert_eq!(new.status, SolveStatus::Optimal);
            assert!(new.objective_value <= classic.objective_value * (1.0 + 1e-9), "S={snr}");
        }
    }
}

#[test]
fn surrogate_is_conservative() {
    let mut cfg = paper_default_scenario(10.0).unwrap();
    cfg.outage_target = 1e-3;
    let terms = bound_terms(&cfg, BoundFlavor::New).unwrap();
    let r = solve_gp(&build_gp(&cfg, &terms).unwrap(), &SolveOptions::default());
    let surrogate = predicted_metrics(&cfg, MetricSource::Bound(&terms), &r.schedule).unwrap();
    let exact = predicted_metrics(&cfg, MetricSource::Exact, &r.schedule).unwrap();
    assert!((surrogate.energy / r.objective_value - 1.0).abs() < 1e-12);
    assert!((surrogate.latency - r.predicted_latency).abs() < 1e-12);
    assert!(exact.outage <= surrogate.outage && exact.outage <= cfg.outage_target);
    assert!(exact.energy <= surrogate.energy);
    assert!(exact.latency <= surrogate.latency);
}

#[test]
fn metric_formulas() {
    let mut cfg = paper_default_scenario(2.0).unwrap();
    cfg.n_blocks = 2;
    cfg.block_lengths = vec![1.0, 1.0];
    let s = PowerSchedule::new(vec![1.0, 1.0]).unwrap();
    let m = metrics_from_profile(&cfg, &s, &[0.1, 0.01]);
    assert!((m.energy - 1.1).abs() < 1e-15 && (m.latency - 1.1).abs() < 1e-15);
    assert_eq!(m.outage, 0.01);
    cfg.feedback_delay_mean = 0.5;
    let m = metrics_from_profile(&cfg, &s, &[0.1, 0.01]);
    assert!((m.latency - 1.15).abs() < 1e-15);
}

fn three_block() -> ScenarioConfig {
    let mut cfg = paper_default_scenario(10.0).unwrap();
    cfg.n_blocks = 3;
    cfg.block_lengths = vec![1.0, 1.0, 1.0];
    cfg.message_bits = 2.0;
    cfg.outage_target = 1e-2;
    cfg
}

#[test]
fn unconstrained_stationarity() {
    for (cfg, fading) in [
        (three_block(), FadingModel::Rayleigh),
        (three_block(), FadingModel::RayleighDiversity { antennas: 2 }),
        (paper_default_scenario(8.0).unwrap(), FadingModel::Rayleigh),
    ] {
        let mut cfg = cfg;
        cfg.fading = fading;
        let b = new_bound_coefficients(&cfg).unwrap();
        let sol = solve_unconstrained(&cfg, &b).unwrap();
        let k = kkt_check_unconstrained(&cfg, &b, &sol.schedule, 0.0);
        assert!(k.max_residual() <= 1e-6, "{fading:?} {:?}", k.residuals);
        assert!(k.ratio_residual.unwrap() < 1e-3);
        let q = bound_outage(&b, &sol.schedule, cfg.n_blocks).unwrap();
        assert!((q / cfg.outage_target - 1.0).abs() < 1e-9);

        let mut p = sol.schedule.powers().to_vec();
        p[1] *= 1.1;
        let k = kkt_check_unconstrained(&cfg, &b, &PowerSchedule::new(p).unwrap(), 0.0);
        assert!(k.residuals[0] > 1e-3 && k.residuals[1] > 1e-3);
    }
}

#[test]
fn unconstrained_power_ratio_spans_decades() {
    let mut cfg = paper_default_scenario(20.0).unwrap();
    cfg.outage_target = 1e-12;
    let b = new_bound_coefficients(&cfg).unwrap();
    let sol = solve_unconstrained(&cfg, &b).unwrap();
    let p = sol.schedule.powers();
    let q4 = bound_outage(&b, &sol.schedule, 4).unwrap();
    let db = 10.0 * (p[4] / p[0]).log10();
    assert!(q4 < 1e-4 && db > 25.0, "{db} dB at Q̂4 = {q4}");
    assert!((db - 10.0 * (1.0 / (16.0 * q4)).log10()).abs() < 1e-3);
}

use crate::outage::bound_outage;

// Exhaustive search over a geometric grid on [P·1e-3, P] per axis.
fn grid_search(model: &GpModel, points: usize) -> f64 {
    let n = model.variables();
    let (lo, hi) = (model.upper()[0] * 1e-3, model.upper()[0]);
    let mut axis: Vec<f64> = (0..points).map(|k| lo * (hi / lo).powf(k as f64 / (points - 1) as f64)).collect();
    axis[points - 1] = hi;
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for (xi, &k) in x.iter_mut().zip(&idx) {
            *xi = axis[k];
        }
        if model.constraints().iter().all(|c| c.posynomial.eval(&x) <= c.bound) {
            best = best.min(model.objective().eval(&x));
        }
        let mut d = 0;
        loop {
            if d == n {
                return best;
            }
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

#[test]
fn agrees_with_grid_search() {
    let mut two = three_block();
    two.n_blocks = 2;
    two.block_lengths = vec![1.0, 1.0];
    two.snr = 20.0;
    for cfg in [two, three_block()] {
        let model = build_gp(&cfg, &bound_terms(&cfg, BoundFlavor::New).unwrap()).unwrap();
        let r = solve_gp(&model, &SolveOptions::default());
        let grid = grid_search(&model, if cfg.n_blocks == 2 { 400 } else { 200 });
        assert!(r.objective_value <= grid * (1.0 + 1e-9));
        assert!(r.objective_value >= grid * (1.0 - 5e-3), "{} vs {grid}", r.objective_value);
    }
}

#[test]
fn argmin_survives_rescaling() {
    let cfg = paper_default_scenario(30.0).unwrap();
    let model = build_gp(&cfg, &bound_terms(&cfg, BoundFlavor::New).unwrap()).unwrap();
    let base = solve_gp(&model, &SolveOptions::default());
    let scaled = solve_gp(&model.rescaled(1e3, &[1e-4, 7.0]), &SolveOptions::default());
    assert_eq!(scaled.status, SolveStatus::Optimal);
    for (a, b) in base.schedule.powers().iter().zip(scaled.schedule.powers()) {
        assert!((a / b - 1.0).abs() < 1e-4, "{a} vs {b}");
    }
    assert!((scaled.objective_value / base.objective_value / 1e3 - 1.0).abs() < 1e-6);
}

#[test]
fn classic_infeasible_where_new_is_not() {
    // the unbounded-power bound exceeds ε at p = P sooner
    let mut cfg = paper_default_scenario(3.0).unwrap();
    cfg.outage_target = 1e-3;
    let classic = classic_bound_coefficients(&cfg).unwrap();
    let new = new_bound_coefficients(&cfg).unwrap();
    let top = PowerSchedule::uniform(5, 1.0).unwrap();
    assert!(bound_outage(&new, &top, 5).unwrap() <= bound_outage(&classic, &top, 5).unwrap());
}
