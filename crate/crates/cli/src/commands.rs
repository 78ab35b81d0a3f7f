use harq_core::gpsolve::{
    kkt_check_unconstrained, optimize as solve, predicted_metrics, solve_unconstrained, GpError, MetricSource, Metrics,
    SolveOptions, SolveReport, SolveStatus,
};
use harq_core::outage::{aggregate_bound, bound_terms, exact_outage_profile, BoundFlavor, OutageError};
use harq_core::sim::{run_trials_with, FeedbackDelay, SimOptions, SimulationReport};
use harq_core::{PowerSchedule, ScenarioConfig};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::sweep::{Method, SweepSpec};
use crate::table::{num, Table};
use crate::{CliError, Feedback, Status};

fn flavor(method: Method) -> Option<BoundFlavor> {
    match method {
        Method::MaxPower => None,
        Method::GpClassic => Some(BoundFlavor::Classic),
        Method::GpNew => Some(BoundFlavor::New),
    }
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::MaxIterations => "max_iterations",
    }
}

fn exit_status(status: SolveStatus) -> Status {
    match status {
        SolveStatus::Optimal => Status::Success,
        SolveStatus::Infeasible => Status::Infeasible,
        SolveStatus::MaxIterations => Status::NonConvergence,
    }
}

/// Bound profile over every block; NaN where the bound does not apply.
fn bound_profile(cfg: &ScenarioConfig, flavor: BoundFlavor, schedule: &PowerSchedule) -> Result<Vec<f64>, CliError> {
    let terms = match bound_terms(cfg, flavor) {
        Ok(t) => t,
        Err(OutageError::UnequalBlockLengths) => return Ok(vec![f64::NAN; cfg.n_blocks]),
        Err(e) => return Err(e.into()),
    };
    (1..=cfg.n_blocks)
        .map(|n| match aggregate_bound(&terms, schedule, n) {
            Ok(q) => Ok(q),
            Err(OutageError::NonUniformSchedule) => Ok(f64::NAN),
            Err(e) => Err(e.into()),
        })
        .collect()
}

pub fn bounds(cfg: &ScenarioConfig, schedule: &PowerSchedule, ts: &[f64]) -> Result<Table, CliError> {
    let n = cfg.n_blocks;
    let mut header = vec!["t".to_string()];
    for kind in ["exact", "new", "classic"] {
        header.extend((1..=n).map(|i| format!("{kind}_{i}")));
    }
    let mut table = Table::new(header);
    let rows = ts
        .par_iter()
        .map(|&t| {
            let cfg = ScenarioConfig { message_bits: t, ..cfg.clone() };
            cfg.validate()?;
            let mut row = vec![num(t)];
            row.extend(exact_outage_profile(&cfg, schedule)?.into_iter().map(num));
            row.extend(bound_profile(&cfg, BoundFlavor::New, schedule)?.into_iter().map(num));
            row.extend(bound_profile(&cfg, BoundFlavor::Classic, schedule)?.into_iter().map(num));
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for row in rows {
        table.push(row);
    }
    Ok(table)
}

fn scaled(cfg: &ScenarioConfig, m: &Metrics) -> Value {
    json!({
        "outage": m.outage,
        "energy": m.energy / cfg.unit_energy(),
        "latency": m.latency / cfg.block_lengths[0],
    })
}

fn power_table(cfg: &ScenarioConfig, schedule: &PowerSchedule) -> Table {
    let mut table = Table::new(["block", "power", "power_over_max"]);
    for (i, p) in schedule.powers().iter().enumerate() {
        table.push(vec![(i + 1).to_string(), num(*p), num(p / cfg.max_power)]);
    }
    table
}

fn full_power(cfg: &ScenarioConfig) -> Result<(PowerSchedule, Metrics, bool), CliError> {
    let schedule = PowerSchedule::uniform(cfg.n_blocks, cfg.max_power)?;
    let exact = predicted_metrics(cfg, MetricSource::Exact, &schedule)?;
    let feasible = exact.outage <= cfg.outage_target && exact.latency <= cfg.latency_target;
    Ok((schedule, exact, feasible))
}

/// Solve report, or `None` when the latency target rules out every schedule.
fn gp_solve(cfg: &ScenarioConfig, flavor: BoundFlavor, opts: &SolveOptions) -> Result<Option<SolveReport>, CliError> {
    match solve(cfg, flavor, opts) {
        Ok(r) => Ok(Some(r)),
        Err(GpError::InfeasibleLatency { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn optimize(cfg: &ScenarioConfig, method: Method, opts: &SolveOptions) -> Result<(Value, Table, Status), CliError> {
    let Some(flavor) = flavor(method) else {
        let (schedule, exact, feasible) = full_power(cfg)?;
        let report = json!({
            "method": method.to_string(),
            "status": if feasible { "full_power" } else { "infeasible" },
            "schedule": schedule.powers(),
            "energy": exact.energy / cfg.unit_energy(),
            "latency": exact.latency / cfg.block_lengths[0],
            "exact": scaled(cfg, &exact),
        });
        let status = if feasible { Status::Success } else { Status::Infeasible };
        return Ok((report, power_table(cfg, &schedule), status));
    };
    let Some(r) = gp_solve(cfg, flavor, opts)? else {
        let report = json!({
            "method": method.to_string(),
            "status": "infeasible",
            "reason": format!("latency target {} leaves no room after the first block", cfg.latency_target),
        });
        return Ok((report, Table::new(["block", "power", "power_over_max"]), Status::Infeasible));
    };
    let exact = predicted_metrics(cfg, MetricSource::Exact, &r.schedule)?;
    let slacks: Vec<Value> = r
        .constraint_slacks
        .iter()
        .map(|s| json!({ "kind": format!("{:?}", s.kind).to_lowercase(), "relative": s.relative, "tight": s.tight }))
        .collect();
    let report = json!({
        "method": method.to_string(),
        "status": status_name(r.status),
        "schedule": r.schedule.powers(),
        "energy": r.objective_value / cfg.unit_energy(),
        "latency": r.predicted_latency / cfg.block_lengths[0],
        "constraint_slacks": slacks,
        "kkt_residual": r.kkt_residual,
        "iterations": r.iterations,
        "exact": scaled(cfg, &exact),
    });
    Ok((report, power_table(cfg, &r.schedule), exit_status(r.status)))
}

pub fn optimize_unconstrained(cfg: &ScenarioConfig, method: Method) -> Result<(Value, Table, Status), CliError> {
    let Some(flavor) = flavor(method) else {
        return Err(CliError::Usage("--unconstrained needs a gp method".into()));
    };
    let terms = bound_terms(cfg, flavor)?;
    let [bounds] = terms.as_slice() else {
        return Err(CliError::Usage("--unconstrained needs a point-to-point link".into()));
    };
    let sol = solve_unconstrained(cfg, bounds)?;
    let kkt = kkt_check_unconstrained(cfg, bounds, &sol.schedule, 0.0);
    let p = sol.schedule.powers();
    let report = json!({
        "method": method.to_string(),
        "status": "optimal",
        "unconstrained": true,
        "schedule": p,
        "energy": sol.objective_value / cfg.unit_energy(),
        "iterations": sol.iterations,
        "gradient_norm": sol.gradient_norm,
        "kkt_residual": kkt.max_residual(),
        "ratio_residual": kkt.ratio_residual,
        "last_to_first_db": 10.0 * (p[p.len() - 1] / p[0]).log10(),
    });
    Ok((report, power_table(cfg, &sol.schedule), Status::Success))
}

/// Schedule chosen by `method`, or the solver status when there is none.
pub fn schedule_for(cfg: &ScenarioConfig, method: Method, opts: &SolveOptions) -> Result<Result<PowerSchedule, Status>, CliError> {
    let Some(flavor) = flavor(method) else {
        return Ok(Ok(PowerSchedule::uniform(cfg.n_blocks, cfg.max_power)?));
    };
    Ok(match gp_solve(cfg, flavor, opts)? {
        Some(r) if r.status == SolveStatus::Optimal => Ok(r.schedule),
        Some(r) => Err(exit_status(r.status)),
        None => Err(Status::Infeasible),
    })
}

pub struct Simulation {
    pub report: SimulationReport,
    pub table: Table,
    pub json: Value,
}

pub fn simulate(cfg: &ScenarioConfig, schedule: &PowerSchedule, trials: u64, seed: u64, feedback: Feedback) -> Result<Simulation, CliError> {
    let feedback = match feedback {
        Feedback::Deterministic => FeedbackDelay::Deterministic,
        Feedback::Exponential => FeedbackDelay::Exponential,
    };
    let opts = SimOptions { feedback, ..SimOptions::new(trials, seed) };
    let report = run_trials_with(cfg, schedule, &opts)?;
    let exact = predicted_metrics(cfg, MetricSource::Exact, schedule)?;
    let e0 = cfg.unit_energy();

    let mut header: Vec<String> = [
        "trials", "seed", "outages", "outage", "outage_se", "outage_upper", "energy", "energy_se", "latency",
        "latency_se", "degenerate", "exact_outage", "exact_energy", "exact_latency",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=cfg.n_blocks).map(|i| format!("usage_{i}")));
    let mut table = Table::new(header);
    let mut row = vec![
        report.trials.to_string(),
        report.seed.to_string(),
        report.outages.to_string(),
        num(report.outage.mean),
        num(report.outage.std_error),
        num(report.outage_upper),
        num(report.energy.mean),
        num(report.energy.std_error),
        num(report.latency.mean),
        num(report.latency.std_error),
        report.degenerate.to_string(),
        num(exact.outage),
        num(exact.energy / e0),
        num(exact.latency),
    ];
    row.extend(report.usage.iter().map(|u| num(*u)));
    table.push(row);

    let json = json!({
        "schedule": schedule.powers(),
        "report": &report,
        "exact": { "outage": exact.outage, "energy": exact.energy / e0, "latency": exact.latency },
    });
    Ok(Simulation { report, table, json })
}

struct Point {
    status: &'static str,
    feasible: bool,
    energy: f64,
    latency: f64,
    outage: f64,
    surrogate: f64,
    powers: Vec<f64>,
    sim: Option<SimulationReport>,
}

fn sweep_point(
    cfg: &ScenarioConfig,
    method: Method,
    trials: u64,
    seed: u64,
    opts: &SolveOptions,
) -> Result<Point, CliError> {
    let n = cfg.n_blocks;
    let (status, feasible, schedule, surrogate) = match flavor(method) {
        None => {
            let (schedule, _, feasible) = full_power(cfg)?;
            ("full_power", feasible, Some(schedule), f64::NAN)
        }
        Some(f) => match gp_solve(cfg, f, opts)? {
            None => ("infeasible", false, None, f64::NAN),
            Some(r) if r.status == SolveStatus::Optimal => {
                ("optimal", true, Some(r.schedule), r.objective_value / cfg.unit_energy())
            }
            Some(r) => (status_name(r.status), false, None, f64::NAN),
        },
    };
    let Some(schedule) = schedule else {
        return Ok(Point {
            status,
            feasible,
            energy: f64::NAN,
            latency: f64::NAN,
            outage: f64::NAN,
            surrogate,
            powers: vec![f64::NAN; n],
            sim: None,
        });
    };
    let exact = predicted_metrics(cfg, MetricSource::Exact, &schedule)?;
    let sim = if trials > 0 { Some(run_trials_with(cfg, &schedule, &SimOptions::new(trials, seed))?) } else { None };
    Ok(Point {
        status,
        feasible,
        energy: exact.energy / cfg.unit_energy(),
        latency: exact.latency / cfg.block_lengths[0],
        outage: exact.outage,
        surrogate,
        powers: schedule.powers().to_vec(),
        sim,
    })
}

/// One row per (value, method); energy and latency are exact-model values
/// of the chosen schedule, `energy_bound` the optimizer's surrogate.
pub fn sweep(
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    trials: u64,
    seed: u64,
    opts: &SolveOptions,
) -> Result<(Table, Status), CliError> {
    let n = cfg.n_blocks;
    let mut header: Vec<String> = ["x", "method", "energy", "latency", "outage_exact", "feasible", "status", "energy_bound"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n).map(|i| format!("p_{i}")));
    if trials > 0 {
        header.extend(["sim_outage", "sim_energy", "sim_latency"].iter().map(|s| s.to_string()));
    }
    let jobs: Vec<(f64, Method)> =
        spec.values().iter().flat_map(|&x| spec.methods().iter().map(move |&m| (x, m))).collect();
    let points = jobs
        .par_iter()
        .map(|&(x, m)| {
            let point_cfg = spec.apply(cfg, x);
            point_cfg.validate()?;
            sweep_point(&point_cfg, m, trials, seed, opts).map(|p| (x, m, point_cfg, p))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut table = Table::new(header);
    let mut status = Status::Success;
    for (x, m, point_cfg, p) in points {
        if p.status == "max_iterations" {
            status = Status::NonConvergence;
        }
        let mut row = vec![
            num(x),
            m.to_string(),
            num(p.energy),
            num(p.latency),
            num(p.outage),
            p.feasible.to_string(),
            p.status.to_string(),
            num(p.surrogate),
        ];
        row.extend(p.powers.iter().map(|v| num(*v)));
        if trials > 0 {
            match &p.sim {
                Some(s) => row.extend([
                    num(s.outage.mean),
                    num(s.energy.mean),
                    num(s.latency.mean / point_cfg.block_lengths[0]),
                ]),
                None => row.extend([num(f64::NAN), num(f64::NAN), num(f64::NAN)]),
            }
        }
        table.push(row);
    }
    Ok((table, status))
}
