//! Experiment harness for HARQ power control: bound tables, optimized
//! schedules, Monte Carlo validation and parameter sweeps, all as CSV.

mod commands;
mod sweep;
mod table;

use std::fs;
use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use harq_core::gpsolve::{GpError, SolveOptions};
use harq_core::outage::OutageError;
use harq_core::sim::SimError;
use harq_core::{load_scenario, paper_default_scenario, PowerSchedule, ScenarioConfig, ScenarioError};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use sweep::{parse_values, Method, SweepError, SweepParameter, SweepSpec};
pub use table::{num, Table};

#[derive(Debug, Parser)]
#[command(name = "harq", version, about = "Power allocation for HARQ over fading channels")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario JSON; without it the 5-block reference setting is used.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Pathloss-to-noise ratio S, linear.
    #[arg(long, global = true, conflicts_with = "snr_db")]
    pub snr: Option<f64>,
    /// Pathloss-to-noise ratio S in dB.
    #[arg(long, global = true)]
    pub snr_db: Option<f64>,
    /// Override the convolution grid size.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScheduleArgs {
    /// Comma-separated powers p_1..p_N.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["power_fraction", "schedule"])]
    pub powers: Option<Vec<f64>>,
    /// Every block at this fraction of the power cap.
    #[arg(long, conflicts_with = "schedule")]
    pub power_fraction: Option<f64>,
    /// JSON file holding an array of powers.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SolverArgs {
    /// Relative duality-gap tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iterations: usize,
}

impl SolverArgs {
    pub fn options(&self) -> Result<SolveOptions, CliError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {}", self.tol)));
        }
        Ok(SolveOptions { tol: self.tol, max_iterations: self.max_iterations, ..SolveOptions::default() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Feedback {
    Deterministic,
    Exponential,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact outage against both bounds, per block, over message sizes.
    Bounds {
        /// Message sizes t: a list `a,b,c` or a range `start:stop:step`.
        #[arg(long)]
        t_range: Option<String>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Optimize the schedule; prints a JSON report, CSV powers go to --out.
    Optimize {
        #[arg(long, value_enum, default_value_t = Method::GpNew)]
        method: Method,
        /// Drop the latency constraint and the power cap.
        #[arg(long)]
        unconstrained: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Monte Carlo run of one schedule.
    Simulate {
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Optimize the schedule first instead of passing one.
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, value_enum, default_value_t = Feedback::Deterministic)]
        feedback: Feedback,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Energy, latency and outage of every method across a parameter.
    Sweep {
        #[arg(long, value_enum)]
        parameter: SweepParameter,
        /// `a,b,c` or `start:stop:step`.
        #[arg(long)]
        values: String,
        /// Interpret snr values in dB.
        #[arg(long)]
        db: bool,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::MaxPower, Method::GpClassic, Method::GpNew])]
        methods: Vec<Method>,
        /// Monte Carlo trials per point; 0 skips simulation.
        #[arg(long, default_value_t = 0)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Infeasible,
    Validation,
    NonConvergence,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Infeasible => 2,
            Status::Validation => 3,
            Status::NonConvergence => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Outage(#[from] OutageError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Gp(GpError::InfeasibleLatency { .. }) => Status::Infeasible.code(),
            CliError::Io { .. } => 1,
            _ => Status::Validation.code(),
        }
    }
}

/// What a command produced: text for stdout and the exit status.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stdout: String,
    pub status: Status,
}

impl CommonArgs {
    /// The effective scenario after overrides, validated.
    pub fn scenario(&self) -> Result<ScenarioConfig, CliError> {
        let snr = match (self.snr, self.snr_db) {
            (Some(s), _) => Some(s),
            (None, Some(db)) => Some(10f64.powf(db / 10.0)),
            (None, None) => None,
        };
        let mut cfg = match &self.config {
            Some(path) => {
                let file = fs::File::open(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                load_scenario(file)?
            }
            None => {
                let s = snr.ok_or_else(|| CliError::Usage("pass --config or an SNR (--snr / --snr-db)".into()))?;
                paper_default_scenario(s)?
            }
        };
        if let Some(s) = snr {
            cfg = cfg.with_snr(s);
        }
        if let Some(g) = self.grid_points {
            cfg.grid_points = g;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, table: &Table, stdout: &mut String) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, table.render()).map_err(|source| CliError::Io { path: path.clone(), source }),
            None => {
                stdout.push_str(&table.render());
                Ok(())
            }
        }
    }
}

impl ScheduleArgs {
    /// The requested schedule, or `None` when no source was given.
    pub fn resolve(&self, cfg: &ScenarioConfig) -> Result<Option<PowerSchedule>, CliError> {
        let powers = if let Some(p) = &self.powers {
            p.clone()
        } else if let Some(f) = self.power_fraction {
            vec![f * cfg.max_power; cfg.n_blocks]
        } else if let Some(path) = &self.schedule {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            serde_json::from_str::<Vec<f64>>(&text)
                .map_err(|e| CliError::Usage(format!("{}: expected a JSON array of powers: {e}", path.display())))?
        } else {
            return Ok(None);
        };
        let schedule = PowerSchedule::new(powers)?;
        cfg.check_schedule(&schedule)?;
        Ok(Some(schedule))
    }
}

/// Hex SHA-256 of the compact JSON form of `cfg`.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(compact_json(cfg).as_bytes()))
}

fn compact_json(cfg: &ScenarioConfig) -> String {
    serde_json::to_string(cfg).expect("scenario serializes")
}

fn stamp(table: &mut Table, command: &str, cfg: &ScenarioConfig) {
    table.meta("harq", command);
    table.meta("config_sha256", config_hash(cfg));
    table.meta("config", compact_json(cfg));
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = cli.common.scenario()?;
    let mut stdout = String::new();
    let status = match &cli.command {
        Command::Bounds { t_range, schedule } => {
            let ts = match t_range {
                Some(s) => parse_values(s).map_err(CliError::Usage)?,
                None => vec![cfg.message_bits],
            };
            let schedule = schedule.resolve(&cfg)?.unwrap_or(PowerSchedule::uniform(cfg.n_blocks, cfg.max_power)?);
            let mut table = commands::bounds(&cfg, &schedule, &ts)?;
            stamp(&mut table, "bounds", &cfg);
            table.meta("powers", format!("{:?}", schedule.powers()));
            cli.common.emit(&table, &mut stdout)?;
            Status::Success
        }
        Command::Optimize { method, unconstrained, solver } => {
            let opts = solver.options()?;
            let (report, table, status) = if *unconstrained {
                commands::optimize_unconstrained(&cfg, *method)?
            } else {
                commands::optimize(&cfg, *method, &opts)?
            };
            let mut report = report;
            report["config_sha256"] = config_hash(&cfg).into();
            stdout.push_str(&serde_json::to_string_pretty(&report).expect("report serializes"));
            stdout.push('\n');
            if cli.common.out.is_some() {
                let mut table = table;
                stamp(&mut table, "optimize", &cfg);
                table.meta("method", method);
                cli.common.emit(&table, &mut stdout)?;
            }
            status
        }
        Command::Simulate { schedule, method, trials, seed, format, feedback, solver } => {
            let schedule = match (schedule.resolve(&cfg)?, method) {
                (Some(s), None) => s,
                (None, Some(m)) => match commands::schedule_for(&cfg, *m, &solver.options()?)? {
                    Ok(s) => s,
                    Err(status) => {
                        eprintln!("no schedule: {m} returned {status:?}");
                        return Ok(Outcome { stdout, status });
                    }
                },
                (Some(_), Some(_)) => return Err(CliError::Usage("give either a schedule or --method, not both".into())),
                (None, None) => {
                    return Err(CliError::Usage("simulate needs --powers, --power-fraction, --schedule or --method".into()))
                }
            };
            let sim = commands::simulate(&cfg, &schedule, *trials, *seed, *feedback)?;
            if sim.report.degenerate {
                eprintln!("warning: {trials} trial(s) are too few for a confidence interval");
            }
            match format {
                Format::Json => {
                    let mut doc = sim.json;
                    doc["config_sha256"] = config_hash(&cfg).into();
                    let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
                    match &cli.common.out {
                        Some(path) => fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source })?,
                        None => stdout.push_str(&text),
                    }
                }
                Format::Csv => {
                    let mut table = sim.table;
                    stamp(&mut table, "simulate", &cfg);
                    table.meta("powers", format!("{:?}", schedule.powers()));
                    table.meta("units", "energy in E0 = P*L1, latency in the block-length time unit");
                    cli.common.emit(&table, &mut stdout)?;
                }
            }
            Status::Success
        }
        Command::Sweep { parameter, values, db, methods, trials, seed, solver } => {
            let mut xs = parse_values(values).map_err(CliError::Usage)?;
            if *db {
                if *parameter != SweepParameter::Snr {
                    return Err(CliError::Usage("--db only applies to snr sweeps".into()));
                }
                xs = xs.iter().map(|v| 10f64.powf(v / 10.0)).collect();
            }
            let spec = SweepSpec::new(*parameter, xs, methods.clone())?;
            let (mut table, status) = commands::sweep(&cfg, &spec, *trials, *seed, &solver.options()?)?;
            stamp(&mut table, "sweep", &cfg);
            table.meta("parameter", parameter);
            table.meta("units", "energy in E0 = P*L1, latency in L1");
            if *trials > 0 {
                table.meta("trials", trials);
                table.meta("seed", seed);
            }
            cli.common.emit(&table, &mut stdout)?;
            status
        }
    };
    Ok(Outcome { stdout, status })
}
