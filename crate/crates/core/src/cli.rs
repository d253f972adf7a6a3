//! Command-line driver.
//!
//! Exit status: 0 on success, 1 when an experiment assertion fails, 2 on a
//! usage error. Flag values override `--config` values, which override the
//! built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::aggregate::aggregate_from_running_max;
use crate::error::{Result, WaitError};
use crate::experiments::{self, main_grid, ExperimentId, RunSettings, DEFAULT_SEED};
use crate::gaussian::{kl_rate, simulate_running_max_with, GaussianBed};
use crate::montecarlo::{mean_with_se, MonteCarloConfig, DEFAULT_BATCH_SIZE};
use crate::numerics::fmt_g17;
use crate::profile::ProfileTable;
use crate::schedules::{LevelSchedule, TABLE_KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wait", version, about = "WAIT e-process experiments and schedule tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of paths (replaces the experiment's primary path count).
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Horizon in steps.
    #[arg(long, global = true)]
    pub horizon: Option<u64>,
    /// Paths per simulation batch.
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Schedule key, e.g. `wdyadic` or `power:0.5`; repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',')]
    pub schedule: Vec<String>,
    /// Factor applied to default path counts.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    /// key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Profile argument.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x: Option<f64>,
    /// Budget truncation index.
    #[arg(long, global = true)]
    pub k: Option<u64>,
    /// Alternative mean for `simulate`.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Profile exponents and envelopes.
    Exp1,
    /// SPRT size under the null.
    Exp2,
    /// First-passage scaling.
    Exp3,
    /// E-power by schedule.
    Exp4,
    /// Convergence speed of full-rate schedules.
    Exp5,
    /// Null validity of fixed and stopped aggregates.
    Exp6,
    /// KL scaling across means.
    Exp7,
    /// Delayed tests.
    Exp8,
    /// Random-multiplier counterexample.
    Exp9,
    /// Capital budgets.
    Exp10,
    /// All ten experiments.
    All,
    /// `ln W(x)`, the level count and the exponent at `--x`.
    Profile,
    /// Partial capital budget up to `--k`.
    Budget,
    /// Simulate aggregates on alternative paths and report e-power.
    Simulate,
    /// Table of the built-in schedules.
    Schedules,
}

impl Command {
    fn experiments(self) -> Option<Vec<ExperimentId>> {
        use ExperimentId::*;
        let id = match self {
            Command::Exp1 => E1,
            Command::Exp2 => E2,
            Command::Exp3 => E3,
            Command::Exp4 => E4,
            Command::Exp5 => E5,
            Command::Exp6 => E6,
            Command::Exp7 => E7,
            Command::Exp8 => E8,
            Command::Exp9 => E9,
            Command::Exp10 => E10,
            Command::All => return Some(ExperimentId::ALL.to_vec()),
            _ => return None,
        };
        Some(vec![id])
    }
}

const CONFIG_KEYS: [&str; 10] = ["seed", "paths", "horizon", "batch", "out", "schedule", "scale", "x", "k", "mu"];

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| WaitError::InvalidParameter(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim();
        if !CONFIG_KEYS.contains(&k) {
            return Err(WaitError::InvalidParameter(format!("config line {}: unknown key `{k}`", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| WaitError::InvalidParameter(format!("config value for `{key}` is invalid: {v}")))
}

impl Flags {
    /// Fills unset flags from config entries.
    fn merge_config(mut self, config: &BTreeMap<String, String>) -> Result<Self> {
        for (k, v) in config {
            match k.as_str() {
                "seed" => self.seed = self.seed.or(Some(parse_value(k, v)?)),
                "paths" => self.paths = self.paths.or(Some(parse_value(k, v)?)),
                "horizon" => self.horizon = self.horizon.or(Some(parse_value(k, v)?)),
                "batch" => self.batch = self.batch.or(Some(parse_value(k, v)?)),
                "out" => self.out = self.out.or(Some(PathBuf::from(v))),
                "scale" => self.scale = self.scale.or(Some(parse_value(k, v)?)),
                "x" => self.x = self.x.or(Some(parse_value(k, v)?)),
                "k" => self.k = self.k.or(Some(parse_value(k, v)?)),
                "mu" => self.mu = self.mu.or(Some(parse_value(k, v)?)),
                "schedule" => {
                    if self.schedule.is_empty() {
                        self.schedule = v.split(',').map(|s| s.trim().to_string()).collect();
                    }
                }
                _ => unreachable!("keys are validated by parse_config"),
            }
        }
        Ok(self)
    }

    fn schedules(&self) -> Result<Option<Vec<LevelSchedule>>> {
        if self.schedule.is_empty() {
            return Ok(None);
        }
        self.schedule.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>().map(Some)
    }

    fn settings(&self) -> Result<RunSettings> {
        RunSettings {
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            batch_size: self.batch.unwrap_or(DEFAULT_BATCH_SIZE),
            scale: self.scale.unwrap_or(1.0),
            paths: self.paths,
            horizon: self.horizon,
            schedules: self.schedules()?,
        }
        .validated()
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("results"))
    }
}

/// The built-in schedules with their definition, exponent `rho` and target
/// `rho I` at `I = 0.5`, computed from the schedule objects.
pub fn print_schedule_table() -> String {
    const INFO: f64 = 0.5;
    let mut out = format!("{:<14} {:<6} {:<10} {}\n", "schedule", "rho", "rho*I", "definition");
    for key in TABLE_KEYS {
        let s: LevelSchedule = key.parse().expect("table keys parse");
        let rho = s.target_rho();
        let _ = writeln!(out, "{:<14} {:<6.4} {:<10.4} {}", s.key(), rho, rho * INFO, s.definition());
    }
    out
}

enum Failure {
    Usage(String),
    Assertion,
}

impl From<WaitError> for Failure {
    fn from(e: WaitError) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Assertion) => EXIT_ASSERTION,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let flags = match &cli.flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            cli.flags.clone().merge_config(&parse_config(&text)?)?
        }
        None => cli.flags.clone(),
    };
    if let Some(ids) = cli.command.experiments() {
        return run_experiments(&ids, &flags, stdout);
    }
    let text = match cli.command {
        Command::Profile => profile_command(&flags)?,
        Command::Budget => budget_command(&flags)?,
        Command::Simulate => simulate_command(&flags)?,
        Command::Schedules => print_schedule_table(),
        _ => unreachable!("experiment commands handled above"),
    };
    stdout.write_all(text.as_bytes()).map_err(|e| Failure::Usage(e.to_string()))
}

fn run_experiments(ids: &[ExperimentId], flags: &Flags, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let settings = flags.settings()?;
    let results = experiments::run_experiments(ids, &settings)?;
    let dir = flags.out_dir();
    experiments::write_outputs(&results, &dir)?;
    let _ = write!(stdout, "{}", experiments::report(&results));
    let _ = writeln!(stdout, "wrote {} file(s) to {}", results.len() + 1, dir.display());
    if results.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(Failure::Assertion)
    }
}

fn one_schedule(flags: &Flags) -> Result<LevelSchedule> {
    match flags.schedules()? {
        Some(mut s) if s.len() == 1 => Ok(s.remove(0)),
        Some(_) => Err(WaitError::InvalidParameter("this command takes a single --schedule".into())),
        None => Err(WaitError::InvalidParameter("--schedule is required".into())),
    }
}

fn profile_command(flags: &Flags) -> Result<String> {
    let s = one_schedule(flags)?;
    let x = flags.x.ok_or_else(|| WaitError::InvalidParameter("--x is required".into()))?;
    let p = ProfileTable::build(&s, x.max(0.0))?;
    let lw = p.log_w(x)?;
    let mut out = String::new();
    let _ = writeln!(out, "schedule {}", s.key());
    let _ = writeln!(out, "x {}", fmt_g17(x));
    let _ = writeln!(out, "log_W {}", fmt_g17(lw));
    let _ = writeln!(out, "W {}", fmt_g17(lw.exp()));
    match p.counting_n(x) {
        Ok(n) => {
            let _ = writeln!(out, "N {n}");
        }
        Err(e) => {
            let _ = writeln!(out, "N unavailable ({e})");
        }
    }
    if let Ok(e) = p.exponent(x) {
        let _ = writeln!(out, "exponent {}", fmt_g17(e));
    }
    let _ = writeln!(out, "envelope_slack {}", fmt_g17(lw - x));
    Ok(out)
}

fn budget_command(flags: &Flags) -> Result<String> {
    let k = flags.k.ok_or_else(|| WaitError::InvalidParameter("--k is required".into()))?;
    let schedules = flags.schedules()?.unwrap_or_else(LevelSchedule::table_schedules);
    let mut out = String::from("schedule,K,partial_budget\n");
    for s in &schedules {
        // Empty sum below the first level.
        let b = if k < s.k_start() { 0.0 } else { s.partial_budget(k)? };
        let _ = writeln!(out, "{},{k},{}", s.key(), fmt_g17(b));
    }
    Ok(out)
}

fn simulate_command(flags: &Flags) -> Result<String> {
    let mu = flags.mu.unwrap_or(experiments::MU);
    let info = kl_rate(mu)?;
    let horizon = flags.horizon.unwrap_or(2500);
    let n = flags.paths.unwrap_or(2000);
    let config = MonteCarloConfig {
        n_paths: n,
        horizon,
        batch_size: flags.batch.unwrap_or(DEFAULT_BATCH_SIZE),
        master_seed: flags.seed.unwrap_or(DEFAULT_SEED),
    }
    .validated()?;
    let grid = main_grid(horizon)?;
    let batch = simulate_running_max_with(&GaussianBed::alternative(mu)?, &config, &grid)?;
    let schedules = flags.schedules()?.unwrap_or_else(LevelSchedule::table_schedules);
    let h_rate = mean_with_se(&batch.column(grid.len() - 1).iter().map(|h| h / horizon as f64).collect::<Vec<_>>())?;

    let mut out = String::new();
    let _ = writeln!(out, "mu {} I {} paths {n} horizon {horizon}", fmt_g17(mu), fmt_g17(info));
    let _ = writeln!(out, "mean H_T/T {} (se {})", fmt_g17(h_rate.mean), fmt_g17(h_rate.se));
    let mut csv = String::from("schedule,t,epower_mean,epower_se\n");
    let _ = writeln!(out, "schedule,epower_mean,epower_se,target");
    for s in &schedules {
        let profile = ProfileTable::build(s, batch.max_value().max(1.0))?;
        let traj = aggregate_from_running_max(&profile, &batch)?;
        for &t in grid.points().iter().filter(|&&t| t > 0) {
            let e = traj.epower(t)?;
            let _ = writeln!(csv, "{},{t},{},{}", s.key(), fmt_g17(e.mean), fmt_g17(e.se));
        }
        let e = traj.epower(horizon)?;
        let _ = writeln!(out, "{},{},{},{}", s.key(), fmt_g17(e.mean), fmt_g17(e.se), fmt_g17(s.target_rho() * info));
    }
    if let Some(dir) = &flags.out {
        write_file(dir, "simulate.csv", &csv)?;
        let _ = writeln!(out, "wrote {}", dir.join("simulate.csv").display());
    }
    Ok(out)
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}
