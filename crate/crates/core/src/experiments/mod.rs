//! The ten reproduction experiments, with their published parameters as
//! defaults.
//!
//! Every experiment is a pure function of its [`RunSettings`]: the master
//! seed is mixed with the experiment number, so reruns produce identical
//! tables. Wall-clock time is the only nondeterministic field and is kept out
//! of the CSV.

mod alternative;
mod deterministic;
mod null;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use alternative::{
    exp3_first_passage, exp4_epower, exp5_fullrate_speed, exp7_kl_scaling, exp8_delayed_tests, Exp4Output,
    ScheduleCurve,
};
pub use deterministic::{exp10_capital_budget, exp1_profiles, exp9_counterexample};
pub use null::{exp2_sprt_size, exp6_null_validity};

use crate::error::{invalid, Result};
use crate::montecarlo::{build_time_grid, derive_seed, grid_with_size, TimeGrid, DEFAULT_BATCH_SIZE};
use crate::numerics::fmt_g17;
use crate::schedules::LevelSchedule;

pub const DEFAULT_SEED: u64 = 20_260_101;

/// Mean of the alternative in every experiment except the KL sweep.
pub const MU: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
    E9,
    E10,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        Self::E1,
        Self::E2,
        Self::E3,
        Self::E4,
        Self::E5,
        Self::E6,
        Self::E7,
        Self::E8,
        Self::E9,
        Self::E10,
    ];

    pub fn number(self) -> u64 {
        self as u64 + 1
    }

    pub fn name(self) -> String {
        format!("exp{}", self.number())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let n: u64 = s.strip_prefix("exp")?.parse().ok()?;
        Self::ALL.into_iter().find(|id| id.number() == n)
    }
}

/// Knobs shared by all experiments. `paths` and `horizon` replace an
/// experiment's primary path count and horizon; `scale` shrinks default path
/// counts.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub seed: u64,
    pub batch_size: usize,
    pub scale: f64,
    pub paths: Option<usize>,
    pub horizon: Option<u64>,
    pub schedules: Option<Vec<LevelSchedule>>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            batch_size: DEFAULT_BATCH_SIZE,
            scale: 1.0,
            paths: None,
            horizon: None,
            schedules: None,
        }
    }
}

impl RunSettings {
    pub fn validated(self) -> Result<Self> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid(format!("scale must be positive, got {}", self.scale)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.paths == Some(0) {
            return Err(invalid("paths must be at least 1"));
        }
        if self.horizon == Some(0) {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(self)
    }

    pub(crate) fn paths(&self, default: usize) -> usize {
        self.paths
            .unwrap_or_else(|| ((default as f64) * self.scale).ceil() as usize)
            .max(2)
    }

    pub(crate) fn horizon(&self, default: u64) -> u64 {
        self.horizon.unwrap_or(default)
    }

    pub(crate) fn seed_for(&self, id: ExperimentId) -> u64 {
        derive_seed(self.seed, id.number())
    }

    pub(crate) fn schedules_or(&self, keys: &[&str]) -> Vec<LevelSchedule> {
        match &self.schedules {
            Some(s) => s.clone(),
            None => keys.iter().map(|k| k.parse().expect("built-in keys parse")).collect(),
        }
    }
}

/// The main time grid: 240 linear points plus an early geometric grid and
/// time zero, 291 unique points at the default horizon. Short horizons that
/// cannot hold exactly 291 points get 66 geometric points instead.
pub fn main_grid(horizon: u64) -> Result<TimeGrid> {
    let n_linear = 240.min(horizon as usize);
    match grid_with_size(horizon, n_linear, 291.min(horizon as usize + 1)) {
        Ok((grid, _, _)) => Ok(grid),
        Err(_) => build_time_grid(horizon, n_linear, 66),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_g17(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<u64>> for Cell {
    fn from(n: Option<u64>) -> Self {
        n.map_or(Cell::Empty, Cell::Int)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub id: ExperimentId,
    pub table: Table,
    /// Resolved parameters, rendered as strings.
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
    pub wall_clock_s: f64,
}

impl ExperimentResult {
    pub(crate) fn new(id: ExperimentId, table: Table, seed: u64) -> Self {
        Self {
            id,
            table,
            params: BTreeMap::new(),
            seed,
            assertions: Vec::new(),
            warnings: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_string(), value.to_string());
    }

    /// Records `observed <= bound`.
    pub(crate) fn check_le(&mut self, name: impl Into<String>, observed: f64, bound: f64) {
        self.assertions.push(Assertion { name: name.into(), passed: observed <= bound, observed, bound });
    }

    /// Records `observed >= bound`.
    pub(crate) fn check_ge(&mut self, name: impl Into<String>, observed: f64, bound: f64) {
        self.assertions.push(Assertion { name: name.into(), passed: observed >= bound, observed, bound });
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn csv_name(&self) -> String {
        format!("{}.csv", self.id.name())
    }

    pub fn to_csv(&self) -> String {
        self.table.to_csv()
    }
}

/// Times `run` and stores the elapsed seconds on its result.
pub(crate) fn timed(run: impl FnOnce() -> Result<ExperimentResult>) -> Result<ExperimentResult> {
    let start = Instant::now();
    let mut result = run()?;
    result.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Runs the listed experiments in order. Experiment 5 reuses experiment 4's
/// paths, running experiment 4 first if it was not requested.
pub fn run_experiments(ids: &[ExperimentId], settings: &RunSettings) -> Result<Vec<ExperimentResult>> {
    let mut results = Vec::new();
    let mut exp4: Option<Exp4Output> = None;
    for &id in ids {
        let result = match id {
            ExperimentId::E1 => exp1_profiles(settings)?,
            ExperimentId::E2 => exp2_sprt_size(settings)?,
            ExperimentId::E3 => exp3_first_passage(settings)?,
            ExperimentId::E4 => {
                let out = exp4_epower(settings)?;
                let r = out.result.clone();
                exp4 = Some(out);
                r
            }
            ExperimentId::E5 => {
                if exp4.is_none() {
                    exp4 = Some(exp4_epower(settings)?);
                }
                exp5_fullrate_speed(exp4.as_ref().expect("exp4 available"))?
            }
            ExperimentId::E6 => exp6_null_validity(settings)?,
            ExperimentId::E7 => exp7_kl_scaling(settings)?,
            ExperimentId::E8 => exp8_delayed_tests(settings, &alternative::DEFAULT_GAMMAS)?,
            ExperimentId::E9 => exp9_counterexample(settings)?,
            ExperimentId::E10 => exp10_capital_budget(settings)?,
        };
        results.push(result);
    }
    Ok(results)
}

#[derive(Debug, Serialize)]
struct SummaryAssertion<'a> {
    experiment: String,
    assertion: &'a str,
    status: &'static str,
    observed: f64,
    bound: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct SummaryExperiment<'a> {
    experiment: String,
    status: &'static str,
    seed: u64,
    wall_clock_s: f64,
    params: &'a BTreeMap<String, String>,
    warnings: &'a [String],
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    experiments: Vec<SummaryExperiment<'a>>,
    assertions: Vec<SummaryAssertion<'a>>,
}

fn status(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}

/// `summary.json`: per-experiment parameters, seed and timing, plus one
/// record per assertion.
pub fn summary_json(results: &[ExperimentResult]) -> String {
    let summary = Summary {
        experiments: results
            .iter()
            .map(|r| SummaryExperiment {
                experiment: r.id.name(),
                status: status(r.passed()),
                seed: r.seed,
                wall_clock_s: r.wall_clock_s,
                params: &r.params,
                warnings: &r.warnings,
            })
            .collect(),
        assertions: results
            .iter()
            .flat_map(|r| {
                r.assertions.iter().map(move |a| SummaryAssertion {
                    experiment: r.id.name(),
                    assertion: &a.name,
                    status: status(a.passed),
                    observed: a.observed,
                    bound: a.bound,
                    seed: r.seed,
                })
            })
            .collect(),
    };
    serde_json::to_string_pretty(&summary).expect("summary serializes")
}

/// Writes one CSV per experiment and `summary.json` into `dir`.
pub fn write_outputs(results: &[ExperimentResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in results {
        std::fs::write(dir.join(r.csv_name()), r.to_csv())?;
    }
    std::fs::write(dir.join("summary.json"), summary_json(results))?;
    Ok(())
}

/// One line per assertion, for terminal output.
pub fn report(results: &[ExperimentResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "{} [{}] seed={} {:.2}s", r.id.name(), status(r.passed()), r.seed, r.wall_clock_s);
        for a in &r.assertions {
            let _ = writeln!(
                out,
                "  {:4} {} observed={} bound={}",
                status(a.passed),
                a.name,
                fmt_g17(a.observed),
                fmt_g17(a.bound)
            );
        }
        for w in &r.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    out
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub(crate) fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
