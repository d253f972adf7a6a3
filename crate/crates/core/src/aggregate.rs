//! The WAIT aggregate `M_t = sum_k w_k 1{tau_k <= t}`.
//!
//! For first-passage tests of a common score the stopping times are nested
//! and `tau_k <= t` iff `H_t >= b_k`, so `M_t = W(H_t)`: one profile lookup
//! per path and time instead of one indicator per level.

use crate::error::{invalid, Result, WaitError};
use crate::gaussian::RunningMaxBatch;
use crate::montecarlo::{mean_with_se, Estimate, TimeGrid};
use crate::numerics::log_add_exp;
use crate::profile::ProfileTable;
use crate::schedules::LevelSchedule;

/// Positivity mix used by default: `M^(eta) = eta + (1 - eta) M`.
pub const DEFAULT_ETA: f64 = 1e-12;

/// `ln M_t` for every path and grid time, `[path][grid point]`.
#[derive(Debug, Clone)]
pub struct AggregateTrajectory {
    schedule: LevelSchedule,
    grid: TimeGrid,
    n_paths: usize,
    log_m: Vec<f64>,
    eta: f64,
}

impl AggregateTrajectory {
    pub fn new(schedule: LevelSchedule, grid: TimeGrid, log_m: Vec<f64>, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        if !log_m.len().is_multiple_of(grid.len()) {
            return Err(invalid("aggregate values do not fill whole rows"));
        }
        let n_paths = log_m.len() / grid.len();
        Ok(Self { schedule, grid, n_paths, log_m, eta })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        self.eta = eta;
        Ok(self)
    }

    pub fn schedule(&self) -> &LevelSchedule {
        &self.schedule
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn row(&self, path: usize) -> &[f64] {
        let w = self.grid.len();
        &self.log_m[path * w..(path + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.log_m.chunks_exact(self.grid.len())
    }

    /// `ln M` at grid index `j` for every path.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// `ln M^(eta)_t / t` for every path.
    pub fn rates_at(&self, t: u64) -> Result<Vec<f64>> {
        if t == 0 {
            return Err(invalid("e-power is undefined at t = 0"));
        }
        let j = self.grid.index_of(t)?;
        Ok(self.rows().map(|r| eta_correct(r[j], self.eta) / t as f64).collect())
    }

    /// Mean and standard error of `ln M^(eta)_t / t` across paths.
    pub fn epower(&self, t: u64) -> Result<Estimate> {
        mean_with_se(&self.rates_at(t)?)
    }

    /// Mean and standard error of `ln M^(eta)_t` across paths.
    pub fn log_growth(&self, t: u64) -> Result<Estimate> {
        let j = self.grid.index_of(t)?;
        let v: Vec<f64> = self.rows().map(|r| eta_correct(r[j], self.eta)).collect();
        mean_with_se(&v)
    }

    /// Mean of `M_t` in linear space; errors instead of saturating if any
    /// value overflows.
    pub fn linear_mean(&self, j: usize) -> Result<Estimate> {
        let v = self.column(j).into_iter().map(checked_exp).collect::<Result<Vec<_>>>()?;
        mean_with_se(&v)
    }

    /// Grid-observed `T_alpha = inf{t : M_t >= 1/alpha}`.
    pub fn threshold_time(&self, path: usize, alpha: f64) -> Result<Option<u64>> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if path >= self.n_paths {
            return Err(invalid(format!("path {path} out of {}", self.n_paths)));
        }
        let level = (1.0 / alpha).ln();
        let j = self.row(path).iter().position(|&lm| lm >= level);
        Ok(j.map(|j| self.grid.points()[j]))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

pub(crate) fn checked_exp(log_m: f64) -> Result<f64> {
    let m = log_m.exp();
    if m.is_infinite() {
        return Err(WaitError::Overflow(log_m));
    }
    Ok(m)
}

/// `ln(eta + (1 - eta) exp(log_m))`.
pub fn eta_correct(log_m: f64, eta: f64) -> f64 {
    log_add_exp(eta.ln(), (-eta).ln_1p() + log_m)
}

/// Evaluates `ln M_t = ln W(H_t)` for every path and grid time.
pub fn aggregate_from_running_max(profile: &ProfileTable, batch: &RunningMaxBatch) -> Result<AggregateTrajectory> {
    let h_max = batch.max_value();
    if h_max > profile.x_max() {
        return Err(WaitError::ProfileRangeExceeded { h: h_max, x_max: profile.x_max() });
    }
    let log_m = batch.values().iter().map(|&h| profile.log_w_unchecked(h)).collect();
    AggregateTrajectory::new(profile.schedule().clone(), batch.grid().clone(), log_m, DEFAULT_ETA)
}

/// Delayed tests: `ln M_t = ln W(H_{floor(t / gamma)})` at each time of
/// `eval_grid`. Every delayed time must be on the batch grid.
pub fn aggregate_delayed(
    profile: &ProfileTable,
    batch: &RunningMaxBatch,
    gamma: f64,
    eval_grid: &TimeGrid,
) -> Result<AggregateTrajectory> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(invalid(format!("delay factor must be >= 1, got {gamma}")));
    }
    let h_max = batch.max_value();
    if h_max > profile.x_max() {
        return Err(WaitError::ProfileRangeExceeded { h: h_max, x_max: profile.x_max() });
    }
    let idx = eval_grid
        .points()
        .iter()
        .map(|&t| batch.grid().index_of(delayed_time(t, gamma)))
        .collect::<Result<Vec<_>>>()?;
    let mut log_m = Vec::with_capacity(batch.n_paths() * idx.len());
    for row in batch.rows() {
        log_m.extend(idx.iter().map(|&j| profile.log_w_unchecked(row[j])));
    }
    AggregateTrajectory::new(profile.schedule().clone(), eval_grid.clone(), log_m, DEFAULT_ETA)
}

/// `floor(t / gamma)`.
pub fn delayed_time(t: u64, gamma: f64) -> u64 {
    (t as f64 / gamma).floor() as u64
}

/// Direct indicator sum `ln sum_k w_k 1{tau_k <= t}` over the levels
/// `k_start, k_start + 1, ...` given their stopping times. Levels beyond
/// `taus` are treated as not yet stopped, so the caller must supply every
/// level that can have stopped by `t`.
pub fn aggregate_brute_force(schedule: &LevelSchedule, taus: &[Option<u64>], t: u64) -> Result<f64> {
    let mut acc = f64::NEG_INFINITY;
    for (offset, tau) in taus.iter().enumerate() {
        if matches!(tau, Some(s) if *s <= t) {
            let k = schedule.k_start() + offset as u64;
            acc = log_add_exp(acc, schedule.log_weight(k)?);
        }
    }
    Ok(acc)
}
