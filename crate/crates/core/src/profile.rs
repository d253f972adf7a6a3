//! Cumulative weight profile `W(x) = sum_{k : b_k <= x} w_k`.
//!
//! Levels with `b_k <= x_max` are tabulated with log-space prefix sums and
//! located by binary search. Unweighted schedules whose level count runs past
//! [`MAX_TABLE_LEVELS`] (a power schedule has about `e^1500` levels below
//! `x = 1650`) switch to inverting `b` as a function of `ln k`, so `ln N(x)`
//! stays exact to double precision without enumerating levels.

use crate::error::{Result, WaitError};
use crate::numerics::log_add_exp;
use crate::schedules::LevelSchedule;

/// Largest number of explicitly tabulated levels.
pub const MAX_TABLE_LEVELS: usize = 1 << 20;

/// Above this index `floor(k)` is no longer exact in `f64` and `ln N` is
/// taken from the continuous inverse.
const EXACT_INDEX_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

#[derive(Debug, Clone)]
pub struct ProfileTable {
    schedule: LevelSchedule,
    b_values: Vec<f64>,
    log_prefix: Vec<f64>,
    x_max: f64,
    /// Whether the table holds every level with `b_k <= x_max`.
    complete: bool,
}

impl ProfileTable {
    /// Tabulates the profile of `schedule` on `[0, x_max]`. An `x_max` below
    /// the first level yields an empty table (`W = 0` on the whole range);
    /// check [`ProfileTable::is_empty`].
    pub fn build(schedule: &LevelSchedule, x_max: f64) -> Result<Self> {
        if !(x_max >= 0.0 && x_max.is_finite()) {
            return Err(WaitError::InvalidParameter(format!(
                "profile range must be finite and nonnegative, got {x_max}"
            )));
        }
        let unweighted = schedule.is_unweighted();
        let end = schedule.k_end().unwrap_or(u64::MAX);
        let mut b_values = Vec::new();
        let mut log_prefix = Vec::new();
        let mut acc = f64::NEG_INFINITY;
        let mut k = schedule.k_start();
        let mut complete = true;
        while k <= end {
            let b = schedule.b_unchecked(k);
            if b > x_max {
                break;
            }
            if b_values.len() == MAX_TABLE_LEVELS {
                // Only unweighted schedules are allowed to continue past the
                // table through the analytic inverse.
                if !unweighted || schedule.k_end().is_some() {
                    return Err(WaitError::InvalidParameter(format!(
                        "profile of `{schedule}` up to {x_max} needs more than {MAX_TABLE_LEVELS} levels"
                    )));
                }
                complete = false;
                break;
            }
            b_values.push(b);
            if unweighted {
                log_prefix.push((b_values.len() as f64).ln());
            } else {
                acc = log_add_exp(acc, schedule.log_weight_unchecked(k));
                log_prefix.push(acc);
            }
            k += 1;
        }
        Ok(Self { schedule: schedule.clone(), b_values, log_prefix, x_max, complete })
    }

    pub fn schedule(&self) -> &LevelSchedule {
        &self.schedule
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Tabulated `b_k`, ascending, starting at `k_start`.
    pub fn b_values(&self) -> &[f64] {
        &self.b_values
    }

    /// `log_prefix[j] = ln sum_{k <= k_start + j} w_k`.
    pub fn log_prefix(&self) -> &[f64] {
        &self.log_prefix
    }

    pub fn is_empty(&self) -> bool {
        self.b_values.is_empty()
    }

    /// Number of explicitly tabulated levels.
    pub fn len(&self) -> usize {
        self.b_values.len()
    }

    /// Whether every level below `x_max` is tabulated.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    fn check_range(&self, x: f64) -> Result<()> {
        if x.is_nan() || x > self.x_max {
            return Err(WaitError::OutOfRange { x, x_max: self.x_max });
        }
        Ok(())
    }

    /// `ln W(x)`, `-inf` when no level lies at or below `x`.
    pub fn log_w(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        Ok(self.log_w_unchecked(x))
    }

    /// `ln W(x)` for `x` already known to be within range.
    pub(crate) fn log_w_unchecked(&self, x: f64) -> f64 {
        let idx = self.b_values.partition_point(|&b| b <= x);
        if idx == 0 {
            return f64::NEG_INFINITY;
        }
        if idx < self.b_values.len() || self.complete {
            return self.log_prefix[idx - 1];
        }
        self.log_count_by_inversion(x)
    }

    /// `ln W(x) / x`.
    pub fn exponent(&self, x: f64) -> Result<f64> {
        let lw = self.log_w(x)?;
        if lw == f64::NEG_INFINITY || x <= 0.0 {
            return Err(WaitError::UndefinedExponent { x });
        }
        Ok(lw / x)
    }

    /// `ln W(x) - x`, never positive for a schedule within budget.
    pub fn envelope_slack(&self, x: f64) -> Result<f64> {
        Ok(self.log_w(x)? - x)
    }

    /// `N(x) = #{k : b_k <= x}` for unweighted schedules.
    pub fn counting_n(&self, x: f64) -> Result<u64> {
        if !self.schedule.is_unweighted() {
            return Err(WaitError::WrongScheduleKind(self.schedule.key()));
        }
        self.check_range(x)?;
        let idx = self.b_values.partition_point(|&b| b <= x);
        if idx < self.b_values.len() || self.complete {
            return Ok(idx as u64);
        }
        match self.exact_index_by_inversion(x) {
            Some(k) => Ok(k - self.schedule.k_start() + 1),
            None => Err(WaitError::CountNotRepresentable { x }),
        }
    }

    /// Real root `u*` of `b(e^u) = x`, `u >= ln k_start`.
    fn solve_log_index(&self, x: f64) -> f64 {
        let s = &self.schedule;
        let mut lo = (s.k_start() as f64).ln();
        let mut hi = lo.max(1.0);
        while s.b_of_log_index(hi) <= x {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if s.b_of_log_index(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Largest integer `k` with `b_k <= x`, when it is exactly representable.
    fn exact_index_by_inversion(&self, x: f64) -> Option<u64> {
        let u = self.solve_log_index(x);
        let approx = u.exp();
        if approx >= EXACT_INDEX_LIMIT {
            return None;
        }
        let s = &self.schedule;
        let mut k = (approx.floor() as u64).max(s.k_start());
        while s.b_unchecked(k + 1) <= x {
            k += 1;
        }
        while k > s.k_start() && s.b_unchecked(k) > x {
            k -= 1;
        }
        Some(k)
    }

    fn log_count_by_inversion(&self, x: f64) -> f64 {
        let k_start = self.schedule.k_start();
        match self.exact_index_by_inversion(x) {
            Some(k) => ((k - k_start + 1) as f64).ln(),
            None => {
                let u = self.solve_log_index(x);
                u + (-((k_start - 1) as f64) * (-u).exp()).ln_1p()
            }
        }
    }
}

pub fn build_profile(schedule: &LevelSchedule, x_max: f64) -> Result<ProfileTable> {
    ProfileTable::build(schedule, x_max)
}
