//! Level/weight schedules `(alpha_k, b_k, w_k)` and their capital budgets.
//!
//! Every schedule is normalized so that `sum_k w_k alpha_k <= 1`. Where the
//! normalizing series has no closed form, the constant is taken as the
//! reciprocal of (finite sum + analytic upper bound on the tail), which keeps
//! the realized budget at or just below one.
//!
//! Levels are kept in log space: `b_k = -ln alpha_k` and `ln w_k`. The
//! weighted dyadic weights `2^k / k^2` leave double range near `k = 1024`.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{invalid, Result, WaitError};
use crate::numerics::KahanSum;

/// Truncation index for the conservative log-corrected and iterated-log
/// normalizations.
pub const K_NORM: u64 = 10_000_000;

/// Tolerance used for `zeta(1 + eps)` when normalizing power schedules.
const ZETA_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// `alpha_k = 2^-k`, `w_k = 1`.
    Dyadic,
    /// `alpha_k = c k^-(1+eps)`, `w_k = 1`.
    Power { epsilon: f64 },
    /// `alpha_k = c / (k (ln k)^p)` for `k >= k0`, `w_k = 1`.
    LogCorrected { p: f64, k0: u64 },
    /// `alpha_k = c / (k ln k (ln ln k)^2)` for `k >= k0`, `w_k = 1`.
    IteratedLog { k0: u64 },
    /// `alpha_k = 2^-k`, `w_k = (6/pi^2) 2^k / k^2`.
    WeightedDyadic,
    /// `alpha_k = 2^-k`, `w_k = c 2^(rho k) / k^2`.
    FractionalWeightedDyadic { rho: f64 },
    /// A finite, user-supplied list of levels and weights starting at `k = 1`.
    Explicit {
        log_alpha: Arc<[f64]>,
        log_weight: Arc<[f64]>,
    },
}

/// A single level of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub alpha: f64,
    pub b: f64,
    pub log_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSchedule {
    kind: ScheduleKind,
    k_start: u64,
    norm_constant: f64,
    log_norm: f64,
    target_rho: f64,
}

impl LevelSchedule {
    pub fn dyadic() -> Self {
        Self::from_parts(ScheduleKind::Dyadic, 1, 1.0, 0.0)
    }

    pub fn power(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("power schedule needs eps > 0, got {epsilon}")));
        }
        let key = format!("power:{epsilon}");
        let c = cached_norm(&key, || {
            let (_, hi) = zeta_bracket(1.0 + epsilon, ZETA_NORM_TOL).expect("s > 1 checked");
            1.0 / hi
        });
        Ok(Self::from_parts(
            ScheduleKind::Power { epsilon },
            1,
            c,
            1.0 / (1.0 + epsilon),
        ))
    }

    pub fn log_corrected(p: f64, k0: u64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid(format!("log-corrected schedule needs p > 1, got {p}")));
        }
        if k0 < 3 {
            return Err(invalid(format!("log-corrected schedule needs k0 >= 3, got {k0}")));
        }
        let key = format!("logcorr:{p}:{k0}");
        let c = cached_norm(&key, || {
            let term = |k: u64| {
                let k = k as f64;
                1.0 / (k * k.ln().powf(p))
            };
            let tail = (K_NORM as f64).ln().powf(1.0 - p) / (p - 1.0);
            1.0 / (sum_terms(k0, K_NORM, term) + tail)
        });
        Ok(Self::from_parts(ScheduleKind::LogCorrected { p, k0 }, k0, c, 1.0))
    }

    pub fn iterated_log(k0: u64) -> Result<Self> {
        if k0 < 16 {
            return Err(invalid(format!("iterated-log schedule needs k0 >= 16, got {k0}")));
        }
        let key = format!("itlog:{k0}");
        let c = cached_norm(&key, || {
            let term = |k: u64| {
                let k = k as f64;
                let l = k.ln();
                let ll = l.ln();
                1.0 / (k * l * ll * ll)
            };
            let tail = 1.0 / (K_NORM as f64).ln().ln();
            1.0 / (sum_terms(k0, K_NORM, term) + tail)
        });
        Ok(Self::from_parts(ScheduleKind::IteratedLog { k0 }, k0, c, 1.0))
    }

    pub fn weighted_dyadic() -> Self {
        Self::from_parts(ScheduleKind::WeightedDyadic, 1, 6.0 / (PI * PI), 1.0)
    }

    pub fn fractional_weighted_dyadic(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(invalid(format!(
                "fractional weighted dyadic needs 0 < rho < 1, got {rho}"
            )));
        }
        // sum_k 2^((rho-1)k) / k^2, summed until the geometric tail bound
        // r^(K+1) / ((1-r)(K+1)^2) is below 1e-18; normalize by the upper end.
        let r = 2f64.powf(rho - 1.0);
        let mut acc = KahanSum::new();
        let mut k = 1u64;
        let tail = loop {
            let kf = k as f64;
            acc.add(r.powf(kf) / (kf * kf));
            let next = (k + 1) as f64;
            let tail = r.powf(next) / ((1.0 - r) * next * next);
            if tail < 1e-18 {
                break tail;
            }
            k += 1;
        };
        let c = 1.0 / (acc.value() + tail);
        Ok(Self::from_parts(
            ScheduleKind::FractionalWeightedDyadic { rho },
            1,
            c,
            rho,
        ))
    }

    /// A finite schedule from explicit level and weight lists (index `k`
    /// starts at 1). Levels must be strictly decreasing in `(0, 1)`, weights
    /// positive, and the total budget at most one.
    pub fn explicit(alphas: &[f64], weights: &[f64]) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != weights.len() {
            return Err(invalid("explicit schedule needs equal-length, nonempty lists"));
        }
        if alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(invalid("explicit levels must lie in (0, 1)"));
        }
        if alphas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("explicit levels must be strictly decreasing"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(invalid("explicit weights must be positive and finite"));
        }
        let budget: KahanSum = alphas.iter().zip(weights).map(|(a, w)| a * w).collect();
        if budget.value() > 1.0 + 1e-12 {
            return Err(invalid(format!(
                "explicit schedule violates the capital budget: {}",
                budget.value()
            )));
        }
        let kind = ScheduleKind::Explicit {
            log_alpha: alphas.iter().map(|a| a.ln()).collect(),
            log_weight: weights.iter().map(|w| w.ln()).collect(),
        };
        Ok(Self::from_parts(kind, 1, 1.0, 0.0))
    }

    fn from_parts(kind: ScheduleKind, k_start: u64, norm_constant: f64, target_rho: f64) -> Self {
        Self {
            kind,
            k_start,
            norm_constant,
            log_norm: norm_constant.ln(),
            target_rho,
        }
    }

    /// The seven schedules of the primary comparison, in table order.
    pub fn table_schedules() -> Vec<LevelSchedule> {
        TABLE_KEYS
            .iter()
            .map(|k| k.parse().expect("table keys parse"))
            .collect()
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn k_start(&self) -> u64 {
        self.k_start
    }

    /// Last index of a finite schedule; `None` for the infinite families.
    pub fn k_end(&self) -> Option<u64> {
        match &self.kind {
            ScheduleKind::Explicit { log_alpha, .. } => Some(log_alpha.len() as u64),
            _ => None,
        }
    }

    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    pub fn target_rho(&self) -> f64 {
        self.target_rho
    }

    /// True when every weight equals one.
    pub fn is_unweighted(&self) -> bool {
        match &self.kind {
            ScheduleKind::WeightedDyadic | ScheduleKind::FractionalWeightedDyadic { .. } => false,
            ScheduleKind::Explicit { log_weight, .. } => log_weight.iter().all(|&w| w == 0.0),
            _ => true,
        }
    }

    /// Short key, as accepted by [`FromStr`].
    pub fn key(&self) -> String {
        match &self.kind {
            ScheduleKind::Dyadic => "dyadic".into(),
            ScheduleKind::Power { epsilon } => format!("power:{epsilon}"),
            ScheduleKind::LogCorrected { p, k0 } => format!("logcorr:{p}:{k0}"),
            ScheduleKind::IteratedLog { k0 } => format!("itlog:{k0}"),
            ScheduleKind::WeightedDyadic => "wdyadic".into(),
            ScheduleKind::FractionalWeightedDyadic { rho } => format!("fwdyadic:{rho}"),
            ScheduleKind::Explicit { .. } => "explicit".into(),
        }
    }

    /// Human-readable level/weight definition.
    pub fn definition(&self) -> String {
        match &self.kind {
            ScheduleKind::Dyadic => "alpha_k = 2^-k, w_k = 1".into(),
            ScheduleKind::Power { epsilon } => {
                format!("alpha_k = c k^-{}, w_k = 1", 1.0 + epsilon)
            }
            ScheduleKind::LogCorrected { p, k0 } => {
                format!("alpha_k = c / [k (log k)^{p}], k >= {k0}, w_k = 1")
            }
            ScheduleKind::IteratedLog { k0 } => {
                format!("alpha_k = c / [k log k (log log k)^2], k >= {k0}, w_k = 1")
            }
            ScheduleKind::WeightedDyadic => "alpha_k = 2^-k, w_k = (6/pi^2) 2^k / k^2".into(),
            ScheduleKind::FractionalWeightedDyadic { rho } => {
                format!("alpha_k = 2^-k, w_k = c 2^({rho} k) / k^2")
            }
            ScheduleKind::Explicit { log_alpha, .. } => {
                format!("explicit list of {} levels", log_alpha.len())
            }
        }
    }

    fn check_index(&self, k: u64) -> Result<()> {
        if k < self.k_start {
            return Err(WaitError::IndexOutOfRange { k, k_start: self.k_start });
        }
        if let Some(end) = self.k_end() {
            if k > end {
                return Err(invalid(format!("level {k} beyond the last explicit level {end}")));
            }
        }
        Ok(())
    }

    /// `(alpha_k, b_k, ln w_k)`. `alpha` underflows to zero for very deep
    /// dyadic levels; `b` and `log_w` stay finite.
    pub fn level(&self, k: u64) -> Result<Level> {
        self.check_index(k)?;
        Ok(Level {
            alpha: self.alpha_unchecked(k),
            b: self.b_unchecked(k),
            log_w: self.log_weight_unchecked(k),
        })
    }

    pub fn alpha(&self, k: u64) -> Result<f64> {
        Ok(self.level(k)?.alpha)
    }

    pub fn b(&self, k: u64) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.b_unchecked(k))
    }

    pub fn log_weight(&self, k: u64) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.log_weight_unchecked(k))
    }

    fn alpha_unchecked(&self, k: u64) -> f64 {
        match &self.kind {
            ScheduleKind::Dyadic
            | ScheduleKind::WeightedDyadic
            | ScheduleKind::FractionalWeightedDyadic { .. } => {
                0.5f64.powi(k.min(i32::MAX as u64) as i32)
            }
            ScheduleKind::Power { epsilon } => self.norm_constant * (k as f64).powf(-(1.0 + epsilon)),
            _ => (-self.b_unchecked(k)).exp(),
        }
    }

    pub(crate) fn b_unchecked(&self, k: u64) -> f64 {
        let kf = k as f64;
        match &self.kind {
            ScheduleKind::Dyadic
            | ScheduleKind::WeightedDyadic
            | ScheduleKind::FractionalWeightedDyadic { .. } => kf * LN_2,
            ScheduleKind::Explicit { log_alpha, .. } => -log_alpha[(k - 1) as usize],
            _ => self.b_of_log_index(kf.ln()),
        }
    }

    /// `b` as a function of `u = ln k`, extended to real `u >= ln k_start`.
    /// Strictly increasing; used to invert the counting function when the
    /// level index leaves double range.
    pub(crate) fn b_of_log_index(&self, u: f64) -> f64 {
        match &self.kind {
            ScheduleKind::Dyadic
            | ScheduleKind::WeightedDyadic
            | ScheduleKind::FractionalWeightedDyadic { .. } => u.exp() * LN_2,
            ScheduleKind::Power { epsilon } => (1.0 + epsilon) * u - self.log_norm,
            ScheduleKind::LogCorrected { p, .. } => u + p * u.ln() - self.log_norm,
            ScheduleKind::IteratedLog { .. } => {
                let lu = u.ln();
                u + lu + 2.0 * lu.ln() - self.log_norm
            }
            ScheduleKind::Explicit { .. } => {
                unreachable!("explicit schedules are always fully tabulated")
            }
        }
    }

    pub(crate) fn log_weight_unchecked(&self, k: u64) -> f64 {
        let kf = k as f64;
        match &self.kind {
            ScheduleKind::WeightedDyadic => self.log_norm + kf * LN_2 - 2.0 * kf.ln(),
            ScheduleKind::FractionalWeightedDyadic { rho } => {
                self.log_norm + rho * kf * LN_2 - 2.0 * kf.ln()
            }
            ScheduleKind::Explicit { log_weight, .. } => log_weight[(k - 1) as usize],
            _ => 0.0,
        }
    }

    /// `ln(w_k alpha_k)`.
    fn log_spend(&self, k: u64) -> f64 {
        self.log_weight_unchecked(k) - self.b_unchecked(k)
    }

    /// `sum_{k_start <= k <= K} w_k alpha_k` with compensated summation.
    pub fn partial_budget(&self, k_max: u64) -> Result<f64> {
        self.check_index(k_max.min(self.k_end().unwrap_or(u64::MAX)))?;
        let end = self.k_end().map_or(k_max, |e| e.min(k_max));
        let acc: KahanSum = (self.k_start..=end).map(|k| self.log_spend(k).exp()).collect();
        Ok(acc.value())
    }

    /// Partial budgets at each (ascending) checkpoint in one pass.
    pub fn partial_budgets(&self, checkpoints: &[u64]) -> Result<Vec<f64>> {
        if checkpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("budget checkpoints must be ascending"));
        }
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut acc = KahanSum::new();
        let mut k = self.k_start;
        let end = self.k_end().unwrap_or(u64::MAX);
        for &cp in checkpoints {
            if cp < self.k_start {
                return Err(WaitError::IndexOutOfRange { k: cp, k_start: self.k_start });
            }
            while k <= cp && k <= end {
                acc.add(self.log_spend(k).exp());
                k += 1;
            }
            out.push(acc.value());
        }
        Ok(out)
    }
}

/// Keys of the primary comparison schedules, in table order.
pub const TABLE_KEYS: [&str; 7] = [
    "dyadic",
    "power:0.5",
    "power:0.1",
    "logcorr:2:10",
    "itlog:16",
    "wdyadic",
    "fwdyadic:0.5",
];

impl FromStr for LevelSchedule {
    type Err = WaitError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| WaitError::UnknownSchedule(s.to_string()))
        };
        let int = |i: usize, default: u64| -> Result<u64> {
            match parts.get(i) {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| WaitError::UnknownSchedule(s.to_string())),
            }
        };
        match (parts[0], parts.len()) {
            ("dyadic", 1) => Ok(Self::dyadic()),
            ("wdyadic", 1) => Ok(Self::weighted_dyadic()),
            ("power", 2) => Self::power(num(1)?),
            ("logcorr", 2 | 3) => Self::log_corrected(num(1)?, int(2, 10)?),
            ("itlog", 1 | 2) => Self::iterated_log(int(1, 16)?),
            ("fwdyadic", 2) => Self::fractional_weighted_dyadic(num(1)?),
            _ => Err(WaitError::UnknownSchedule(s.to_string())),
        }
    }
}

impl fmt::Display for LevelSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

fn cached_norm(key: &str, compute: impl FnOnce() -> f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&c) = cache.lock().expect("norm cache").get(key) {
        return c;
    }
    let c = compute();
    cache.lock().expect("norm cache").insert(key.to_string(), c);
    c
}

/// Sums `term(k)` for `k` in `[from, to]`, smallest terms first.
fn sum_terms(from: u64, to: u64, term: impl Fn(u64) -> f64) -> f64 {
    let acc: KahanSum = (from..=to).rev().map(term).collect();
    acc.value()
}

/// Bracket `[lo, hi]` around `zeta(s)` of width at most `2 tol`: the partial
/// sum to `K` plus the integral tail bounds
/// `int_{K+1}^inf x^-s dx <= sum_{k>K} k^-s <= int_K^inf x^-s dx`.
pub fn zeta_bracket(s: f64, tol: f64) -> Result<(f64, f64)> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(invalid(format!("zeta series needs s > 1, got {s}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    // The bracket width is below K^-s.
    let k = (2.0 * tol).powf(-1.0 / s).ceil().max(2.0);
    if k > 2e9 {
        return Err(invalid(format!("zeta({s}) to tolerance {tol} needs too many terms")));
    }
    let k = k as u64;
    let partial = sum_terms(1, k, |j| (j as f64).powf(-s));
    let kf = k as f64;
    let lo = partial + (kf + 1.0).powf(1.0 - s) / (s - 1.0);
    let hi = partial + kf.powf(1.0 - s) / (s - 1.0);
    Ok((lo, hi))
}

/// `zeta(s)` to within `tol`, by direct summation with an integral tail
/// bracket.
pub fn zeta_sum_with_tail(s: f64, tol: f64) -> Result<f64> {
    let (lo, hi) = zeta_bracket(s, tol)?;
    Ok(0.5 * (lo + hi))
}
