//! Experiments without path simulation: profiles, the random-multiplier
//! counterexample and capital budgets.

use rand::Rng;

use super::{lin_space, log_space, main_grid, timed, ExperimentId, ExperimentResult, RunSettings, Table, MU};
use crate::aggregate::{eta_correct, DEFAULT_ETA};
use crate::error::Result;
use crate::gaussian::kl_rate;
use crate::montecarlo::batch_rng;
use crate::profile::ProfileTable;
use crate::schedules::TABLE_KEYS;

const PROFILE_X_MAX: f64 = 1650.0;
const PROFILE_POINTS: usize = 700;

/// Profile exponents `ln W(x)/x` and envelopes `ln W(x) - x` on 700 linearly
/// spaced points of `[2, 1650]`.
pub fn exp1_profiles(settings: &RunSettings) -> Result<ExperimentResult> {
    timed(|| {
        let schedules = settings.schedules_or(&TABLE_KEYS);
        let xs = lin_space(2.0, PROFILE_X_MAX, PROFILE_POINTS);
        let mut table = Table::new(&["schedule", "x", "log_W", "exponent", "envelope_slack"]);
        let mut result_checks = Vec::new();
        for s in &schedules {
            let profile = ProfileTable::build(s, PROFILE_X_MAX)?;
            let mut max_slack = f64::NEG_INFINITY;
            for &x in &xs {
                let lw = profile.log_w(x)?;
                let exponent = profile.exponent(x).ok();
                let slack = lw - x;
                max_slack = max_slack.max(slack);
                table.push(vec![
                    s.key().into(),
                    x.into(),
                    lw.into(),
                    exponent.map_or(super::Cell::Empty, Into::into),
                    slack.into(),
                ]);
            }
            let exponent = profile.exponent(PROFILE_X_MAX)?;
            result_checks.push((s.key(), max_slack, (exponent - s.target_rho()).abs()));
        }
        let mut r = ExperimentResult::new(ExperimentId::E1, table, settings.seed);
        for (key, slack, dev) in result_checks {
            r.check_le(format!("{key}: max envelope slack"), slack, 0.0);
            r.check_le(format!("{key}: |exponent(1650) - rho|"), dev, 0.02);
        }
        r.param("x_grid", format!("linear, {PROFILE_POINTS} points over [2, {PROFILE_X_MAX}]"));
        r.param("schedules", schedules.iter().map(|s| s.key()).collect::<Vec<_>>().join(" "));
        Ok(r)
    })
}

/// The random-multiplier example: `tau_k = ceil(Y b_k / I)` with
/// `Y in {1/2, 3/2}` gives `M_t = W(I t / Y)` exactly, so the branch curves
/// are evaluated from the profile; only `Y` is sampled.
pub fn exp9_counterexample(settings: &RunSettings) -> Result<ExperimentResult> {
    timed(|| {
        const BRANCHES: [f64; 2] = [0.5, 1.5];
        let seed = settings.seed_for(ExperimentId::E9);
        let n = settings.paths(30_000);
        let horizon = settings.horizon(2500);
        let info = kl_rate(MU)?;
        let grid = main_grid(horizon)?;
        let schedule = settings.schedules_or(&["wdyadic"]).remove(0);
        let x_max = info * horizon as f64 / BRANCHES[0];
        let profile = ProfileTable::build(&schedule, x_max)?;
        let rate = |y: f64, t: u64| -> Result<f64> {
            let lw = profile.log_w((info * t as f64 / y).min(x_max))?;
            Ok(eta_correct(lw, DEFAULT_ETA) / t as f64)
        };

        let mut table = Table::new(&["series", "y", "t", "rate", "count"]);
        for y in BRANCHES {
            for &t in grid.points().iter().filter(|&&t| t > 0) {
                table.push(vec!["branch".into(), y.into(), t.into(), rate(y, t)?.into(), super::Cell::Empty]);
            }
        }

        let mut rng = batch_rng(seed, 0);
        let low = (0..n).filter(|_| rng.random_bool(0.5)).count();
        let counts = [low, n - low];
        let finals = [rate(BRANCHES[0], horizon)?, rate(BRANCHES[1], horizon)?];
        for i in 0..2 {
            table.push(vec![
                "histogram".into(),
                BRANCHES[i].into(),
                horizon.into(),
                finals[i].into(),
                (counts[i] as u64).into(),
            ]);
        }

        let mut r = ExperimentResult::new(ExperimentId::E9, table, seed);
        let rho_i = schedule.target_rho() * info;
        for i in 0..2 {
            let y = BRANCHES[i];
            let limit = rho_i / y;
            let prop = counts[i] as f64 / n as f64;
            if counts[i] > 0 {
                r.check_le(format!("Y={y}: |final rate - rho I / Y|"), (finals[i] - limit).abs(), 0.03);
                r.check_ge(format!("Y={y}: distance of mass from rho I"), (finals[i] - rho_i).abs(), 0.05);
            }
            r.check_le(format!("Y={y}: |branch proportion - 0.5|"), (prop - 0.5).abs(), 0.02);
        }
        r.param("samples", n);
        r.param("horizon", horizon);
        r.param("mu", MU);
        r.param("eta", DEFAULT_ETA);
        r.param("schedule", schedule.key());
        r.param("grid_points", grid.len());
        Ok(r)
    })
}

/// Largest truncation index of the budget diagnostics.
pub const BUDGET_K_MAX: u64 = 200_000;

/// Partial budgets `sum_{k <= K} w_k alpha_k` at geometrically spaced `K`.
pub fn exp10_capital_budget(settings: &RunSettings) -> Result<ExperimentResult> {
    timed(|| {
        let schedules = settings.schedules_or(&TABLE_KEYS);
        let mut table = Table::new(&["schedule", "K", "partial_budget"]);
        let mut checks = Vec::new();
        for s in &schedules {
            let mut ks: Vec<u64> = log_space(s.k_start() as f64, BUDGET_K_MAX as f64, 60)
                .into_iter()
                .map(|k| (k.round() as u64).clamp(s.k_start(), BUDGET_K_MAX))
                .collect();
            ks.dedup();
            let budgets = s.partial_budgets(&ks)?;
            let max = budgets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (k, b) in ks.iter().zip(&budgets) {
                table.push(vec![s.key().into(), (*k).into(), (*b).into()]);
            }
            checks.push((s.key(), max, *budgets.last().expect("nonempty")));
        }
        let mut r = ExperimentResult::new(ExperimentId::E10, table, settings.seed);
        for (key, max, last) in checks {
            r.check_le(format!("{key}: max partial budget"), max, 1.0);
            r.param(&format!("budget_at_{BUDGET_K_MAX}:{key}"), last);
        }
        r.param("k_grid", format!("60 log-spaced K from k_start to {BUDGET_K_MAX}"));
        Ok(r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Cell;

    fn value(r: &ExperimentResult, row: &[Cell], col: &str) -> f64 {
        match &row[r.table.column_index(col).unwrap()] {
            Cell::Float(x) => *x,
            Cell::Int(n) => *n as f64,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exp10_budgets() {
        let r = exp10_capital_budget(&RunSettings::default()).unwrap();
        assert!(r.passed());
        let dyadic: Vec<_> = r.table.rows.iter().filter(|row| row[0] == Cell::from("dyadic")).collect();
        assert_eq!(value(&r, dyadic.last().unwrap(), "K"), 200_000.0);
        // wdyadic at K: 1 - budget is the Basel tail (6/pi^2) sum_{k>K} 1/k^2.
        let w = r.table.rows.iter().rfind(|row| row[0] == Cell::from("wdyadic")).unwrap();
        let gap = 1.0 - value(&r, w, "partial_budget");
        let c = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let k = BUDGET_K_MAX as f64;
        assert!(gap >= c / (k + 1.0) - 1e-12 && gap <= c / k + 1e-12, "{gap}");
    }

    #[test]
    fn exp9_branches() {
        let r = exp9_counterexample(&RunSettings::default()).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let hist: Vec<_> = r.table.rows.iter().filter(|row| row[0] == Cell::from("histogram")).collect();
        assert_eq!(hist.len(), 2);
        let total: f64 = hist.iter().map(|row| value(&r, row, "count")).sum();
        assert_eq!(total, 30_000.0);
    }
}
