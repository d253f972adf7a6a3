//! Alternative-side experiments: first-passage scaling, e-power by schedule,
//! full-rate speed, KL scaling and delayed tests.

use super::{log_space, main_grid, timed, Cell, ExperimentId, ExperimentResult, RunSettings, Table, MU};
use crate::aggregate::{aggregate_delayed, aggregate_from_running_max, delayed_time};
use crate::error::{invalid, Result};
use crate::gaussian::{kl_rate, simulate_first_passage, simulate_running_max_with, GaussianBed};
use crate::montecarlo::{derive_seed, grid_with_size, mean_with_se, quantiles, Estimate, MonteCarloConfig, TimeGrid};
use crate::profile::ProfileTable;
use crate::schedules::TABLE_KEYS;

/// Delay factors of the delayed-test experiment.
pub const DEFAULT_GAMMAS: [f64; 4] = [1.0, 1.25, 1.5, 2.0];

/// Censoring above this fraction at the largest threshold triggers a warning.
const CENSORING_WARN: f64 = 0.01;

/// Distribution of `tau_b / b` over 70 log-spaced thresholds in `[8, 1560]`,
/// from exact every-step first passages.
pub fn exp3_first_passage(settings: &RunSettings) -> Result<ExperimentResult> {
    timed(|| {
        let seed = settings.seed_for(ExperimentId::E3);
        let n = settings.paths(5000);
        let horizon = settings.horizon(4000);
        let info = kl_rate(MU)?;
        let bed = GaussianBed::alternative(MU)?;
        let thresholds = log_space(8.0, 1560.0, 70);
        let config = MonteCarloConfig { n_paths: n, horizon, batch_size: settings.batch_size, master_seed: seed };
        let taus = simulate_first_passage(&bed, &config, &thresholds)?;

        let mut table = Table::new(&["b", "mean_ratio", "median_ratio", "q10", "q90"]);
        let mut last = (f64::NAN, f64::NAN, f64::NAN);
        let mut censored_last = 0.0;
        for (i, &b) in thresholds.iter().enumerate() {
            let ratios: Vec<f64> = taus.iter().filter_map(|row| row[i]).map(|t| t as f64 / b).collect();
            censored_last = 1.0 - ratios.len() as f64 / n as f64;
            if ratios.len() < 2 {
                table.push(vec![b.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
                last = (f64::NAN, f64::NAN, f64::NAN);
                continue;
            }
            let mean = mean_with_se(&ratios)?.mean;
            let q = quantiles(&ratios, &[0.5, 0.1, 0.9])?;
            table.push(vec![b.into(), mean.into(), q[0].into(), q[1].into(), q[2].into()]);
            last = (mean, q[1], q[2]);
        }

        let mut r = ExperimentResult::new(ExperimentId::E3, table, seed);
        let (mean, q10, q90) = last;
        r.check_ge("b=1560: mean tau/b lower", mean, 1.98);
        r.check_le("b=1560: mean tau/b upper", mean, 2.05);
        r.check_ge("b=1560: q10 of tau/b", q10, 1.85);
        r.check_le("b=1560: q90 of tau/b", q90, 2.15);
        if censored_last > CENSORING_WARN {
            r.warnings.push(format!(
                "horizon too short: {:.2}% of paths censored at the largest threshold",
                100.0 * censored_last
            ));
        }
        r.param("paths", n);
        r.param("horizon", horizon);
        r.param("mu", MU);
        r.param("target", 1.0 / info);
        r.param("thresholds", "70 log-spaced b in [8, 1560]");
        r.param("censored_fraction_at_max_b", censored_last);
        r.param("batch_size", settings.batch_size);
        Ok(r)
    })
}

/// E-power curve of one schedule on the shared paths.
#[derive(Debug, Clone)]
pub struct ScheduleCurve {
    pub key: String,
    pub target_rho: f64,
    pub grid: TimeGrid,
    /// Indexed like `grid`; the entry at `t = 0` is undefined and holds NaN.
    pub epower: Vec<Estimate>,
    pub log_growth: Vec<Estimate>,
    /// `ln M^(eta)_T / T` per path at the horizon.
    pub final_rates: Vec<f64>,
}

/// Experiment 4's table plus the curves experiment 5 reads.
#[derive(Debug, Clone)]
pub struct Exp4Output {
    pub result: ExperimentResult,
    pub curves: Vec<ScheduleCurve>,
    pub info: f64,
    pub horizon: u64,
    pub seed: u64,
    pub h_checksum: u64,
}

const NAN_ESTIMATE: Estimate = Estimate { mean: f64::NAN, se: f64::NAN, n: 0 };

/// Ordered pairs `(lower, upper)` of the partial ordering at the horizon.
const ORDERING: [(&str, &str); 6] = [
    ("dyadic", "fwdyadic:0.5"),
    ("fwdyadic:0.5", "power:0.5"),
    ("power:0.5", "power:0.1"),
    ("power:0.1", "logcorr:2:10"),
    ("power:0.1", "itlog:16"),
    ("power:0.1", "wdyadic"),
];

/// E-power `E[ln M^(eta)_t] / t` of every schedule on one shared matrix of
/// running maxima.
pub fn exp4_epower(settings: &RunSettings) -> Result<Exp4Output> {
    let mut curves = Vec::new();
    let mut meta = (0.0, 0, 0, 0);
    let result = timed(|| {
        let seed = settings.seed_for(ExperimentId::E4);
        let n = settings.paths(20_000);
        let horizon = settings.horizon(2500);
        let info = kl_rate(MU)?;
        let grid = main_grid(horizon)?;
        let config = MonteCarloConfig { n_paths: n, horizon, batch_size: settings.batch_size, master_seed: seed };
        let batch = simulate_running_max_with(&GaussianBed::alternative(MU)?, &config, &grid)?;
        let h_checksum = batch.checksum();
        let x_max = batch.max_value().max(1.0);
        let schedules = settings.schedules_or(&TABLE_KEYS);

        let mut table = Table::new(&["schedule", "t", "epower_mean", "epower_se", "log_growth_mean"]);
        for s in &schedules {
            let profile = ProfileTable::build(s, x_max)?;
            let traj = aggregate_from_running_max(&profile, &batch)?;
            let mut epower = Vec::with_capacity(grid.len());
            let mut growth = Vec::with_capacity(grid.len());
            for &t in grid.points() {
                let g = traj.log_growth(t)?;
                let e = if t == 0 { NAN_ESTIMATE } else { traj.epower(t)? };
                if t > 0 {
                    table.push(vec![s.key().into(), t.into(), e.mean.into(), e.se.into(), g.mean.into()]);
                }
                epower.push(e);
                growth.push(g);
            }
            curves.push(ScheduleCurve {
                key: s.key(),
                target_rho: s.target_rho(),
                grid: grid.clone(),
                epower,
                log_growth: growth,
                final_rates: traj.rates_at(horizon)?,
            });
        }

        let mut r = ExperimentResult::new(ExperimentId::E4, table, seed);
        for c in &curves {
            let p = c.epower.last().expect("grid ends at the horizon").mean;
            r.check_le(format!("{}: |P(T) - rho I|", c.key), (p - c.target_rho * info).abs(), 0.02);
        }
        let find = |key: &str| curves.iter().find(|c| c.key == key);
        for (lo, hi) in ORDERING {
            if let (Some(a), Some(b)) = (find(lo), find(hi)) {
                let diff: Vec<f64> = b.final_rates.iter().zip(&a.final_rates).map(|(x, y)| x - y).collect();
                let d = mean_with_se(&diff)?;
                r.check_ge(format!("ordering {lo} <= {hi}: paired diff + 2 SE"), d.mean + 2.0 * d.se, 0.0);
            }
        }
        r.param("paths", n);
        r.param("horizon", horizon);
        r.param("mu", MU);
        r.param("grid_points", grid.len());
        r.param("h_checksum", format!("{h_checksum:016x}"));
        r.param("schedules", schedules.iter().map(|s| s.key()).collect::<Vec<_>>().join(" "));
        r.param("batch_size", settings.batch_size);
        meta = (info, horizon, seed, h_checksum);
        Ok(r)
    })?;
    let (info, horizon, seed, h_checksum) = meta;
    Ok(Exp4Output { result, curves, info, horizon, seed, h_checksum })
}

/// Convergence speed of the full-rate schedules, read from experiment 4's
/// curves without new simulation.
pub fn exp5_fullrate_speed(exp4: &Exp4Output) -> Result<ExperimentResult> {
    timed(|| {
        const REACH: [(f64, &str); 3] = [(0.8, "reach80"), (0.9, "reach90"), (0.95, "reach95")];
        let info = exp4.info;
        let full: Vec<&ScheduleCurve> = exp4.curves.iter().filter(|c| c.target_rho == 1.0).collect();
        let mut table = Table::new(&["schedule", "metric", "t", "value"]);
        let mut r_checks = Vec::new();
        for c in &full {
            let key = c.key.as_str();
            let pts = c.grid.points();
            for (&t, e) in pts.iter().zip(&c.epower).filter(|(&t, _)| t > 0) {
                table.push(vec![key.into(), "gap".into(), t.into(), (info - e.mean).into()]);
            }
            for (q, name) in REACH {
                let hit = pts.iter().zip(&c.epower).find(|(&t, e)| t > 0 && e.mean >= q * info).map(|(&t, _)| t);
                table.push(vec![key.into(), name.into(), hit.into(), Cell::Empty]);
                if q == 0.8 {
                    r_checks.push((format!("{key}: first t reaching 0.8 I"), hit.map_or(f64::INFINITY, |t| t as f64)));
                }
            }
            let qs = quantiles(&c.final_rates, &[0.25, 0.5, 0.75])?;
            for (name, v) in ["q25", "median", "q75"].into_iter().zip(qs) {
                table.push(vec![key.into(), name.into(), exp4.horizon.into(), v.into()]);
            }
            table.push(vec![key.into(), "target".into(), Cell::Empty, (c.target_rho * info).into()]);

            let tail_start = pts.iter().position(|&t| t as f64 >= 0.8 * exp4.horizon as f64).expect("nonempty");
            let tail_gaps: Vec<f64> = c.epower[tail_start..].iter().map(|e| info - e.mean).collect();
            let min_gap = tail_gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let shrink = tail_gaps.last().expect("nonempty") - tail_gaps[0];
            r_checks.push((format!("{key}: -min gap over tail"), -min_gap));
            r_checks.push((format!("{key}: gap(T) - gap(0.8 T)"), shrink));
        }
        let mut r = ExperimentResult::new(ExperimentId::E5, table, exp4.seed);
        for (name, observed) in r_checks {
            let bound = if name.contains("reach") { exp4.horizon as f64 } else { 0.0 };
            r.check_le(name, observed, bound);
        }
        r.param("source", "exp4 paths, no new simulation");
        r.param("h_checksum", format!("{:016x}", exp4.h_checksum));
        r.param("horizon", exp4.horizon);
        r.param("schedules", full.iter().map(|c| c.key.as_str()).collect::<Vec<_>>().join(" "));
        Ok(r)
    })
}

/// Information horizon `I T` shared by all means of the KL sweep.
pub const INFO_HORIZON: f64 = 750.0;
pub const KL_MUS: [f64; 4] = [0.5, 0.8, 1.0, 1.25];

/// Weighted-dyadic e-power divided by `I = mu^2 / 2` against information
/// time `I t`, for each mean.
pub fn exp7_kl_scaling(settings: &RunSettings) -> Result<ExperimentResult> {
    timed(|| {
        let seed = settings.seed_for(ExperimentId::E7);
        let n = settings.paths(6000);
        let schedule = settings.schedules_or(&["wdyadic"]).remove(0);
        let mut table = Table::new(&["mu", "t", "info_time", "epower_mean", "epower_se", "normalized"]);
        let mut finals = Vec::new();
        let mut horizons = Vec::new();
        for (i, &mu) in KL_MUS.iter().enumerate() {
            let info = kl_rate(mu)?;
            let horizon = (INFO_HORIZON / info).round() as u64;
            let (grid, _, _) = grid_with_size(horizon, 150, 180)?;
            let config = MonteCarloConfig {
                n_paths: n,
                horizon,
                batch_size: settings.batch_size,
                master_seed: derive_seed(seed, i as u64),
            };
            let batch = simulate_running_max_with(&GaussianBed::alternative(mu)?, &config, &grid)?;
            let profile = ProfileTable::build(&schedule, batch.max_value().max(1.0))?;
            let traj = aggregate_from_running_max(&profile, &batch)?;
            for &t in grid.points().iter().filter(|&&t| t > 0) {
                let e = traj.epower(t)?;
                table.push(vec![
                    mu.into(),
                    t.into(),
                    (info * t as f64).into(),
                    e.mean.into(),
                    e.se.into(),
                    (e.mean / info).into(),
                ]);
            }
            finals.push((mu, traj.epower(horizon)?.mean / info));
            horizons.push(horizon.to_string());
        }
        let mut r = ExperimentResult::new(ExperimentId::E7, table, seed);
        for (mu, v) in finals {
            r.check_ge(format!("mu={mu}: normalized e-power at It=750 lower"), v, 0.95);
            r.check_le(format!("mu={mu}: normalized e-power at It=750 upper"), v, 1.05);
        }
        r.param("paths_per_mu", n);
        r.param("mus", "0.5 0.8 1 1.25");
        r.param("horizons", horizons.join(" "));
        r.param("info_horizon", INFO_HORIZON);
        r.param("grid_points", 180);
        r.param("schedule", schedule.key());
        r.param("batch_size", settings.batch_size);
        Ok(r)
    })
}

/// Weighted-dyadic profile evaluated at the delayed running maximum
/// `H_{floor(t / gamma)}`.
pub fn exp8_delayed_tests(settings: &RunSettings, gammas: &[f64]) -> Result<ExperimentResult> {
    if let Some(g) = gammas.iter().find(|&&g| !(g >= 1.0 && g.is_finite())) {
        return Err(invalid(format!("delay factor must be >= 1, got {g}")));
    }
    timed(|| {
        let seed = settings.seed_for(ExperimentId::E8);
        let n = settings.paths(10_000);
        let horizon = settings.horizon(2500);
        let info = kl_rate(MU)?;
        let eval_grid = main_grid(horizon)?;
        let mut points = eval_grid.points().to_vec();
        for &g in gammas {
            points.extend(eval_grid.points().iter().map(|&t| delayed_time(t, g)));
        }
        let sim_grid = TimeGrid::new(points)?;
        let config = MonteCarloConfig { n_paths: n, horizon, batch_size: settings.batch_size, master_seed: seed };
        let batch = simulate_running_max_with(&GaussianBed::alternative(MU)?, &config, &sim_grid)?;
        let schedule = settings.schedules_or(&["wdyadic"]).remove(0);
        let profile = ProfileTable::build(&schedule, batch.max_value().max(1.0))?;

        let mut table = Table::new(&["gamma", "t", "epower_mean", "epower_se", "target"]);
        let mut finals = Vec::new();
        for &g in gammas {
            let traj = aggregate_delayed(&profile, &batch, g, &eval_grid)?;
            let target = info / g;
            for &t in eval_grid.points().iter().filter(|&&t| t > 0) {
                let e = traj.epower(t)?;
                table.push(vec![g.into(), t.into(), e.mean.into(), e.se.into(), target.into()]);
            }
            finals.push((g, traj.epower(horizon)?.mean, target));
        }
        let mut r = ExperimentResult::new(ExperimentId::E8, table, seed);
        for (g, p, target) in finals {
            r.check_le(format!("gamma={g}: |P(T) - I/gamma|"), (p - target).abs(), 0.02);
        }
        r.param("paths", n);
        r.param("horizon", horizon);
        r.param("mu", MU);
        r.param("gammas", gammas.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" "));
        r.param("eval_grid_points", eval_grid.len());
        r.param("simulation_grid_points", sim_grid.len());
        r.param("schedule", schedule.key());
        r.param("batch_size", settings.batch_size);
        Ok(r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunSettings {
        RunSettings { scale: 0.02, ..RunSettings::default() }
    }

    #[test]
    fn exp4_feeds_exp5_without_simulation() {
        let out = exp4_epower(&small()).unwrap();
        assert_eq!(out.curves.len(), 7);
        assert_eq!(out.result.table.rows.len(), 7 * 290);
        let r5 = exp5_fullrate_speed(&out).unwrap();
        assert_eq!(r5.seed, out.seed);
        assert_eq!(r5.params["h_checksum"], out.result.params["h_checksum"]);
        let again = exp4_epower(&small()).unwrap();
        assert_eq!(out.result.to_csv(), again.result.to_csv());
    }

    #[test]
    fn exp8_identity_delay_matches_exp4_paths_shape() {
        let r = exp8_delayed_tests(&small(), &[1.0, 2.0]).unwrap();
        assert_eq!(r.table.rows.len(), 2 * 290);
        assert!(exp8_delayed_tests(&small(), &[0.5]).is_err());
    }

    #[test]
    fn exp3_reports_censoring() {
        let s = RunSettings { paths: Some(50), horizon: Some(1000), ..RunSettings::default() };
        let r = exp3_first_passage(&s).unwrap();
        assert_eq!(r.table.rows.len(), 70);
        assert!(!r.warnings.is_empty());
        assert!(!r.passed());
    }
}
