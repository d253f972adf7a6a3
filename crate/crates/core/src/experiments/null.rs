//! Null-side checks: SPRT size and e-process validity of the aggregates.

use super::{log_space, timed, Cell, ExperimentId, ExperimentResult, RunSettings, Table, MU};
use crate::aggregate::{aggregate_from_running_max, checked_exp};
use crate::error::Result;
use crate::gaussian::{simulate_running_max_with, GaussianBed};
use crate::montecarlo::{binomial_ci, grid_with_size, mean_with_se, MonteCarloConfig, TimeGrid};
use crate::profile::ProfileTable;

/// Fraction of null paths whose score reaches `ln(1/alpha)` by the horizon,
/// for 24 log-spaced levels in `[0.002, 0.25]`.
pub fn exp2_sprt_size(settings: &RunSettings) -> Result<ExperimentResult> {
    timed(|| {
        let seed = settings.seed_for(ExperimentId::E2);
        let n = settings.paths(80_000);
        let horizon = settings.horizon(1800);
        let config = MonteCarloConfig { n_paths: n, horizon, batch_size: settings.batch_size, master_seed: seed };
        let bed = GaussianBed::null(MU)?;
        let grid = TimeGrid::new(vec![0, horizon])?;
        let batch = simulate_running_max_with(&bed, &config, &grid)?;
        let sup = batch.column(1);

        let alphas = log_space(0.002, 0.25, 24);
        let mut table = Table::new(&["alpha", "p_hat", "ci_lo", "ci_hi"]);
        let mut r_checks = Vec::new();
        let mut p_hats = Vec::new();
        for &alpha in &alphas {
            let b = (1.0 / alpha).ln();
            let hits = sup.iter().filter(|&&h| h >= b).count();
            let p_hat = hits as f64 / n as f64;
            let (lo, hi) = binomial_ci(p_hat, n)?;
            table.push(vec![alpha.into(), p_hat.into(), lo.into(), hi.into()]);
            let bound = alpha + 3.0 * (alpha * (1.0 - alpha) / n as f64).sqrt();
            r_checks.push((alpha, p_hat, bound));
            p_hats.push(p_hat);
        }
        let mut r = ExperimentResult::new(ExperimentId::E2, table, seed);
        for (alpha, p_hat, bound) in r_checks {
            r.check_le(format!("alpha={alpha:.6}: p_hat"), p_hat, bound);
        }
        // Same paths, nested thresholds: p_hat is monotone in alpha.
        let inversions = p_hats.windows(2).filter(|w| w[1] < w[0]).count();
        r.check_le("p_hat nondecreasing in alpha (inversions)", inversions as f64, 0.0);
        r.param("paths", n);
        r.param("horizon", horizon);
        r.param("mu", MU);
        r.param("levels", "24 log-spaced alpha in [0.002, 0.25]");
        r.param("batch_size", settings.batch_size);
        Ok(r)
    })
}

pub const STOP_THRESHOLDS: [f64; 4] = [1.5, 2.0, 5.0, 10.0];

/// Null means of `M_t` at every grid time and under the grid-observed rule
/// "stop when `M >= c`, else at the last grid time".
pub fn exp6_null_validity(settings: &RunSettings) -> Result<ExperimentResult> {
    timed(|| {
        let seed = settings.seed_for(ExperimentId::E6);
        let n = settings.paths(50_000);
        let horizon = settings.horizon(1800);
        let (grid, n_linear, n_geo) = grid_with_size(horizon, 140.min(horizon as usize), 170.min(horizon as usize + 1))?;
        let config = MonteCarloConfig { n_paths: n, horizon, batch_size: settings.batch_size, master_seed: seed };
        let bed = GaussianBed::null(MU)?;
        let batch = simulate_running_max_with(&bed, &config, &grid)?;
        let x_max = batch.max_value().max(1.0);
        let schedules = settings.schedules_or(&["dyadic", "power:0.5", "logcorr:2:10", "wdyadic"]);

        let mut table = Table::new(&["schedule", "kind", "param", "mean", "se"]);
        let mut checks = Vec::new();
        for s in &schedules {
            let profile = ProfileTable::build(s, x_max)?;
            let traj = aggregate_from_running_max(&profile, &batch)?;
            let mut worst_fixed = f64::NEG_INFINITY;
            let mut t0_mean = f64::NAN;
            for (j, &t) in grid.points().iter().enumerate() {
                let e = traj.linear_mean(j)?;
                if t == 0 {
                    t0_mean = e.mean;
                }
                worst_fixed = worst_fixed.max(e.mean - 3.0 * e.se);
                table.push(vec![s.key().into(), "fixed".into(), Cell::Int(t), e.mean.into(), e.se.into()]);
            }
            checks.push((format!("{}: max_t fixed-time mean - 3 SE", s.key()), worst_fixed));
            checks.push((format!("{}: fixed-time mean at t=0", s.key()), t0_mean));
            for c in STOP_THRESHOLDS {
                let level = c.ln();
                let stopped = traj
                    .rows()
                    .map(|row| {
                        let j = row.iter().position(|&lm| lm >= level).unwrap_or(row.len() - 1);
                        checked_exp(row[j])
                    })
                    .collect::<Result<Vec<_>>>()?;
                let e = mean_with_se(&stopped)?;
                table.push(vec![s.key().into(), "stopped".into(), c.into(), e.mean.into(), e.se.into()]);
                checks.push((format!("{}: stopped mean - 3 SE, c={c}", s.key()), e.mean - 3.0 * e.se));
            }
        }
        let mut r = ExperimentResult::new(ExperimentId::E6, table, seed);
        for (name, observed) in checks {
            if name.ends_with("t=0") {
                r.check_le(name, observed.abs(), 0.0);
            } else {
                r.check_le(name, observed, 1.0);
            }
        }
        r.param("paths", n);
        r.param("horizon", horizon);
        r.param("mu", MU);
        r.param("grid_points", grid.len());
        r.param("grid_linear_points", n_linear);
        r.param("grid_geometric_points", n_geo);
        r.param("stop_thresholds", "1.5 2 5 10");
        r.param("schedules", schedules.iter().map(|s| s.key()).collect::<Vec<_>>().join(" "));
        r.param("batch_size", settings.batch_size);
        Ok(r)
    })
}
