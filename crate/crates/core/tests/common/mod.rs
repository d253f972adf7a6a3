//! Shared oracles for the integration tests.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wait_core::aggregate::{aggregate_brute_force, aggregate_from_running_max};
use wait_core::gaussian::{GaussianBed, RunningMaxBatch};
use wait_core::montecarlo::TimeGrid;
use wait_core::profile::ProfileTable;
use wait_core::schedules::LevelSchedule;

/// Alternative mean and horizon of the oracle paths; small enough that every
/// level below the largest running maximum can be enumerated.
pub const ORACLE_MU: f64 = 0.4;
pub const ORACLE_HORIZON: u64 = 60;

/// Score paths `S_0 = 0, S_t = sum (mu X_i - mu^2/2)`, `X_i ~ N(mu, 1)`,
/// drawn from a generator private to the tests.
pub fn score_paths(n: usize, mu: f64, horizon: u64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut s = vec![0.0];
            let mut acc = 0.0;
            for _ in 0..horizon {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc += mu * (mu + z) - mu * mu / 2.0;
                s.push(acc);
            }
            s
        })
        .collect()
}

fn running_max(s: &[f64]) -> Vec<f64> {
    let mut m = 0.0f64;
    s.iter()
        .map(|&v| {
            m = m.max(v);
            m
        })
        .collect()
}

/// `tau_k = inf{t : S_t >= b_k}` for every level with `b_k <= max S`, by a
/// forward sweep (the levels are ascending, so the times are nested).
fn stopping_times(s: &LevelSchedule, path: &[f64]) -> Vec<Option<u64>> {
    let top = path.iter().copied().fold(0.0, f64::max);
    let mut taus = Vec::new();
    let mut t = 0usize;
    let mut k = s.k_start();
    loop {
        let b = s.b(k).unwrap();
        if b > top {
            break;
        }
        while path[t] < b {
            t += 1;
        }
        taus.push(Some(t as u64));
        k += 1;
    }
    taus
}

/// Largest `|ln M_fast - ln M_direct|` over all paths and times, where the
/// direct value sums `w_k 1{tau_k <= t}` level by level. Returns the error
/// and the number of levels enumerated.
pub fn oracle_max_log_error(s: &LevelSchedule, paths: &[Vec<f64>]) -> (f64, usize) {
    let horizon = (paths[0].len() - 1) as u64;
    let grid = TimeGrid::full(horizon);
    let values: Vec<f64> = paths.iter().flat_map(|p| running_max(p)).collect();
    let bed = GaussianBed::alternative(ORACLE_MU).unwrap();
    let batch = RunningMaxBatch::from_rows(bed, grid.clone(), values, 0).unwrap();
    let profile = ProfileTable::build(s, batch.max_value().max(1.0)).unwrap();
    let fast = aggregate_from_running_max(&profile, &batch).unwrap();

    let mut worst = 0.0f64;
    let mut levels = 0;
    for (i, path) in paths.iter().enumerate() {
        let taus = stopping_times(s, path);
        levels += taus.len();
        for (j, &t) in grid.points().iter().enumerate() {
            let direct = aggregate_brute_force(s, &taus, t).unwrap();
            let got = fast.row(i)[j];
            let err = if direct == f64::NEG_INFINITY && got == f64::NEG_INFINITY {
                0.0
            } else {
                (got - direct).abs()
            };
            worst = worst.max(err);
        }
    }
    (worst, levels)
}
