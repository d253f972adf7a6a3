//! Gaussian simple-vs-simple test bed.
//!
//! Observations are `X_i ~ N(0, 1)` under the null and `N(mu, 1)` under the
//! alternative. The log-likelihood-ratio score is
//! `S_t = sum_{i<=t} (mu X_i - mu^2 / 2)` and `H_t = max_{s<=t} S_s`. The
//! one-sided SPRT at level `alpha` rejects once `H_t >= ln(1/alpha)`, so a
//! family of such tests over ascending thresholds is nested.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::montecarlo::{run_batches, MonteCarloConfig, TimeGrid, DEFAULT_BATCH_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    Null,
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBed {
    mu: f64,
    hypothesis: Hypothesis,
}

/// KL divergence of `N(mu, 1)` from `N(0, 1)`.
pub fn kl_rate(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mu must be positive, got {mu}")));
    }
    Ok(0.5 * mu * mu)
}

impl GaussianBed {
    pub fn new(mu: f64, hypothesis: Hypothesis) -> Result<Self> {
        kl_rate(mu)?;
        Ok(Self { mu, hypothesis })
    }

    pub fn null(mu: f64) -> Result<Self> {
        Self::new(mu, Hypothesis::Null)
    }

    pub fn alternative(mu: f64) -> Result<Self> {
        Self::new(mu, Hypothesis::Alternative)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.hypothesis
    }

    pub fn kl_rate(&self) -> f64 {
        0.5 * self.mu * self.mu
    }

    /// Score increment `mu X - mu^2/2` for a standard normal draw `z`.
    #[inline]
    pub fn increment(&self, z: f64) -> f64 {
        let x = match self.hypothesis {
            Hypothesis::Null => z,
            Hypothesis::Alternative => z + self.mu,
        };
        self.mu * x - 0.5 * self.mu * self.mu
    }

    /// Simulates one path to `grid.last()`, writing `H` at each grid point
    /// into `out`. The maximum is updated every step.
    pub fn running_max_path<R: Rng + ?Sized>(&self, grid: &TimeGrid, rng: &mut R, out: &mut [f64]) {
        let mut s = 0.0;
        let mut h = 0.0f64;
        let mut t = 0u64;
        for (slot, &g) in out.iter_mut().zip(grid.points()) {
            while t < g {
                s += self.increment(rng.sample(StandardNormal));
                h = h.max(s);
                t += 1;
            }
            *slot = h;
        }
    }
}

/// Running maxima `H` of simulated score paths, stored row-major as
/// `[path][grid point]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMaxBatch {
    bed: GaussianBed,
    grid: TimeGrid,
    n_paths: usize,
    values: Vec<f64>,
    master_seed: u64,
}

impl RunningMaxBatch {
    pub fn from_rows(bed: GaussianBed, grid: TimeGrid, values: Vec<f64>, master_seed: u64) -> Result<Self> {
        if !values.len().is_multiple_of(grid.len()) {
            return Err(invalid("running-max values do not fill whole rows"));
        }
        let n_paths = values.len() / grid.len();
        Ok(Self { bed, grid, n_paths, values, master_seed })
    }

    pub fn bed(&self) -> &GaussianBed {
        &self.bed
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn row(&self, path: usize) -> &[f64] {
        let w = self.grid.len();
        &self.values[path * w..(path + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.grid.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `H` at grid index `j` for every path.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Order-sensitive hash of the stored values, used to confirm that
    /// several consumers saw the same paths.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.values {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Simulates `n_paths` paths with the default batch size.
pub fn simulate_running_max(
    bed: &GaussianBed,
    n_paths: usize,
    horizon: u64,
    grid: &TimeGrid,
    seed: u64,
) -> Result<RunningMaxBatch> {
    let config = MonteCarloConfig { n_paths, horizon, batch_size: DEFAULT_BATCH_SIZE, master_seed: seed }
        .validated()?;
    simulate_running_max_with(bed, &config, grid)
}

pub fn simulate_running_max_with(
    bed: &GaussianBed,
    config: &MonteCarloConfig,
    grid: &TimeGrid,
) -> Result<RunningMaxBatch> {
    let config = config.validated()?;
    if grid.last() > config.horizon {
        return Err(invalid(format!(
            "grid reaches {} beyond horizon {}",
            grid.last(),
            config.horizon
        )));
    }
    let width = grid.len();
    let batches = run_batches(config.n_paths, config.batch_size, config.master_seed, |spec, rng| {
        let mut block = vec![0.0; spec.len * width];
        for row in block.chunks_exact_mut(width) {
            bed.running_max_path(grid, rng, row);
        }
        block
    });
    let values = batches.concat();
    RunningMaxBatch::from_rows(*bed, grid.clone(), values, config.master_seed)
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.iter().any(|&b| b.is_nan() || b <= 0.0) {
        return Err(invalid("first-passage thresholds must be positive"));
    }
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("first-passage thresholds must be ascending"));
    }
    Ok(())
}

/// First grid time with `H >= b` for each ascending threshold `b`; `None`
/// when the path never reaches `b` within the grid.
pub fn first_passage(h_row: &[f64], grid: &TimeGrid, thresholds: &[f64]) -> Result<Vec<Option<u64>>> {
    check_thresholds(thresholds)?;
    if h_row.len() != grid.len() {
        return Err(invalid("running-max row and grid differ in length"));
    }
    let mut out = Vec::with_capacity(thresholds.len());
    let mut j = 0;
    for &b in thresholds {
        while j < h_row.len() && h_row[j] < b {
            j += 1;
        }
        out.push(grid.points().get(j).copied());
    }
    Ok(out)
}

/// First-passage times for every path of a batch, `[path][threshold]`.
pub fn first_passage_batch(batch: &RunningMaxBatch, thresholds: &[f64]) -> Result<Vec<Vec<Option<u64>>>> {
    batch.rows().map(|r| first_passage(r, batch.grid(), thresholds)).collect()
}

/// Exact (every-step) first-passage times of freshly simulated paths,
/// `[path][threshold]`, without storing the paths. Every path consumes
/// `horizon` draws, so the paths do not depend on the thresholds.
pub fn simulate_first_passage(
    bed: &GaussianBed,
    config: &MonteCarloConfig,
    thresholds: &[f64],
) -> Result<Vec<Vec<Option<u64>>>> {
    check_thresholds(thresholds)?;
    let config = config.validated()?;
    let batches = run_batches(config.n_paths, config.batch_size, config.master_seed, |spec, rng| {
        (0..spec.len)
            .map(|_| {
                let mut taus = vec![None; thresholds.len()];
                let mut next = 0;
                let mut s = 0.0;
                for t in 1..=config.horizon {
                    s += bed.increment(rng.sample(StandardNormal));
                    while next < thresholds.len() && s >= thresholds[next] {
                        taus[next] = Some(t);
                        next += 1;
                    }
                }
                taus
            })
            .collect::<Vec<_>>()
    });
    Ok(batches.into_iter().flatten().collect())
}
