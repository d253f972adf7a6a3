//! Batched simulation driver, time grids and Monte Carlo summaries.
//!
//! Batches run in parallel on the rayon pool. Each batch owns a ChaCha8
//! generator seeded from the master seed with the batch index as its stream
//! id, and results are gathered in batch order, so output does not depend on
//! the number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, WaitError};

pub const DEFAULT_BATCH_SIZE: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n_paths: usize,
    pub horizon: u64,
    pub batch_size: usize,
    pub master_seed: u64,
}

impl MonteCarloConfig {
    pub fn new(n_paths: usize, horizon: u64, master_seed: u64) -> Result<Self> {
        Self { n_paths, horizon, batch_size: DEFAULT_BATCH_SIZE, master_seed }.validated()
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self> {
        self.batch_size = batch_size;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        Ok(self)
    }

    pub fn n_batches(&self) -> usize {
        self.n_paths.div_ceil(self.batch_size)
    }
}

/// One batch of paths: `[start, start + len)` in global path order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub index: usize,
    pub start: usize,
    pub len: usize,
}

/// Generator for batch `index`: a disjoint ChaCha8 stream of `master_seed`.
pub fn batch_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `work` over all batches and returns the per-batch outputs in batch
/// order.
pub fn run_batches<T, F>(n_paths: usize, batch_size: usize, master_seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(BatchSpec, &mut ChaCha8Rng) -> T + Sync,
{
    let n_batches = n_paths.div_ceil(batch_size.max(1));
    (0..n_batches)
        .into_par_iter()
        .map(|index| {
            let start = index * batch_size;
            let spec = BatchSpec { index, start, len: batch_size.min(n_paths - start) };
            let mut rng = batch_rng(master_seed, index);
            work(spec, &mut rng)
        })
        .collect()
}

/// SplitMix64 finalizer; used to derive independent experiment seeds from a
/// master seed and a tag.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    let mut z = master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ascending, duplicate-free time points starting at 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid(Vec<u64>);

impl TimeGrid {
    pub fn new(mut points: Vec<u64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("time grid is empty"));
        }
        points.sort_unstable();
        points.dedup();
        if points[0] != 0 {
            points.insert(0, 0);
        }
        Ok(Self(points))
    }

    /// `{0, 1, ..., horizon}`.
    pub fn full(horizon: u64) -> Self {
        Self((0..=horizon).collect())
    }

    pub fn points(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> u64 {
        *self.0.last().expect("grid is nonempty")
    }

    pub fn index_of(&self, t: u64) -> Result<usize> {
        self.0.binary_search(&t).map_err(|_| WaitError::NotOnGrid(t))
    }
}

/// `{0}` united with `n_geometric` points `round(horizon^(j/(n-1)))` and
/// `n_linear` equally spaced points ending at `horizon`, deduplicated.
pub fn build_time_grid(horizon: u64, n_linear: usize, n_geometric: usize) -> Result<TimeGrid> {
    if horizon == 0 || n_linear == 0 || n_linear as u64 > horizon {
        return Err(invalid(format!(
            "time grid needs horizon >= n_linear >= 1, got horizon {horizon}, n_linear {n_linear}"
        )));
    }
    let h = horizon as f64;
    let mut points = vec![0u64];
    points.extend((1..=n_linear).map(|i| (i as f64 * h / n_linear as f64).round() as u64));
    match n_geometric {
        0 => {}
        1 => points.push(1),
        n => points.extend((0..n).map(|j| h.powf(j as f64 / (n - 1) as f64).round() as u64)),
    }
    TimeGrid::new(points)
}

/// Searches for the geometric point count that makes [`build_time_grid`]
/// produce exactly `size` unique points, lowering `n_linear` if no count
/// hits the target.
pub fn grid_with_size(horizon: u64, n_linear: usize, size: usize) -> Result<(TimeGrid, usize, usize)> {
    for nl in (1..=n_linear).rev() {
        for ng in 0..=size {
            let g = build_time_grid(horizon, nl, ng)?;
            if g.len() == size {
                return Ok((g, nl, ng));
            }
        }
    }
    Err(invalid(format!("no grid with {size} points below horizon {horizon}")))
}

/// Mean and standard error `s / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// Whether the mean is at most `bound + z * se`.
    pub fn at_most(&self, bound: f64, z: f64) -> bool {
        self.mean <= bound + z * self.se
    }
}

pub fn mean_with_se(samples: &[f64]) -> Result<Estimate> {
    let n = samples.len();
    if n < 2 {
        return Err(WaitError::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    Ok(Estimate { mean, se: sd / nf.sqrt(), n })
}

/// Normal-approximation 95% interval for a proportion, clamped to `[0, 1]`.
pub fn binomial_ci(p_hat: f64, n: usize) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p_hat) || n == 0 {
        return Err(invalid(format!("binomial_ci needs p in [0,1], n >= 1; got {p_hat}, {n}")));
    }
    let half = 1.96 * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(((p_hat - half).max(0.0), (p_hat + half).min(1.0)))
}

/// Empirical quantiles with linear interpolation between order statistics
/// (position `p (n - 1)` in the sorted sample).
pub fn quantiles(samples: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(WaitError::InsufficientSamples { needed: 1, got: 0 });
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(invalid(format!("quantile probability {p} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    Ok(probs
        .iter()
        .map(|&p| {
            let pos = p * last;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect())
}
