//! WAIT e-processes: weighted aggregates of indicators of stopping times.
//!
//! Given level tests `tau_k` at levels `alpha_k` and weights `w_k` with
//! `sum_k w_k alpha_k <= 1`, the aggregate `M_t = sum_k w_k 1{tau_k <= t}` is
//! a nondecreasing e-process. Its log growth under an alternative is
//! `rho I`, where `I` is the rate of the base tests and `rho` the exponent of
//! the weight profile `W(x) = sum_{b_k <= x} w_k`.
//!
//! - [`schedules`]: level/weight families and their capital budgets.
//! - [`profile`]: exact `ln W(x)`, `N(x)` and profile exponents.
//! - [`gaussian`]: Gaussian SPRT test bed (scores, running maxima, first passage).
//! - [`aggregate`]: `M_t = W(H_t)`, e-power, threshold times.
//! - [`montecarlo`]: batched seeded simulation and summaries.
//! - [`experiments`]: the ten reproduction experiments.
//! - [`cli`]: command-line driver.

pub mod aggregate;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod montecarlo;
pub mod numerics;
pub mod profile;
pub mod schedules;

pub use aggregate::{aggregate_brute_force, aggregate_from_running_max, eta_correct, AggregateTrajectory};
pub use error::{Result, WaitError};
pub use gaussian::{kl_rate, GaussianBed, Hypothesis, RunningMaxBatch};
pub use montecarlo::{Estimate, MonteCarloConfig, TimeGrid};
pub use profile::{build_profile, ProfileTable};
pub use schedules::{zeta_sum_with_tail, Level, LevelSchedule, ScheduleKind};
