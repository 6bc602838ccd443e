//! Projected stochastic gradient methods and their building blocks.
//!
//! [`xor_pgd`] runs projected gradient descent where each step averages
//! `N` per-scenario gradients drawn by a [`GradientEstimator`]. The step
//! and averaging rules come from [`StepSchedule`]: `Plain` uses
//! `ρκ/(μk)` with a uniform average, `Improved` uses `2ρκ/(μ(k+1))` with
//! a `k`-weighted average. [`xor_sgd`] and [`penalized_sgd`] are the
//! unprojected baselines, and [`primal_dual_al`] handles affine equality
//! constraints through an augmented Lagrangian.

mod augmented;
mod constraints;
mod estimator;
mod pgd;
mod problem;
mod schedule;
mod trace;

pub use augmented::{primal_dual_al, AlConfig};
pub use constraints::{ConstraintSet, DYKSTRA_MAX_ITERS, DYKSTRA_TOL};
pub use estimator::{EstimatorMode, GradientEstimate, GradientEstimator};
pub use pgd::{
    max_sgd_step, penalized_sgd, xor_pgd, xor_sgd, PenaltyConfig, PgdConfig, SgdConfig,
    FEASIBILITY_TOL,
};
pub use problem::{Regularized, StochasticProblem};
pub use schedule::{average, Averaging, StepSchedule};
pub use trace::{Diagnostics, IterRecord, RunSummary, RunTrace, CSV_HEADER};
