use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::constraints::ConstraintSet;
use super::estimator::{GradientEstimate, GradientEstimator};
use super::problem::StochasticProblem;
use super::schedule::{average, Averaging, StepSchedule};
use super::trace::{IterRecord, RunTrace};
use crate::error::{Error, Result};

/// Membership tolerance for iterates of projected methods.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    /// `K`: number of iterates `x_1 = x0, …, x_K`.
    pub iterations: usize,
    /// Declared strong-convexity constant.
    pub mu: f64,
    pub rho_kappa: f64,
    pub schedule: StepSchedule,
    pub x0: Vec<f64>,
    /// Wall-clock budget in seconds; the run stops early and averages the
    /// iterates reached so far.
    #[serde(default)]
    pub time_limit: Option<f64>,
}

impl PgdConfig {
    pub fn new(iterations: usize, mu: f64, rho_kappa: f64, schedule: StepSchedule, x0: Vec<f64>) -> Self {
        PgdConfig {
            iterations,
            mu,
            rho_kappa,
            schedule,
            x0,
            time_limit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iteration count K must be at least 1".into()));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidConfig(format!("mu must be positive, got {}", self.mu)));
        }
        let rk = self.rho_kappa;
        if !(rk >= 1.0 - 1e-12 && rk <= 2f64.sqrt() + 1e-12) {
            return Err(Error::InvalidConfig(format!("rho*kappa must lie in [1, sqrt 2], got {rk}")));
        }
        self.schedule.validate()?;
        validate_time_limit(self.time_limit)
    }

    pub fn method_name(&self) -> &'static str {
        match self.schedule {
            StepSchedule::Improved => "ixor-pgd",
            _ => "xor-pgd",
        }
    }
}

fn validate_time_limit(limit: Option<f64>) -> Result<()> {
    match limit {
        Some(t) if !(t.is_finite() && t > 0.0) => {
            Err(Error::InvalidConfig(format!("time limit must be positive, got {t}")))
        }
        _ => Ok(()),
    }
}

/// Shared bookkeeping for the iterative methods.
pub(crate) struct Recorder {
    trace: RunTrace,
    points: Vec<Vec<f64>>,
    start: Instant,
    limit: Option<Duration>,
}

impl Recorder {
    pub(crate) fn new(method: &str, time_limit: Option<f64>) -> Self {
        Recorder {
            trace: RunTrace::new(method),
            points: Vec::new(),
            start: Instant::now(),
            limit: time_limit.map(Duration::from_secs_f64),
        }
    }

    pub(crate) fn out_of_time(&mut self) -> bool {
        let over = self.limit.is_some_and(|l| self.start.elapsed() >= l);
        if over {
            self.trace.stopped_early = true;
        }
        over
    }

    pub(crate) fn push(
        &mut self,
        k: usize,
        x: &[f64],
        step: f64,
        residual: f64,
        est: Option<&GradientEstimate>,
    ) {
        if let Some(e) = est {
            let d = &mut self.trace.diagnostics;
            d.sigma_sq = d.sigma_sq.max(e.variance);
            d.eps_sq = d.eps_sq.max(e.gradient.iter().map(|g| g * g).sum());
            self.trace.total_attempts += e.attempts;
            self.trace.flagged_samples += e.flagged;
        }
        self.trace.records.push(IterRecord {
            k,
            step,
            x: x.to_vec(),
            attempts: est.map_or(0, |e| e.attempts),
            residual,
            obj_estimate: est.map(|e| e.value),
        });
        self.points.push(x.to_vec());
    }

    pub(crate) fn push_multipliers(&mut self, lambda: &[f64]) {
        self.trace.multipliers.push(lambda.to_vec());
    }

    pub(crate) fn finish(mut self, rule: Averaging, constraints: &ConstraintSet) -> (Vec<f64>, RunTrace) {
        let out = average(&self.points, rule);
        self.trace.output_residual = constraints.residual(&out);
        self.trace.output = out.clone();
        (out, self.trace)
    }
}

fn check_start(x0: &[f64], dim: usize, constraints: &ConstraintSet) -> Result<()> {
    if x0.len() != dim || constraints.dim() != dim {
        return Err(Error::Dimension(format!(
            "x0 has length {}, problem dimension {dim}, constraint dimension {}",
            x0.len(),
            constraints.dim()
        )));
    }
    Ok(())
}

fn axpy(x: &[f64], t: f64, g: &[f64]) -> Vec<f64> {
    x.iter().zip(g).map(|(a, b)| a - t * b).collect()
}

/// Projected stochastic gradient descent with averaged iterates.
///
/// For `k = 1, …, K − 1`: estimate `ḡ_k` at `x_k`, step by `t_k`, project.
/// The output averages `x_1, …, x_K` with the schedule's averaging rule.
pub fn xor_pgd<P, R>(
    problem: &P,
    estimator: &mut GradientEstimator<'_>,
    constraints: &ConstraintSet,
    cfg: &PgdConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, RunTrace)>
where
    P: StochasticProblem + ?Sized,
    R: rand::Rng + ?Sized,
{
    cfg.validate()?;
    check_start(&cfg.x0, problem.dim(), constraints)?;
    if !constraints.contains(&cfg.x0, FEASIBILITY_TOL) {
        return Err(Error::Infeasible(format!(
            "x0 violates the constraints by {}",
            constraints.residual(&cfg.x0)
        )));
    }
    let mut rec = Recorder::new(cfg.method_name(), cfg.time_limit);
    let mut x = cfg.x0.clone();
    for k in 1..=cfg.iterations {
        let residual = constraints.residual(&x);
        if k == cfg.iterations || rec.out_of_time() {
            rec.push(k, &x, 0.0, residual, None);
            break;
        }
        let est = estimator.estimate(problem, &x, rng)?;
        let t = cfg.schedule.step(k, cfg.mu, cfg.rho_kappa);
        rec.push(k, &x, t, residual, Some(&est));
        x = constraints.project(&axpy(&x, t, &est.gradient))?;
    }
    Ok(rec.finish(cfg.schedule.averaging(), constraints))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub iterations: usize,
    pub step: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub time_limit: Option<f64>,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iteration count K must be at least 1".into()));
        }
        StepSchedule::Constant { step: self.step }.validate()?;
        validate_time_limit(self.time_limit)
    }
}

/// Largest fixed step `(2 − ρ²κ²) / (L ρκ)` covered by the unconstrained
/// rate for an `L`-smooth objective.
pub fn max_sgd_step(smoothness: f64, rho_kappa: f64) -> f64 {
    (2.0 - rho_kappa * rho_kappa) / (smoothness * rho_kappa)
}

/// Fixed-step stochastic gradient descent without projection. The
/// constraint set is only used to report residuals.
pub fn xor_sgd<P, R>(
    problem: &P,
    estimator: &mut GradientEstimator<'_>,
    constraints: &ConstraintSet,
    cfg: &SgdConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, RunTrace)>
where
    P: StochasticProblem + ?Sized,
    R: rand::Rng + ?Sized,
{
    cfg.validate()?;
    check_start(&cfg.x0, problem.dim(), constraints)?;
    let mut rec = Recorder::new("xor-sgd", cfg.time_limit);
    let mut x = cfg.x0.clone();
    for k in 1..=cfg.iterations {
        let residual = constraints.residual(&x);
        if k == cfg.iterations || rec.out_of_time() {
            rec.push(k, &x, 0.0, residual, None);
            break;
        }
        let est = estimator.estimate(problem, &x, rng)?;
        rec.push(k, &x, cfg.step, residual, Some(&est));
        x = axpy(&x, cfg.step, &est.gradient);
    }
    Ok(rec.finish(Averaging::Uniform, constraints))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub iterations: usize,
    pub step: StepSchedule,
    /// Dual ascent step `η_k` on the multipliers.
    pub dual_step: StepSchedule,
    pub averaging: Averaging,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub time_limit: Option<f64>,
}

impl PenaltyConfig {
    /// Primal step 0.1 and dual step 10, both cut tenfold after 50 and
    /// again after 100 iterations.
    pub fn with_defaults(iterations: usize, x0: Vec<f64>) -> Self {
        PenaltyConfig {
            iterations,
            step: StepSchedule::Piecewise { initial: 0.1 },
            dual_step: StepSchedule::Piecewise { initial: 10.0 },
            averaging: Averaging::Uniform,
            x0,
            time_limit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iteration count K must be at least 1".into()));
        }
        for s in [self.step, self.dual_step] {
            if s.is_theoretical() {
                return Err(Error::InvalidConfig(
                    "penalty method needs an explicit (piecewise or constant) schedule".into(),
                ));
            }
            s.validate()?;
        }
        validate_time_limit(self.time_limit)
    }
}

/// Linear rows moved into the Lagrangian, plus the simple bounds kept as a
/// clip on the primal iterate.
struct Dualized {
    rows: Vec<Vec<f64>>,
    /// Row `i` reads `a_iᵀx − offset_i ≤ 0` (or `= 0` when `equality`).
    offsets: Vec<f64>,
    equality: bool,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
}

impl Dualized {
    fn from_set(c: &ConstraintSet) -> Self {
        match c {
            ConstraintSet::NonnegHalfspace { weights, cap } => Dualized {
                rows: vec![weights.clone()],
                offsets: vec![*cap],
                equality: false,
                lower: Some(vec![0.0; weights.len()]),
                upper: None,
            },
            ConstraintSet::Box { lower, upper } => Dualized {
                rows: vec![],
                offsets: vec![],
                equality: false,
                lower: Some(lower.clone()),
                upper: Some(upper.clone()),
            },
            ConstraintSet::Polyhedron { a, b } => Dualized {
                rows: a.clone(),
                offsets: b.clone(),
                equality: false,
                lower: None,
                upper: None,
            },
            ConstraintSet::EqualityAffine { a, b } => Dualized {
                rows: a.clone(),
                offsets: b.iter().map(|v| -v).collect(),
                equality: true,
                lower: None,
                upper: None,
            },
        }
    }

    fn clip(&self, x: &mut [f64]) {
        if let Some(l) = &self.lower {
            x.iter_mut().zip(l).for_each(|(v, b)| *v = v.max(*b));
        }
        if let Some(u) = &self.upper {
            x.iter_mut().zip(u).for_each(|(v, b)| *v = v.min(*b));
        }
    }

    fn violation(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.offsets[i]
    }
}

/// Stochastic gradient descent-ascent on `f(x) + λᵀ(Ax − b)`.
///
/// Linear constraints are dualized with multipliers clipped at 0 (free for
/// equalities); sign and box bounds are kept by clipping `x`. Iterates may
/// be infeasible, which the trace residuals report.
pub fn penalized_sgd<P, R>(
    problem: &P,
    estimator: &mut GradientEstimator<'_>,
    constraints: &ConstraintSet,
    cfg: &PenaltyConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, RunTrace)>
where
    P: StochasticProblem + ?Sized,
    R: rand::Rng + ?Sized,
{
    cfg.validate()?;
    check_start(&cfg.x0, problem.dim(), constraints)?;
    let dual = Dualized::from_set(constraints);
    let mut lambda = vec![0.0; dual.rows.len()];
    let mut rec = Recorder::new("xor-sgd-penalty", cfg.time_limit);
    let mut x = cfg.x0.clone();
    dual.clip(&mut x);
    for k in 1..=cfg.iterations {
        let residual = constraints.residual(&x);
        if k == cfg.iterations || rec.out_of_time() {
            rec.push(k, &x, 0.0, residual, None);
            break;
        }
        let est = estimator.estimate(problem, &x, rng)?;
        let t = cfg.step.step(k, 1.0, 1.0);
        rec.push(k, &x, t, residual, Some(&est));
        let mut g = est.gradient;
        for (row, l) in dual.rows.iter().zip(&lambda) {
            g.iter_mut().zip(row).for_each(|(gi, a)| *gi += l * a);
        }
        x = axpy(&x, t, &g);
        dual.clip(&mut x);
        let eta = cfg.dual_step.step(k, 1.0, 1.0);
        for (i, l) in lambda.iter_mut().enumerate() {
            *l += eta * dual.violation(i, &x);
            if !dual.equality {
                *l = l.max(0.0);
            }
        }
        rec.push_multipliers(&lambda);
    }
    Ok(rec.finish(cfg.averaging, constraints))
}
