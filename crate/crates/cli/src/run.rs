use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use xorpgd::baseline_samplers::{BpConfig, GibbsConfig};
use xorpgd::optimizers::{
    penalized_sgd, primal_dual_al, xor_pgd, xor_sgd, AlConfig, ConstraintSet, EstimatorMode,
    GradientEstimator, PenaltyConfig, PgdConfig, Regularized, RunTrace, SgdConfig, StepSchedule,
    StochasticProblem,
};
use xorpgd::rng::{derive_seed, seeded};
use xorpgd::xor_sampling::{DiscretizationConfig, XorSamplerConfig};
use xorpgd::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    XorPgd,
    IxorPgd,
    XorSgd,
    XorSgdPenalty,
    AlPrimalDual,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::XorPgd => "xor-pgd",
            Method::IxorPgd => "ixor-pgd",
            Method::XorSgd => "xor-sgd",
            Method::XorSgdPenalty => "xor-sgd-penalty",
            Method::AlPrimalDual => "al-primal-dual",
        }
    }

    /// Methods whose every iterate is projected onto the feasible set.
    pub fn is_projected(self) -> bool {
        matches!(self, Method::XorPgd | Method::IxorPgd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Xor,
    Gibbs,
    Bp,
    Exact,
}

/// Numeric knobs shared by `optimize` and `bench`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub iters: usize,
    pub samples: usize,
    pub pivot: usize,
    pub b: u32,
    pub epsilon: f64,
    pub rho_kappa: f64,
    /// Declared strong-convexity constant for the step rules.
    pub mu: f64,
    /// Weight of the `½ μ_reg ‖x‖²` term added while optimizing.
    pub mu_reg: f64,
    /// Fixed step of plain XOR-SGD.
    pub sgd_step: f64,
    /// Penalty weight of the augmented Lagrangian.
    pub beta: f64,
    pub workers: usize,
    pub time_limit_s: Option<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            iters: 200,
            samples: 10,
            pivot: 100,
            b: 7,
            epsilon: 0.01,
            rho_kappa: std::f64::consts::SQRT_2,
            mu: 1.0,
            mu_reg: 1e-3,
            sgd_step: 0.05,
            beta: 1.0,
            workers: 1,
            time_limit_s: None,
        }
    }
}

impl RunSettings {
    pub fn estimator_mode(&self, kind: EstimatorKind) -> Result<EstimatorMode> {
        Ok(match kind {
            EstimatorKind::Xor => {
                let disc = DiscretizationConfig::new(self.b, self.epsilon)?;
                EstimatorMode::Xor(XorSamplerConfig::with_rho_kappa(disc, self.pivot, self.rho_kappa)?)
            }
            EstimatorKind::Gibbs => EstimatorMode::Gibbs(GibbsConfig::default()),
            EstimatorKind::Bp => EstimatorMode::Bp(BpConfig::default()),
            EstimatorKind::Exact => EstimatorMode::Exact,
        })
    }

    /// Checks every field against the owning module before anything runs.
    pub fn validate(&self, method: Method, kind: EstimatorKind) -> Result<()> {
        if kind == EstimatorKind::Xor {
            self.estimator_mode(kind)?;
        }
        let x0 = vec![0.0];
        match method {
            Method::XorPgd | Method::IxorPgd => {
                let mut cfg = PgdConfig::new(self.iters, self.mu, self.rho_kappa, StepSchedule::Plain, x0);
                cfg.time_limit = self.time_limit_s;
                cfg.validate()?;
            }
            Method::XorSgd => SgdConfig {
                iterations: self.iters,
                step: self.sgd_step,
                x0,
                time_limit: self.time_limit_s,
            }
            .validate()?,
            Method::XorSgdPenalty => {
                let mut cfg = PenaltyConfig::with_defaults(self.iters, x0);
                cfg.time_limit = self.time_limit_s;
                cfg.validate()?;
            }
            Method::AlPrimalDual => AlConfig::new(self.iters, self.beta, x0).validate()?,
        }
        if self.samples == 0 {
            return Err(xorpgd::Error::InvalidConfig("--samples must be at least 1".into()));
        }
        if !(self.mu_reg.is_finite() && self.mu_reg >= 0.0) {
            return Err(xorpgd::Error::InvalidConfig("regularizer weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// Runs `method` on `problem` plus the `½ μ_reg ‖x‖²` regularizer, with
/// scenarios drawn from a stream derived from `seed`.
pub fn run_method(
    problem: &dyn StochasticProblem,
    constraints: &ConstraintSet,
    x0: Vec<f64>,
    method: Method,
    kind: EstimatorKind,
    samples: usize,
    settings: &RunSettings,
    seed: u64,
) -> Result<(Vec<f64>, RunTrace)> {
    let mut rng = seeded(derive_seed(seed, 0x0e57_0000 + method as u64));
    let mode = settings.estimator_mode(kind)?;
    let mut est = GradientEstimator::new(&mode, samples, problem.model(), &mut rng)?
        .with_workers(settings.workers);
    let reg = Regularized::new(problem, settings.mu_reg);
    let (x, mut trace) = match method {
        Method::XorPgd | Method::IxorPgd => {
            let schedule = if method == Method::IxorPgd {
                StepSchedule::Improved
            } else {
                StepSchedule::Plain
            };
            let mut cfg = PgdConfig::new(settings.iters, settings.mu, settings.rho_kappa, schedule, x0);
            cfg.time_limit = settings.time_limit_s;
            xor_pgd(&reg, &mut est, constraints, &cfg, &mut rng)?
        }
        Method::XorSgd => {
            let cfg = SgdConfig {
                iterations: settings.iters,
                step: settings.sgd_step,
                x0,
                time_limit: settings.time_limit_s,
            };
            xor_sgd(&reg, &mut est, constraints, &cfg, &mut rng)?
        }
        Method::XorSgdPenalty => {
            let mut cfg = PenaltyConfig::with_defaults(settings.iters, x0);
            cfg.time_limit = settings.time_limit_s;
            penalized_sgd(&reg, &mut est, constraints, &cfg, &mut rng)?
        }
        Method::AlPrimalDual => {
            let cfg = AlConfig::new(settings.iters, settings.beta, x0);
            primal_dual_al(&reg, constraints, &cfg, &mut est, &mut rng)?
        }
    };
    trace.method = method.name().to_string();
    Ok((x, trace))
}
