use std::sync::Arc;

use rayon::prelude::*;

use super::discretize::{discretize_with, DiscretizationConfig, DiscretizedWeights};
use super::oracle::{BranchAndBoundOracle, Oracle};
use super::parity::draw_parity_constraints;
use super::slices::{embed_slices_capped, SliceSet, DEFAULT_AUX_BIT_CAP, DEFAULT_QUANTIZATION};
use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, Enumeration, FactorGraph};
use crate::rng::{derive_seed, seeded};

/// Sampler parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct XorSamplerConfig {
    pub discretization: DiscretizationConfig,
    /// Pivot `P`: survivor sets up to this size are enumerated.
    pub pivot: usize,
    /// Configured approximation constant `κ ≥ 1`.
    pub kappa: f64,
    /// Confidence parameter carried through uninterpreted.
    pub alpha: Option<f64>,
    /// Fractional bits `q` of the slice quantization.
    pub quantization: u32,
    pub max_attempts: usize,
    pub aux_bit_cap: usize,
    /// Oracle draws per step of the constraint-count search; the majority
    /// decides.
    pub probe_trials: usize,
}

impl Default for XorSamplerConfig {
    fn default() -> Self {
        let discretization = DiscretizationConfig::default();
        XorSamplerConfig {
            discretization,
            pivot: 100,
            kappa: std::f64::consts::SQRT_2 / discretization.rho(),
            alpha: None,
            quantization: DEFAULT_QUANTIZATION,
            max_attempts: 10_000,
            aux_bit_cap: DEFAULT_AUX_BIT_CAP,
            probe_trials: 3,
        }
    }
}

impl XorSamplerConfig {
    /// Config with `κ` chosen so that `ρκ` equals `rho_kappa`.
    pub fn with_rho_kappa(discretization: DiscretizationConfig, pivot: usize, rho_kappa: f64) -> Result<Self> {
        let cfg = XorSamplerConfig {
            discretization,
            pivot,
            kappa: rho_kappa / discretization.rho(),
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rho(&self) -> f64 {
        self.discretization.rho()
    }

    pub fn rho_kappa(&self) -> f64 {
        self.rho() * self.kappa
    }

    pub fn validate(&self) -> Result<()> {
        self.discretization.validate()?;
        if self.pivot == 0 {
            return Err(Error::InvalidConfig("pivot P must be positive".into()));
        }
        if !(self.kappa >= 1.0 - 1e-12) {
            return Err(Error::InvalidConfig(format!("kappa must be >= 1, got {}", self.kappa)));
        }
        let rk = self.rho_kappa();
        if !(1.0 - 1e-12..=std::f64::consts::SQRT_2 + 1e-12).contains(&rk) {
            return Err(Error::InvalidConfig(format!(
                "rho*kappa = {rk} must lie in [1, sqrt(2)]"
            )));
        }
        if self.quantization == 0 {
            return Err(Error::QuantizationTooCoarse);
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidConfig("max_attempts must be positive".into()));
        }
        if self.probe_trials == 0 {
            return Err(Error::InvalidConfig("probe_trials must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success(Assignment),
    Failure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub outcome: Outcome,
    pub attempts: usize,
    pub oracle_calls: usize,
}

impl SampleResult {
    pub fn is_success(&self) -> bool {
        matches!(self.outcome, Outcome::Success(_))
    }
}

/// Samples plus bookkeeping from a batch of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub samples: Vec<Assignment>,
    pub attempts: usize,
    pub oracle_calls: usize,
}

/// A prepared XOR sampler for one model.
///
/// Construction discretizes the weights, builds the slice embedding and
/// fixes the number of parity constraints. Draws only read this state, so
/// the sampler can be shared across threads.
pub struct XorSampler {
    config: XorSamplerConfig,
    weights: DiscretizedWeights,
    slices: SliceSet,
    oracle: Arc<dyn Oracle>,
    constraints: usize,
    setup_calls: usize,
}

impl std::fmt::Debug for XorSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("XorSampler")
            .field("config", &self.config)
            .field("aux_bits", &self.slices.aux_bits())
            .field("constraints", &self.constraints)
            .field("oracle", &self.oracle.name())
            .finish()
    }
}

impl XorSampler {
    pub fn new<R: rand::Rng + ?Sized>(fg: &FactorGraph, config: XorSamplerConfig, rng: &mut R) -> Result<Self> {
        Self::with_oracle(fg, config, Arc::new(BranchAndBoundOracle), rng)
    }

    pub fn with_oracle<R: rand::Rng + ?Sized>(
        fg: &FactorGraph,
        config: XorSamplerConfig,
        oracle: Arc<dyn Oracle>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let weights = discretize_with(fg, config.discretization, Enumeration::default())?;
        let slices = embed_slices_capped(&weights, config.quantization, config.aux_bit_cap)?;
        let mut s = XorSampler {
            config,
            weights,
            slices,
            oracle,
            constraints: 0,
            setup_calls: 0,
        };
        s.estimate_constraint_count(rng)?;
        Ok(s)
    }

    pub fn config(&self) -> &XorSamplerConfig {
        &self.config
    }

    pub fn weights(&self) -> &DiscretizedWeights {
        &self.weights
    }

    pub fn slices(&self) -> &SliceSet {
        &self.slices
    }

    /// Number of parity constraints added per draw.
    pub fn constraint_count(&self) -> usize {
        self.constraints
    }

    /// Oracle calls spent choosing the constraint count.
    pub fn setup_calls(&self) -> usize {
        self.setup_calls
    }

    /// Overrides the constraint count chosen at construction.
    pub fn set_constraint_count(&mut self, count: usize) {
        self.constraints = count;
    }

    /// Effective `ρκ` once quantization distortion is folded in.
    pub fn effective_rho_kappa(&self) -> f64 {
        self.config.rho_kappa() * self.slices.distortion_bound()
    }

    fn survivors_at_most_pivot<R: rand::Rng + ?Sized>(&mut self, count: usize, rng: &mut R) -> Result<bool> {
        let mut votes = 0;
        for _ in 0..self.config.probe_trials {
            let parities = draw_parity_constraints(self.slices.total_bits(), count, rng);
            let sol = self.oracle.solve(&self.slices, &parities, self.config.pivot)?;
            self.setup_calls += 1;
            if !sol.truncated {
                votes += 1;
            }
        }
        Ok(2 * votes > self.config.probe_trials)
    }

    /// Binary search for the smallest constraint count whose survivor set
    /// fits under the pivot.
    fn estimate_constraint_count<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let (mut lo, mut hi) = (0usize, self.slices.total_bits());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.survivors_at_most_pivot(mid, rng)? {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        self.constraints = lo;
        Ok(())
    }

    /// One attempt: add the parity constraints, enumerate survivors up to
    /// `P`, pick one uniformly and keep it with probability `c / P`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<SampleResult> {
        let parities = draw_parity_constraints(self.slices.total_bits(), self.constraints, rng);
        let sol = self.oracle.solve(&self.slices, &parities, self.config.pivot)?;
        let c = sol.solutions.len();
        let outcome = if c >= 1 && !sol.truncated {
            let pick = sol.solutions[rng.random_range(0..c)];
            let keep = rng.random::<f64>() < c as f64 / self.config.pivot as f64;
            if keep {
                let theta = self.slices.theta_of(pick);
                Outcome::Success(Assignment::from_index(theta, self.slices.num_vars()))
            } else {
                Outcome::Failure
            }
        } else {
            Outcome::Failure
        };
        Ok(SampleResult {
            outcome,
            attempts: 1,
            oracle_calls: 1,
        })
    }

    /// Retries [`Self::sample`] until it succeeds or `max_attempts` is hit.
    pub fn sample_until_success<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<(Assignment, usize)> {
        for attempt in 1..=self.config.max_attempts {
            if let Outcome::Success(a) = self.sample(rng)?.outcome {
                return Ok((a, attempt));
            }
        }
        Err(Error::MaxAttemptsExhausted {
            attempts: self.config.max_attempts,
        })
    }

    /// Exactly `count` successful draws, in draw order.
    pub fn sample_batch<R: rand::Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Batch> {
        if count == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        let mut samples = Vec::with_capacity(count);
        let mut attempts = 0;
        for _ in 0..count {
            let (a, used) = self.sample_until_success(rng)?;
            attempts += used;
            samples.push(a);
        }
        Ok(Batch {
            samples,
            attempts,
            oracle_calls: attempts,
        })
    }

    /// Parallel batch: worker `w` draws its share from the stream
    /// `derive_seed(seed, w)`, and shares are concatenated in worker order.
    pub fn sample_batch_parallel(&self, count: usize, seed: u64, workers: usize) -> Result<Batch> {
        if count == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        let workers = workers.clamp(1, count);
        let parts: Vec<Result<Batch>> = (0..workers)
            .into_par_iter()
            .map(|w| {
                let share = count / workers + usize::from(w < count % workers);
                let mut rng = seeded(derive_seed(seed, w as u64));
                self.sample_batch(share, &mut rng)
            })
            .collect();
        let mut out = Batch {
            samples: Vec::with_capacity(count),
            attempts: 0,
            oracle_calls: 0,
        };
        for p in parts {
            let p = p?;
            out.samples.extend(p.samples);
            out.attempts += p.attempts;
            out.oracle_calls += p.oracle_calls;
        }
        Ok(out)
    }
}

/// Builds a sampler for `fg` and performs a single attempt.
pub fn xor_sample<R: rand::Rng + ?Sized>(
    fg: &FactorGraph,
    config: &XorSamplerConfig,
    rng: &mut R,
) -> Result<SampleResult> {
    let sampler = XorSampler::new(fg, config.clone(), rng)?;
    let mut r = sampler.sample(rng)?;
    r.oracle_calls += sampler.setup_calls();
    Ok(r)
}

/// Builds a sampler for `fg` and draws `count` successful samples.
pub fn sample_batch<R: rand::Rng + ?Sized>(
    fg: &FactorGraph,
    config: &XorSamplerConfig,
    count: usize,
    rng: &mut R,
) -> Result<Batch> {
    XorSampler::new(fg, config.clone(), rng)?.sample_batch(count, rng)
}
