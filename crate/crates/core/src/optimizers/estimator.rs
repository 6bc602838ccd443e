use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::StochasticProblem;
use crate::baseline_samplers::{bp_marginals, bp_sample, BpConfig, GibbsChain, GibbsConfig};
use crate::error::{Error, Result};
use crate::factor_graph::{Assignment, Enumeration, ExactDistribution, FactorGraph};
use crate::xor_sampling::{XorSampler, XorSamplerConfig};

/// Where the scenarios `θ_i` behind a gradient estimate come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorMode {
    Xor(XorSamplerConfig),
    /// One persistent chain, advanced across iterations.
    Gibbs(GibbsConfig),
    /// Independent draws from the BP beliefs.
    Bp(BpConfig),
    /// `E_θ ∇f(x, θ)` by enumeration; no sampling.
    Exact,
}

impl EstimatorMode {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorMode::Xor(_) => "xor",
            EstimatorMode::Gibbs(_) => "gibbs",
            EstimatorMode::Bp(_) => "bp",
            EstimatorMode::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub gradient: Vec<f64>,
    /// Mean of `f(x, θ_i)` over the same scenarios.
    pub value: f64,
    /// `E‖g_i − ḡ‖²` (sample version with `N − 1` for sampled modes).
    pub variance: f64,
    pub attempts: usize,
    pub flagged: usize,
}

enum Backend<'a> {
    Xor(XorSampler),
    Gibbs(GibbsChain<'a>),
    Bp(Vec<f64>),
    Exact(ExactDistribution),
}

/// Averages per-scenario gradients over `N` draws from a model.
pub struct GradientEstimator<'a> {
    model: &'a FactorGraph,
    samples: usize,
    workers: usize,
    backend: Backend<'a>,
}

impl std::fmt::Debug for GradientEstimator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.backend {
            Backend::Xor(_) => "xor",
            Backend::Gibbs(_) => "gibbs",
            Backend::Bp(_) => "bp",
            Backend::Exact(_) => "exact",
        };
        f.debug_struct("GradientEstimator")
            .field("kind", &kind)
            .field("samples", &self.samples)
            .finish()
    }
}

const EXACT_CHUNK: usize = 1 << 12;

impl<'a> GradientEstimator<'a> {
    /// Prepares the sampler (XOR setup, Gibbs burn-in, BP beliefs or the
    /// exact distribution).
    pub fn new<R: rand::Rng + ?Sized>(
        mode: &EstimatorMode,
        samples: usize,
        model: &'a FactorGraph,
        rng: &mut R,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidConfig("sample count N must be at least 1".into()));
        }
        let backend = match mode {
            EstimatorMode::Xor(cfg) => Backend::Xor(XorSampler::new(model, cfg.clone(), rng)?),
            EstimatorMode::Gibbs(cfg) => Backend::Gibbs(GibbsChain::new(model, *cfg, rng)?),
            EstimatorMode::Bp(cfg) => Backend::Bp(bp_marginals(model, *cfg)?.marginals),
            EstimatorMode::Exact => Backend::Exact(Enumeration::default().distribution(model)?),
        };
        Ok(GradientEstimator {
            model,
            samples,
            workers: 1,
            backend,
        })
    }

    /// XOR draws are split over `workers` seeded streams when above 1.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.backend, Backend::Exact(_))
    }

    /// Draws `N` scenarios, returning them with the attempts spent.
    pub fn draw<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(Vec<Assignment>, usize)> {
        let n = self.samples;
        match &mut self.backend {
            Backend::Xor(s) => {
                let batch = if self.workers > 1 {
                    s.sample_batch_parallel(n, rng.random(), self.workers)?
                } else {
                    s.sample_batch(n, rng)?
                };
                Ok((batch.samples, batch.attempts))
            }
            Backend::Gibbs(chain) => Ok((chain.samples(n, rng), n)),
            Backend::Bp(m) => Ok((bp_sample(m, n, rng)?, n)),
            Backend::Exact(_) => Err(Error::InvalidConfig(
                "the exact estimator does not draw samples".into(),
            )),
        }
    }

    pub fn estimate<P, R>(&mut self, problem: &P, x: &[f64], rng: &mut R) -> Result<GradientEstimate>
    where
        P: StochasticProblem + ?Sized,
        R: rand::Rng + ?Sized,
    {
        if problem.model().num_vars() != self.model.num_vars() || problem.dim() != x.len() {
            return Err(Error::Dimension(
                "problem, estimator model and point disagree".into(),
            ));
        }
        let est = if let Backend::Exact(dist) = &self.backend {
            exact_estimate(problem, dist, x)
        } else {
            let (thetas, attempts) = self.draw(rng)?;
            sampled_estimate(problem, &thetas, x, attempts)
        };
        if est.gradient.iter().any(|g| !g.is_finite()) || !est.value.is_finite() {
            return Err(Error::NonFinite("gradient estimate".into()));
        }
        Ok(est)
    }
}

fn sampled_estimate<P: StochasticProblem + ?Sized>(
    problem: &P,
    thetas: &[Assignment],
    x: &[f64],
    attempts: usize,
) -> GradientEstimate {
    let per: Vec<(Vec<f64>, f64, bool)> = thetas
        .par_iter()
        .map(|t| (problem.gradient(x, t), problem.value(x, t), problem.flagged(x, t)))
        .collect();
    let n = per.len() as f64;
    let mut gradient = vec![0.0; x.len()];
    let mut value = 0.0;
    for (g, f, _) in &per {
        for (a, b) in gradient.iter_mut().zip(g) {
            *a += b;
        }
        value += f;
    }
    gradient.iter_mut().for_each(|a| *a /= n);
    value /= n;
    let variance = if per.len() > 1 {
        per.iter()
            .map(|(g, _, _)| g.iter().zip(&gradient).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    GradientEstimate {
        gradient,
        value,
        variance,
        attempts,
        flagged: per.iter().filter(|p| p.2).count(),
    }
}

fn exact_estimate<P: StochasticProblem + ?Sized>(
    problem: &P,
    dist: &ExactDistribution,
    x: &[f64],
) -> GradientEstimate {
    let n = dist.num_vars();
    let probs = dist.probs();
    let dim = x.len();
    // per-chunk partial sums, merged in chunk order for determinism
    let parts: Vec<(Vec<f64>, f64, f64, usize)> = probs
        .par_chunks(EXACT_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut g_acc = vec![0.0; dim];
            let (mut f_acc, mut sq_acc, mut flagged) = (0.0, 0.0, 0);
            for (j, &p) in chunk.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let theta = Assignment::from_index((c * EXACT_CHUNK + j) as u64, n);
                let g = problem.gradient(x, &theta);
                for (a, b) in g_acc.iter_mut().zip(&g) {
                    *a += p * b;
                }
                sq_acc += p * g.iter().map(|v| v * v).sum::<f64>();
                f_acc += p * problem.value(x, &theta);
                flagged += usize::from(problem.flagged(x, &theta));
            }
            (g_acc, f_acc, sq_acc, flagged)
        })
        .collect();
    let mut gradient = vec![0.0; dim];
    let (mut value, mut sq, mut flagged) = (0.0, 0.0, 0);
    for (g, f, s, fl) in parts {
        for (a, b) in gradient.iter_mut().zip(&g) {
            *a += b;
        }
        value += f;
        sq += s;
        flagged += fl;
    }
    let norm_sq: f64 = gradient.iter().map(|v| v * v).sum();
    GradientEstimate {
        gradient,
        value,
        variance: (sq - norm_sq).max(0.0),
        attempts: 0,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use crate::rng::seeded;

    fn toy() -> QuadraticProblem {
        QuadraticProblem::bernoulli(0.7).unwrap()
    }

    #[test]
    fn exact_gradient_at_zero() {
        let p = toy();
        let mut rng = seeded(0);
        let mut est = GradientEstimator::new(&EstimatorMode::Exact, 1, p.model(), &mut rng).unwrap();
        let e = est.estimate(&p, &[0.0], &mut rng).unwrap();
        assert!((e.gradient[0] + 0.7).abs() < 1e-12);
        // Var(θ) = 0.21
        assert!((e.variance - 0.21).abs() < 1e-12);
        assert_eq!(e.attempts, 0);
    }

    #[test]
    fn single_sample_is_that_sample() {
        let p = toy();
        let mut rng = seeded(5);
        let mode = EstimatorMode::Bp(BpConfig::default());
        let mut est = GradientEstimator::new(&mode, 1, p.model(), &mut rng).unwrap();
        let mut probe = rng.clone();
        let (thetas, _) = est.draw(&mut probe).unwrap();
        let e = est.estimate(&p, &[0.3], &mut rng).unwrap();
        assert_eq!(e.gradient, p.gradient(&[0.3], &thetas[0]));
        assert_eq!(e.variance, 0.0);
    }

    #[test]
    fn zero_samples_rejected() {
        let p = toy();
        let mut rng = seeded(0);
        assert!(GradientEstimator::new(&EstimatorMode::Exact, 0, p.model(), &mut rng).is_err());
    }

    #[test]
    fn xor_estimate_is_deterministic() {
        let p = toy();
        let mode = EstimatorMode::Xor(XorSamplerConfig::default());
        let run = |seed| {
            let mut rng = seeded(seed);
            let mut est = GradientEstimator::new(&mode, 10, p.model(), &mut rng).unwrap();
            est.estimate(&p, &[0.0], &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
    }
}
