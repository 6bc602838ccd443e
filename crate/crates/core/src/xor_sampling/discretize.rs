use crate::error::{Error, Result};
use crate::factor_graph::{Enumeration, FactorGraph};

/// Geometric bucketing parameters.
///
/// `r = 2^b / (2^b − 1)` is the bucket ratio and
/// `l = ⌈log_r(2^n / ε)⌉` the number of regular buckets for an `n`-variable
/// model; everything lighter than `M / r^l` falls into the tail bucket.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiscretizationConfig {
    pub b: u32,
    pub epsilon: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig { b: 7, epsilon: 0.01 }
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

impl DiscretizationConfig {
    pub fn new(b: u32, epsilon: f64) -> Result<Self> {
        let cfg = DiscretizationConfig { b, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 1 || self.b > 52 {
            return Err(Error::InvalidConfig(format!(
                "b must be in [1, 52], got {}",
                self.b
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        let p = 2f64.powi(self.b as i32);
        p / (p - 1.0)
    }

    /// `ρ = r² / (1 − ε)`, the discretization's multiplicative distortion.
    pub fn rho(&self) -> f64 {
        let r = self.ratio();
        r * r / (1.0 - self.epsilon)
    }

    pub fn levels(&self, num_vars: usize) -> usize {
        let x = (num_vars as f64 * std::f64::consts::LN_2 - self.epsilon.ln()) / self.ratio().ln();
        (snap(x).ceil() as usize).max(1)
    }
}

/// Bucketed weight function `w′`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedWeights {
    num_vars: usize,
    config: DiscretizationConfig,
    levels: usize,
    log_max: f64,
    log_min: f64,
    buckets: Vec<usize>,
    tail_empty: bool,
}

impl DiscretizedWeights {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn config(&self) -> DiscretizationConfig {
        self.config
    }

    /// Number of regular buckets `l`; bucket `l` is the tail.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn max_weight(&self) -> f64 {
        self.log_max.exp()
    }

    pub fn min_weight(&self) -> f64 {
        self.log_min.exp()
    }

    pub fn log_max(&self) -> f64 {
        self.log_max
    }

    pub fn log_min(&self) -> f64 {
        self.log_min
    }

    pub fn tail_empty(&self) -> bool {
        self.tail_empty
    }

    pub fn rho(&self) -> f64 {
        self.config.rho()
    }

    pub fn bucket_of(&self, index: u64) -> usize {
        self.buckets[index as usize]
    }

    pub fn buckets(&self) -> &[usize] {
        &self.buckets
    }

    pub fn is_tail(&self, index: u64) -> bool {
        self.bucket_of(index) == self.levels
    }

    /// `ln w′` for a bucket; `-∞` for the tail.
    pub fn log_bucket_weight(&self, bucket: usize) -> f64 {
        if bucket >= self.levels {
            f64::NEG_INFINITY
        } else {
            self.log_max - (bucket as f64 + 1.0) * self.config.ratio().ln()
        }
    }

    pub fn bucket_weight(&self, bucket: usize) -> f64 {
        self.log_bucket_weight(bucket).exp()
    }

    pub fn log_w_prime(&self, index: u64) -> f64 {
        self.log_bucket_weight(self.bucket_of(index))
    }

    pub fn w_prime(&self, index: u64) -> f64 {
        self.log_w_prime(index).exp()
    }

    /// Normalized `p′ = w′ / Z′` over all assignments.
    pub fn distribution(&self) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.buckets.len() as u64)
            .map(|i| self.log_w_prime(i))
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        p
    }
}

/// Assigns every configuration of `fg` to its weight bucket.
///
/// Bucket `i < l` holds `w ∈ (M/r^{i+1}, M/r^i]`, the tail holds
/// `w ≤ M/r^l`. Weights are compared in log space.
pub fn discretize(fg: &FactorGraph, cfg: DiscretizationConfig) -> Result<DiscretizedWeights> {
    discretize_with(fg, cfg, Enumeration::default())
}

pub fn discretize_with(
    fg: &FactorGraph,
    cfg: DiscretizationConfig,
    enumeration: Enumeration,
) -> Result<DiscretizedWeights> {
    cfg.validate()?;
    enumeration.check(fg)?;
    let n = fg.num_vars();
    let logs: Vec<f64> = (0..1u64 << n).map(|i| fg.log_weight_index(i)).collect();
    discretize_log_weights(n, &logs, cfg)
}

/// Same as [`discretize`] but starting from an explicit table of
/// log-weights indexed by packed assignment.
pub fn discretize_log_weights(
    num_vars: usize,
    log_weights: &[f64],
    cfg: DiscretizationConfig,
) -> Result<DiscretizedWeights> {
    cfg.validate()?;
    if log_weights.len() != 1usize << num_vars {
        return Err(Error::Dimension(format!(
            "{} log-weights for {num_vars} variables",
            log_weights.len()
        )));
    }
    if let Some(bad) = log_weights.iter().find(|l| !l.is_finite()) {
        return Err(Error::NonFinite(format!("log-weight {bad}")));
    }
    let log_max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_min = log_weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let levels = cfg.levels(num_vars);
    let ln_r = cfg.ratio().ln();
    let buckets = log_weights
        .iter()
        .map(|&lw| {
            let x = snap((log_max - lw) / ln_r);
            let i = x.floor();
            if i >= levels as f64 {
                levels
            } else {
                i as usize
            }
        })
        .collect();
    // M / r^l < m
    let tail_empty = log_max - levels as f64 * ln_r < log_min;
    Ok(DiscretizedWeights {
        num_vars,
        config: cfg,
        levels,
        log_max,
        log_min,
        buckets,
        tail_empty,
    })
}

/// Shrinks `ε` by factors of ten until the tail bucket of `fg` is empty.
pub fn tighten_for_empty_tail(
    fg: &FactorGraph,
    cfg: DiscretizationConfig,
) -> Result<DiscretizationConfig> {
    cfg.validate()?;
    let n = fg.num_vars();
    Enumeration::default().check(fg)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..1u64 << n {
        let l = fg.log_weight_index(i);
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let mut out = cfg;
    for _ in 0..300 {
        let levels = out.levels(n);
        if hi - levels as f64 * out.ratio().ln() < lo {
            return Ok(out);
        }
        out.epsilon /= 10.0;
        if out.epsilon < f64::MIN_POSITIVE {
            break;
        }
    }
    Err(Error::InvalidConfig(
        "could not make the tail bucket empty".into(),
    ))
}
