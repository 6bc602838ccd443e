use rayon::prelude::*;

use super::{Assignment, FactorGraph};
use crate::error::{Error, Result};

/// Default limit on the number of variables for exhaustive enumeration
/// (2^24 ≈ 16.7M assignments).
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

// Fixed chunk size so parallel reductions merge in the same order regardless
// of the thread count.
const CHUNK_BITS: usize = 14;

/// Result of exhaustive inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactInference {
    pub log_partition: f64,
    /// `exp(log_partition)`; infinite if `Z` does not fit in an `f64`.
    pub partition: f64,
    /// `Pr(θ_i = 1)` for every variable.
    pub marginals: Vec<f64>,
}

/// The full normalized distribution, indexed by packed assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    num_vars: usize,
    log_partition: f64,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: u64) -> f64 {
        self.probs[index as usize]
    }

    /// `Σ_θ p(θ) h(θ)` where `h` receives the packed index.
    pub fn expectation_index<F: Fn(u64) -> f64>(&self, h: F) -> Result<f64> {
        let mut acc = 0.0;
        for (idx, &p) in self.probs.iter().enumerate() {
            let v = h(idx as u64);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "expectation integrand at assignment {idx}"
                )));
            }
            acc += p * v;
        }
        Ok(acc)
    }

    pub fn expectation<F: Fn(&Assignment) -> f64>(&self, h: F) -> Result<f64> {
        let n = self.num_vars;
        self.expectation_index(|idx| h(&Assignment::from_index(idx, n)))
    }

    /// Coordinate-wise expectation of a vector-valued function.
    pub fn expectation_vec<F: Fn(u64) -> Vec<f64>>(&self, dim: usize, h: F) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; dim];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let v = h(idx as u64);
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "integrand returned {} entries, expected {dim}",
                    v.len()
                )));
            }
            for (a, x) in acc.iter_mut().zip(&v) {
                if !x.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "expectation integrand at assignment {idx}"
                    )));
                }
                *a += p * x;
            }
        }
        Ok(acc)
    }

    pub fn marginals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_vars];
        for (idx, &p) in self.probs.iter().enumerate() {
            for (i, mi) in m.iter_mut().enumerate() {
                if (idx >> i) & 1 == 1 {
                    *mi += p;
                }
            }
        }
        m
    }
}

/// Exhaustive enumeration with a configurable variable cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Enumeration {
    pub cap: usize,
}

impl Default for Enumeration {
    fn default() -> Self {
        Enumeration {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

fn logsumexp_merge(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    // (max, Σ exp(x - max))
    if a.1 == 0.0 {
        return b;
    }
    if b.1 == 0.0 {
        return a;
    }
    if a.0 >= b.0 {
        (a.0, a.1 + b.1 * (b.0 - a.0).exp())
    } else {
        (b.0, b.1 + a.1 * (a.0 - b.0).exp())
    }
}

impl Enumeration {
    pub fn with_cap(cap: usize) -> Self {
        Enumeration { cap }
    }

    pub fn check(&self, fg: &FactorGraph) -> Result<()> {
        if fg.num_vars() > self.cap {
            return Err(Error::CapExceeded {
                vars: fg.num_vars(),
                cap: self.cap,
            });
        }
        Ok(())
    }

    fn chunks(n: usize) -> (u64, u64) {
        let total = 1u64 << n;
        let chunk = 1u64 << CHUNK_BITS.min(n);
        (total, chunk)
    }

    pub fn log_partition(&self, fg: &FactorGraph) -> Result<f64> {
        self.check(fg)?;
        let (total, chunk) = Self::chunks(fg.num_vars());
        let parts: Vec<(f64, f64)> = (0..total / chunk)
            .into_par_iter()
            .map(|c| {
                let mut acc = (f64::NEG_INFINITY, 0.0);
                for idx in c * chunk..(c + 1) * chunk {
                    acc = logsumexp_merge(acc, (fg.log_weight_index(idx), 1.0));
                }
                acc
            })
            .collect();
        let (m, s) = parts
            .into_iter()
            .fold((f64::NEG_INFINITY, 0.0), logsumexp_merge);
        Ok(m + s.ln())
    }

    /// `Z = Σ_θ w(θ)`. Errors if `Z` overflows; use [`Self::log_partition`]
    /// for such models.
    pub fn partition_function(&self, fg: &FactorGraph) -> Result<f64> {
        let z = self.log_partition(fg)?.exp();
        if !z.is_finite() {
            return Err(Error::NonFinite("partition function overflows f64".into()));
        }
        Ok(z)
    }

    pub fn distribution(&self, fg: &FactorGraph) -> Result<ExactDistribution> {
        self.check(fg)?;
        let total = 1usize << fg.num_vars();
        let mut probs: Vec<f64> = (0..total as u64)
            .into_par_iter()
            .map(|idx| fg.log_weight_index(idx))
            .collect();
        let max = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for p in probs.iter_mut() {
            *p = (*p - max).exp();
            sum += *p;
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(ExactDistribution {
            num_vars: fg.num_vars(),
            log_partition: max + sum.ln(),
            probs,
        })
    }

    pub fn marginals(&self, fg: &FactorGraph) -> Result<ExactInference> {
        self.check(fg)?;
        let n = fg.num_vars();
        let (total, chunk) = Self::chunks(n);
        // per chunk: overall (max, sum) and per-variable sums relative to max
        let parts: Vec<(f64, f64, Vec<f64>)> = (0..total / chunk)
            .into_par_iter()
            .map(|c| {
                let range = c * chunk..(c + 1) * chunk;
                let max = range
                    .clone()
                    .map(|i| fg.log_weight_index(i))
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                let mut per = vec![0.0; n];
                for idx in range {
                    let w = (fg.log_weight_index(idx) - max).exp();
                    sum += w;
                    for (i, p) in per.iter_mut().enumerate() {
                        if (idx >> i) & 1 == 1 {
                            *p += w;
                        }
                    }
                }
                (max, sum, per)
            })
            .collect();
        let max = parts
            .iter()
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut per = vec![0.0; n];
        for (m, s, pv) in parts {
            let scale = (m - max).exp();
            sum += s * scale;
            for (a, b) in per.iter_mut().zip(pv) {
                *a += b * scale;
            }
        }
        let log_partition = max + sum.ln();
        Ok(ExactInference {
            log_partition,
            partition: log_partition.exp(),
            marginals: per.into_iter().map(|p| (p / sum).clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn expectation<F>(&self, fg: &FactorGraph, h: F) -> Result<f64>
    where
        F: Fn(&Assignment) -> f64 + Sync,
    {
        self.check(fg)?;
        let n = fg.num_vars();
        let (total, chunk) = Self::chunks(n);
        let parts: Vec<Result<(f64, f64, f64)>> = (0..total / chunk)
            .into_par_iter()
            .map(|c| {
                let range = c * chunk..(c + 1) * chunk;
                let max = range
                    .clone()
                    .map(|i| fg.log_weight_index(i))
                    .fold(f64::NEG_INFINITY, f64::max);
                let (mut sum, mut acc) = (0.0, 0.0);
                for idx in range {
                    let v = h(&Assignment::from_index(idx, n));
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "expectation integrand at assignment {idx}"
                        )));
                    }
                    let w = (fg.log_weight_index(idx) - max).exp();
                    sum += w;
                    acc += w * v;
                }
                Ok((max, sum, acc))
            })
            .collect();
        let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
        let max = parts
            .iter()
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut sum, mut acc) = (0.0, 0.0);
        for (m, s, a) in parts {
            let scale = (m - max).exp();
            sum += s * scale;
            acc += a * scale;
        }
        Ok(acc / sum)
    }
}

pub fn partition_function(fg: &FactorGraph) -> Result<f64> {
    Enumeration::default().partition_function(fg)
}

pub fn log_partition_function(fg: &FactorGraph) -> Result<f64> {
    Enumeration::default().log_partition(fg)
}

pub fn exact_marginals(fg: &FactorGraph) -> Result<ExactInference> {
    Enumeration::default().marginals(fg)
}

pub fn exact_expectation<F>(fg: &FactorGraph, h: F) -> Result<f64>
where
    F: Fn(&Assignment) -> f64 + Sync,
{
    Enumeration::default().expectation(fg, h)
}
