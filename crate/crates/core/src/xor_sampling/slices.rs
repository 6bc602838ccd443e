use super::discretize::DiscretizedWeights;
use crate::error::{Error, Result};

/// Default number of fractional bits used when quantizing `w′ / m′`.
pub const DEFAULT_QUANTIZATION: u32 = 8;

/// Default cap on the number of auxiliary bits `Q`.
pub const DEFAULT_AUX_BIT_CAP: usize = 48;

/// Unweighted embedding of a discretized weight function.
///
/// Configuration `θ` is paired with an auxiliary integer `δ ∈ [0, 2^Q)` and
/// `(θ, δ)` is admissible iff `δ < k(θ)`. Uniform sampling over admissible
/// pairs followed by dropping `δ` then returns `θ` with probability
/// proportional to `k(θ)`.
///
/// Packed pair layout: bits `0..n` hold `θ`, bits `n..n+Q` hold `δ`
/// (least significant first).
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSet {
    num_vars: usize,
    aux_bits: usize,
    counts: Vec<u64>,
    total: u128,
    quantization: u32,
}

impl SliceSet {
    /// Builds a slice set directly from per-configuration multiplicities.
    pub fn from_counts(num_vars: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1usize << num_vars {
            return Err(Error::Dimension(format!(
                "{} slice counts for {num_vars} variables",
                counts.len()
            )));
        }
        let max = counts.iter().copied().max().unwrap_or(0);
        let aux_bits = bits_for(max);
        let total = counts.iter().map(|&k| k as u128).sum();
        Ok(SliceSet {
            num_vars,
            aux_bits,
            counts,
            total,
            quantization: 0,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Number of auxiliary bits `Q`.
    pub fn aux_bits(&self) -> usize {
        self.aux_bits
    }

    pub fn total_bits(&self) -> usize {
        self.num_vars + self.aux_bits
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `k(θ)`, the number of admissible auxiliary values for `θ`.
    pub fn slice_count(&self, theta: u64) -> u64 {
        self.counts[theta as usize]
    }

    /// `|Δ_w| = Σ_θ k(θ)`.
    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn quantization(&self) -> u32 {
        self.quantization
    }

    /// Worst-case multiplicative distortion introduced by rounding,
    /// `(1 + 2^{-q}) / (1 − 2^{-q})`; `1` when no rounding happened.
    pub fn distortion_bound(&self) -> f64 {
        if self.quantization == 0 {
            return 1.0;
        }
        let e = 2f64.powi(-(self.quantization as i32));
        (1.0 + e) / (1.0 - e)
    }

    pub fn is_admissible(&self, pair: u64) -> bool {
        let theta = pair & low_mask(self.num_vars);
        let delta = pair >> self.num_vars;
        if self.aux_bits < 64 && delta >> self.aux_bits != 0 {
            return false;
        }
        delta < self.counts[theta as usize]
    }

    pub fn theta_of(&self, pair: u64) -> u64 {
        pair & low_mask(self.num_vars)
    }

    pub fn delta_of(&self, pair: u64) -> u64 {
        pair >> self.num_vars
    }
}

pub(crate) fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Bits needed to write every value in `0..k`.
fn bits_for(k: u64) -> usize {
    if k <= 1 {
        0
    } else {
        64 - (k - 1).leading_zeros() as usize
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Horizontal-slice embedding of `w′` with the default auxiliary-bit cap.
pub fn embed_slices(dw: &DiscretizedWeights, quantization: u32) -> Result<SliceSet> {
    embed_slices_capped(dw, quantization, DEFAULT_AUX_BIT_CAP)
}

/// Horizontal-slice embedding of `w′`.
///
/// With `m′` the smallest non-zero discretized weight, each non-tail
/// configuration gets `k(θ) = round(w′(θ) / u)` at resolution
/// `u = m′ / 2^q`, and the counts are divided by their common factor. For
/// `b = 1` every ratio `w′/m′` is a power of two, so the result is exact:
/// `k(θ) = w′(θ) / m′` and `δ_i = 0` is forced whenever `w′(θ) ≤ 2^i m′`.
/// Tail configurations get `k = 0`.
pub fn embed_slices_capped(
    dw: &DiscretizedWeights,
    quantization: u32,
    aux_bit_cap: usize,
) -> Result<SliceSet> {
    if quantization == 0 {
        return Err(Error::QuantizationTooCoarse);
    }
    let levels = dw.levels();
    let deepest = dw
        .buckets()
        .iter()
        .copied()
        .filter(|&b| b < levels)
        .max()
        .ok_or_else(|| Error::InvalidModel("every configuration is in the tail bucket".into()))?;
    let ln_r = dw.config().ratio().ln();
    let limit = (aux_bit_cap.min(63)) as f64;
    let mut counts = Vec::with_capacity(dw.buckets().len());
    for &b in dw.buckets() {
        if b >= levels {
            counts.push(0);
            continue;
        }
        // log2(w′/u) = (deepest − b)·log2(r) + q
        let log2_k = (deepest - b) as f64 * ln_r / std::f64::consts::LN_2 + quantization as f64;
        if log2_k >= limit {
            return Err(Error::AuxBitsExceeded {
                needed: log2_k.ceil() as usize,
                cap: aux_bit_cap,
            });
        }
        counts.push(2f64.powf(log2_k).round() as u64);
    }
    let g = counts.iter().copied().filter(|&k| k > 0).fold(0, gcd);
    if g > 1 {
        counts.iter_mut().for_each(|k| *k /= g);
    }
    let mut ss = SliceSet::from_counts(dw.num_vars(), counts)?;
    if ss.aux_bits > aux_bit_cap {
        return Err(Error::AuxBitsExceeded {
            needed: ss.aux_bits,
            cap: aux_bit_cap,
        });
    }
    ss.quantization = quantization;
    Ok(ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xor_sampling::discretize::{discretize_log_weights, DiscretizationConfig};

    fn dw_from(ws: &[f64], b: u32, eps: f64) -> DiscretizedWeights {
        let n = ws.len().trailing_zeros() as usize;
        let logs: Vec<f64> = ws.iter().map(|w| w.ln()).collect();
        discretize_log_weights(n, &logs, DiscretizationConfig::new(b, eps).unwrap()).unwrap()
    }

    #[test]
    fn binary_ratio_powers_of_two() {
        // w′ = {4m′, 2m′, m′, m′}
        let dw = dw_from(&[8.0, 4.0, 2.0, 2.0], 1, 0.5);
        let ss = embed_slices(&dw, 8).unwrap();
        assert_eq!(ss.counts(), &[4, 2, 1, 1]);
        assert_eq!(ss.aux_bits(), 2);
        assert_eq!(ss.total(), 8);
    }

    #[test]
    fn binary_ratio_matches_forced_zero_rule() {
        let dw = dw_from(&[64.0, 16.0, 8.0, 2.0], 1, 0.01);
        let ss = embed_slices(&dw, 4).unwrap();
        let m_prime = (0..4)
            .map(|i| dw.w_prime(i))
            .filter(|&w| w > 0.0)
            .fold(f64::INFINITY, f64::min);
        for theta in 0..4u64 {
            let wp = dw.w_prime(theta);
            let free_bits = (0..ss.aux_bits())
                .filter(|&i| wp > 2f64.powi(i as i32) * m_prime * (1.0 + 1e-12))
                .count();
            assert_eq!(ss.slice_count(theta), 1u64 << free_bits);
            assert!((ss.slice_count(theta) as f64 - wp / m_prime).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_weights_are_unweighted() {
        let dw = dw_from(&[3.0; 4], 7, 0.01);
        let ss = embed_slices(&dw, 8).unwrap();
        assert_eq!(ss.counts(), &[1, 1, 1, 1]);
        assert_eq!(ss.aux_bits(), 0);
    }

    #[test]
    fn zero_quantization_rejected() {
        let dw = dw_from(&[3.0, 1.4, 1.0, 1.0], 7, 0.01);
        assert_eq!(embed_slices(&dw, 0).unwrap_err(), Error::QuantizationTooCoarse);
    }

    #[test]
    fn tail_configurations_get_no_slices() {
        let dw = dw_from(&[8.0, 5.0, 2.0, 1.0], 1, 0.5);
        let ss = embed_slices(&dw, 8).unwrap();
        assert_eq!(ss.slice_count(3), 0);
        assert!(!ss.is_admissible(3));
    }

    #[test]
    fn general_b_within_quantization_bound() {
        let dw = dw_from(&[10.0, 7.3, 2.2, 1.01, 4.4, 9.9, 3.3, 1.0], 3, 0.05);
        let ss = embed_slices(&dw, 6).unwrap();
        let ref_theta = 0u64;
        for theta in 0..8u64 {
            if ss.slice_count(theta) == 0 {
                continue;
            }
            let want = dw.w_prime(theta) / dw.w_prime(ref_theta);
            let got = ss.slice_count(theta) as f64 / ss.slice_count(ref_theta) as f64;
            let ratio = got / want;
            assert!(ratio <= ss.distortion_bound() && ratio >= 1.0 / ss.distortion_bound());
        }
    }

    #[test]
    fn aux_cap_enforced() {
        let dw = dw_from(&[1e6, 1.0, 1.0, 1.0], 7, 1e-9);
        assert!(matches!(
            embed_slices_capped(&dw, 8, 10),
            Err(Error::AuxBitsExceeded { .. })
        ));
    }
}
