//! Hashing-based sampling from a binary MRF with a constant-factor
//! guarantee.
//!
//! The pipeline has three stages:
//!
//! 1. [`discretize`] buckets the weights geometrically with ratio
//!    `r = 2^b/(2^b − 1)`, giving `w′` within a factor `ρ = r²/(1 − ε)` of
//!    `w` (after normalization).
//! 2. [`embed_slices`] turns `w′` into an unweighted set `Δ_w` of
//!    `(θ, δ)` pairs in which `θ` appears `k(θ) ∝ w′(θ)` times.
//! 3. [`XorSampler`] cuts `Δ_w` with random parity constraints until at most
//!    `P` pairs survive, enumerates them through an [`Oracle`], and returns
//!    a uniformly chosen survivor with probability `c / P`.
//!
//! Bucket assignment and slice counts are computed by enumeration, so this
//! module targets models within the enumeration cap. The oracle itself only
//! sees the slice predicate and the parity system.

mod discretize;
mod oracle;
mod parity;
mod sampler;
mod slices;

pub use discretize::{
    discretize, discretize_log_weights, discretize_with, tighten_for_empty_tail,
    DiscretizationConfig, DiscretizedWeights,
};
pub use oracle::{
    parse_dimacs, to_dimacs, BranchAndBoundOracle, DimacsQuery, ExhaustiveOracle, Oracle,
    OracleSolution,
};
pub use parity::{draw_parity_constraints, ParityConstraint};
pub use sampler::{
    sample_batch, xor_sample, Batch, Outcome, SampleResult, XorSampler, XorSamplerConfig,
};
pub use slices::{
    embed_slices, embed_slices_capped, SliceSet, DEFAULT_AUX_BIT_CAP, DEFAULT_QUANTIZATION,
};
