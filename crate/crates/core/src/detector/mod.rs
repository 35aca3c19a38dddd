//! Fixed-sample-size minimax likelihood-ratio tests: exact error probabilities of
//! the (possibly clipped or censored) statistic, ROC curves with randomization at
//! point masses, and asymptotic error exponents.
//!
//! The statistic `Σ log q₁(xₙ)/q₀(xₙ)` is represented by [`LlrDistribution`]:
//! atoms for the constant regions of the LFD ratio, a uniform-in-bin histogram for
//! the rest. `n`-fold sums are computed by direct (non-FFT) convolution, so tail
//! probabilities keep their relative accuracy.

mod distribution;
mod roc;

pub use distribution::{llr_distribution, LlrDistribution, ATOM_CAP, BIN_CAP, DEFAULT_BINS};
pub use roc::{
    asymptotic_exponents, roc_curve, roc_from_distributions, statistic_distributions,
    test_error_probs, ErrorExponents, RandomizedTest, RocCurve, RocPoint,
};

#[cfg(test)]
mod tests;
