//! Deterministic random streams and inverse-CDF sampling from grid densities.
//!
//! Every stochastic routine takes a `seed` and derives independent streams by
//! index, so results do not depend on scheduling or thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::density::{Grid, GridDensity};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Identifier of the generator contract, recorded in result manifests.
pub const RNG_ALGORITHM: &str =
    "chacha20/seed_from_u64(seed)+set_stream(index);u01=(next_u64>>11)*2^-53";

pub type StreamRng = ChaCha20Rng;

/// Stream `index` of the generator family keyed by `seed`.
pub fn stream_rng(seed: u64, index: u64) -> StreamRng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Uniform draw on `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse of the trapezoid CDF; within a cell the CDF is interpolated linearly.
#[derive(Clone, Debug)]
pub struct InverseCdf<T> {
    grid: Grid<T>,
    cdf: Vec<T>,
}

impl<T: Real> InverseCdf<T> {
    pub fn new(p: &GridDensity<T>) -> Result<Self> {
        Self::from_values(p.grid(), p.values())
    }

    /// Accepts unnormalized non-negative values.
    pub fn from_values(grid: &Grid<T>, values: &[T]) -> Result<Self> {
        let cdf = grid.cumulative(values);
        let total = *cdf.last().expect("grid has points");
        if !(total > T::zero() && total.is_finite()) {
            return Err(Error::InvalidDensity(
                "cannot sample from a density with zero mass".into(),
            ));
        }
        Ok(Self { grid: *grid, cdf })
    }

    /// Maps `u ∈ [0, 1)` to a sample.
    pub fn quantile(&self, u: f64) -> T {
        let n = self.cdf.len();
        let total = self.cdf[n - 1];
        let target = T::c(u) * total;
        let k = self.cdf.partition_point(|c| *c <= target);
        let i = if k >= n {
            // u·total rounded up to the total: last cell carrying mass
            (0..n - 1)
                .rev()
                .find(|&j| self.cdf[j + 1] > self.cdf[j])
                .unwrap_or(0)
        } else {
            k.saturating_sub(1).min(n - 2)
        };
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if c1 > c0 {
            ((target - c0) / (c1 - c0)).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        self.grid.x(i) + frac * self.grid.dx()
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> T {
        self.quantile(uniform01(rng))
    }
}

/// `count` draws from `p` using stream 0 of `seed`.
pub fn sample_inverse_cdf<T: Real>(p: &GridDensity<T>, count: usize, seed: u64) -> Result<Vec<T>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be ≥ 1".into()));
    }
    let inv = InverseCdf::new(p)?;
    let mut rng = stream_rng(seed, 0);
    Ok((0..count).map(|_| inv.sample(&mut rng)).collect())
}
