use serde::{Deserialize, Serialize};

use super::distribution::{llr_distribution, same_value, LlrDistribution, DEFAULT_BINS};
use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::lfd::{log_ratio, LfdPair};
use crate::scalar::Real;

/// Decide ℋ₁ above the threshold, ℋ₀ below, and ℋ₁ with probability `gamma` on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedTest<T> {
    pub log_threshold: T,
    pub gamma: T,
}

impl<T: Real> RandomizedTest<T> {
    pub fn new(log_threshold: T, gamma: T) -> Result<Self> {
        if !(gamma >= T::zero() && gamma <= T::one()) || log_threshold.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "need γ ∈ [0, 1] and a threshold, got γ={gamma}"
            )));
        }
        Ok(Self {
            log_threshold,
            gamma,
        })
    }
}

/// `(α, β)`: false alarm under `d0` and miss under `d1`, atoms at the threshold handled exactly.
pub fn test_error_probs<T: Real>(
    d0: &LlrDistribution<T>,
    d1: &LlrDistribution<T>,
    test: RandomizedTest<T>,
) -> (T, T) {
    let (t, g) = (test.log_threshold, test.gamma);
    let alpha = d0.mass_above(t) + g * d0.mass_at(t);
    let beta = d1.mass_below(t) + (T::one() - g) * d1.mass_at(t);
    (
        alpha.max(T::zero()).min(T::one()),
        beta.max(T::zero()).min(T::one()),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint<T> {
    pub alpha: T,
    pub power: T,
    pub log_threshold: T,
    pub gamma: T,
}

/// Operating points ordered by increasing `alpha`; randomizing between neighbours
/// realizes every point on the connecting segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve<T> {
    pub n: usize,
    pub points: Vec<RocPoint<T>>,
}

impl<T: Real> RocCurve<T> {
    /// Best power at false-alarm level `alpha` (linear between operating points).
    pub fn power_at(&self, alpha: T) -> T {
        let pts = &self.points;
        let k = pts.partition_point(|p| p.alpha < alpha);
        if k >= pts.len() {
            return pts.last().map_or(T::one(), |p| p.power);
        }
        // best among points sitting exactly at alpha
        let mut best = T::zero();
        let mut j = k;
        while j < pts.len() && pts[j].alpha == alpha {
            best = best.max(pts[j].power);
            j += 1;
        }
        if j > k {
            return best;
        }
        if k == 0 {
            return pts[0].power;
        }
        let (a, b) = (&pts[k - 1], &pts[k]);
        a.power + (b.power - a.power) * (alpha - a.alpha) / (b.alpha - a.alpha)
    }
}

/// Suffix sums for O(log n) tail queries during a sweep.
struct Tails<T> {
    values: Vec<T>,
    atom_above: Vec<T>,
    d: LlrDistribution<T>,
    bin_suffix: Vec<T>,
}

impl<T: Real> Tails<T> {
    fn new(d: &LlrDistribution<T>) -> Self {
        let values: Vec<T> = d.atoms().iter().map(|a| a.0).collect();
        let mut atom_above = vec![T::zero(); values.len() + 1];
        for k in (0..values.len()).rev() {
            atom_above[k] = atom_above[k + 1] + d.atoms()[k].1;
        }
        let bins = d.bins();
        let mut bin_suffix = vec![T::zero(); bins.len() + 1];
        for k in (0..bins.len()).rev() {
            bin_suffix[k] = bin_suffix[k + 1] + bins[k];
        }
        Self {
            values,
            atom_above,
            d: d.clone(),
            bin_suffix,
        }
    }

    fn at(&self, t: T) -> T {
        let k = self
            .values
            .partition_point(|v| *v < t && !same_value(*v, t));
        if k < self.values.len() && same_value(self.values[k], t) {
            self.d.atoms()[k].1
        } else {
            T::zero()
        }
    }

    fn above(&self, t: T) -> T {
        // first atom strictly above t (atoms equal to t excluded)
        let k = self
            .values
            .partition_point(|v| *v <= t || same_value(*v, t));
        let atoms = self.atom_above[k];
        let n = self.d.bins().len();
        if n == 0 {
            return atoms;
        }
        let pos = (t - self.d.origin()) / self.d.width();
        let bins = if pos <= T::zero() {
            self.bin_suffix[0]
        } else if pos >= T::from_usize_lossy(n) {
            T::zero()
        } else {
            let j = pos.floor().to_usize().unwrap_or(0).min(n - 1);
            let frac = pos - T::from_usize_lossy(j);
            self.bin_suffix[j + 1] + (T::one() - frac) * self.d.bins()[j]
        };
        atoms + bins
    }
}

/// ROC of the threshold test on a statistic distributed as `d0` / `d1`, sweeping every
/// atom (with γ = 0 and 1) and every bin edge.
pub fn roc_from_distributions<T: Real>(
    d0: &LlrDistribution<T>,
    d1: &LlrDistribution<T>,
    n: usize,
) -> RocCurve<T> {
    let (t0, t1) = (Tails::new(d0), Tails::new(d1));
    let mut thresholds: Vec<(T, bool)> = Vec::new();
    for d in [d0, d1] {
        thresholds.extend(d.atoms().iter().map(|a| (a.0, true)));
        thresholds.extend(
            (0..=d.bins().len())
                .filter(|_| !d.bins().is_empty())
                .map(|k| (d.bin_edge(k), false)),
        );
    }
    thresholds.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("thresholds are not NaN"));
    let mut merged: Vec<(T, bool)> = Vec::with_capacity(thresholds.len());
    for (t, atom) in thresholds {
        match merged.last_mut() {
            Some(last) if same_value(last.0, t) => last.1 |= atom,
            _ => merged.push((t, atom)),
        }
    }

    let point = |t: T, g: T| RocPoint {
        alpha: (t0.above(t) + g * t0.at(t)).min(T::one()),
        power: (t1.above(t) + g * t1.at(t)).min(T::one()),
        log_threshold: t,
        gamma: g,
    };
    let mut pts = vec![point(T::infinity(), T::zero())];
    for (t, atom) in merged {
        pts.push(point(t, T::zero()));
        if atom {
            pts.push(point(t, T::one()));
        }
    }
    pts.push(RocPoint {
        alpha: T::one(),
        power: T::one(),
        log_threshold: T::neg_infinity(),
        gamma: T::one(),
    });

    // summation order can cost an ulp of monotonicity
    for k in 1..pts.len() {
        pts[k].alpha = pts[k].alpha.max(pts[k - 1].alpha);
        pts[k].power = pts[k].power.max(pts[k - 1].power);
    }
    // keep only the most powerful of the zero-false-alarm points, and drop repeats
    let first_positive = pts
        .iter()
        .position(|p| p.alpha > T::zero())
        .unwrap_or(pts.len());
    if first_positive > 1 {
        pts.drain(..first_positive - 1);
    }
    pts.dedup_by(|b, a| a.alpha == b.alpha && a.power == b.power);
    RocCurve { n, points: pts }
}

/// ROC of the minimax test of `pair` using `n` i.i.d. observations drawn from
/// `eval_p0` / `eval_p1` (nominal, least favorable or any other densities on the grid).
pub fn roc_curve<T: Real>(
    pair: &LfdPair<T>,
    eval_p0: &GridDensity<T>,
    eval_p1: &GridDensity<T>,
    n: usize,
) -> Result<RocCurve<T>> {
    let (d0, d1) = statistic_distributions(pair, eval_p0, eval_p1, n, DEFAULT_BINS)?;
    Ok(roc_from_distributions(&d0, &d1, n))
}

/// Distributions of the `n`-sample minimax statistic under the two evaluation densities.
pub fn statistic_distributions<T: Real>(
    pair: &LfdPair<T>,
    eval_p0: &GridDensity<T>,
    eval_p1: &GridDensity<T>,
    n: usize,
    n_bins: usize,
) -> Result<(LlrDistribution<T>, LlrDistribution<T>)> {
    let d0 = llr_distribution(&pair.llr, eval_p0, Some(&pair.labels), n_bins)?.convolve_n(n)?;
    let d1 = llr_distribution(&pair.llr, eval_p1, Some(&pair.labels), n_bins)?.convolve_n(n)?;
    Ok((d0, d1))
}

/// Error exponents (bits per observation) of the test built on `(q₀, q₁)` when the
/// data follow `(p₀, p₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorExponents<T> {
    /// `D(P₀‖Q₁) − D(P₀‖Q₀)`: decay rate of the false-alarm probability.
    pub e0: T,
    /// `D(P₁‖Q₀) − D(P₁‖Q₁)`: decay rate of the miss probability.
    pub e1: T,
    /// Both exponents positive, i.e. the test is consistent under `(p₀, p₁)`.
    pub valid: bool,
}

pub fn asymptotic_exponents<T: Real>(
    p0: &GridDensity<T>,
    p1: &GridDensity<T>,
    q0: &GridDensity<T>,
    q1: &GridDensity<T>,
) -> Result<ErrorExponents<T>> {
    let g = *p0.grid();
    for d in [p1, q0, q1] {
        g.ensure_same(d.grid())?;
    }
    // e₀ = ∫p₀ log(q₀/q₁), e₁ = ∫p₁ log(q₁/q₀): the divergence differences without
    // the (possibly infinite) entropy terms
    let llr: Vec<T> = (0..g.len())
        .map(|i| log_ratio(q1.values()[i], q0.values()[i]))
        .collect();
    let weighted = |p: &[T], sign: T| -> T {
        let terms: Vec<T> = (0..g.len())
            .map(|i| {
                if p[i] > T::zero() {
                    sign * p[i] * llr[i]
                } else {
                    T::zero()
                }
            })
            .collect();
        g.integrate(&terms) / T::LN_2()
    };
    let e0 = weighted(p0.values(), -T::one());
    let e1 = weighted(p1.values(), T::one());
    Ok(ErrorExponents {
        e0,
        e1,
        valid: e0 > T::zero() && e1 > T::zero(),
    })
}
