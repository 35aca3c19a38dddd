//! Least favorable distribution pairs for the three uncertainty models.
//!
//! Band LFDs are the fixed point of
//!
//! ```text
//! q₀ = min{p″₀, max{c₀ q₁, p′₀}},   q₁ = min{p″₁, max{c₁ q₀, p′₁}},
//! ```
//!
//! solved by alternating projections, each with a scalar root for `c`. On the
//! set where `q₀ = c₀q₁` the likelihood ratio is `1/c₀` (its upper clip level),
//! where `q₁ = c₁q₀` it is `c₁`; elsewhere both densities sit on band bounds.
//! Contamination LFDs are the closed-form special case with infinite upper bounds.

mod band;
pub(crate) mod contamination;
mod criteria;
pub(crate) mod fball;

pub use band::{solve_band_lfds, solve_band_lfds_from, BandSolverOptions};
pub use contamination::{breakdown_point, solve_contamination_lfds};
pub use criteria::{feasible_sample, verify_lfd_criteria, CriterionReport};
pub use fball::solve_fball_lfds;

use crate::density::{Grid, GridDensity, GridFunction};
use crate::scalar::Real;

/// Which constraint is active at a grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    Lower0Lower1,
    Lower0Upper1,
    Upper0Lower1,
    Upper0Upper1,
    /// `q₀ = c₀q₁`: likelihood ratio `1/c₀`.
    ConstInvC0,
    /// `q₁ = c₁q₀`: likelihood ratio `c₁`.
    ConstC1,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 6] = [
        Self::Lower0Lower1,
        Self::Lower0Upper1,
        Self::Upper0Lower1,
        Self::Upper0Upper1,
        Self::ConstInvC0,
        Self::ConstC1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Lower0Lower1 => "LOWER0_LOWER1",
            Self::Lower0Upper1 => "LOWER0_UPPER1",
            Self::Upper0Lower1 => "UPPER0_LOWER1",
            Self::Upper0Upper1 => "UPPER0_UPPER1",
            Self::ConstInvC0 => "CONST_INV_C0",
            Self::ConstC1 => "CONST_C1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Self::ConstInvC0 | Self::ConstC1)
    }
}

/// A least favorable pair with its clipping constants and log-likelihood ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct LfdPair<T> {
    pub q0: GridDensity<T>,
    pub q1: GridDensity<T>,
    pub c0: T,
    pub c1: T,
    /// `log(q₁/q₀)`; exactly `−log c₀` / `log c₁` on the constant regions,
    /// `±∞` where one density vanishes, 0 where both do.
    pub llr: GridFunction<T>,
    pub labels: Vec<RegionLabel>,
    /// The pair coincides (constant likelihood ratio): hypotheses are indistinguishable.
    pub breakdown: bool,
    pub iterations: usize,
    /// `(a₀, b₀, a₁, b₁)` of the equivalent bands when solved from f-divergence balls.
    pub band_scalars: Option<[T; 4]>,
}

impl<T: Real> LfdPair<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.q0.grid()
    }

    /// Log-likelihood ratio on the two constant regions: `(−log c₀, log c₁)`.
    pub fn const_levels(&self) -> (T, T) {
        (-self.c0.ln(), self.c1.ln())
    }

    /// Assembles a pair from densities whose constant regions are already labelled.
    pub(crate) fn assemble(
        q0: GridDensity<T>,
        q1: GridDensity<T>,
        c0: T,
        c1: T,
        labels: Vec<RegionLabel>,
        iterations: usize,
    ) -> Self {
        let (hi, lo) = (-c0.ln(), c1.ln());
        let llr: Vec<T> = (0..q0.len())
            .map(|i| match labels[i] {
                RegionLabel::ConstInvC0 => hi,
                RegionLabel::ConstC1 => lo,
                _ => log_ratio(q1.values()[i], q0.values()[i]),
            })
            .collect();
        let sup = llr
            .iter()
            .zip(q0.values().iter().zip(q1.values()))
            .filter(|(_, (a, b))| **a > T::zero() || **b > T::zero())
            .fold(T::zero(), |m, (l, _)| m.max(l.abs()));
        let breakdown = sup < T::c(1e-6);
        let grid = *q0.grid();
        Self {
            q0,
            q1,
            c0,
            c1,
            llr: GridFunction::new(grid, llr).expect("log ratio is never NaN"),
            labels,
            breakdown,
            iterations,
            band_scalars: None,
        }
    }
}

/// `log(a/b)` with `±∞` where one side vanishes and 0 where both do.
pub fn log_ratio<T: Real>(a: T, b: T) -> T {
    match (a > T::zero(), b > T::zero()) {
        (true, true) => a.ln() - b.ln(),
        (true, false) => T::infinity(),
        (false, true) => T::neg_infinity(),
        (false, false) => T::zero(),
    }
}

#[cfg(test)]
pub(crate) mod tests_support;
