use super::{LfdPair, RegionLabel};
use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::uncertainty::DensityBand;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandSolverOptions<T> {
    /// Sup-norm change of `(q₀, q₁)` declaring convergence.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for BandSolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tol(1e-8),
            max_iter: 1000,
        }
    }
}

/// Band LFDs, starting from the nominal (renormalized lower bound) of `band1`.
pub fn solve_band_lfds<T: Real>(
    band0: &DensityBand<T>,
    band1: &DensityBand<T>,
    tol: T,
    max_iter: usize,
) -> Result<LfdPair<T>> {
    let init = band1.interior_density()?;
    solve_band_lfds_from(band0, band1, init.values(), tol, max_iter)
}

/// Band LFDs from an explicit starting profile for `q₁`.
pub fn solve_band_lfds_from<T: Real>(
    band0: &DensityBand<T>,
    band1: &DensityBand<T>,
    init_q1: &[T],
    tol: T,
    max_iter: usize,
) -> Result<LfdPair<T>> {
    band0.grid().ensure_same(band1.grid())?;
    let g = *band0.grid();
    if init_q1.len() != g.len() {
        return Err(Error::InvalidParameter(
            "initial profile has the wrong length".into(),
        ));
    }
    let mut q1 = init_q1.to_vec();
    let mut q0: Option<Vec<T>> = None;
    let (mut c0, mut c1) = (T::one(), T::one());
    let mut residual = T::infinity();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let (k0, n0) = band0.project(&q1)?;
        let (k1, n1) = band1.project(&n0)?;
        residual = sup_change(&n1, &q1);
        if let Some(prev) = &q0 {
            residual = residual.max(sup_change(&n0, prev));
        }
        c0 = k0;
        c1 = k1;
        q0 = Some(n0);
        q1 = n1;
        if residual < tol {
            break;
        }
    }
    if !(residual < tol) {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual.to_f64_lossy(),
        });
    }
    let q0 = q0.expect("at least one iteration");
    let labels = label_band(band0, band1, &q0, &q1, c0, c1);
    Ok(LfdPair::assemble(
        GridDensity::from_unnormalized(g, q0)?,
        GridDensity::from_unnormalized(g, q1)?,
        c0,
        c1,
        labels,
        iterations,
    ))
}

fn sup_change<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

fn label_band<T: Real>(
    band0: &DensityBand<T>,
    band1: &DensityBand<T>,
    q0: &[T],
    q1: &[T],
    c0: T,
    c1: T,
) -> Vec<RegionLabel> {
    let (l0, u0, l1, u1) = (band0.lower(), band0.upper(), band1.lower(), band1.upper());
    (0..q0.len())
        .map(|i| {
            let u = c0 * q1[i];
            let v = c1 * q0[i];
            let at0 = side(u, l0[i], u0[i]);
            let at1 = side(v, l1[i], u1[i]);
            match (at0, at1) {
                (Side::Inside, _) => RegionLabel::ConstInvC0,
                (_, Side::Inside) => RegionLabel::ConstC1,
                (Side::Lower, Side::Lower) => RegionLabel::Lower0Lower1,
                (Side::Lower, Side::Upper) => RegionLabel::Lower0Upper1,
                (Side::Upper, Side::Lower) => RegionLabel::Upper0Lower1,
                (Side::Upper, Side::Upper) => RegionLabel::Upper0Upper1,
            }
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Lower,
    Inside,
    Upper,
}

fn side<T: Real>(v: T, lo: T, hi: T) -> Side {
    if v <= lo {
        Side::Lower
    } else if v >= hi {
        Side::Upper
    } else {
        Side::Inside
    }
}
