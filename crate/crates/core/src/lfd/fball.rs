//! f-divergence balls via their equivalent density bands.
//!
//! For fixed bands `[t·p_i, b_i·p_i]` the band LFDs `Q_i` move away from the
//! nominals as `b_i` grows. The search uses one lower scale `t` shared by both
//! bands: for each `t` the upper scales solve `D_{f_i}(Q_i‖p_i) = ζ_i`
//! (Gauss–Seidel over the two bands, each a bracketed root in `log b_i`), and `t`
//! is then chosen so that `b₀(t) = b₁(t)`, scanning downward from `t = 1` and
//! taking the first sign change. When no `t` equalises the upper scales the
//! closest one is used; the equality-at-radius conditions hold either way.

use super::{solve_band_lfds, LfdPair};
use crate::density::f_divergence;
use crate::error::{Error, Result};
use crate::root;
use crate::scalar::Real;
use crate::uncertainty::{band_from_scaled_nominal, DensityBand, EquivalentBands, FDivBall};

const B_MAX: f64 = 1e3;
const SCAN: [f64; 22] = [
    0.999, 0.995, 0.99, 0.98, 0.97, 0.95, 0.93, 0.9, 0.875, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.5,
    0.4, 0.3, 0.2, 0.1, 0.05, 0.01,
];

struct Search<'a, T> {
    balls: [&'a FDivBall<T>; 2],
}

impl<'a, T: Real> Search<'a, T> {
    fn bands(&self, t: T, b: [T; 2]) -> Result<[DensityBand<T>; 2]> {
        Ok([
            band_from_scaled_nominal(self.balls[0].nominal(), t, b[0])?,
            band_from_scaled_nominal(self.balls[1].nominal(), t, b[1])?,
        ])
    }

    fn divergence(&self, i: usize, t: T, b: [T; 2]) -> Result<T> {
        let [b0, b1] = self.bands(t, b)?;
        let pair = solve_band_lfds(&b0, &b1, T::tol(1e-11), 1000)?;
        let q = if i == 0 { &pair.q0 } else { &pair.q1 };
        f_divergence(self.balls[i].generator(), q, self.balls[i].nominal())
    }

    /// Upper scales meeting both radii at lower scale `t`, or `None` if a radius is out of reach.
    fn upper_scales(&self, t: T, start: [T; 2]) -> Result<Option<[T; 2]>> {
        let mut b = start;
        let umax = T::c(B_MAX).ln();
        for _ in 0..60 {
            let before = b;
            for i in 0..2 {
                let zeta = self.balls[i].radius();
                let mut err = None;
                let mut resid = |u: T| -> T {
                    let mut bb = b;
                    bb[i] = u.exp();
                    match self.divergence(i, t, bb) {
                        Ok(d) => d - zeta,
                        Err(e) => {
                            err.get_or_insert(e);
                            T::nan()
                        }
                    }
                };
                if resid(umax) < T::zero() {
                    return Ok(None);
                }
                let u = root::bracketed(
                    &mut resid,
                    T::zero(),
                    umax,
                    T::c(1e-12),
                    zeta * T::tol(1e-8),
                    200,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                b[i] = u?.exp();
            }
            let moved = (b[0].ln() - before[0].ln())
                .abs()
                .max((b[1].ln() - before[1].ln()).abs());
            if moved < T::c(1e-11) {
                return Ok(Some(b));
            }
        }
        Err(Error::NoConvergence {
            iterations: 60,
            residual: f64::NAN,
        })
    }

    fn mismatch(&self, t: T, cache: &mut [T; 2]) -> Result<Option<T>> {
        Ok(self.upper_scales(t, *cache)?.map(|b| {
            *cache = b;
            b[0].ln() - b[1].ln()
        }))
    }
}

pub(crate) fn equivalent_bands<T: Real>(
    ball0: &FDivBall<T>,
    ball1: &FDivBall<T>,
) -> Result<EquivalentBands<T>> {
    ball0.nominal().grid().ensure_same(ball1.nominal().grid())?;
    let s = Search {
        balls: [ball0, ball1],
    };
    let mut cache = [T::c(1.5), T::c(1.5)];
    let mut prev: Option<(T, T, [T; 2])> = None;
    let mut best: Option<(T, T, [T; 2])> = None;
    let mut bracket = None;
    for &tv in SCAN.iter() {
        let t = T::c(tv);
        match s.mismatch(t, &mut cache)? {
            Some(m) => {
                if best.is_none_or(|(_, bm, _)| m.abs() < bm.abs()) {
                    best = Some((t, m, cache));
                }
                if let Some((tp, mp, bp)) = prev {
                    if (mp > T::zero()) != (m > T::zero()) {
                        bracket = Some((t, tp, bp));
                        break;
                    }
                }
                prev = Some((t, m, cache));
            }
            None => prev = None,
        }
    }
    let (t, b) = if let Some((lo, hi, start)) = bracket {
        let mut cache = start;
        let mut err = None;
        let t = root::bracketed(
            |t: T| match s.mismatch(t, &mut cache) {
                Ok(Some(m)) => m,
                Ok(None) => T::nan(),
                Err(e) => {
                    err.get_or_insert(e);
                    T::nan()
                }
            },
            lo,
            hi,
            T::c(1e-9),
            T::c(1e-10),
            100,
        );
        if let Some(e) = err {
            return Err(e);
        }
        let t = t?;
        let b = s
            .upper_scales(t, cache)?
            .ok_or_else(|| Error::Numeric("lost feasibility at the root".into()))?;
        (t, b)
    } else if let Some((t0, _, b0)) = best {
        // no equalising scale: refine the closest scan point
        let i = SCAN.iter().position(|&v| T::c(v) == t0).unwrap_or(0);
        let lo = T::c(SCAN.get(i + 1).copied().unwrap_or(SCAN[i] * 0.5));
        let hi = T::c(if i == 0 { 1.0 - 1e-6 } else { SCAN[i - 1] });
        let mut cache = b0;
        let t = root::golden_min(
            |t: T| match s.mismatch(t, &mut cache) {
                Ok(Some(m)) => m.abs(),
                _ => T::infinity(),
            },
            lo,
            hi,
            T::c(1e-6),
            60,
        );
        match s.upper_scales(t, b0)? {
            Some(b) => (t, b),
            None => (t0, b0),
        }
    } else {
        return Err(Error::Breakdown(
            "f-divergence radii cannot be met by any band: a ball reaches the other nominal".into(),
        ));
    };
    let [band0, band1] = s.bands(t, b)?;
    Ok(EquivalentBands {
        band0,
        band1,
        a: [t, t],
        b,
    })
}

/// LFDs of two f-divergence balls: equivalent bands, then the band solver.
pub fn solve_fball_lfds<T: Real>(ball0: &FDivBall<T>, ball1: &FDivBall<T>) -> Result<LfdPair<T>> {
    let eq = equivalent_bands(ball0, ball1)?;
    let mut pair = solve_band_lfds(&eq.band0, &eq.band1, T::tol(1e-11), 1000)?;
    pair.band_scalars = Some([eq.a[0], eq.b[0], eq.a[1], eq.b[1]]);
    Ok(pair)
}
