use super::{LfdPair, RegionLabel};
use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::root;
use crate::scalar::Real;

/// Huber's contamination LFDs `q₀ = max{k₀p₁, (1−ε₀)p₀}`, `q₁ = max{k₁p₀, (1−ε₁)p₁}`.
///
/// The reported constants use the band convention (`c₀ = k₀/(1−ε₁)`, `c₁ = k₁/(1−ε₀)`),
/// so the likelihood ratio is clipped to `[c₁, 1/c₀]`. At or beyond breakdown
/// (`∫max{(1−ε₀)p₀, (1−ε₁)p₁} ≤ 1`) a common density lies in both sets and is
/// returned for both hypotheses.
pub fn solve_contamination_lfds<T: Real>(
    p0: &GridDensity<T>,
    p1: &GridDensity<T>,
    eps0: T,
    eps1: T,
) -> Result<LfdPair<T>> {
    p0.grid().ensure_same(p1.grid())?;
    let half = T::c(0.5);
    for e in [eps0, eps1] {
        if !(e >= T::zero() && e < half) {
            return Err(Error::InvalidParameter(format!(
                "ε must lie in [0, 0.5), got {e}"
            )));
        }
    }
    let g = *p0.grid();
    let (s0, s1) = (T::one() - eps0, T::one() - eps1);
    let (a, b) = (p0.values(), p1.values());

    let overlap: Vec<T> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (s0 * x).max(s1 * y))
        .collect();
    if g.integrate(&overlap) <= T::one() {
        let q = GridDensity::from_unnormalized(g, overlap)?;
        let labels = vec![RegionLabel::ConstInvC0; g.len()];
        return Ok(LfdPair::assemble(
            q.clone(),
            q,
            T::one(),
            T::one(),
            labels,
            0,
        ));
    }

    let k0 = scale(&g, a, b, s0)?;
    let k1 = scale(&g, b, a, s1)?;
    let q0: Vec<T> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (k0 * y).max(s0 * x))
        .collect();
    let q1: Vec<T> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (k1 * x).max(s1 * y))
        .collect();
    let labels = (0..g.len())
        .map(|i| {
            if k0 * b[i] > s0 * a[i] {
                RegionLabel::ConstInvC0
            } else if k1 * a[i] > s1 * b[i] {
                RegionLabel::ConstC1
            } else {
                RegionLabel::Lower0Lower1
            }
        })
        .collect();
    Ok(LfdPair::assemble(
        GridDensity::from_unnormalized(g, q0)?,
        GridDensity::from_unnormalized(g, q1)?,
        k0 / s1,
        k1 / s0,
        labels,
        0,
    ))
}

/// `k` with `∫max{k·other, s·own} = 1`; zero when `s = 1`.
fn scale<T: Real>(g: &crate::density::Grid<T>, own: &[T], other: &[T], s: T) -> Result<T> {
    if s >= T::one() {
        return Ok(T::zero());
    }
    let mass = |k: T| -> T {
        (0..g.len())
            .map(|i| g.weight(i) * (k * other[i]).max(s * own[i]))
            .sum::<T>()
            - T::one()
    };
    root::bracketed_log(mass, T::c(1e-12), T::c(1e12), T::c(1e-13), T::zero(), 400)
}

/// Smallest contamination level `ε = ε₀ = ε₁` at which the LFDs coincide (to 1e-4).
pub fn breakdown_point<T: Real>(p0: &GridDensity<T>, p1: &GridDensity<T>) -> Result<T> {
    p0.grid().ensure_same(p1.grid())?;
    if p0.sup_distance(p1) <= T::c(1e-9) {
        return Ok(T::zero());
    }
    let broken = |e: T| -> Result<bool> { Ok(solve_contamination_lfds(p0, p1, e, e)?.breakdown) };
    let (mut lo, mut hi) = (T::zero(), T::c(0.5));
    let top = hi * (T::one() - T::c(4.0) * T::epsilon());
    if !broken(top)? {
        return Ok(hi);
    }
    while hi - lo > T::c(1e-4) {
        let mid = (lo + hi) * T::c(0.5);
        if broken(mid.min(top))? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
