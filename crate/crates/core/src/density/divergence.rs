use super::grid::GridDensity;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Convex generator `f` of an f-divergence `D_f(P₁‖P₀) = ∫ f(p₁/p₀) p₀ dx`, with `f(1) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FDivGenerator<T> {
    /// `t log t`
    KullbackLeibler,
    /// `−log t`
    ReverseKl,
    /// `(t − 1)²`
    ChiSquared,
    /// `(√t − 1)²`
    SquaredHellinger,
    /// `½|t − 1|` (not twice differentiable)
    TotalVariation,
    /// `(t^α − 1 − α(t − 1)) / (α(α − 1))`, α ∉ {0, 1}
    Alpha(T),
}

impl<T: Real> FDivGenerator<T> {
    pub fn validate(&self) -> Result<()> {
        if let Self::Alpha(a) = *self {
            if !a.is_finite() || a == T::zero() || a == T::one() {
                return Err(Error::InvalidParameter(format!(
                    "alpha-divergence needs α ∉ {{0, 1}}, got {a}"
                )));
            }
        }
        // convexity on a test grid
        if self.is_twice_differentiable() {
            for k in -40..=40 {
                let t = T::c(1.25f64.powi(k));
                match self.f2(t) {
                    Some(v) if v >= T::zero() => {}
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "{self:?} is not convex at t={t}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_twice_differentiable(&self) -> bool {
        !matches!(self, Self::TotalVariation)
    }

    pub fn f(&self, t: T) -> T {
        if t == T::zero() {
            return self.f_at_zero();
        }
        let one = T::one();
        match *self {
            Self::KullbackLeibler => t * t.ln(),
            Self::ReverseKl => -t.ln(),
            Self::ChiSquared => (t - one) * (t - one),
            Self::SquaredHellinger => (t.sqrt() - one).powi(2),
            Self::TotalVariation => (t - one).abs() * T::c(0.5),
            Self::Alpha(a) => (t.powf(a) - one - a * (t - one)) / (a * (a - one)),
        }
    }

    pub fn f1(&self, t: T) -> T {
        let one = T::one();
        match *self {
            Self::KullbackLeibler => t.ln() + one,
            Self::ReverseKl => -one / t,
            Self::ChiSquared => T::c(2.0) * (t - one),
            Self::SquaredHellinger => one - one / t.sqrt(),
            Self::TotalVariation => (t - one).signum() * T::c(0.5),
            Self::Alpha(a) => (t.powf(a - one) - one) / (a - one),
        }
    }

    /// Second derivative; `None` for total variation, whose curvature is a point mass.
    pub fn f2(&self, t: T) -> Option<T> {
        let one = T::one();
        Some(match *self {
            Self::KullbackLeibler => one / t,
            Self::ReverseKl => one / (t * t),
            Self::ChiSquared => T::c(2.0),
            Self::SquaredHellinger => T::c(0.5) / (t * t.sqrt()),
            Self::TotalVariation => return None,
            Self::Alpha(a) => t.powf(a - T::c(2.0)),
        })
    }

    /// `f(0⁺)`.
    pub fn f_at_zero(&self) -> T {
        match *self {
            Self::KullbackLeibler => T::zero(),
            Self::ReverseKl => T::infinity(),
            Self::ChiSquared | Self::SquaredHellinger => T::one(),
            Self::TotalVariation => T::c(0.5),
            Self::Alpha(a) if a > T::zero() => T::one() / a,
            Self::Alpha(_) => T::infinity(),
        }
    }

    /// `f∞ = lim_{t→∞} f(t)/t`, equal to `lim f′(t)`.
    pub fn slope_at_infinity(&self) -> T {
        match *self {
            Self::KullbackLeibler | Self::ChiSquared => T::infinity(),
            Self::ReverseKl => T::zero(),
            Self::SquaredHellinger => T::one(),
            Self::TotalVariation => T::c(0.5),
            Self::Alpha(a) if a > T::one() => T::infinity(),
            Self::Alpha(a) => T::one() / (T::one() - a),
        }
    }

    fn slope_at_one(&self) -> T {
        match self {
            Self::KullbackLeibler => T::one(),
            Self::ReverseKl => -T::one(),
            _ => T::zero(),
        }
    }

    /// `f(t) − f′(1)(t − 1)`: same divergence between unit-mass densities, but
    /// non-negative pointwise, which keeps the quadrature sum non-negative.
    fn centered(&self, t: T) -> T {
        self.f(t) - self.slope_at_one() * (t - T::one())
    }

    /// Contribution `p₀ f(p₁/p₀)` of one point, with the zero-density conventions.
    fn term(&self, p1: T, p0: T) -> T {
        let zero = T::zero();
        if p0 > zero {
            if p1 > zero {
                p0 * self.centered(p1 / p0)
            } else {
                p0 * (self.f_at_zero() + self.slope_at_one())
            }
        } else if p1 > zero {
            p1 * (self.slope_at_infinity() - self.slope_at_one())
        } else {
            zero
        }
    }

    /// `λ f′(λ) − f(λ)`, an antiderivative of `λ f″(λ)`.
    fn g1(&self, l: T) -> T {
        let one = T::one();
        match *self {
            Self::KullbackLeibler => l,
            Self::ReverseKl => l.ln() - one,
            Self::ChiSquared => l * l - one,
            Self::SquaredHellinger => l.sqrt() - one,
            Self::TotalVariation => T::nan(),
            Self::Alpha(a) => (l.powf(a) - one) / a,
        }
    }

    fn g1_at_zero(&self) -> T {
        match *self {
            Self::KullbackLeibler => T::zero(),
            Self::ReverseKl => T::neg_infinity(),
            Self::ChiSquared | Self::SquaredHellinger => -T::one(),
            Self::TotalVariation => T::nan(),
            Self::Alpha(a) if a > T::zero() => -T::one() / a,
            Self::Alpha(_) => T::neg_infinity(),
        }
    }
}

/// `D_f(P₁‖P₀)`. Points with `p₀ = 0 < p₁` contribute `p₁·f∞`; points with both zero contribute nothing.
pub fn f_divergence<T: Real>(
    f: &FDivGenerator<T>,
    p1: &GridDensity<T>,
    p0: &GridDensity<T>,
) -> Result<T> {
    p1.grid().ensure_same(p0.grid())?;
    f.validate()?;
    let g = p0.grid();
    let d: T = (0..g.len())
        .map(|i| g.weight(i) * f.term(p1.values()[i], p0.values()[i]))
        .sum();
    if d < -T::c(1e-10) {
        return Err(Error::Numeric(format!("negative f-divergence {d:e}")));
    }
    Ok(d.max(T::zero()))
}

/// `L(λP₁‖P₀) = ∫ min{p₀, λp₁} dx`.
pub fn weighted_affinity<T: Real>(
    lambda: T,
    p0: &GridDensity<T>,
    p1: &GridDensity<T>,
) -> Result<T> {
    p0.grid().ensure_same(p1.grid())?;
    if !(lambda >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "λ must be ≥ 0, got {lambda}"
        )));
    }
    Ok(affinity_unchecked(
        lambda,
        p0.values(),
        p1.values(),
        p0.grid(),
    ))
}

pub(crate) fn affinity_unchecked<T: Real>(lambda: T, p0: &[T], p1: &[T], g: &super::Grid<T>) -> T {
    if lambda.is_infinite() {
        return g.integrate(p0);
    }
    (0..g.len())
        .map(|i| g.weight(i) * p0[i].min(lambda * p1[i]))
        .sum()
}

/// Weighted total variation `D_TV(λP₁‖P₀) = min{1, λ} − L(λP₁‖P₀)`.
pub fn weighted_tv<T: Real>(lambda: T, p0: &GridDensity<T>, p1: &GridDensity<T>) -> Result<T> {
    Ok(lambda.min(T::one()) - weighted_affinity(lambda, p0, p1)?)
}

/// Log-spaced quadrature grid on `[lo, hi]` for the spectral representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaGrid<T> {
    pub lo: T,
    pub hi: T,
    pub n: usize,
    /// Admissible tail mass outside `[lo, hi]`, relative to the result.
    pub tail_tol: T,
}

impl<T: Real> Default for LambdaGrid<T> {
    fn default() -> Self {
        Self {
            lo: T::c(1e-4),
            hi: T::c(1e4),
            n: 2000,
            tail_tol: T::c(5e-4),
        }
    }
}

/// Spectral form `D_f(P₁‖P₀) = ∫₀^∞ D_TV(λP₀‖P₁) f″(λ) dλ`, integrated in `log λ`.
///
/// The weight sits on `P₀`: with `D_f(P₁‖P₀) = ∫ f(p₁/p₀)p₀`, the pointwise identity
/// `f(t) = ∫ f″(s) κ(s, t) ds` sums to a total-variation term in `p₁ − s·p₀`.
/// The mass outside `[lo, hi]` is bounded in closed form per grid point and must stay
/// below `tail_tol` relative to the result.
pub fn spectral_f_divergence<T: Real>(
    f: &FDivGenerator<T>,
    p1: &GridDensity<T>,
    p0: &GridDensity<T>,
    lg: &LambdaGrid<T>,
) -> Result<T> {
    p1.grid().ensure_same(p0.grid())?;
    f.validate()?;
    if !f.is_twice_differentiable() {
        return Err(Error::Unsupported(
            "spectral representation needs a twice differentiable f".into(),
        ));
    }
    if !(lg.lo > T::zero() && lg.lo <= T::one() && lg.hi >= T::one() && lg.n >= 2) {
        return Err(Error::InvalidParameter(
            "λ grid must satisfy 0 < lo ≤ 1 ≤ hi, n ≥ 2".into(),
        ));
    }
    let m0 = p0.masses();
    let m1 = p1.masses();
    let (ulo, uhi) = (lg.lo.ln(), lg.hi.ln());
    let h = (uhi - ulo) / T::from_usize_lossy(lg.n - 1);
    let mut quad = T::zero();
    for j in 0..lg.n {
        let l = (ulo + T::from_usize_lossy(j) * h).exp();
        // `min(λ, 1) − Σ min(m₁, λm₀)` written as a sum of positive parts: the difference
        // form cancels catastrophically at small λ, where f″ can be very large
        let dtv: T = if l <= T::one() {
            m1.iter()
                .zip(&m0)
                .map(|(&a, &b)| (l * b - a).max(T::zero()))
                .sum()
        } else {
            m1.iter()
                .zip(&m0)
                .map(|(&a, &b)| (a - l * b).max(T::zero()))
                .sum()
        };
        let w = if j == 0 || j + 1 == lg.n {
            T::c(0.5)
        } else {
            T::one()
        };
        quad = quad + w * dtv * f.f2(l).unwrap_or(T::nan()) * l;
    }
    quad = quad * h;

    let (lo, hi) = (lg.lo, lg.hi);
    let mut tail = T::zero();
    for (&a, &b) in m1.iter().zip(&m0) {
        if b > T::zero() {
            let r = a / b;
            if r < lo {
                let (g_r, f1_r) = if a > T::zero() {
                    (f.g1(r), f.f1(r))
                } else {
                    (f.g1_at_zero(), T::zero())
                };
                let f1_term = if a > T::zero() {
                    a * (f.f1(lo) - f1_r)
                } else {
                    T::zero()
                };
                tail = tail + b * (f.g1(lo) - g_r) - f1_term;
            } else if r > hi {
                tail = tail + a * (f.f1(r) - f.f1(hi)) - b * (f.g1(r) - f.g1(hi));
            }
        } else if a > T::zero() {
            tail = tail + a * (f.slope_at_infinity() - f.f1(hi));
        }
    }
    let allowed = lg.tail_tol * quad.abs().max(T::c(1e-6));
    if !(tail <= allowed) {
        return Err(Error::InsufficientRange {
            estimate: tail.to_f64_lossy(),
            tolerance: allowed.to_f64_lossy(),
        });
    }
    Ok(quad)
}

/// Weighted f-dissimilarity `∫ f(z₁p₁/p₀, …, z_K p_K/p₀) p₀ dx`.
///
/// `recession(v)` must return `lim_{s→0⁺} s·f(v/s)`, used where `p₀ = 0`.
pub fn f_dissimilarity<T, F, R>(
    f: F,
    recession: R,
    z: &[T],
    ps: &[&GridDensity<T>],
    p0: &GridDensity<T>,
) -> Result<T>
where
    T: Real,
    F: Fn(&[T]) -> T,
    R: Fn(&[T]) -> T,
{
    if z.len() != ps.len() || ps.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {} densities",
            z.len(),
            ps.len()
        )));
    }
    for p in ps {
        p.grid().ensure_same(p0.grid())?;
    }
    let g = p0.grid();
    let mut t = vec![T::zero(); ps.len()];
    let mut acc = T::zero();
    for i in 0..g.len() {
        let q0 = p0.values()[i];
        let term = if q0 > T::zero() {
            for (k, p) in ps.iter().enumerate() {
                t[k] = z[k] * p.values()[i] / q0;
            }
            q0 * f(&t)
        } else {
            for (k, p) in ps.iter().enumerate() {
                t[k] = z[k] * p.values()[i];
            }
            if t.iter().all(|v| *v == T::zero()) {
                T::zero()
            } else {
                recession(&t)
            }
        };
        acc = acc + g.weight(i) * term;
    }
    Ok(acc)
}
