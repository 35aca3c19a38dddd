//! Uncertainty sets: density bands, ε-contamination neighbourhoods and f-divergence balls.
//!
//! A band `p′ ≤ p ≤ p″` is the common currency: contamination is the band
//! `[(1−ε)p°, ∞)`, and a pair of f-balls is replaced by the pair of scaled-nominal
//! bands whose least favorable densities sit exactly on the ball boundaries.

use crate::density::{f_divergence, FDivGenerator, Grid, GridDensity, GridFunction};
use crate::error::{Error, Result};
use crate::root;
use crate::scalar::Real;

/// Pointwise envelope `lower ≤ p ≤ upper`; `upper` may be `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityBand<T> {
    lower: GridFunction<T>,
    upper: GridFunction<T>,
}

impl<T: Real> DensityBand<T> {
    pub fn new(lower: GridFunction<T>, upper: GridFunction<T>) -> Result<Self> {
        lower.grid().ensure_same(upper.grid())?;
        for (l, u) in lower.values().iter().zip(upper.values()) {
            if !(l.is_finite() && *l >= T::zero()) {
                return Err(Error::InvalidSet(format!(
                    "lower bound {l} must be finite and ≥ 0"
                )));
            }
            if !(*u >= *l) {
                return Err(Error::InvalidSet(format!(
                    "upper bound {u} below lower bound {l}"
                )));
            }
        }
        let band = Self { lower, upper };
        let tol = T::mass_tol();
        if band.lower_mass() > T::one() + tol {
            return Err(Error::InvalidSet(format!(
                "∫p′ = {} exceeds 1",
                band.lower_mass()
            )));
        }
        if band.upper_mass() < T::one() - tol {
            return Err(Error::InvalidSet(format!(
                "∫p″ = {} is below 1",
                band.upper_mass()
            )));
        }
        Ok(band)
    }

    pub fn grid(&self) -> &Grid<T> {
        self.lower.grid()
    }

    pub fn lower(&self) -> &[T] {
        self.lower.values()
    }

    pub fn upper(&self) -> &[T] {
        self.upper.values()
    }

    pub fn lower_function(&self) -> &GridFunction<T> {
        &self.lower
    }

    pub fn upper_function(&self) -> &GridFunction<T> {
        &self.upper
    }

    pub fn lower_mass(&self) -> T {
        self.lower.integral()
    }

    /// `+∞` if any upper bound is infinite at a point of positive weight.
    pub fn upper_mass(&self) -> T {
        self.upper.integral()
    }

    /// Pointwise membership with absolute slack `tol`.
    pub fn contains(&self, p: &[T], tol: T) -> bool {
        p.iter()
            .zip(self.lower().iter().zip(self.upper()))
            .all(|(v, (l, u))| *v >= *l - tol && *v <= *u + tol)
    }

    /// The single density in the band when `∫p′ = 1`.
    pub fn degenerate(&self) -> Option<GridDensity<T>> {
        if (self.lower_mass() - T::one()).abs() <= T::mass_tol() {
            GridDensity::from_unnormalized(*self.grid(), self.lower().to_vec()).ok()
        } else {
            None
        }
    }

    /// A density inside the band: the renormalized lower bound, or the band
    /// projection of a flat profile when the lower bound vanishes.
    pub fn interior_density(&self) -> Result<GridDensity<T>> {
        if self.lower_mass() > T::zero() {
            let (_, v) = self.project(self.lower())?;
            GridDensity::from_unnormalized(*self.grid(), v)
        } else {
            let (_, v) = self.project(&vec![T::one(); self.grid().len()])?;
            GridDensity::from_unnormalized(*self.grid(), v)
        }
    }

    /// Projection of the ray `c·f` onto the band: returns `c` and `min{p″, max{c·f, p′}}` with unit mass.
    pub fn project(&self, f: &[T]) -> Result<(T, Vec<T>)> {
        let g = *self.grid();
        let (lo, hi) = (self.lower(), self.upper());
        // Degenerate bands: the whole ray beyond/below a critical scale lands on the bound.
        let tol = T::mass_tol();
        if (self.lower_mass() - T::one()).abs() <= tol {
            let c = (0..g.len())
                .filter(|&i| f[i] > T::zero())
                .fold(T::infinity(), |m, i| m.min(lo[i] / f[i]));
            let c = if c.is_finite() { c } else { T::one() };
            return Ok((c, lo.to_vec()));
        }
        if (self.upper_mass() - T::one()).abs() <= tol {
            let mut c = T::zero();
            let mut reachable = true;
            for i in 0..g.len() {
                if f[i] > T::zero() {
                    c = c.max(hi[i] / f[i]);
                } else if hi[i] > lo[i] && g.weight(i) > T::zero() {
                    reachable = false;
                }
            }
            if reachable && c.is_finite() {
                return Ok((c, hi.to_vec()));
            }
        }
        let mass = |c: T| -> T {
            let mut s = T::zero();
            for i in 0..g.len() {
                s = s + g.weight(i) * (c * f[i]).max(lo[i]).min(hi[i]);
            }
            s - T::one()
        };
        let c = root::bracketed_log(mass, T::c(1e-12), T::c(1e12), T::c(1e-13), T::zero(), 400)?;
        Ok((
            c,
            (0..g.len())
                .map(|i| (c * f[i]).max(lo[i]).min(hi[i]))
                .collect(),
        ))
    }
}

/// `(1−ε)P° + εH` with arbitrary `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsContamination<T> {
    nominal: GridDensity<T>,
    eps: T,
}

impl<T: Real> EpsContamination<T> {
    pub fn new(nominal: GridDensity<T>, eps: T) -> Result<Self> {
        if !(eps >= T::zero() && eps < T::c(0.5)) {
            return Err(Error::InvalidSet(format!(
                "ε must lie in [0, 0.5), got {eps}"
            )));
        }
        Ok(Self { nominal, eps })
    }

    pub fn nominal(&self) -> &GridDensity<T> {
        &self.nominal
    }

    pub fn eps(&self) -> T {
        self.eps
    }
}

/// `{P : D_f(P‖P°) ≤ ζ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FDivBall<T> {
    nominal: GridDensity<T>,
    f: FDivGenerator<T>,
    radius: T,
}

impl<T: Real> FDivBall<T> {
    pub fn new(nominal: GridDensity<T>, f: FDivGenerator<T>, radius: T) -> Result<Self> {
        f.validate()?;
        if !f.is_twice_differentiable() {
            return Err(Error::InvalidSet(
                "f-divergence ball needs a twice differentiable f".into(),
            ));
        }
        if !(radius > T::zero() && radius.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self { nominal, f, radius })
    }

    pub fn nominal(&self) -> &GridDensity<T> {
        &self.nominal
    }

    pub fn generator(&self) -> &FDivGenerator<T> {
        &self.f
    }

    pub fn radius(&self) -> T {
        self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UncertaintySet<T> {
    Band(DensityBand<T>),
    Contamination(EpsContamination<T>),
    Ball(FDivBall<T>),
}

impl<T: Real> UncertaintySet<T> {
    pub fn grid(&self) -> &Grid<T> {
        match self {
            Self::Band(b) => b.grid(),
            Self::Contamination(c) => c.nominal.grid(),
            Self::Ball(b) => b.nominal.grid(),
        }
    }

    /// Band form of bands and contamination sets; balls need their partner ball,
    /// see [`equivalent_band_for_ball`].
    pub fn to_band(&self) -> Result<DensityBand<T>> {
        match self {
            Self::Band(b) => Ok(b.clone()),
            Self::Contamination(c) => Ok(contamination_to_band(c)),
            Self::Ball(_) => Err(Error::Unsupported(
                "an f-divergence ball has no standalone band form; convert the pair with equivalent_band_for_ball".into(),
            )),
        }
    }

    /// Membership of a grid density, with absolute slack `tol`.
    pub fn contains(&self, p: &GridDensity<T>, tol: T) -> Result<bool> {
        p.grid().ensure_same(self.grid())?;
        Ok(match self {
            Self::Band(b) => b.contains(p.values(), tol),
            Self::Contamination(c) => contamination_to_band(c).contains(p.values(), tol),
            Self::Ball(b) => f_divergence(&b.f, p, &b.nominal)? <= b.radius + tol,
        })
    }
}

/// Band `[a·p°, b·p°]` around a nominal density (`b = ∞` allowed).
pub fn band_from_scaled_nominal<T: Real>(
    nominal: &GridDensity<T>,
    a: T,
    b: T,
) -> Result<DensityBand<T>> {
    if !(a >= T::zero() && a <= T::one()) || !(b >= T::one()) {
        return Err(Error::InvalidSet(format!(
            "need 0 ≤ a ≤ 1 ≤ b, got a={a}, b={b}"
        )));
    }
    let g = *nominal.grid();
    let lower = nominal.values().iter().map(|&p| a * p).collect();
    let upper = nominal
        .values()
        .iter()
        .map(|&p| {
            if b.is_infinite() {
                T::infinity()
            } else {
                b * p
            }
        })
        .collect();
    DensityBand::new(GridFunction::new(g, lower)?, GridFunction::new(g, upper)?)
}

/// Band `[(1−ε)p°, +∞)` describing the contamination neighbourhood.
pub fn contamination_to_band<T: Real>(m: &EpsContamination<T>) -> DensityBand<T> {
    let g = *m.nominal.grid();
    let s = T::one() - m.eps;
    let lower = m.nominal.values().iter().map(|&p| s * p).collect();
    DensityBand {
        lower: GridFunction::new(g, lower).expect("scaled density is a valid function"),
        upper: GridFunction::constant(g, T::infinity()),
    }
}

/// Outlier ratio `ε = 1 − ∫p′` and nominal `p′/(1−ε)` of a band.
pub fn band_stats<T: Real>(b: &DensityBand<T>) -> Result<(T, GridDensity<T>)> {
    let m = b.lower_mass();
    if !(m > T::zero()) {
        return Err(Error::InvalidSet(
            "lower bound vanishes; nominal density undefined".into(),
        ));
    }
    let eps = (T::one() - m).max(T::zero());
    Ok((
        eps,
        GridDensity::from_unnormalized(*b.grid(), b.lower().to_vec())?,
    ))
}

/// Scaled-nominal bands equivalent to a pair of f-divergence balls.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalentBands<T> {
    pub band0: DensityBand<T>,
    pub band1: DensityBand<T>,
    pub a: [T; 2],
    pub b: [T; 2],
}

/// Finds `[a_i p_i, b_i p_i]` such that the band least favorable densities satisfy
/// `D_{f_i}(Q_i‖p_i) = ζ_i`. Both bands share the lower scale `a₀ = a₁ = t`; see
/// [`crate::lfd::fball`] for the search.
pub fn equivalent_band_for_ball<T: Real>(
    ball0: &FDivBall<T>,
    ball1: &FDivBall<T>,
) -> Result<EquivalentBands<T>> {
    crate::lfd::fball::equivalent_bands(ball0, ball1)
}
