use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform grid `x_min, x_min + dx, …, x_max` with `n ≥ 3` points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    x_min: T,
    x_max: T,
    n: usize,
}

impl<T: Real> Grid<T> {
    pub fn new(x_min: T, x_max: T, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if !(x_min < x_max) {
            return Err(Error::InvalidGrid(format!(
                "x_min {x_min} must be < x_max {x_max}"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {n}"
            )));
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn x_max(&self) -> T {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize_lossy(self.n - 1)
    }

    pub fn x(&self, i: usize) -> T {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + T::from_usize_lossy(i) * self.dx()
        }
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Trapezoid quadrature weight of point `i`.
    pub fn weight(&self, i: usize) -> T {
        if i == 0 || i + 1 == self.n {
            self.dx() * T::c(0.5)
        } else {
            self.dx()
        }
    }

    pub fn weights(&self) -> Vec<T> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    /// Cell index `i` and fractional position in `[x_i, x_{i+1}]`, or `None` outside the grid.
    pub fn locate(&self, x: T) -> Option<(usize, T)> {
        if !(x >= self.x_min && x <= self.x_max) {
            return None;
        }
        let u = (x - self.x_min) / self.dx();
        let i = u.floor().to_usize().unwrap_or(0).min(self.n - 2);
        Some((i, (u - T::from_usize_lossy(i)).max(T::zero()).min(T::one())))
    }

    pub fn ensure_same(&self, other: &Grid<T>) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Trapezoid integral of pointwise values.
    pub fn integrate(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.n);
        let inner: T = values[1..self.n - 1].iter().copied().sum();
        (inner + (values[0] + values[self.n - 1]) * T::c(0.5)) * self.dx()
    }

    /// Cumulative trapezoid integral, starting at 0 at `x_min`.
    pub fn cumulative(&self, values: &[T]) -> Vec<T> {
        let h = self.dx() * T::c(0.5);
        let mut out = Vec::with_capacity(self.n);
        let mut acc = T::zero();
        out.push(acc);
        for w in values.windows(2) {
            acc = acc + h * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }
}

/// Real-valued function sampled on a grid. Values must not be NaN; `±∞` is
/// accepted where a caller documents it (log-likelihood ratios, band upper bounds).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidDensity(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidDensity("NaN value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid<T>, v: T) -> Self {
        Self {
            grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn integral(&self) -> T {
        integrate(self)
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn eval(&self, x: T) -> Option<T> {
        let (i, t) = self.grid.locate(x)?;
        Some(lerp(self.values[i], self.values[i + 1], t))
    }
}

/// Probability density on a grid: non-negative, unit trapezoid mass.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> GridDensity<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        check_nonneg(&grid, &values)?;
        let mass = grid.integrate(&values);
        if (mass - T::one()).abs() > T::mass_tol() {
            return Err(Error::InvalidDensity(format!("integral {mass:e} is not 1")));
        }
        Ok(Self { grid, values })
    }

    /// Normalizes non-negative values to unit mass.
    pub fn from_unnormalized(grid: Grid<T>, mut values: Vec<T>) -> Result<Self> {
        check_nonneg(&grid, &values)?;
        let mass = grid.integrate(&values);
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::InvalidDensity(
                "density is identically zero on the grid".into(),
            ));
        }
        for v in values.iter_mut() {
            *v = *v / mass;
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn to_function(&self) -> GridFunction<T> {
        GridFunction {
            grid: self.grid,
            values: self.values.clone(),
        }
    }

    /// Per-point probability masses `w_i p_i`.
    pub fn masses(&self) -> Vec<T> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| self.grid.weight(i) * v)
            .collect()
    }

    /// Linear interpolation; zero outside the grid.
    pub fn eval(&self, x: T) -> T {
        match self.grid.locate(x) {
            Some((i, t)) => lerp(self.values[i], self.values[i + 1], t),
            None => T::zero(),
        }
    }

    /// Trapezoid CDF at the grid points.
    pub fn cdf(&self) -> Vec<T> {
        self.grid.cumulative(&self.values)
    }

    pub fn sup_distance(&self, other: &GridDensity<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }
}

fn check_nonneg<T: Real>(grid: &Grid<T>, values: &[T]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::InvalidDensity(format!(
            "expected {} values, got {}",
            grid.len(),
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= T::zero())) {
        return Err(Error::InvalidDensity(format!(
            "value {v} is negative or non-finite"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn lerp<T: Real>(a: T, b: T, t: T) -> T {
    a + (b - a) * t
}

/// Trapezoid rule; exact for integrands that are piecewise linear on the grid.
pub fn integrate<T: Real>(f: &GridFunction<T>) -> T {
    f.grid.integrate(&f.values)
}
