use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridDensity};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parametric description of a density, realised on a grid by [`build_density`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// Normal density with mean and variance.
    Gaussian {
        mean: f64,
        var: f64,
    },
    /// Uniform on `[a, b]`.
    Uniform {
        a: f64,
        b: f64,
    },
    /// `x ↦ a·exp(s·x) + c`, renormalized on the grid.
    ExpOffset {
        a: f64,
        s: f64,
        c: f64,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub density: DensitySpec,
}

impl DensitySpec {
    pub fn gaussian(mean: f64, var: f64) -> Self {
        Self::Gaussian { mean, var }
    }

    pub fn uniform(a: f64, b: f64) -> Self {
        Self::Uniform { a, b }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Self::Gaussian { mean, var } => {
                if !finite(&[*mean, *var]) || *var <= 0.0 {
                    return Err(bad(format!(
                        "gaussian needs finite mean and var > 0, got ({mean}, {var})"
                    )));
                }
            }
            Self::Uniform { a, b } => {
                if !finite(&[*a, *b]) || a >= b {
                    return Err(bad(format!("uniform needs finite a < b, got ({a}, {b})")));
                }
            }
            Self::ExpOffset { a, s, c } => {
                if !finite(&[*a, *s, *c]) {
                    return Err(bad("exp_offset parameters must be finite".into()));
                }
            }
            Self::Mixture { components } => {
                if components.is_empty() {
                    return Err(bad("empty mixture".into()));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components
                    .iter()
                    .any(|c| !(c.weight.is_finite() && c.weight >= 0.0))
                    || (total - 1.0).abs() > 1e-9
                {
                    return Err(bad(format!(
                        "mixture weights must be non-negative and sum to 1, got {total}"
                    )));
                }
                for c in components {
                    c.density.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Pointwise values before normalization. Mixtures combine normalized components.
    pub fn shape<T: Real>(&self, grid: &Grid<T>) -> Result<Vec<T>> {
        self.validate()?;
        let xs: Vec<f64> = grid
            .points()
            .into_iter()
            .map(|x| x.to_f64_lossy())
            .collect();
        let out: Vec<f64> = match self {
            Self::Gaussian { mean, var } => {
                let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
                xs.iter()
                    .map(|x| norm * (-(x - mean).powi(2) / (2.0 * var)).exp())
                    .collect()
            }
            Self::Uniform { a, b } => {
                let h = 1.0 / (b - a);
                let (lo, hi) = (xs[0], xs[xs.len() - 1]);
                let tie = 1e-12 * (hi - lo);
                xs.iter()
                    .map(|&x| {
                        let at_a = (x - a).abs() <= tie;
                        let at_b = (x - b).abs() <= tie;
                        // an endpoint interior to the grid carries half height so that the
                        // trapezoid rule sees the jump symmetrically
                        if (at_a && x > lo + tie) || (at_b && x < hi - tie) {
                            0.5 * h
                        } else if at_a || at_b || (x > *a && x < *b) {
                            h
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            Self::ExpOffset { a, s, c } => xs.iter().map(|x| a * (s * x).exp() + c).collect(),
            Self::Mixture { components } => {
                let mut acc = vec![0.0; xs.len()];
                for comp in components {
                    let d: GridDensity<T> = comp.density.build(grid)?;
                    for (a, v) in acc.iter_mut().zip(d.values()) {
                        *a += comp.weight * v.to_f64_lossy();
                    }
                }
                acc
            }
        };
        if let Some(v) = out.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(bad(format!("density value {v} is negative or non-finite")));
        }
        Ok(out.into_iter().map(T::c).collect())
    }

    pub fn build<T: Real>(&self, grid: &Grid<T>) -> Result<GridDensity<T>> {
        GridDensity::from_unnormalized(*grid, self.shape(grid)?)
    }
}

fn bad(msg: String) -> Error {
    Error::InvalidDensity(msg)
}

/// Realises a density spec on a grid, renormalizing away truncated tails.
pub fn build_density<T: Real>(spec: &DensitySpec, grid: &Grid<T>) -> Result<GridDensity<T>> {
    spec.build(grid)
}

/// Scale `a` such that `∫_lo^hi (a·e^{s·x} + c) dx = mass` (exact integral, not the grid sum).
pub fn exp_offset_scale(s: f64, c: f64, lo: f64, hi: f64, mass: f64) -> Result<f64> {
    if !(lo < hi) || ![s, c, mass].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter(
            "exp_offset_scale needs finite inputs and lo < hi".into(),
        ));
    }
    let e = if s == 0.0 {
        hi - lo
    } else {
        ((s * hi).exp() - (s * lo).exp()) / s
    };
    Ok((mass - c * (hi - lo)) / e)
}
