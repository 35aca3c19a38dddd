//! Densities on a uniform 1-D grid and the similarity measures built on them.
//!
//! Every integral is a trapezoid sum `Σ w_i g(x_i)`, so divergences computed here
//! are exact f-divergences of the discrete measures `w_i p_i`. Data-processing
//! and convexity properties therefore hold to rounding, not just to quadrature error.

mod divergence;
mod grid;
mod spec;

pub use divergence::{
    f_dissimilarity, f_divergence, spectral_f_divergence, weighted_affinity, weighted_tv,
    FDivGenerator, LambdaGrid,
};
#[allow(unused_imports)]
pub(crate) use grid::lerp;
pub use grid::{integrate, Grid, GridDensity, GridFunction};
pub use spec::{build_density, exp_offset_scale, DensitySpec, MixtureComponent};

#[cfg(test)]
pub(crate) mod testkit;
