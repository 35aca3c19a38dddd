//! Minimax robust detection on gridded densities.
//!
//! Least favorable distributions under ε-contamination, density-band and
//! f-divergence-ball uncertainty; exact finite-sample error probabilities and ROC
//! curves of the resulting clipped/censored likelihood-ratio tests; and minimax
//! sequential tests for several hypotheses designed by value iteration on the
//! likelihood-ratio plane.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`). The aliases at the crate root fix the scalar to `f64`.

pub mod density;
pub mod detector;
pub mod error;
pub mod lfd;
pub mod root;
pub mod sampling;
pub mod scalar;
pub mod sequential;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = density::Grid<f64>;
pub type GridDensity = density::GridDensity<f64>;
pub type GridFunction = density::GridFunction<f64>;
pub type FDivGenerator = density::FDivGenerator<f64>;
pub type DensityBand = uncertainty::DensityBand<f64>;
pub type EpsContamination = uncertainty::EpsContamination<f64>;
pub type FDivBall = uncertainty::FDivBall<f64>;
pub type UncertaintySet = uncertainty::UncertaintySet<f64>;
pub type LfdPair = lfd::LfdPair<f64>;
pub type LlrDistribution = detector::LlrDistribution<f64>;
pub type RocCurve = detector::RocCurve<f64>;
pub type ZGrid = sequential::ZGrid<f64>;
pub type SequentialDesign = sequential::SequentialDesign<f64>;
