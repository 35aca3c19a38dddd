//! Minimax sequential tests for several hypotheses.
//!
//! The state of a test is the vector of likelihood ratios `z_k` of each hypothesis
//! against the run-length distribution. On a log-spaced grid of states the value
//! function `ρ = min{g, 1 + D}` is found by value iteration, where `g` is the cost of
//! stopping now and `D` the expected cost of one more sample under the least
//! favorable densities of that state. Hypotheses whose set coincides with the
//! run-length density carry no coordinate (`z_k ≡ 1`); at most two coordinates
//! may be free.

mod calibrate;
mod design;
mod grid;
mod lfds;
mod simulate;

pub use calibrate::{calibrate_weights, Calibration, CalibrationOptions};
pub use design::{
    design, design_sprt, DesignKind, DesignOptions, DesignReport, PolicyExport, PolicyRow,
    SequentialDesign,
};
pub use grid::{stopping_cost, ValueFunction, ZGrid};
pub use lfds::{continuation_value, state_lfds, HypothesisSets, LfdOptions, StateLfds};
pub use simulate::{
    llr_increment, simulate, simulate_sprt, RunOutcome, TrajectoryResult, TruthModel,
    DEFAULT_HORIZON,
};
