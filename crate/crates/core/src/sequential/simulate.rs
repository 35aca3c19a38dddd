use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Grid, GridDensity};
use crate::error::{Error, Result};
use crate::lfd::log_ratio;
use crate::sampling::{stream_rng, uniform01, InverseCdf};
use crate::scalar::Real;

use super::design::SequentialDesign;

pub const DEFAULT_HORIZON: usize = 10_000;

/// Distribution of the observations in a simulation.
#[derive(Clone, Debug, PartialEq)]
pub enum TruthModel<T> {
    /// i.i.d. draws from one density.
    Density(GridDensity<T>),
    /// The adversary draws from the least favorable density of hypothesis `k` at
    /// the current state.
    LeastFavorable(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Samples consumed; equals the horizon for censored runs.
    pub tau: usize,
    /// `None` for censored runs.
    pub decision: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// Hypothesis in force (decisions other than this one are errors).
    pub hypothesis: usize,
    pub seed: u64,
    pub horizon: usize,
    pub runs: Vec<RunOutcome>,
    /// Fraction of decided runs with a wrong decision.
    pub error_rate: f64,
    pub censored: usize,
    pub mean_run_length: f64,
    /// 10%, 50% and 90% quantiles of the run length.
    pub run_length_quantiles: [f64; 3],
    /// Every run stopped before the first sample (no information is ever used).
    pub immediate_stop: bool,
}

impl TrajectoryResult {
    fn from_runs(hypothesis: usize, seed: u64, horizon: usize, runs: Vec<RunOutcome>) -> Self {
        let decided: Vec<&RunOutcome> = runs.iter().filter(|r| r.decision.is_some()).collect();
        let wrong = decided
            .iter()
            .filter(|r| r.decision != Some(hypothesis))
            .count();
        let error_rate = if decided.is_empty() {
            0.0
        } else {
            wrong as f64 / decided.len() as f64
        };
        let mut taus: Vec<usize> = runs.iter().map(|r| r.tau).collect();
        taus.sort_unstable();
        let q = |p: f64| -> f64 {
            if taus.is_empty() {
                return 0.0;
            }
            let i = ((taus.len() - 1) as f64 * p).round() as usize;
            taus[i] as f64
        };
        Self {
            hypothesis,
            seed,
            horizon,
            censored: runs.len() - decided.len(),
            mean_run_length: if runs.is_empty() {
                0.0
            } else {
                taus.iter().sum::<usize>() as f64 / runs.len() as f64
            },
            run_length_quantiles: [q(0.1), q(0.5), q(0.9)],
            immediate_stop: !runs.is_empty() && runs.iter().all(|r| r.tau == 0),
            error_rate,
            runs,
        }
    }
}

/// `log num(x) − log den(x)` with both densities interpolated linearly on the grid.
#[inline]
pub fn llr_increment<T: Real>(grid: &Grid<T>, num: &[T], den: &[T], x: T) -> T {
    match grid.locate(x) {
        Some((i, t)) => {
            let a = num[i] + (num[i + 1] - num[i]) * t;
            let b = den[i] + (den[i + 1] - den[i]) * t;
            log_ratio(a, b)
        }
        None => T::zero(),
    }
}

/// Runs the design `runs` times; run `r` uses random stream `r` of `seed`.
///
/// The log-likelihood ratios are updated with the least favorable densities of the
/// current (nearest) state and clamped to the grid range; stopping and decisions are
/// read from the nearest state.
pub fn simulate<T: Real>(
    design: &SequentialDesign<T>,
    hypothesis: usize,
    truth: &TruthModel<T>,
    runs: usize,
    seed: u64,
    horizon: usize,
) -> Result<TrajectoryResult> {
    if horizon == 0 || runs == 0 {
        return Err(Error::InvalidParameter(
            "runs and horizon must be ≥ 1".into(),
        ));
    }
    let grid = *design.sets().grid();
    let k_max = design.sets().hypotheses();
    let fixed_sampler = match truth {
        TruthModel::Density(p) => {
            p.grid().ensure_same(&grid)?;
            Some(InverseCdf::new(p)?)
        }
        TruthModel::LeastFavorable(k) if (1..=k_max).contains(k) => None,
        TruthModel::LeastFavorable(k) => {
            return Err(Error::InvalidParameter(format!(
                "hypothesis {k} out of range 1..={k_max}"
            )))
        }
    };
    let samplers: Vec<OnceLock<InverseCdf<T>>> = match truth {
        TruthModel::LeastFavorable(_) => {
            (0..design.state_count()).map(|_| OnceLock::new()).collect()
        }
        TruthModel::Density(_) => Vec::new(),
    };
    let axes = design.sets().free_axes().to_vec();
    let dims = axes.len();
    let l = design.zgrid().half_width();
    let outcomes: Vec<RunOutcome> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut log_z = [T::zero(); 2];
            for n in 0..=horizon {
                let s = design.nearest_state(&log_z[..dims]);
                if design.stop_mask()[s] {
                    return RunOutcome {
                        tau: n,
                        decision: Some(design.decisions()[s]),
                    };
                }
                if n == horizon {
                    break;
                }
                let u = uniform01(&mut rng);
                let x = match (&fixed_sampler, truth) {
                    (Some(inv), _) => inv.quantile(u),
                    (None, TruthModel::LeastFavorable(k)) => samplers[s]
                        .get_or_init(|| {
                            InverseCdf::from_values(&grid, design.lfd(*k, s))
                                .expect("state LFDs carry unit mass")
                        })
                        .quantile(u),
                    (None, TruthModel::Density(_)) => unreachable!(),
                };
                let q0 = design.lfd(0, s);
                for a in 0..dims {
                    let inc = llr_increment(&grid, design.lfd(axes[a], s), q0, x);
                    log_z[a] = (log_z[a] + inc).max(-l).min(l);
                }
            }
            RunOutcome {
                tau: horizon,
                decision: None,
            }
        })
        .collect();
    Ok(TrajectoryResult::from_runs(
        hypothesis, seed, horizon, outcomes,
    ))
}

/// Textbook SPRT of `p2` against `p1`: accumulate `log p2(x)/p1(x)`, decide 2 at
/// `≥ log_a`, decide 1 at `≤ log_b`. Uses the same streams and increments as
/// [`simulate`].
#[allow(clippy::too_many_arguments)]
pub fn simulate_sprt<T: Real>(
    p1: &GridDensity<T>,
    p2: &GridDensity<T>,
    log_a: T,
    log_b: T,
    hypothesis: usize,
    truth: &GridDensity<T>,
    runs: usize,
    seed: u64,
    horizon: usize,
) -> Result<TrajectoryResult> {
    p1.grid().ensure_same(p2.grid())?;
    truth.grid().ensure_same(p1.grid())?;
    if horizon == 0 || runs == 0 {
        return Err(Error::InvalidParameter(
            "runs and horizon must be ≥ 1".into(),
        ));
    }
    let grid = *p1.grid();
    let inv = InverseCdf::new(truth)?;
    let outcomes: Vec<RunOutcome> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut llr = T::zero();
            for n in 0..=horizon {
                if llr >= log_a {
                    return RunOutcome {
                        tau: n,
                        decision: Some(2),
                    };
                }
                if llr <= log_b {
                    return RunOutcome {
                        tau: n,
                        decision: Some(1),
                    };
                }
                if n == horizon {
                    break;
                }
                let x = inv.quantile(uniform01(&mut rng));
                llr = llr + llr_increment(&grid, p2.values(), p1.values(), x);
            }
            RunOutcome {
                tau: horizon,
                decision: None,
            }
        })
        .collect();
    Ok(TrajectoryResult::from_runs(
        hypothesis, seed, horizon, outcomes,
    ))
}
