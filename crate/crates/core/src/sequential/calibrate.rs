use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;
use crate::uncertainty::UncertaintySet;

use super::design::{design, DesignOptions};
use super::grid::ZGrid;
use super::simulate::{simulate, TruthModel, DEFAULT_HORIZON};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationOptions<T> {
    /// Simulated runs per hypothesis and iterate.
    pub runs: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Accept when every `|error/target − 1|` is at most this.
    pub rel_tol: f64,
    /// Initial bracket of every `λ_k`.
    pub bracket: (T, T),
    pub design: DesignOptions<T>,
}

impl<T: Real> Default for CalibrationOptions<T> {
    fn default() -> Self {
        Self {
            runs: 10_000,
            seed: 0,
            horizon: DEFAULT_HORIZON,
            rel_tol: 0.2,
            bracket: (T::one(), T::c(1e4)),
            design: DesignOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration<T> {
    pub lambda: Vec<T>,
    /// Simulated error rate per hypothesis at `lambda` (NaN when never simulated).
    pub errors: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Weights `λ` whose design has (simulated, least favorable) error rates near
/// `targets`: bisection on every `log λ_k` at once, using that the error under
/// hypothesis `k` falls as `λ_k` grows. Returns the best iterate when the budget
/// runs out; targets outside `(0, 0.5)` return the lower bracket at once.
pub fn calibrate_weights<T: Real>(
    sets: &[UncertaintySet<T>],
    zgrid: ZGrid<T>,
    targets: &[f64],
    budget: usize,
    opts: &CalibrationOptions<T>,
) -> Result<Calibration<T>> {
    let k = targets.len();
    let (b0, b1) = (opts.bracket.0.ln(), opts.bracket.1.ln());
    if targets.iter().any(|t| !(*t > 0.0 && *t < 0.5)) {
        return Ok(Calibration {
            lambda: vec![opts.bracket.0; k],
            errors: vec![f64::NAN; k],
            evaluations: 0,
            converged: false,
        });
    }
    let mut lo = vec![b0; k];
    let mut hi = vec![b1; k];
    let mut cur: Vec<T> = (0..k).map(|i| (lo[i] + hi[i]) * T::c(0.5)).collect();
    let mut best: Option<(f64, Calibration<T>)> = None;
    let widen = T::c(10f64.ln());
    for it in 0..budget {
        let lambda: Vec<T> = cur.iter().map(|c| c.exp()).collect();
        let d = design(sets, &lambda, zgrid, &opts.design)?;
        let mut errors = Vec::with_capacity(k);
        for h in 1..=k {
            let r = simulate(
                &d,
                h,
                &TruthModel::LeastFavorable(h),
                opts.runs,
                opts.seed.wrapping_add(h as u64),
                opts.horizon,
            )?;
            errors.push(r.error_rate);
        }
        let score = errors
            .iter()
            .zip(targets)
            .fold(0.0f64, |m, (e, t)| m.max((e / t - 1.0).abs()));
        let converged = score <= opts.rel_tol;
        let cal = Calibration {
            lambda,
            errors: errors.clone(),
            evaluations: it + 1,
            converged,
        };
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, cal));
        }
        if converged {
            break;
        }
        let eps = T::c(1e-3);
        for i in 0..k {
            if errors[i] > targets[i] {
                lo[i] = cur[i];
                if hi[i] - lo[i] < eps {
                    hi[i] = hi[i] + widen;
                }
            } else {
                hi[i] = cur[i];
                if hi[i] - lo[i] < eps {
                    lo[i] = lo[i] - widen;
                }
            }
            cur[i] = (lo[i] + hi[i]) * T::c(0.5);
        }
    }
    Ok(best.map(|(_, c)| c).unwrap_or(Calibration {
        lambda: vec![opts.bracket.0; k],
        errors: vec![f64::NAN; k],
        evaluations: 0,
        converged: false,
    }))
}
