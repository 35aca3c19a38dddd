//! Randomised verification of the three least-favorability criteria.
//!
//! Random feasible pairs are drawn from the uncertainty sets and compared with
//! the candidate pair: stochastic dominance of the log-likelihood ratio
//! (criterion 1), minimal f-divergence (criterion 2), and maximal weighted
//! affinity `L(λ·‖·)` together with the weighted error of the candidate's own
//! test statistic (criterion 3). Each sample uses its own random stream.

use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;

use super::LfdPair;
use crate::density::{f_divergence, weighted_affinity, FDivGenerator, Grid, GridDensity};
use crate::error::{Error, Result};
use crate::root;
use crate::sampling::{stream_rng, uniform01};
use crate::scalar::Real;
use crate::uncertainty::{
    contamination_to_band, DensityBand, EpsContamination, FDivBall, UncertaintySet,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionReport {
    pub criterion: u8,
    pub lambdas: Vec<f64>,
    pub generators: Vec<&'static str>,
    /// Largest amount by which a sampled pair beat the candidate (≤ 0 means no violation);
    /// for criterion 2 relative to the candidate's divergence when that exceeds 1.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub pass: bool,
}

pub const CRITERION_TOLERANCE: f64 = 1e-6;

/// Checks criteria 1–3 of `pair` against `n_samples` random feasible pairs.
pub fn verify_lfd_criteria<T: Real>(
    pair: &LfdPair<T>,
    set0: &UncertaintySet<T>,
    set1: &UncertaintySet<T>,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<CriterionReport>> {
    let g = *pair.grid();
    g.ensure_same(set0.grid())?;
    g.ensure_same(set1.grid())?;
    let lambdas: Vec<f64> = (0..25)
        .map(|k| (-4.0 + 8.0 * k as f64 / 24.0).exp())
        .collect();
    let mut thresholds: Vec<T> = lambdas.iter().map(|l| T::c(l.ln())).collect();
    let (hi, lo) = pair.const_levels();
    for level in [hi, lo] {
        if level.is_finite() {
            let d = T::c(1e-9).max(level.abs() * T::c(1e-9));
            thresholds.extend([level - d, level, level + d]);
        }
    }
    let gens: [(FDivGenerator<T>, &'static str); 3] = [
        (FDivGenerator::KullbackLeibler, "kl"),
        (FDivGenerator::ChiSquared, "chi_squared"),
        (FDivGenerator::SquaredHellinger, "squared_hellinger"),
    ];
    let q_div: Vec<T> = gens
        .iter()
        .map(|(f, _)| f_divergence(f, &pair.q1, &pair.q0))
        .collect::<Result<_>>()?;
    let q_aff: Vec<T> = lambdas
        .iter()
        .map(|&l| weighted_affinity(T::c(l), &pair.q0, &pair.q1))
        .collect::<Result<_>>()?;
    let q0_tail: Vec<T> = thresholds
        .iter()
        .map(|&t| tail_above(&pair.q0, pair.llr.values(), t))
        .collect();
    let q1_head: Vec<T> = thresholds
        .iter()
        .map(|&t| head_at_or_below(&pair.q1, pair.llr.values(), t))
        .collect();

    let per_sample: Vec<Result<[f64; 3]>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let p0 = feasible_sample(set0, &mut rng)?;
            let p1 = feasible_sample(set1, &mut rng)?;
            let mut v = [f64::NEG_INFINITY; 3];
            for (j, &t) in thresholds.iter().enumerate() {
                let a = tail_above(&p0, pair.llr.values(), t) - q0_tail[j];
                let b = head_at_or_below(&p1, pair.llr.values(), t) - q1_head[j];
                v[0] = v[0].max(a.max(b).to_f64_lossy());
            }
            for (j, (f, _)) in gens.iter().enumerate() {
                let d = f_divergence(f, &p1, &p0)?;
                // relative above 1: tail likelihood ratios of e^60 make χ² divergences of
                // order 1e29, where the absolute rounding error alone exceeds any tolerance
                let gap = if q_div[j].is_infinite() && d.is_infinite() {
                    T::zero()
                } else {
                    (q_div[j] - d) / q_div[j].abs().max(T::one())
                };
                v[1] = v[1].max(gap.to_f64_lossy());
            }
            for (j, &l) in lambdas.iter().enumerate() {
                let lt = T::c(l);
                let aff = weighted_affinity(lt, &p0, &p1)? - q_aff[j];
                let t = -lt.ln();
                let err_p = tail_above(&p0, pair.llr.values(), t)
                    + lt * head_at_or_below(&p1, pair.llr.values(), t);
                let err_q = tail_above(&pair.q0, pair.llr.values(), t)
                    + lt * head_at_or_below(&pair.q1, pair.llr.values(), t);
                v[2] = v[2].max(aff.max(err_p - err_q).to_f64_lossy());
            }
            Ok(v)
        })
        .collect();
    let mut worst = [f64::NEG_INFINITY; 3];
    for r in per_sample {
        let v = r?;
        for i in 0..3 {
            worst[i] = worst[i].max(v[i]);
        }
    }
    let names: Vec<&'static str> = gens.iter().map(|g| g.1).collect();
    Ok((0..3)
        .map(|i| CriterionReport {
            criterion: i as u8 + 1,
            lambdas: lambdas.clone(),
            generators: if i == 1 { names.clone() } else { Vec::new() },
            worst_violation: worst[i],
            tolerance: CRITERION_TOLERANCE,
            samples: n_samples,
            pass: worst[i] <= CRITERION_TOLERANCE,
        })
        .collect())
}

fn tail_above<T: Real>(p: &GridDensity<T>, llr: &[T], t: T) -> T {
    let g = p.grid();
    (0..g.len())
        .filter(|&i| llr[i] > t)
        .map(|i| g.weight(i) * p.values()[i])
        .sum()
}

fn head_at_or_below<T: Real>(p: &GridDensity<T>, llr: &[T], t: T) -> T {
    let g = p.grid();
    (0..g.len())
        .filter(|&i| llr[i] <= t)
        .map(|i| g.weight(i) * p.values()[i])
        .sum()
}

/// Draws a random member of an uncertainty set.
pub fn feasible_sample<T: Real, R: RngCore>(
    set: &UncertaintySet<T>,
    rng: &mut R,
) -> Result<GridDensity<T>> {
    let p = match set {
        UncertaintySet::Band(b) => sample_band(b, rng)?,
        UncertaintySet::Contamination(c) => sample_contamination(c, rng)?,
        UncertaintySet::Ball(b) => sample_ball(b, rng)?,
    };
    let ok = match set {
        UncertaintySet::Ball(b) => {
            f_divergence(b.generator(), &p, b.nominal())? <= b.radius() * (T::one() + T::c(1e-9))
        }
        UncertaintySet::Contamination(c) => {
            contamination_to_band(c).contains(p.values(), T::tol(1e-12))
        }
        UncertaintySet::Band(b) => b.contains(p.values(), T::tol(1e-12)),
    };
    if !ok {
        return Err(Error::SamplerBug(
            format!("{set:?}").chars().take(80).collect(),
        ));
    }
    Ok(p)
}

/// Random positive profile: a few bumps on a floor, optionally tilted.
fn random_profile<T: Real, R: RngCore>(g: &Grid<T>, base: &[T], rng: &mut R) -> Vec<T> {
    let (lo, hi) = (g.x_min().to_f64_lossy(), g.x_max().to_f64_lossy());
    let span = hi - lo;
    let kind = uniform01(rng);
    let bumps: Vec<(f64, f64, f64)> = (0..1 + (uniform01(rng) * 4.0) as usize)
        .map(|_| {
            let c = lo + span * uniform01(rng);
            let w = span * (0.005 + 0.2 * uniform01(rng));
            (c, w, uniform01(rng))
        })
        .collect();
    let tilt = (uniform01(rng) - 0.5) * 8.0 / span;
    (0..g.len())
        .map(|i| {
            let x = g.x(i).to_f64_lossy();
            let b = base[i].to_f64_lossy();
            let v = if kind < 0.35 {
                // exponential tilt of the base: pushes mass towards one side
                b * (tilt * (x - lo) * 4.0).exp()
            } else if kind < 0.7 {
                b * (1.0
                    + bumps
                        .iter()
                        .map(|(c, w, h)| 4.0 * h * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                        .sum::<f64>())
            } else {
                // concentrated bumps over a faint copy of the base, so every point stays reachable
                bumps
                    .iter()
                    .map(|(c, w, h)| h * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                    .sum::<f64>()
                    + 1e-3 * b
            };
            T::c(v.max(0.0))
        })
        .collect()
}

fn sample_band<T: Real, R: RngCore>(b: &DensityBand<T>, rng: &mut R) -> Result<GridDensity<T>> {
    if let Some(d) = b.degenerate() {
        return Ok(d);
    }
    let base = b.interior_density()?;
    let profile = random_profile(b.grid(), base.values(), rng);
    let (_, v) = b.project(&profile)?;
    GridDensity::from_unnormalized(*b.grid(), v)
}

fn sample_contamination<T: Real, R: RngCore>(
    c: &EpsContamination<T>,
    rng: &mut R,
) -> Result<GridDensity<T>> {
    let g = *c.nominal().grid();
    let n = g.len();
    let mut h = vec![T::zero(); n];
    let k = 1 + (uniform01(rng) * 4.0) as usize;
    for _ in 0..k {
        let centre = (uniform01(rng) * (n - 1) as f64) as usize;
        let half = 1 + (uniform01(rng) * (n as f64 * 0.02)) as usize;
        let (a, z) = (centre.saturating_sub(half), (centre + half).min(n - 1));
        let mut box_ = vec![T::zero(); n];
        for v in box_.iter_mut().take(z + 1).skip(a) {
            *v = T::one();
        }
        let mass = g.integrate(&box_);
        let w = T::c(uniform01(rng) + 0.05);
        for i in a..=z {
            h[i] = h[i] + w * box_[i] / mass;
        }
    }
    let total = g.integrate(&h);
    let eps = c.eps() * T::c(uniform01(rng).sqrt());
    let v = (0..n)
        .map(|i| (T::one() - eps) * c.nominal().values()[i] + eps * h[i] / total)
        .collect();
    GridDensity::from_unnormalized(g, v)
}

fn sample_ball<T: Real, R: RngCore>(b: &FDivBall<T>, rng: &mut R) -> Result<GridDensity<T>> {
    let g = *b.nominal().grid();
    let nom = b.nominal();
    // direction of the tilt: a random low-order polynomial in the standardised coordinate
    let (lo, hi) = (g.x_min(), g.x_max());
    let mid = (lo + hi) * T::c(0.5);
    let half = (hi - lo) * T::c(0.5);
    let c1 = T::c(uniform01(rng) * 2.0 - 1.0);
    let c2 = T::c(uniform01(rng) * 2.0 - 1.0);
    let phi: Vec<T> = (0..g.len())
        .map(|i| {
            let u = (g.x(i) - mid) / half;
            c1 * u + c2 * u * u
        })
        .collect();
    let tilted = |s: T| -> Result<GridDensity<T>> {
        let m = phi.iter().fold(T::neg_infinity(), |m, &v| m.max(s * v));
        let v = (0..g.len())
            .map(|i| nom.values()[i] * (s * phi[i] - m).exp())
            .collect();
        GridDensity::from_unnormalized(g, v)
    };
    let target = b.radius() * T::c(uniform01(rng).max(1e-3));
    let excess = |s: T| -> T {
        match tilted(s).and_then(|p| f_divergence(b.generator(), &p, nom)) {
            Ok(d) if d.is_finite() => d - target,
            _ => T::infinity(),
        }
    };
    let mut s_hi = T::one();
    while excess(s_hi) < T::zero() && s_hi < T::c(1e6) {
        s_hi = s_hi * T::c(4.0);
    }
    if excess(s_hi) < T::zero() {
        return tilted(s_hi);
    }
    let s = root::bracketed(
        excess,
        T::zero(),
        s_hi,
        T::c(1e-12),
        target * T::c(1e-6),
        200,
    )?;
    // stay inside the ball: the root may land marginally outside
    let s = if excess(s) > T::zero() {
        s * (T::one() - T::c(1e-6))
    } else {
        s
    };
    tilted(s)
}
