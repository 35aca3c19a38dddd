use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::uncertainty::{DensityBand, UncertaintySet};

use super::grid::{stopping_cost, ValueFunction, ZGrid};
use super::lfds::{HypothesisSets, LfdOptions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignOptions<T> {
    /// Sup-norm tolerance of value iteration and of the outer alternation.
    pub tol: T,
    /// Budget of value-iteration sweeps over all alternations.
    pub max_sweeps: usize,
    pub max_alternations: usize,
    pub lfd: LfdOptions<T>,
}

impl<T: Real> Default for DesignOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tol(1e-6),
            max_sweeps: 100_000,
            max_alternations: 40,
            lfd: LfdOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Optimized by value iteration.
    Minimax,
    /// Fixed two-threshold rule.
    Sprt,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub alternations: usize,
    pub sweeps: usize,
    pub lfd_solves: usize,
    /// States whose LFD ascent hit the cycle cap in the final pass.
    pub unconverged_states: usize,
    pub max_lfd_cycles: usize,
}

/// Per-block LFD storage: a single density, or one density per grid state.
#[derive(Clone, Debug, PartialEq)]
enum LfdStore<T> {
    Fixed(Vec<T>),
    PerState(Vec<T>),
}

/// A sequential test on the likelihood-ratio grid: value function, stopping
/// cost, stop region, decisions and the least favorable densities of every state.
#[derive(Clone, Debug)]
pub struct SequentialDesign<T> {
    kind: DesignKind,
    lambda: Vec<T>,
    sets: HypothesisSets<T>,
    rho: ValueFunction<T>,
    g: Vec<T>,
    stop: Vec<bool>,
    decision: Vec<usize>,
    lfds: Vec<LfdStore<T>>,
    report: DesignReport,
}

/// Row of the linear map `ρ ↦ D(z_s)` for fixed densities.
struct Row<T> {
    idx: Vec<u32>,
    coef: Vec<T>,
}

impl<T: Real> Row<T> {
    fn apply(&self, v: &[T]) -> T {
        self.idx
            .iter()
            .zip(&self.coef)
            .map(|(i, c)| *c * v[*i as usize])
            .sum()
    }
}

fn transition_row<T: Real>(
    sets: &HypothesisSets<T>,
    rho: &ValueFunction<T>,
    z: &[T],
    q: &[&[T]],
) -> Row<T> {
    let axes = sets.free_axes();
    let weights = sets.grid().weights();
    let m = rho.nodes().len();
    let mut entries: Vec<(u32, T)> = Vec::with_capacity(4 * weights.len());
    for x in 0..weights.len() {
        let q0 = q[0][x];
        if !(q0 > T::zero()) {
            continue;
        }
        let c = weights[x] * q0;
        let (i, w) = rho.locate(z[0] * q[axes[0]][x] / q0);
        if axes.len() == 1 {
            entries.push((i as u32, c * (T::one() - w)));
            entries.push(((i + 1) as u32, c * w));
        } else {
            let (k, v) = rho.locate(z[1] * q[axes[1]][x] / q0);
            let base = i + m * k;
            entries.push((base as u32, c * (T::one() - w) * (T::one() - v)));
            entries.push(((base + 1) as u32, c * w * (T::one() - v)));
            entries.push(((base + m) as u32, c * (T::one() - w) * v));
            entries.push(((base + m + 1) as u32, c * w * v));
        }
    }
    entries.sort_unstable_by_key(|e| e.0);
    let mut row = Row {
        idx: Vec::with_capacity(entries.len()),
        coef: Vec::with_capacity(entries.len()),
    };
    for (i, c) in entries {
        if row.idx.last() == Some(&i) {
            let last = row.coef.last_mut().expect("non-empty");
            *last = *last + c;
        } else {
            row.idx.push(i);
            row.coef.push(c);
        }
    }
    row
}

impl<T: Real> SequentialDesign<T> {
    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn sets(&self) -> &HypothesisSets<T> {
        &self.sets
    }

    pub fn zgrid(&self) -> &ZGrid<T> {
        self.rho.zgrid()
    }

    pub fn rho(&self) -> &ValueFunction<T> {
        &self.rho
    }

    pub fn g(&self) -> &[T] {
        &self.g
    }

    pub fn stop_mask(&self) -> &[bool] {
        &self.stop
    }

    pub fn decisions(&self) -> &[usize] {
        &self.decision
    }

    pub fn report(&self) -> &DesignReport {
        &self.report
    }

    pub fn state_count(&self) -> usize {
        self.g.len()
    }

    /// Free coordinates of state `s`.
    pub fn state_z(&self, s: usize) -> Vec<T> {
        self.rho.state_z(s)
    }

    /// State holding `z = 1` in every coordinate.
    pub fn initial_state(&self) -> usize {
        let c = self.zgrid().len() / 2;
        self.rho
            .state_of([c, if self.rho.dims() == 2 { c } else { 0 }])
    }

    /// Nearest grid state to the free log-coordinates `log_z`.
    pub fn nearest_state(&self, log_z: &[T]) -> usize {
        let i0 = self.zgrid().nearest(log_z[0]);
        let i1 = if self.rho.dims() == 2 {
            self.zgrid().nearest(log_z[1])
        } else {
            0
        };
        self.rho.state_of([i0, i1])
    }

    /// Cached least favorable density of block `k` at state `s`.
    pub fn lfd(&self, k: usize, s: usize) -> &[T] {
        let n = self.sets.grid().len();
        match &self.lfds[k] {
            LfdStore::Fixed(v) => v,
            LfdStore::PerState(v) => &v[s * n..(s + 1) * n],
        }
    }

    pub fn state_lfds(&self, s: usize) -> Vec<Vec<T>> {
        (0..self.lfds.len())
            .map(|k| self.lfd(k, s).to_vec())
            .collect()
    }

    pub fn state_lfd_densities(&self, s: usize) -> Result<Vec<GridDensity<T>>> {
        (0..self.lfds.len())
            .map(|k| GridDensity::from_unnormalized(*self.sets.grid(), self.lfd(k, s).to_vec()))
            .collect()
    }

    /// `D` at state `s` under its cached densities.
    pub fn continuation_value(&self, s: usize) -> T {
        self.sets
            .continuation_value(&self.rho, &self.state_z(s), &self.state_lfds(s))
    }

    /// Grid policy in a serializable form.
    pub fn export(&self) -> PolicyExport {
        let axes = self.sets.free_axes().to_vec();
        let states = (0..self.state_count())
            .map(|s| {
                let full = self.sets.full_z(&self.state_z(s));
                let log_z = |k: usize| full.get(k).map_or(0.0, |z| z.ln().to_f64_lossy());
                PolicyRow {
                    log_z1: log_z(0),
                    log_z2: log_z(1),
                    rho: self.rho.values()[s].to_f64_lossy(),
                    g: self.g[s].to_f64_lossy(),
                    stop: self.stop[s],
                    decision: if self.stop[s] {
                        Some(self.decision[s])
                    } else {
                        None
                    },
                }
            })
            .collect();
        PolicyExport {
            kind: self.kind,
            hypotheses: self.sets.hypotheses(),
            free_axes: axes,
            half_width: self.zgrid().half_width().to_f64_lossy(),
            points_per_axis: self.zgrid().len(),
            lambda: self.lambda.iter().map(|l| l.to_f64_lossy()).collect(),
            report: self.report.clone(),
            states,
        }
    }

    /// Two-threshold test of `p2` against `p1` as a design on one free coordinate
    /// `z = p2/p1`: stop with decision 2 once `log z ≥ log_a`, with decision 1 once
    /// `log z ≤ log_b`. Nearest-state lookup reproduces the thresholds exactly when
    /// they sit halfway between nodes (see [`ZGrid::aligned`]).
    pub fn from_sprt(
        p1: &GridDensity<T>,
        p2: &GridDensity<T>,
        log_a: T,
        log_b: T,
        zgrid: ZGrid<T>,
    ) -> Result<Self> {
        p1.grid().ensure_same(p2.grid())?;
        if !(log_b < T::zero() && T::zero() < log_a) {
            return Err(Error::InvalidParameter(format!(
                "need log_b < 0 < log_a, got {log_b}, {log_a}"
            )));
        }
        let single = |p: &GridDensity<T>| -> Result<UncertaintySet<T>> {
            Ok(UncertaintySet::Band(DensityBand::new(
                p.to_function(),
                p.to_function(),
            )?))
        };
        let sets = HypothesisSets::new(&[single(p1)?, single(p1)?, single(p2)?])?;
        let m = zgrid.len();
        let lambda = vec![T::one(); 2];
        let mut g = Vec::with_capacity(m);
        let mut stop = Vec::with_capacity(m);
        let mut decision = Vec::with_capacity(m);
        for j in 0..m {
            let lz = zgrid.log_node(j);
            g.push(stopping_cost(&sets.full_z(&[zgrid.node(j)]), &lambda).0);
            stop.push(lz >= log_a || lz <= log_b);
            decision.push(if lz >= log_a { 2 } else { 1 });
        }
        let rho = ValueFunction::new(zgrid, 1, g.clone())?;
        let lfds = sets
            .initial_densities()
            .into_iter()
            .map(LfdStore::Fixed)
            .collect();
        Ok(Self {
            kind: DesignKind::Sprt,
            lambda,
            sets,
            rho,
            g,
            stop,
            decision,
            lfds,
            report: DesignReport::default(),
        })
    }
}

impl<T: Real> ZGrid<T> {
    /// Grid with `m` points on which `±log_a` fall exactly halfway between nodes,
    /// with `log_a` about half way out.
    pub fn aligned(log_a: T, m: usize) -> Result<Self> {
        if !(log_a > T::zero()) || m < Self::MIN_POINTS || m.is_multiple_of(2) {
            return Err(Error::InvalidGrid(
                "aligned grid needs log_a > 0 and odd m ≥ 25".into(),
            ));
        }
        let k = (m - 1) / 4;
        let h = log_a / (T::from_usize_lossy(k) + T::c(0.5));
        ZGrid::new(h * T::from_usize_lossy((m - 1) / 2), m)
    }
}

/// One state of the exported policy plane. `log_z1`, `log_z2` are the log-LRs of
/// hypotheses 1 and 2 (0 where the coordinate is fixed at 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub log_z1: f64,
    pub log_z2: f64,
    pub rho: f64,
    pub g: f64,
    pub stop: bool,
    pub decision: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyExport {
    pub kind: DesignKind,
    pub hypotheses: usize,
    pub free_axes: Vec<usize>,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub lambda: Vec<f64>,
    pub report: DesignReport,
    pub states: Vec<PolicyRow>,
}

/// Minimax sequential test for the sets `sets[0]` (run length) and `sets[1..]`
/// (hypotheses) with decision-error weights `lambda`.
///
/// Alternates an LFD pass (every state maximizes `D` for the current `ρ`) with value
/// iteration `ρ ← min{g, 1 + D}` from `ρ = g` under the fixed densities, until `ρ`
/// moves by less than `tol` over an alternation.
pub fn design<T: Real>(
    sets: &[UncertaintySet<T>],
    lambda: &[T],
    zgrid: ZGrid<T>,
    opts: &DesignOptions<T>,
) -> Result<SequentialDesign<T>> {
    let model = HypothesisSets::new(sets)?;
    let k = model.hypotheses();
    if lambda.len() != k || lambda.iter().any(|l| !(*l > T::zero() && l.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "need {k} positive finite weights"
        )));
    }
    let dims = model.free_axes().len();
    let m = zgrid.len();
    let states = m.pow(dims as u32);
    let mut rho = ValueFunction::new(zgrid, dims, vec![T::zero(); states])?;
    let zs: Vec<Vec<T>> = (0..states).map(|s| rho.state_z(s)).collect();
    let (g, decision): (Vec<T>, Vec<usize>) = zs
        .iter()
        .map(|z| stopping_cost(&model.full_z(z), lambda))
        .unzip();
    rho = ValueFunction::new(zgrid, dims, g.clone())?;

    let n = model.grid().len();
    let blocks = k + 1;
    let per_state: Vec<bool> = (0..blocks).map(|b| !model.is_fixed(b)).collect();
    let init = model.initial_densities();
    // working storage: per state the full tuple (fixed blocks are shared)
    let mut q: Vec<Vec<Vec<T>>> = vec![init.clone(); states];
    let mut mus: Vec<Vec<T>> = vec![vec![T::nan(); blocks]; states];
    let mut converged = vec![true; states];
    let mut cycles = vec![0usize; states];
    let mut report = DesignReport::default();
    let mut rows: Vec<Row<T>>;

    loop {
        report.alternations += 1;
        if report.alternations > opts.max_alternations {
            return Err(Error::NoConvergence {
                iterations: opts.max_alternations,
                residual: f64::NAN,
            });
        }
        let first = report.alternations == 1;
        let current = &rho;
        let g_ref = &g;
        let solved: Vec<Option<_>> = (0..states)
            .into_par_iter()
            .map(|s| {
                if !first {
                    // stops regardless: the maximal D is at least the cached one
                    let cached = model.continuation_value(current, &zs[s], &q[s]);
                    if T::one() + cached >= g_ref[s] + opts.tol {
                        return None;
                    }
                }
                let warm = if first {
                    None
                } else {
                    Some((&q[s][..], &mus[s][..]))
                };
                Some(model.solve_state(current, &zs[s], warm, &opts.lfd))
            })
            .collect();
        for (s, sol) in solved.into_iter().enumerate() {
            if let Some(sol) = sol {
                report.lfd_solves += 1;
                converged[s] = sol.converged;
                cycles[s] = sol.cycles;
                q[s] = sol.densities;
                mus[s] = sol.multipliers;
            }
        }
        rows = (0..states)
            .into_par_iter()
            .map(|s| {
                let refs: Vec<&[T]> = q[s].iter().map(|v| &v[..]).collect();
                transition_row(&model, &rho, &zs[s], &refs)
            })
            .collect();

        // value iteration from g under fixed densities: monotone non-increasing
        let mut v = g.clone();
        loop {
            report.sweeps += 1;
            if report.sweeps > opts.max_sweeps {
                return Err(Error::NoConvergence {
                    iterations: opts.max_sweeps,
                    residual: f64::NAN,
                });
            }
            let next: Vec<T> = (0..states)
                .into_par_iter()
                .map(|s| g[s].min(T::one() + rows[s].apply(&v)))
                .collect();
            let mut delta = T::zero();
            for s in 0..states {
                if next[s] > v[s] + opts.tol {
                    return Err(Error::Numeric(format!(
                        "value iteration increased ρ at state {s} by {:e}",
                        (next[s] - v[s]).to_f64_lossy()
                    )));
                }
                delta = delta.max((next[s] - v[s]).abs());
            }
            v = next;
            if delta < opts.tol {
                break;
            }
        }
        let change = v
            .iter()
            .zip(rho.values())
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        rho = ValueFunction::new(zgrid, dims, v)?;
        if change < opts.tol {
            break;
        }
    }

    // final exact split into stop (ρ = g) and continue (ρ = 1 + D) states
    let d: Vec<T> = (0..states)
        .into_par_iter()
        .map(|s| rows[s].apply(rho.values()))
        .collect();
    let mut stop = vec![false; states];
    let mut values = rho.values().to_vec();
    for s in 0..states {
        stop[s] = g[s] <= T::one() + d[s];
        values[s] = if stop[s] { g[s] } else { T::one() + d[s] };
    }
    let rho = ValueFunction::new(zgrid, dims, values)?;
    report.unconverged_states = (0..states).filter(|&s| !stop[s] && !converged[s]).count();
    report.max_lfd_cycles = cycles.iter().copied().max().unwrap_or(0);

    let lfds = (0..blocks)
        .map(|b| {
            if per_state[b] {
                let mut flat = Vec::with_capacity(states * n);
                for qs in &q {
                    flat.extend_from_slice(&qs[b]);
                }
                LfdStore::PerState(flat)
            } else {
                LfdStore::Fixed(init[b].clone())
            }
        })
        .collect();
    Ok(SequentialDesign {
        kind: DesignKind::Minimax,
        lambda: lambda.to_vec(),
        sets: model,
        rho,
        g,
        stop,
        decision,
        lfds,
        report,
    })
}

/// Wald's thresholds `(log A, log B)` with `A = (1−β)/α`, `B = β/(1−α)`; overshoot
/// is ignored, so realized errors are typically below `(α, β)`.
pub fn design_sprt<T: Real>(
    p0: &GridDensity<T>,
    p1: &GridDensity<T>,
    alpha: T,
    beta: T,
) -> Result<(T, T)> {
    p0.grid().ensure_same(p1.grid())?;
    let half = T::c(0.5);
    if !(alpha > T::zero() && alpha < half && beta > T::zero() && beta < half) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < α, β < 0.5, got {alpha}, {beta}"
        )));
    }
    Ok((
        ((T::one() - beta) / alpha).ln(),
        (beta / (T::one() - alpha)).ln(),
    ))
}
