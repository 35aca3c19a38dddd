use crate::density::{Grid, GridDensity};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::uncertainty::UncertaintySet;

use super::grid::ValueFunction;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Block<T> {
    Fixed(Vec<T>),
    /// Upper bounds are capped at `1/w(x)`, which no unit-mass density exceeds.
    Band {
        lower: Vec<T>,
        upper: Vec<T>,
        interior: Vec<T>,
    },
}

impl<T> Block<T> {
    fn bounds(&self) -> Option<(&[T], &[T])> {
        match self {
            Block::Fixed(_) => None,
            Block::Band { lower, upper, .. } => Some((lower, upper)),
        }
    }
}

/// The `K + 1` uncertainty sets of a sequential design in solver form, and the map
/// from free likelihood-ratio coordinates to hypotheses.
///
/// Hypothesis `k` has no coordinate of its own when both `𝒫₀` and `𝒫_k` are the same
/// single density: then `z_k ≡ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSets<T> {
    grid: Grid<T>,
    weights: Vec<T>,
    blocks: Vec<Block<T>>,
    axes: Vec<usize>,
}

/// Per-state least favorable densities `(q₀, …, q_K)` and the attained `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateLfds<T> {
    pub densities: Vec<Vec<T>>,
    /// Normalizer of each block at the last update (NaN for fixed blocks).
    pub multipliers: Vec<T>,
    pub value: T,
    pub cycles: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LfdOptions<T> {
    pub max_cycles: usize,
    /// Sup-norm change of all densities over one cycle.
    pub tol: T,
}

impl<T: Real> Default for LfdOptions<T> {
    fn default() -> Self {
        Self {
            max_cycles: 200,
            tol: T::tol(1e-6),
        }
    }
}

impl<T: Real> HypothesisSets<T> {
    /// `sets[0]` is the run-length set, `sets[k]` belongs to hypothesis `k`.
    /// At most two hypotheses may carry free coordinates.
    pub fn new(sets: &[UncertaintySet<T>]) -> Result<Self> {
        if sets.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 sets (run-length set and one hypothesis), got {}",
                sets.len()
            )));
        }
        let grid = *sets[0].grid();
        let weights = grid.weights();
        let mut blocks = Vec::with_capacity(sets.len());
        for set in sets {
            set.grid().ensure_same(&grid)?;
            if matches!(set, UncertaintySet::Ball(_)) {
                return Err(Error::Unsupported(
                    "f-divergence balls in sequential designs; convert to the equivalent band first".into(),
                ));
            }
            let band = set.to_band()?;
            let tol = T::mass_tol();
            let block = if let Some(p) = band.degenerate() {
                Block::Fixed(p.into_values())
            } else if (band.upper_mass() - T::one()).abs() <= tol {
                Block::Fixed(
                    GridDensity::from_unnormalized(grid, band.upper().to_vec())?.into_values(),
                )
            } else {
                let upper = band
                    .upper()
                    .iter()
                    .zip(&weights)
                    .map(|(u, w)| u.min(T::one() / *w))
                    .collect();
                Block::Band {
                    lower: band.lower().to_vec(),
                    upper,
                    interior: band.interior_density()?.into_values(),
                }
            };
            blocks.push(block);
        }
        let same_as_null = |k: usize| match (&blocks[0], &blocks[k]) {
            (Block::Fixed(a), Block::Fixed(b)) => {
                let scale = a.iter().fold(T::zero(), |m, v| m.max(*v));
                a.iter()
                    .zip(b)
                    .all(|(x, y)| (*x - *y).abs() <= T::tol(1e-12) * scale.max(T::one()))
            }
            _ => false,
        };
        let mut axes: Vec<usize> = (1..sets.len()).filter(|&k| !same_as_null(k)).collect();
        if axes.is_empty() {
            // every hypothesis coincides with the run-length density; keep one (inert) axis
            axes.push(1);
        }
        if axes.len() > 2 {
            return Err(Error::Unsupported(format!(
                "{} free likelihood-ratio coordinates (at most 2 supported)",
                axes.len()
            )));
        }
        Ok(Self {
            grid,
            weights,
            blocks,
            axes,
        })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Number of hypotheses `K`.
    pub fn hypotheses(&self) -> usize {
        self.blocks.len() - 1
    }

    /// Hypothesis index (1-based) of each free coordinate.
    pub fn free_axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn is_fixed(&self, k: usize) -> bool {
        matches!(self.blocks[k], Block::Fixed(_))
    }

    /// Bounds `(lower, upper)` of block `k`, `None` for a single density.
    pub fn bounds(&self, k: usize) -> Option<(&[T], &[T])> {
        self.blocks[k].bounds()
    }

    /// Full K-vector `z` from the free coordinates `t`.
    pub fn full_z(&self, t: &[T]) -> Vec<T> {
        let mut z = vec![T::one(); self.hypotheses()];
        for (a, k) in self.axes.iter().enumerate() {
            z[k - 1] = t[a];
        }
        z
    }

    /// Free coordinates of a full K-vector.
    pub fn free_z(&self, z: &[T]) -> Vec<T> {
        self.axes.iter().map(|k| z[k - 1]).collect()
    }

    /// A feasible starting tuple.
    pub fn initial_densities(&self) -> Vec<Vec<T>> {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Fixed(p) => p.clone(),
                Block::Band { interior, .. } => interior.clone(),
            })
            .collect()
    }

    /// `D(z) = Σ_x w(x) q₀(x) ρ(z·q(x)/q₀(x))` over free coordinates `z`. Points
    /// with `q₀ = 0` contribute nothing (ρ is bounded).
    pub fn continuation_value(&self, rho: &ValueFunction<T>, z: &[T], q: &[Vec<T>]) -> T {
        let mut t = [T::zero(); 2];
        let dims = self.axes.len();
        let mut acc = T::zero();
        for x in 0..self.grid.len() {
            let q0 = q[0][x];
            if q0 > T::zero() {
                for a in 0..dims {
                    t[a] = z[a] * q[self.axes[a]][x] / q0;
                }
                acc = acc + self.weights[x] * q0 * rho.eval(&t[..dims]);
            }
        }
        acc
    }

    /// Maximizes `D` over the product of the sets by cyclic block ascent.
    pub fn solve_state(
        &self,
        rho: &ValueFunction<T>,
        z: &[T],
        warm: Option<(&[Vec<T>], &[T])>,
        opts: &LfdOptions<T>,
    ) -> StateLfds<T> {
        let (mut q, mut mus) = match warm {
            Some((q, m)) => (q.to_vec(), m.to_vec()),
            None => (self.initial_densities(), vec![T::nan(); self.blocks.len()]),
        };
        let mut converged = false;
        let mut cycles = 0;
        let mut value = self.continuation_value(rho, z, &q);
        while cycles < opts.max_cycles {
            cycles += 1;
            let prev = q.clone();
            if let Block::Band { lower, upper, .. } = &self.blocks[0] {
                mus[0] = self.update_null(rho, z, &mut q, lower, upper);
            }
            for a in 0..self.axes.len() {
                let k = self.axes[a];
                if let Block::Band { lower, upper, .. } = &self.blocks[k] {
                    mus[k] = self.update_hypothesis(rho, z, a, &mut q, lower, upper, mus[k]);
                }
            }
            let change = q
                .iter()
                .zip(&prev)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (*x - *y).abs()))
                .fold(T::zero(), T::max);
            let next = self.continuation_value(rho, z, &q);
            // Maximizers need not be unique (ρ is piecewise linear): a cycle without
            // any gain is a block-wise optimum even if the densities still move.
            let stalled = next - value <= T::tol(1e-13) * value.abs().max(T::one());
            value = next;
            if change < opts.tol || stalled {
                converged = true;
                break;
            }
        }
        StateLfds {
            densities: q,
            multipliers: mus,
            value,
            cycles,
            converged,
        }
    }

    /// Exact maximization over `q_k` (k = axes[a]) with the others fixed. Per point the
    /// objective is `q₀ ρ(…, z_k q_k/q₀, …)`, concave piecewise linear in `q_k`; the
    /// optimum puts every `z_k q_k/q₀` at a kink where the slope crosses a common `μ`,
    /// clipped to the band, with `μ` fixed by the unit mass.
    #[allow(clippy::too_many_arguments)]
    fn update_hypothesis(
        &self,
        rho: &ValueFunction<T>,
        z: &[T],
        a: usize,
        q: &mut [Vec<T>],
        lower: &[T],
        upper: &[T],
        warm_mu: T,
    ) -> T {
        let k = self.axes[a];
        let n = self.grid.len();
        let dims = self.axes.len();
        let m = rho.nodes().len();
        let nodes = rho.nodes();
        // per point: (q₀/z_k, position of the other coordinate) or None where q₀ = 0
        let ctx: Vec<Option<(T, (usize, T))>> = (0..n)
            .map(|x| {
                let q0 = q[0][x];
                if q0 > T::zero() {
                    let other = if dims == 2 {
                        let o = 1 - a;
                        rho.locate(z[o] * q[self.axes[o]][x] / q0)
                    } else {
                        (0, T::zero())
                    };
                    Some((q0 / z[a], other))
                } else {
                    None
                }
            })
            .collect();
        let slope = |j: usize, other: (usize, T)| rho.piece_slope(a, j, other);
        // smallest / largest maximizer of ρ(t) − μt along the axis
        let t_minus = |other: (usize, T), mu: T| -> T {
            if slope(0, other) <= mu {
                return T::zero();
            }
            let (mut lo, mut hi) = (1, m - 1);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if slope(mid, other) <= mu {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            nodes[lo]
        };
        let t_plus = |other: (usize, T), mu: T| -> T {
            if mu <= T::zero() {
                return T::infinity();
            }
            if slope(0, other) < mu {
                return T::zero();
            }
            let (mut lo, mut hi) = (1, m - 1);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if slope(mid - 1, other) >= mu {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            nodes[lo]
        };
        let value_at = |x: usize, mu: T, plus: bool| -> T {
            match ctx[x] {
                None => lower[x],
                Some((scale, other)) => {
                    let t = if plus {
                        t_plus(other, mu)
                    } else {
                        t_minus(other, mu)
                    };
                    let v = if t.is_infinite() { upper[x] } else { t * scale };
                    v.max(lower[x]).min(upper[x])
                }
            }
        };
        let mass = |mu: T, plus: bool| -> T {
            (0..n)
                .map(|x| self.weights[x] * value_at(x, mu, plus))
                .sum()
        };
        let fill =
            |mu: T, plus: bool| -> Vec<T> { (0..n).map(|x| value_at(x, mu, plus)).collect() };
        let one = T::one();
        let result = solve_normalizer(warm_mu, |mu| {
            let lo = mass(mu, false);
            if lo > one {
                return Side::Low;
            }
            let hi = mass(mu, true);
            if hi < one {
                Side::High
            } else {
                Side::Exact(lo, hi)
            }
        });
        let (mu, qa, ma, qb, mb) = match result {
            Normalizer::Exact(mu, lo, hi) => (mu, fill(mu, true), hi, fill(mu, false), lo),
            Normalizer::Bracket(lo, hi) => {
                let (qa, qb) = (fill(lo, false), fill(hi, true));
                let (ma, mb) = (self.grid_mass(&qa), self.grid_mass(&qb));
                ((lo * hi).sqrt(), qa, ma, qb, mb)
            }
            Normalizer::Zero(mu_min) => {
                let qb = fill(mu_min, true);
                let mb = self.grid_mass(&qb);
                (T::zero(), upper.to_vec(), self.grid_mass(upper), qb, mb)
            }
        };
        q[k] = mix(&qa, ma, &qb, mb);
        mu
    }

    /// Maximization over `q₀`: per point `q₀ ρ(v/q₀) − ν q₀` is concave with derivative
    /// `ρ(t) − t·∇ρ(t) − ν`, `t = v/q₀`, decreasing in `q₀`.
    fn update_null(
        &self,
        rho: &ValueFunction<T>,
        z: &[T],
        q: &mut [Vec<T>],
        lower: &[T],
        upper: &[T],
    ) -> T {
        let n = self.grid.len();
        let dims = self.axes.len();
        let v: Vec<[T; 2]> = (0..n)
            .map(|x| {
                let mut v = [T::zero(); 2];
                for a in 0..dims {
                    v[a] = z[a] * q[self.axes[a]][x];
                }
                v
            })
            .collect();
        let intercept = |x: usize, q0: T| -> T {
            let mut t = [T::zero(); 2];
            for a in 0..dims {
                t[a] = v[x][a] / q0;
            }
            let grad = rho.gradient(&t[..dims]);
            rho.eval(&t[..dims]) - (0..dims).map(|a| t[a] * grad[a]).sum::<T>()
        };
        let floor = |x: usize| lower[x].max(upper[x] * T::c(1e-14));
        let solve_x = |x: usize, nu: T| -> T {
            let (mut lo, mut hi) = (floor(x), upper[x]);
            if intercept(x, hi) >= nu {
                return upper[x];
            }
            if intercept(x, lo) <= nu {
                return lower[x];
            }
            for _ in 0..60 {
                let mid = (lo * hi).sqrt();
                if intercept(x, mid) > nu {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo * hi).sqrt()
        };
        let (mut nu_lo, mut nu_hi) = (T::infinity(), T::neg_infinity());
        for x in 0..n {
            nu_lo = nu_lo.min(intercept(x, upper[x]));
            nu_hi = nu_hi.max(intercept(x, floor(x)));
        }
        nu_lo = nu_lo - T::one();
        nu_hi = nu_hi + T::one();
        let fill = |nu: T| -> Vec<T> { (0..n).map(|x| solve_x(x, nu)).collect() };
        let mut qa = fill(nu_lo);
        let mut qb = fill(nu_hi);
        let mut ma = self.grid_mass(&qa);
        let mut mb = self.grid_mass(&qb);
        for _ in 0..60 {
            let mid = (nu_lo + nu_hi) * T::c(0.5);
            let qm = fill(mid);
            let mm = self.grid_mass(&qm);
            if mm >= T::one() {
                nu_lo = mid;
                qa = qm;
                ma = mm;
            } else {
                nu_hi = mid;
                qb = qm;
                mb = mm;
            }
        }
        q[0] = mix(&qa, ma, &qb, mb);
        (nu_lo + nu_hi) * T::c(0.5)
    }

    fn grid_mass(&self, v: &[T]) -> T {
        v.iter().zip(&self.weights).map(|(a, w)| *a * *w).sum()
    }

    /// Whether `q` lies in the product of the sets (absolute slack `tol`, unit masses).
    pub fn contains(&self, q: &[Vec<T>], tol: T) -> bool {
        q.len() == self.blocks.len()
            && q.iter().zip(&self.blocks).all(|(qk, b)| {
                (self.grid_mass(qk) - T::one()).abs() <= tol
                    && match b {
                        Block::Fixed(p) => qk.iter().zip(p).all(|(a, b)| (*a - *b).abs() <= tol),
                        Block::Band { lower, upper, .. } => qk
                            .iter()
                            .zip(lower.iter().zip(upper))
                            .all(|(v, (l, u))| *v >= *l - tol && *v <= *u + tol),
                    }
            })
    }
}

/// `θ a + (1−θ) b` with unit mass, given masses `ma ≥ 1 ≥ mb`.
fn mix<T: Real>(a: &[T], ma: T, b: &[T], mb: T) -> Vec<T> {
    let theta = if ma > mb {
        ((T::one() - mb) / (ma - mb)).max(T::zero()).min(T::one())
    } else {
        T::one()
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| theta * *x + (T::one() - theta) * *y)
        .collect()
}

enum Side<T> {
    /// Even the smallest maximizers carry too much mass: `μ` must grow.
    Low,
    High,
    /// Masses of the smallest and largest maximizers bracket 1.
    Exact(T, T),
}

enum Normalizer<T> {
    Exact(T, T, T),
    Bracket(T, T),
    /// Mass is only reached at `μ = 0` (flat value function); carries the smallest `μ` tried.
    Zero(T),
}

/// Bisection in `log μ` on a monotone classification.
fn solve_normalizer<T: Real>(warm: T, classify: impl Fn(T) -> Side<T>) -> Normalizer<T> {
    let start = if warm.is_finite() && warm > T::zero() {
        warm
    } else {
        T::one()
    };
    let (tiny, huge) = (T::min_positive_value().sqrt(), T::max_value().sqrt());
    let step = T::c(8.0);
    let (mut lo, mut hi);
    match classify(start) {
        Side::Exact(a, b) => return Normalizer::Exact(start, a, b),
        Side::Low => {
            lo = start;
            hi = start * step;
            loop {
                match classify(hi) {
                    Side::Exact(a, b) => return Normalizer::Exact(hi, a, b),
                    Side::High => break,
                    Side::Low if hi < huge => {
                        lo = hi;
                        hi = hi * step;
                    }
                    // lower bounds already exceed unit mass; cannot happen for valid sets
                    Side::Low => return Normalizer::Bracket(hi, hi),
                }
            }
        }
        Side::High => {
            hi = start;
            lo = start / step;
            loop {
                match classify(lo) {
                    Side::Exact(a, b) => return Normalizer::Exact(lo, a, b),
                    Side::Low => break,
                    Side::High if lo > tiny => {
                        hi = lo;
                        lo = lo / step;
                    }
                    Side::High => return Normalizer::Zero(lo),
                }
            }
        }
    }
    let rel = T::tol(1e-11);
    for _ in 0..200 {
        if hi / lo - T::one() <= rel {
            break;
        }
        let mid = (lo * hi).sqrt();
        match classify(mid) {
            Side::Exact(a, b) => return Normalizer::Exact(mid, a, b),
            Side::Low => lo = mid,
            Side::High => hi = mid,
        }
    }
    Normalizer::Bracket(lo, hi)
}

/// Least favorable densities of the next sample at the state `z` (full K-vector).
pub fn state_lfds<T: Real>(
    z: &[T],
    rho: &ValueFunction<T>,
    sets: &[UncertaintySet<T>],
) -> Result<StateLfds<T>> {
    let model = HypothesisSets::new(sets)?;
    if z.len() != model.hypotheses() {
        return Err(Error::InvalidParameter(format!(
            "z has {} entries for {} hypotheses",
            z.len(),
            model.hypotheses()
        )));
    }
    if rho.dims() != model.free_axes().len() {
        return Err(Error::InvalidParameter(
            "value function dimension does not match the sets".into(),
        ));
    }
    Ok(model.solve_state(rho, &model.free_z(z), None, &LfdOptions::default()))
}

/// `D(z)` for explicit densities `q = (q₀, …, q_K)`; `z` is the full K-vector.
pub fn continuation_value<T: Real>(
    z: &[T],
    rho: &ValueFunction<T>,
    sets: &HypothesisSets<T>,
    q: &[GridDensity<T>],
) -> Result<T> {
    if q.len() != sets.hypotheses() + 1 || z.len() != sets.hypotheses() {
        return Err(Error::InvalidParameter(
            "need K+1 densities and a K-vector z".into(),
        ));
    }
    for p in q {
        p.grid().ensure_same(sets.grid())?;
    }
    let values: Vec<Vec<T>> = q.iter().map(|p| p.values().to_vec()).collect();
    Ok(sets.continuation_value(rho, &sets.free_z(z), &values))
}
