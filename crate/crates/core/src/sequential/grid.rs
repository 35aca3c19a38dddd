use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Log-spaced likelihood-ratio axis: nodes `zⱼ = exp(−L + j·2L/(m−1))`, `j < m`,
/// shared by every free coordinate of the state space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZGrid<T> {
    half_width: T,
    m: usize,
}

impl<T: Real> ZGrid<T> {
    pub const MIN_POINTS: usize = 25;

    pub fn new(half_width: T, m: usize) -> Result<Self> {
        if !(half_width > T::zero() && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "L must be positive and finite, got {half_width}"
            )));
        }
        if m < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need m ≥ {}, got {m}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { half_width, m })
    }

    /// `L = 15`, `m = 151`.
    pub fn default_grid() -> Self {
        Self {
            half_width: T::c(15.0),
            m: 151,
        }
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing in log z.
    pub fn step(&self) -> T {
        T::c(2.0) * self.half_width / T::from_usize_lossy(self.m - 1)
    }

    pub fn log_node(&self, j: usize) -> T {
        -self.half_width + T::from_usize_lossy(j) * self.step()
    }

    pub fn node(&self, j: usize) -> T {
        self.log_node(j).exp()
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.m).map(|j| self.node(j)).collect()
    }

    /// Index of the node nearest to `log z` (clamped to the grid).
    pub fn nearest(&self, log_z: T) -> usize {
        if log_z.is_nan() {
            return self.m / 2;
        }
        let pos = ((log_z + self.half_width) / self.step()).round();
        if pos <= T::zero() {
            0
        } else {
            pos.to_usize().unwrap_or(self.m - 1).min(self.m - 1)
        }
    }
}

/// Cell `j` and weight `w` such that `z ≈ (1−w)·zⱼ + w·zⱼ₊₁`: linear in z between
/// log-spaced nodes, extrapolated linearly below the first node (down to z = 0)
/// and clamped above the last.
#[inline]
pub(crate) fn locate<T: Real>(nodes: &[T], log_lo: T, inv_step: T, z: T) -> (usize, T) {
    let m = nodes.len();
    if !(z > nodes[0]) {
        let w = (z - nodes[0]) / (nodes[1] - nodes[0]);
        return (0, if w.is_nan() { T::zero() } else { w });
    }
    if z >= nodes[m - 1] {
        return (m - 2, T::one());
    }
    let pos = (z.ln() - log_lo) * inv_step;
    let mut j = pos.floor().to_usize().unwrap_or(0).min(m - 2);
    // the log estimate can be off by one cell near node values
    while j > 0 && z < nodes[j] {
        j -= 1;
    }
    while j + 2 < m && z >= nodes[j + 1] {
        j += 1;
    }
    (j, (z - nodes[j]) / (nodes[j + 1] - nodes[j]))
}

/// Values on the state grid (one or two free coordinates) with interpolation
/// linear in each z between log-spaced nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction<T> {
    zgrid: ZGrid<T>,
    dims: usize,
    nodes: Vec<T>,
    values: Vec<T>,
    log_lo: T,
    inv_step: T,
}

impl<T: Real> ValueFunction<T> {
    /// `values[i₀ + m·i₁]` for two dimensions.
    pub fn new(zgrid: ZGrid<T>, dims: usize, values: Vec<T>) -> Result<Self> {
        if !(1..=2).contains(&dims) {
            return Err(Error::Unsupported(format!(
                "{dims} free likelihood-ratio coordinates (1 or 2 supported)"
            )));
        }
        let m = zgrid.len();
        if values.len() != m.pow(dims as u32) {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                m.pow(dims as u32),
                values.len()
            )));
        }
        Ok(Self {
            zgrid,
            dims,
            nodes: zgrid.nodes(),
            values,
            log_lo: -zgrid.half_width(),
            inv_step: T::one() / zgrid.step(),
        })
    }

    pub fn zgrid(&self) -> &ZGrid<T> {
        &self.zgrid
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn state_count(&self) -> usize {
        self.values.len()
    }

    /// Node coordinates of state `s`.
    pub fn state_z(&self, s: usize) -> Vec<T> {
        let m = self.zgrid.len();
        match self.dims {
            1 => vec![self.nodes[s]],
            _ => vec![self.nodes[s % m], self.nodes[s / m]],
        }
    }

    /// Multi-index of state `s`.
    pub fn state_index(&self, s: usize) -> [usize; 2] {
        let m = self.zgrid.len();
        if self.dims == 1 {
            [s, 0]
        } else {
            [s % m, s / m]
        }
    }

    pub fn state_of(&self, idx: [usize; 2]) -> usize {
        idx[0] + self.zgrid.len() * idx[1]
    }

    #[inline]
    pub(crate) fn locate(&self, z: T) -> (usize, T) {
        locate(&self.nodes, self.log_lo, self.inv_step, z)
    }

    #[inline]
    fn at(&self, i0: usize, i1: usize) -> T {
        self.values[i0 + self.zgrid.len() * i1]
    }

    /// Interpolated value at `t` (length `dims`, all entries ≥ 0).
    #[inline]
    pub fn eval(&self, t: &[T]) -> T {
        let (i, w) = self.locate(t[0]);
        if self.dims == 1 {
            return self.values[i] + w * (self.values[i + 1] - self.values[i]);
        }
        let (k, v) = self.locate(t[1]);
        self.eval_cell(i, w, k, v)
    }

    #[inline]
    pub(crate) fn eval_cell(&self, i: usize, w: T, k: usize, v: T) -> T {
        let lo = self.at(i, k) + w * (self.at(i + 1, k) - self.at(i, k));
        let hi = self.at(i, k + 1) + w * (self.at(i + 1, k + 1) - self.at(i, k + 1));
        lo + v * (hi - lo)
    }

    /// Slope along `axis` on piece `j` (between nodes j and j+1), at the position
    /// `(k, v)` of the other coordinate. Beyond the last node the slope is 0.
    #[inline]
    pub(crate) fn piece_slope(&self, axis: usize, j: usize, other: (usize, T)) -> T {
        let m = self.zgrid.len();
        if j + 1 >= m {
            return T::zero();
        }
        let dz = self.nodes[j + 1] - self.nodes[j];
        if self.dims == 1 {
            return (self.values[j + 1] - self.values[j]) / dz;
        }
        let (k, v) = other;
        let d = |kk: usize| -> T {
            if axis == 0 {
                self.at(j + 1, kk) - self.at(j, kk)
            } else {
                self.at(kk, j + 1) - self.at(kk, j)
            }
        };
        (d(k) + v * (d(k + 1) - d(k))) / dz
    }

    /// Gradient at `t` using the cell `locate` selects (right-sided at nodes).
    pub fn gradient(&self, t: &[T]) -> Vec<T> {
        let (i, w) = self.locate(t[0]);
        if self.dims == 1 {
            let s = if t[0] >= self.nodes[self.nodes.len() - 1] {
                T::zero()
            } else {
                self.piece_slope(0, i, (0, T::zero()))
            };
            return vec![s];
        }
        let (k, v) = self.locate(t[1]);
        let last = self.nodes[self.nodes.len() - 1];
        let s0 = if t[0] >= last {
            T::zero()
        } else {
            self.piece_slope(0, i, (k, v))
        };
        let s1 = if t[1] >= last {
            T::zero()
        } else {
            self.piece_slope(1, k, (i, w))
        };
        vec![s0, s1]
    }

    /// One-sided derivatives `(left, right)` along `axis` at `t`.
    pub fn one_sided_derivatives(&self, axis: usize, t: &[T]) -> (T, T) {
        let other = if self.dims == 2 {
            Some(self.locate(t[1 - axis]))
        } else {
            None
        };
        let x = t[axis];
        let m = self.nodes.len();
        let piece_at = |j: usize| self.piece_slope(axis, j, other.unwrap_or((0, T::zero())));
        let (j, w) = self.locate(x);
        if x >= self.nodes[m - 1] {
            let left = if x == self.nodes[m - 1] {
                piece_at(m - 2)
            } else {
                T::zero()
            };
            return (left, T::zero());
        }
        // positions within rounding of a node are treated as the node
        let snap = T::tol(1e-9);
        if w <= snap && j > 0 {
            (piece_at(j - 1), piece_at(j))
        } else if w >= T::one() - snap && j + 1 < m {
            (
                piece_at(j),
                if j + 2 < m {
                    piece_at(j + 1)
                } else {
                    T::zero()
                },
            )
        } else {
            (piece_at(j), piece_at(j))
        }
    }
}

/// `g(z) = min_d Σ_{k≠d} λ_k z_k` and the minimizing decision `d` (1-based, ties to the
/// smallest index).
pub fn stopping_cost<T: Real>(z: &[T], lambda: &[T]) -> (T, usize) {
    let total: T = z.iter().zip(lambda).map(|(z, l)| *z * *l).sum();
    let mut best = (T::infinity(), 1);
    for (d, (zd, ld)) in z.iter().zip(lambda).enumerate() {
        let cost = total - *zd * *ld;
        if cost < best.0 {
            best = (cost, d + 1);
        }
    }
    // recompute exactly for the chosen decision to avoid cancellation in `total − λ_d z_d`
    let d = best.1;
    let exact = z
        .iter()
        .zip(lambda)
        .enumerate()
        .filter(|(k, _)| *k + 1 != d)
        .map(|(_, (z, l))| *z * *l)
        .sum();
    (exact, d)
}
