use rayon::prelude::*;

use crate::density::{GridDensity, GridFunction};
use crate::error::{Error, Result};
use crate::lfd::RegionLabel;
use crate::scalar::Real;

/// Histogram resolution used when none is given.
pub const DEFAULT_BINS: usize = 2048;
/// Above this many atoms a convolution absorbs the lightest ones into the histogram.
pub const ATOM_CAP: usize = 4096;
/// Histograms longer than this are coarsened by merging neighbouring bins.
pub const BIN_CAP: usize = 8192;

/// Distribution of a log-likelihood-ratio statistic: point masses plus a histogram
/// whose mass is spread uniformly within each bin.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrDistribution<T> {
    /// `(value, mass)`, sorted by value, values distinct.
    atoms: Vec<(T, T)>,
    origin: T,
    width: T,
    bins: Vec<T>,
    approximate: bool,
}

pub(crate) fn same_value<T: Real>(a: T, b: T) -> bool {
    if a == b {
        return true;
    }
    if a.is_infinite() || b.is_infinite() {
        return false;
    }
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= T::c(1e-12) * scale
}

/// Sorts and merges atoms with (relatively) equal values; drops empty ones.
fn normalize_atoms<T: Real>(mut atoms: Vec<(T, T)>) -> Vec<(T, T)> {
    atoms.retain(|a| a.1 > T::zero());
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("atom values are not NaN"));
    let mut out: Vec<(T, T)> = Vec::with_capacity(atoms.len());
    for (v, m) in atoms {
        match out.last_mut() {
            Some(last) if same_value(last.0, v) => last.1 = last.1 + m,
            _ => out.push((v, m)),
        }
    }
    out
}

impl<T: Real> LlrDistribution<T> {
    /// Validates masses and the unit total (to 1e-8 in double precision).
    pub fn new(atoms: Vec<(T, T)>, origin: T, width: T, bins: Vec<T>) -> Result<Self> {
        if atoms
            .iter()
            .any(|(v, m)| v.is_nan() || !(m.is_finite() && *m >= T::zero()))
        {
            return Err(Error::InvalidParameter(
                "atoms need a value and a finite non-negative mass".into(),
            ));
        }
        if bins.iter().any(|m| !(m.is_finite() && *m >= T::zero())) {
            return Err(Error::InvalidParameter(
                "bin masses must be finite and non-negative".into(),
            ));
        }
        if !bins.is_empty() && !(width > T::zero() && width.is_finite() && origin.is_finite()) {
            return Err(Error::InvalidParameter(
                "bin grid needs a finite origin and positive width".into(),
            ));
        }
        let d = Self {
            atoms: normalize_atoms(atoms),
            origin,
            width,
            bins,
            approximate: false,
        };
        let total = d.total_mass();
        if (total - T::one()).abs() > T::mass_tol() {
            return Err(Error::InvalidParameter(format!(
                "total mass {total} is not 1"
            )));
        }
        Ok(d)
    }

    pub fn point_mass(v: T) -> Self {
        Self {
            atoms: vec![(v, T::one())],
            origin: T::zero(),
            width: T::one(),
            bins: Vec::new(),
            approximate: false,
        }
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn bins(&self) -> &[T] {
        &self.bins
    }

    pub fn origin(&self) -> T {
        self.origin
    }

    pub fn width(&self) -> T {
        self.width
    }

    /// Left edge of bin `k` (`k = bins().len()` gives the right end).
    pub fn bin_edge(&self, k: usize) -> T {
        self.origin + T::from_usize_lossy(k) * self.width
    }

    /// Set when the atom cap forced atoms into the histogram.
    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    pub fn total_mass(&self) -> T {
        self.atoms.iter().map(|a| a.1).sum::<T>() + self.bins.iter().copied().sum::<T>()
    }

    /// Mass of the atom at `t` (zero if none).
    pub fn mass_at(&self, t: T) -> T {
        self.atoms
            .iter()
            .find(|a| same_value(a.0, t))
            .map_or(T::zero(), |a| a.1)
    }

    /// `P(X > t)`, excluding an atom at `t`.
    pub fn mass_above(&self, t: T) -> T {
        let atoms: T = self
            .atoms
            .iter()
            .filter(|a| a.0 > t && !same_value(a.0, t))
            .map(|a| a.1)
            .sum();
        atoms + self.bins_above(t)
    }

    /// `P(X < t)`, excluding an atom at `t`.
    pub fn mass_below(&self, t: T) -> T {
        let atoms: T = self
            .atoms
            .iter()
            .filter(|a| a.0 < t && !same_value(a.0, t))
            .map(|a| a.1)
            .sum();
        let bins: T = self.bins.iter().copied().sum();
        atoms + bins - self.bins_above(t)
    }

    fn bins_above(&self, t: T) -> T {
        if self.bins.is_empty() {
            return T::zero();
        }
        let pos = (t - self.origin) / self.width;
        if pos <= T::zero() {
            return self.bins.iter().copied().sum();
        }
        let n = self.bins.len();
        if pos >= T::from_usize_lossy(n) {
            return T::zero();
        }
        let k = pos.floor().to_usize().unwrap_or(0).min(n - 1);
        let frac = pos - T::from_usize_lossy(k);
        self.bins[k + 1..].iter().copied().sum::<T>() + (T::one() - frac) * self.bins[k]
    }

    /// Mean, with bins represented by their centres.
    pub fn mean(&self) -> T {
        let half = T::c(0.5);
        self.atoms.iter().map(|(v, m)| *v * *m).sum::<T>()
            + self
                .bins
                .iter()
                .enumerate()
                .map(|(k, m)| *m * (self.bin_edge(k) + half * self.width))
                .sum::<T>()
    }

    /// Variance, including the `w²/12` spread within each bin.
    pub fn variance(&self) -> T {
        let mu = self.mean();
        let half = T::c(0.5);
        let within = self.width * self.width / T::c(12.0);
        self.atoms
            .iter()
            .map(|(v, m)| *m * (*v - mu).powi(2))
            .sum::<T>()
            + self
                .bins
                .iter()
                .enumerate()
                .map(|(k, m)| *m * ((self.bin_edge(k) + half * self.width - mu).powi(2) + within))
                .sum::<T>()
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self
            .atoms
            .iter()
            .chain(&other.atoms)
            .any(|a| a.0.is_infinite())
            && self
                .atoms
                .iter()
                .chain(&other.atoms)
                .any(|a| a.0 == T::infinity())
            && self
                .atoms
                .iter()
                .chain(&other.atoms)
                .any(|a| a.0 == T::neg_infinity())
        {
            return Err(Error::Unsupported(
                "cannot add statistics with atoms at both +∞ and −∞".into(),
            ));
        }
        let (a, b) = match (self.bins.is_empty(), other.bins.is_empty()) {
            (false, false) => {
                let w = self.width.max(other.width);
                (self.coarsened_to(w), other.coarsened_to(w))
            }
            _ => (self.clone(), other.clone()),
        };
        let width = if a.bins.is_empty() { b.width } else { a.width };

        let mut atoms = Vec::with_capacity(a.atoms.len() * b.atoms.len());
        for (va, ma) in &a.atoms {
            for (vb, mb) in &b.atoms {
                atoms.push((*va + *vb, *ma * *mb));
            }
        }
        let mut atoms = normalize_atoms(atoms);

        let mut hist = Histogram::empty(width);
        if !a.bins.is_empty() && !b.bins.is_empty() {
            // uniform ⊛ uniform is a triangle over two bins; split it evenly
            let c = direct_convolution(&a.bins, &b.bins);
            let half = T::c(0.5);
            let mut r = vec![T::zero(); a.bins.len() + b.bins.len()];
            for (k, v) in c.iter().enumerate() {
                r[k] = r[k] + half * *v;
                r[k + 1] = r[k + 1] + half * *v;
            }
            hist.add_aligned(a.origin + b.origin, &r);
        }
        for (x, y) in [(&a, &b), (&b, &a)] {
            if x.bins.is_empty() {
                continue;
            }
            for (v, m) in &y.atoms {
                if v.is_infinite() {
                    // the whole histogram is carried to ±∞
                    let s: T = x.bins.iter().copied().sum();
                    atoms.push((*v, *m * s));
                    continue;
                }
                hist.add_shifted(x.origin + *v, &x.bins, *m);
            }
        }
        let mut approximate = a.approximate || b.approximate;
        atoms = normalize_atoms(atoms);
        if atoms.len() > ATOM_CAP {
            approximate = true;
            atoms = hist.absorb_lightest(atoms, ATOM_CAP);
        }
        let (origin, bins) = hist.finish();
        let mut out = Self {
            atoms,
            origin,
            width: hist.width,
            bins,
            approximate,
        };
        while out.bins.len() > BIN_CAP {
            out = out.coarsened_to(out.width * T::c(2.0));
        }
        Ok(out)
    }

    /// `n`-fold self-convolution by repeated squaring.
    pub fn convolve_n(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be ≥ 1".into()));
        }
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut k = n;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.convolve(&base)?,
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.convolve(&base)?;
        }
        Ok(result.expect("n ≥ 1"))
    }

    /// Re-bins the histogram onto width `w ≥ width`, keeping the origin.
    fn coarsened_to(&self, w: T) -> Self {
        if self.bins.is_empty() || w <= self.width {
            return self.clone();
        }
        let mut bins = self.bins_rescaled(w);
        while bins.last().is_some_and(|m| *m == T::zero()) {
            bins.pop();
        }
        Self {
            atoms: self.atoms.clone(),
            origin: self.origin,
            width: w,
            bins,
            approximate: self.approximate,
        }
    }

    /// Bins re-expressed on width `w` starting at the same origin (exact for integer ratios).
    fn bins_rescaled(&self, w: T) -> Vec<T> {
        let ratio = w / self.width;
        let r = ratio.round();
        if (ratio - r).abs() <= T::c(1e-9) * r && r >= T::one() {
            let r = r.to_usize().unwrap_or(1);
            return self
                .bins
                .chunks(r)
                .map(|c| c.iter().copied().sum())
                .collect();
        }
        // general ratio: split each fine bin proportionally over the coarse ones
        let n = ((T::from_usize_lossy(self.bins.len()) * self.width / w)
            .ceil()
            .to_usize()
            .unwrap_or(0))
            + 1;
        let mut out = vec![T::zero(); n];
        for (k, m) in self.bins.iter().enumerate() {
            let lo = T::from_usize_lossy(k) * self.width / w;
            let hi = T::from_usize_lossy(k + 1) * self.width / w;
            let mut x = lo;
            while x < hi {
                let j = x.floor().to_usize().unwrap_or(0).min(n - 1);
                let end = T::from_usize_lossy(j + 1).min(hi);
                out[j] = out[j] + *m * (end - x) / (hi - lo);
                x = end;
            }
        }
        out
    }
}

fn direct_convolution<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len() + b.len() - 1;
    // all terms are non-negative, so tail probabilities keep their relative accuracy
    (0..n)
        .into_par_iter()
        .with_min_len(256)
        .map(|k| {
            let lo = k.saturating_sub(b.len() - 1);
            let hi = k.min(a.len() - 1);
            (lo..=hi).map(|i| a[i] * b[k - i]).sum()
        })
        .collect()
}

/// Histogram on a fixed width that grows to cover whatever is deposited.
struct Histogram<T> {
    width: T,
    origin: Option<T>,
    bins: Vec<T>,
}

impl<T: Real> Histogram<T> {
    fn empty(width: T) -> Self {
        Self {
            width,
            origin: None,
            bins: Vec::new(),
        }
    }

    /// Makes bins `[start, start + len)` (in bin units relative to the origin) addressable;
    /// returns the offset of `start` in the vector.
    fn reserve(&mut self, start: T, len: usize) -> (usize, T) {
        let origin = *self.origin.get_or_insert(start);
        let mut pos = (start - origin) / self.width;
        if pos < T::zero() {
            let shift = (-pos).ceil().to_usize().unwrap_or(0);
            let mut grown = vec![T::zero(); shift];
            grown.append(&mut self.bins);
            self.bins = grown;
            self.origin = Some(origin - T::from_usize_lossy(shift) * self.width);
            pos = pos + T::from_usize_lossy(shift);
        }
        let j = pos.floor().to_usize().unwrap_or(0);
        let frac = pos - T::from_usize_lossy(j);
        let need = j + len + 1;
        if self.bins.len() < need {
            self.bins.resize(need, T::zero());
        }
        (j, frac)
    }

    /// Adds `r` whose first bin starts at `start`, assumed aligned with this grid.
    fn add_aligned(&mut self, start: T, r: &[T]) {
        let (j, frac) = self.reserve(start, r.len());
        if frac > T::c(1e-9) && frac < T::one() - T::c(1e-9) {
            return self.add_shifted(start, r, T::one());
        }
        let j = if frac >= T::one() - T::c(1e-9) {
            j + 1
        } else {
            j
        };
        for (k, v) in r.iter().enumerate() {
            self.bins[j + k] = self.bins[j + k] + *v;
        }
    }

    /// Adds `scale·r` whose first bin starts at `start`; each bin is split between the two
    /// bins of this grid it overlaps.
    fn add_shifted(&mut self, start: T, r: &[T], scale: T) {
        let (j, frac) = self.reserve(start, r.len());
        let keep = T::one() - frac;
        for (k, v) in r.iter().enumerate() {
            let m = scale * *v;
            self.bins[j + k] = self.bins[j + k] + keep * m;
            self.bins[j + k + 1] = self.bins[j + k + 1] + frac * m;
        }
    }

    /// Spreads a point mass uniformly over the bin containing `v`.
    fn add_point(&mut self, v: T, m: T) {
        let (j, _) = self.reserve(v, 0);
        self.bins[j] = self.bins[j] + m;
    }

    /// Keeps the `cap` heaviest atoms and bins the rest.
    fn absorb_lightest(&mut self, mut atoms: Vec<(T, T)>, cap: usize) -> Vec<(T, T)> {
        if self.origin.is_none() {
            let lo = atoms.first().map_or(T::zero(), |a| a.0);
            let hi = atoms.last().map_or(T::zero(), |a| a.0);
            self.width = ((hi - lo) / T::from_usize_lossy(cap)).max(T::c(1e-12));
        }
        atoms.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("masses are not NaN"));
        let light = atoms.split_off(cap);
        for (v, m) in light {
            if v.is_finite() {
                self.add_point(v, m);
            } else {
                // infinite atoms are never absorbed
                atoms.push((v, m));
            }
        }
        normalize_atoms(atoms)
    }

    fn finish(&mut self) -> (T, Vec<T>) {
        let mut bins = std::mem::take(&mut self.bins);
        let mut origin = self.origin.unwrap_or(T::zero());
        let first = bins.iter().position(|m| *m > T::zero());
        match first {
            None => (origin, Vec::new()),
            Some(f) => {
                let last = bins
                    .iter()
                    .rposition(|m| *m > T::zero())
                    .expect("has a positive bin");
                bins.truncate(last + 1);
                bins.drain(..f);
                origin = origin + T::from_usize_lossy(f) * self.width;
                (origin, bins)
            }
        }
    }
}

/// Distribution of `llr(X)` for `X ~ p`. Points labelled constant (and infinite values)
/// become atoms; the remaining mass is binned over the range of the finite,
/// non-constant llr values with `n_bins` bins.
pub fn llr_distribution<T: Real>(
    llr: &GridFunction<T>,
    p: &GridDensity<T>,
    labels: Option<&[RegionLabel]>,
    n_bins: usize,
) -> Result<LlrDistribution<T>> {
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bins, got {n_bins}"
        )));
    }
    llr.grid().ensure_same(p.grid())?;
    if let Some(l) = labels {
        if l.len() != llr.values().len() {
            return Err(Error::InvalidParameter(
                "one region label per grid point required".into(),
            ));
        }
    }
    let is_atom =
        |i: usize| llr.values()[i].is_infinite() || labels.is_some_and(|l| l[i].is_const());
    let masses = p.masses();
    let values = llr.values();
    let mut atoms = Vec::new();
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for i in 0..values.len() {
        if is_atom(i) {
            atoms.push((values[i], masses[i]));
        } else {
            lo = lo.min(values[i]);
            hi = hi.max(values[i]);
        }
    }
    let mut bins = Vec::new();
    let mut width = T::one();
    if lo <= hi {
        if same_value(lo, hi) {
            for i in (0..values.len()).filter(|&i| !is_atom(i)) {
                atoms.push((lo, masses[i]));
            }
            lo = T::zero();
        } else {
            width = (hi - lo) / T::from_usize_lossy(n_bins);
            bins = vec![T::zero(); n_bins];
            for i in (0..values.len()).filter(|&i| !is_atom(i)) {
                let k = ((values[i] - lo) / width)
                    .floor()
                    .to_usize()
                    .unwrap_or(0)
                    .min(n_bins - 1);
                bins[k] = bins[k] + masses[i];
            }
        }
    } else {
        lo = T::zero();
    }
    let total = atoms.iter().map(|a| a.1).sum::<T>() + bins.iter().copied().sum::<T>();
    // renormalize the residual quadrature drift of p
    let s = T::one() / total;
    let atoms = atoms.into_iter().map(|(v, m)| (v, m * s)).collect();
    bins.iter_mut().for_each(|m| *m = *m * s);
    LlrDistribution::new(atoms, lo, width, bins)
}
