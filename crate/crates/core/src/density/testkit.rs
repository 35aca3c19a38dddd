//! Helpers shared by unit tests across modules.

use super::{DensitySpec, Grid, GridDensity, MixtureComponent};

pub fn grid(lo: f64, hi: f64, n: usize) -> Grid<f64> {
    Grid::new(lo, hi, n).unwrap()
}

pub fn gauss(g: &Grid<f64>, mean: f64, var: f64) -> GridDensity<f64> {
    DensitySpec::gaussian(mean, var).build(g).unwrap()
}

pub fn uniform(g: &Grid<f64>, a: f64, b: f64) -> GridDensity<f64> {
    DensitySpec::uniform(a, b).build(g).unwrap()
}

pub fn mixture(parts: &[(f64, DensitySpec)]) -> DensitySpec {
    DensitySpec::Mixture {
        components: parts
            .iter()
            .map(|(w, d)| MixtureComponent {
                weight: *w,
                density: d.clone(),
            })
            .collect(),
    }
}

/// Tiny deterministic generator for test fixtures (SplitMix64).
pub struct Mix(pub u64);

impl Mix {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }
}

/// Random smooth density whose ratio to any other such density stays bounded.
pub fn random_density(g: &Grid<f64>, rng: &mut Mix) -> GridDensity<f64> {
    let mut parts = vec![(0.3, DensitySpec::gaussian(0.0, 9.0))];
    let ws: Vec<f64> = (0..3).map(|_| rng.range(0.1, 1.0)).collect();
    let total: f64 = ws.iter().sum();
    for w in ws {
        parts.push((
            0.7 * w / total,
            DensitySpec::gaussian(rng.range(-3.0, 3.0), rng.range(0.3, 3.0)),
        ));
    }
    let fix: f64 = 1.0 - parts.iter().map(|p| p.0).sum::<f64>();
    parts[0].0 += fix;
    mixture(&parts).build(g).unwrap()
}
