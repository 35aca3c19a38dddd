use super::*;
use crate::density::testkit::*;
use crate::density::{f_divergence, FDivGenerator, Grid, GridDensity, GridFunction};
use crate::lfd::{feasible_sample, solve_band_lfds, solve_contamination_lfds, LfdPair};
use crate::sampling::stream_rng;
use crate::uncertainty::{band_from_scaled_nominal, UncertaintySet};

fn censoring_pair() -> (Grid<f64>, LfdPair<f64>) {
    let g = grid(-30.0, 30.0, 6001);
    let b0 = band_from_scaled_nominal(&gauss(&g, -2.0, 4.0), 0.7, 3.0).unwrap();
    let b1 = band_from_scaled_nominal(&gauss(&g, 2.0, 4.0), 0.7, 3.0).unwrap();
    (g, solve_band_lfds(&b0, &b1, 1e-11, 1000).unwrap())
}

fn phi(z: f64) -> f64 {
    0.5 * (1.0 + crate::lfd::tests_support::erf_ref(z / 2f64.sqrt()))
}

/// Analytic censoring masses under Q₀: (P(llr < 0), atom at 0, P(llr > 0)).
fn censoring_oracle() -> (f64, f64, f64) {
    let r = (3.0f64 / 0.7).ln();
    let below = 0.7 * phi((2.0 - r) / 2.0);
    let above = 3.0 * (1.0 - phi((2.0 + r) / 2.0));
    (below, 1.0 - below - above, above)
}

#[test]
fn censoring_statistic_has_single_atom() {
    let (_, pair) = censoring_pair();
    let d = llr_distribution(&pair.llr, &pair.q0, Some(&pair.labels), DEFAULT_BINS).unwrap();
    assert_eq!(d.atoms().len(), 1);
    let (below, atom, above) = censoring_oracle();
    assert!(d.atoms()[0].0.abs() < 1e-9);
    assert!((d.atoms()[0].1 - atom).abs() < 5e-4, "{:?}", d.atoms());
    assert!((d.mass_below(0.0) - below).abs() < 5e-4);
    assert!((d.mass_above(0.0) - above).abs() < 5e-4);
    assert!((d.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn constant_statistic_is_one_atom() {
    let g = grid(-5.0, 5.0, 101);
    let p = gauss(&g, 0.0, 1.0);
    let pair = solve_contamination_lfds(&p, &p, 0.1, 0.1).unwrap();
    let d = llr_distribution(&pair.llr, &p, Some(&pair.labels), 64).unwrap();
    assert_eq!(d.atoms().len(), 1);
    assert!((d.atoms()[0].1 - 1.0).abs() < 1e-12 && d.bins().is_empty());
    assert!(llr_distribution(&pair.llr, &p, None, 1).is_err());
}

#[test]
fn nominal_statistic_matches_direct_moments() {
    let g = grid(-10.0, 10.0, 4001);
    let (p0, p1) = (gauss(&g, -1.0, 2.0), gauss(&g, 1.0, 3.0));
    let llr = GridFunction::new(
        g,
        (0..g.len())
            .map(|i| p1.values()[i].ln() - p0.values()[i].ln())
            .collect(),
    )
    .unwrap();
    let d = llr_distribution(&llr, &p0, None, DEFAULT_BINS).unwrap();
    assert!(d.atoms().is_empty());
    assert!((d.total_mass() - 1.0).abs() < 1e-8);
    let m: Vec<f64> = (0..g.len())
        .map(|i| llr.values()[i] * p0.values()[i])
        .collect();
    let mean = g.integrate(&m);
    let s: Vec<f64> = (0..g.len())
        .map(|i| (llr.values()[i] - mean).powi(2) * p0.values()[i])
        .collect();
    let var = g.integrate(&s);
    // binning moves each value by at most one bin width
    let w = d.width();
    assert!((d.mean() - mean).abs() < w, "{} vs {mean}", d.mean());
    assert!(
        (d.variance() - var).abs() / var < 0.01,
        "{} vs {var}",
        d.variance()
    );
}

#[test]
fn convolution_basics() {
    let d = LlrDistribution::<f64>::new(vec![(-1.0, 0.5), (1.0, 0.5)], 0.0, 1.0, vec![]).unwrap();
    assert_eq!(d.convolve_n(1).unwrap(), d);
    let d3 = d.convolve_n(3).unwrap();
    let expect = [(-3.0, 0.125), (-1.0, 0.375), (1.0, 0.375), (3.0, 0.125)];
    assert_eq!(d3.atoms().len(), 4);
    for ((v, m), (ev, em)) in d3.atoms().iter().zip(expect) {
        assert!((v - ev).abs() < 1e-12 && (m - em).abs() < 1e-12);
    }
    assert!(d.convolve_n(0).is_err());
    // uniform on [0,1) twice: triangular on [0, 2)
    let u = LlrDistribution::<f64>::new(vec![], 0.0, 1.0 / 64.0, vec![1.0 / 64.0; 64]).unwrap();
    let t = u.convolve(&u).unwrap();
    assert!((t.mass_below(1.0) - 0.5).abs() < 1e-12);
    assert!((t.mass_below(0.5) - 0.125).abs() < 1e-3);
    assert!((t.mean() - 1.0).abs() < 1e-12);
    assert!((t.variance() - 1.0 / 6.0).abs() < 1e-3, "{}", t.variance());
}

#[test]
fn convolution_preserves_mass_and_moments() {
    let (_, pair) = censoring_pair();
    let d = llr_distribution(&pair.llr, &pair.q0, Some(&pair.labels), DEFAULT_BINS).unwrap();
    let (_, atom, _) = censoring_oracle();
    let d2 = d.convolve_n(2).unwrap();
    assert!((d2.total_mass() - 1.0).abs() < 1e-6);
    assert!((d2.mass_at(0.0) - atom * atom).abs() < 5e-4);
    for n in [3, 7, 16] {
        let dn = d.convolve_n(n).unwrap();
        assert!((dn.total_mass() - 1.0).abs() < 1e-6);
        assert!((dn.mean() - n as f64 * d.mean()).abs() < 1e-6 * n as f64 + dn.width());
        let v = n as f64 * d.variance();
        assert!(
            (dn.variance() - v).abs() / v < 0.01,
            "n={n}: {} vs {v}",
            dn.variance()
        );
    }
}

#[test]
fn atom_cap_falls_back_to_binning() {
    // incommensurate atom values never merge: 3 atoms give (n+1)(n+2)/2 sums
    let d = LlrDistribution::new(
        vec![(0.0, 0.3), (1.0, 0.3), (std::f64::consts::SQRT_2, 0.4)],
        0.0,
        1.0,
        vec![],
    )
    .unwrap();
    let small = d.convolve_n(8).unwrap();
    assert!(!small.is_approximate() && small.atoms().len() == 45);
    let big = d.convolve_n(100).unwrap();
    assert!(big.is_approximate() && big.atoms().len() <= ATOM_CAP);
    assert!((big.total_mass() - 1.0).abs() < 1e-9);
    assert!((big.mean() - 100.0 * d.mean()).abs() < 0.05);
}

#[test]
fn error_probabilities() {
    let d = LlrDistribution::new(vec![(-1.0, 0.5), (1.0, 0.5)], 0.0, 1.0, vec![]).unwrap();
    assert_eq!(
        test_error_probs(&d, &d, RandomizedTest::new(f64::NEG_INFINITY, 0.0).unwrap()),
        (1.0, 0.0)
    );
    let (a, b) = test_error_probs(&d, &d, RandomizedTest::new(0.0, 0.5).unwrap());
    assert!((a + (1.0 - b) - 1.0).abs() < 1e-15 && (a - 0.5).abs() < 1e-15);
    let (a, b) = test_error_probs(&d, &d, RandomizedTest::new(1.0, 0.25).unwrap());
    assert!((a - 0.125).abs() < 1e-15 && (b - (0.5 + 0.375)).abs() < 1e-15);
    assert!(RandomizedTest::new(0.0, 1.5).is_err());

    let (_, pair) = censoring_pair();
    let d0 = llr_distribution(&pair.llr, &pair.q0, Some(&pair.labels), DEFAULT_BINS).unwrap();
    let d1 = llr_distribution(&pair.llr, &pair.q1, Some(&pair.labels), DEFAULT_BINS).unwrap();
    let (_, atom, above) = censoring_oracle();
    let (a0, _) = test_error_probs(&d0, &d1, RandomizedTest::new(0.0, 0.0).unwrap());
    let (a1, _) = test_error_probs(&d0, &d1, RandomizedTest::new(0.0, 1.0).unwrap());
    assert!(
        (a0 - above).abs() < 5e-4 && (a1 - above - atom).abs() < 5e-4,
        "{a0} {a1}"
    );
}

#[test]
fn roc_of_breakdown_is_diagonal() {
    let g = grid(-5.0, 5.0, 101);
    let p = gauss(&g, 0.0, 1.0);
    let pair = solve_contamination_lfds(&p, &p, 0.1, 0.1).unwrap();
    let roc = roc_curve(&pair, &p, &p, 3).unwrap();
    for pt in &roc.points {
        assert!((pt.alpha - pt.power).abs() < 1e-12);
    }
    assert!((roc.power_at(0.3) - 0.3).abs() < 1e-12);
}

#[test]
fn censoring_roc_has_linear_segment() {
    let (_, pair) = censoring_pair();
    let roc = roc_curve(&pair, &pair.q0, &pair.q1, 1).unwrap();
    let (_, atom, above) = censoring_oracle();
    let at_zero: Vec<_> = roc
        .points
        .iter()
        .filter(|p| p.log_threshold.abs() < 1e-9)
        .collect();
    assert_eq!(at_zero.len(), 2);
    assert!(
        (at_zero[0].alpha - above).abs() < 5e-4 && (at_zero[1].alpha - above - atom).abs() < 5e-4
    );
    // randomizing on the atom traces the straight segment between the two points
    let (lo, hi) = (at_zero[0], at_zero[1]);
    let mid = 0.5 * (lo.alpha + hi.alpha);
    assert!((roc.power_at(mid) - 0.5 * (lo.power + hi.power)).abs() < 1e-12);
    let first = roc.points.first().unwrap();
    let last = roc.points.last().unwrap();
    assert!(first.alpha == 0.0 && last.alpha == 1.0 && last.power == 1.0);
}

fn assert_monotone(roc: &RocCurve<f64>) {
    for w in roc.points.windows(2) {
        assert!(w[1].alpha >= w[0].alpha && w[1].power >= w[0].power);
    }
}

#[test]
fn more_samples_dominate() {
    let g = grid(-20.0, 20.0, 2001);
    let mut rng = Mix(3);
    let cases: Vec<LfdPair<f64>> = vec![
        censoring_pair().1,
        solve_contamination_lfds(&gauss(&g, -1.0, 2.0), &gauss(&g, 1.0, 2.0), 0.1, 0.05).unwrap(),
        {
            let b0 = band_from_scaled_nominal(&gauss(&g, -2.0, 4.0), 0.75, 1.2).unwrap();
            let b1 = band_from_scaled_nominal(&gauss(&g, 0.0, 16.0), 0.75, 1.2).unwrap();
            solve_band_lfds(&b0, &b1, 1e-11, 1000).unwrap()
        },
        {
            let (p0, p1) = (random_density(&g, &mut rng), random_density(&g, &mut rng));
            solve_contamination_lfds(&p0, &p1, 0.02, 0.02).unwrap()
        },
    ];
    for pair in cases {
        let r1 = roc_curve(&pair, &pair.q0, &pair.q1, 1).unwrap();
        let r4 = roc_curve(&pair, &pair.q0, &pair.q1, 4).unwrap();
        assert_monotone(&r1);
        assert_monotone(&r4);
        for p in &r1.points {
            assert!(
                r4.power_at(p.alpha) >= p.power - 1e-9,
                "α={}: {} < {}",
                p.alpha,
                r4.power_at(p.alpha),
                p.power
            );
        }
    }
}

#[test]
fn exponents() {
    let g = grid(-12.0, 13.0, 5001);
    let (p0, p1) = (gauss(&g, 0.0, 1.0), gauss(&g, 1.0, 1.0));
    let e = asymptotic_exponents(&p0, &p1, &p0, &p1).unwrap();
    let bits = 0.5 / std::f64::consts::LN_2;
    assert!((e.e0 - bits).abs() < 1e-3 && (e.e1 - bits).abs() < 1e-3 && e.valid);
    let kl = |a: &GridDensity<f64>, b: &GridDensity<f64>| {
        f_divergence(&FDivGenerator::KullbackLeibler, a, b).unwrap() / std::f64::consts::LN_2
    };
    let (q0, q1) = (gauss(&g, -1.0, 2.0), gauss(&g, 2.0, 3.0));
    let e = asymptotic_exponents(&p0, &p1, &q0, &q1).unwrap();
    assert!((e.e0 - (kl(&p0, &q1) - kl(&p0, &q0))).abs() < 1e-9);
    assert!((e.e1 - (kl(&p1, &q0) - kl(&p1, &q1))).abs() < 1e-9);
    let swapped = asymptotic_exponents(&p0, &p1, &p1, &p0).unwrap();
    assert!(swapped.e0 < 0.0 && swapped.e1 < 0.0 && !swapped.valid);
    assert!(asymptotic_exponents(&p0, &gauss(&grid(-5.0, 5.0, 11), 0.0, 1.0), &p0, &p1).is_err());
}

#[test]
fn lfds_are_the_saddle_point() {
    let g = grid(-20.0, 20.0, 2001);
    let b0 = band_from_scaled_nominal(&gauss(&g, -2.0, 4.0), 0.75, 1.2).unwrap();
    let b1 = band_from_scaled_nominal(&gauss(&g, 0.0, 16.0), 0.75, 1.2).unwrap();
    let pair = solve_band_lfds(&b0, &b1, 1e-11, 1000).unwrap();
    let (s0, s1) = (UncertaintySet::Band(b0), UncertaintySet::Band(b1));
    let stat = |p: &GridDensity<f64>| {
        llr_distribution(&pair.llr, p, Some(&pair.labels), DEFAULT_BINS).unwrap()
    };
    let (l0, l1) = (stat(&pair.q0), stat(&pair.q1));
    for k in 0..50u64 {
        let mut rng = stream_rng(21, k);
        let p0 = feasible_sample(&s0, &mut rng).unwrap();
        let p1 = feasible_sample(&s1, &mut rng).unwrap();
        let (d0, d1) = (stat(&p0), stat(&p1));
        for lambda in [0.5f64, 1.0, 2.0] {
            for gamma in [0.0, 1.0] {
                let test = RandomizedTest::new(-lambda.ln(), gamma).unwrap();
                let (a, b) = test_error_probs(&d0, &d1, test);
                let (a_lfd, b_lfd) = test_error_probs(&l0, &l1, test);
                assert!(
                    a + lambda * b <= a_lfd + lambda * b_lfd + 1e-6,
                    "sample {k}, λ={lambda}"
                );
            }
        }
    }
}

#[test]
fn f32_roc() {
    let g = Grid::<f32>::new(-10.0, 10.0, 801).unwrap();
    let p0 = crate::density::DensitySpec::gaussian(-1.0, 1.0)
        .build::<f32>(&g)
        .unwrap();
    let p1 = crate::density::DensitySpec::gaussian(1.0, 1.0)
        .build::<f32>(&g)
        .unwrap();
    let pair = solve_contamination_lfds(&p0, &p1, 0.05, 0.05).unwrap();
    let roc = roc_curve(&pair, &p0, &p1, 2).unwrap();
    assert!(roc.power_at(0.1) > 0.5);
}
