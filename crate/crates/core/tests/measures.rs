use jdist::interval::{Interval, IntervalPartition, IntervalSet};
use jdist::measure::*;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

fn linear(slope: f64, intercept: f64) -> Measure1D {
    Measure1D::with_density(unit(), Density::Affine { slope, intercept }).unwrap()
}

#[test]
fn gaussian_masses_match_statrs() {
    let sp = Interval::new(-3.0, 5.0).unwrap();
    let m = Measure1D::with_density(sp, Density::gaussian(0.7, 2.5)).unwrap();
    let n = Normal::new(0.7, 2.5f64.sqrt()).unwrap();
    for k in 0..38 {
        let a = -3.0 + 0.2 * k as f64;
        let b = a + 0.37;
        let d = (m.mass_in(a, b) - (n.cdf(b) - n.cdf(a))).abs();
        // Coarse cross-check: statrs' normal cdf drifts by a few 1e-11 here.
        assert!(d < 1e-10, "{a}: {d:e}");
    }
    // 40-digit references (mpmath).
    assert!((m.mass_in(-3.0, -2.0) - 0.034_212_851_329_634_97).abs() < 1e-16);
    assert!((m.mass_in(-2.8, -2.43) - 0.010_446_696_331_187_475).abs() < 1e-16);
    assert!((m.mass_in(-1.2, -1.2 + 0.37) - 0.051_861_284_608_093_18).abs() < 1e-16);
    assert!((m.mass_in(1.6, 1.97) - 0.073_682_604_923_834).abs() < 1e-16);
    // Far tail, where 1 − Φ cancels catastrophically.
    let tail = Measure1D::with_density(Interval::new(0.0, 40.0).unwrap(), Density::gaussian(0.0, 1.0)).unwrap();
    let exact = n.sf(30.0 * 2.5f64.sqrt() + 0.7) - n.sf(35.0 * 2.5f64.sqrt() + 0.7);
    let got = tail.mass_in(30.0, 35.0);
    assert!((got - exact).abs() <= 1e-10 * exact, "{got:e} vs {exact:e}");
}

#[test]
fn out_of_support_queries_fail() {
    let m = Measure1D::lebesgue(unit());
    let set = IntervalSet::from_parts(vec![Interval::new(0.5, 1.5).unwrap()]);
    assert!(m.measure_of(&set).is_err());
}

fn mixed_measure() -> impl Strategy<Value = Measure1D> {
    let atoms = prop::collection::vec((0.0..=1.0f64, 0.01..1.0f64), 0..5);
    (0.0..2.0f64, 0.0..2.0f64, atoms).prop_map(|(a, b, atoms)| {
        Measure1D::new(unit(), Density::Affine { slope: a - b.min(a), intercept: b }, atoms, 16).unwrap()
    })
}

proptest! {
    #[test]
    fn mass_is_additive(m in mixed_measure(), mut cut in prop::collection::vec(0.0..=1.0f64, 3)) {
        cut.sort_by(f64::total_cmp);
        let (a, b, c) = (cut[0], cut[1], cut[2]);
        let whole = m.mass_in(a, c);
        prop_assert!((whole - m.mass_in(a, b) - m.mass_in(b, c)).abs() <= 1e-13 * (1.0 + whole));
        prop_assert!((m.total() - m.mass_in(0.0, 1.0)).abs() <= 1e-13);
    }

    #[test]
    fn decomposition_splits_nu(m in mixed_measure(), a in 0.0..1.0f64, w in 0.0..1.0f64) {
        let leb = Measure1D::lebesgue(unit());
        let d = lrn_decompose(&m, &leb, &DEFAULT_SCHEDULE[..6]).unwrap();
        let b = (a + w).min(1.0);
        let sum = d.ac_part.mass_in(a, b) + d.singular_part.mass_in(a, b);
        prop_assert!((sum - m.mass_in(a, b)).abs() <= 1e-12);
        let atoms: f64 = m.atoms().iter().map(|x| x.1).sum();
        prop_assert!((d.singular_part.total() - atoms).abs() <= 1e-12);
    }

    #[test]
    fn ratio_bounds_bracket_cell_ratios(s in 0.0..3.0f64, c in 0.0..1.0f64, lo in 0.0..0.9f64, w in 0.01..0.1f64) {
        let leb = Measure1D::lebesgue(unit());
        let nu = linear(s, c);
        let b = Interval::new(lo, (lo + w).min(1.0)).unwrap();
        let (inf, sup) = ratio_bounds(&nu, &leb, &b).unwrap();
        prop_assert!((inf - (s * b.lo + c)).abs() < 1e-12 && (sup - (s * b.hi + c)).abs() < 1e-12);
        let r = nu.mass_in(b.lo, b.hi) / b.len();
        prop_assert!(inf - 1e-12 <= r && r <= sup + 1e-12);
    }
}

#[test]
fn level_sets_bound_the_ratio_spread() {
    let leb = Measure1D::lebesgue(unit());
    let nu = linear(1.0, 0.0);
    for eps in [0.5, 0.25, 0.125] {
        let p = level_set_partition(&nu, &leb, eps).unwrap();
        let a = approximants(&nu, &leb, &p).unwrap();
        for i in 0..p.len() {
            let spread = a.upper[i] - a.lower[i];
            assert!(spread <= eps * (1.0 + 1e-9), "eps {eps} cell {i}: spread {spread}");
            assert!(spread * a.upper[i] <= eps * eps * (1.0 + 1e-9), "eps {eps} cell {i}");
        }
    }
}

#[test]
fn level_sets_of_a_gaussian_ratio() {
    let sp = Interval::new(-4.0, 4.0).unwrap();
    let nu = Measure1D::with_density(sp, Density::gaussian(0.3, 0.5)).unwrap();
    let mu = Measure1D::with_density(sp, Density::gaussian(0.0, 1.0)).unwrap();
    for eps in [0.25, 0.05] {
        let (p, _) = level_set_partition_with(&nu, &mu, eps, ThresholdScheme::Auto).unwrap();
        let a = approximants(&nu, &mu, &p).unwrap();
        for i in 0..p.len() {
            assert!(a.upper[i] - a.lower[i] <= eps * (1.0 + 1e-9), "cell {i}");
        }
    }
}

#[test]
fn chain_refines_and_approximants_are_monotone() {
    let leb = Measure1D::lebesgue(unit());
    let nu = Measure1D::new(unit(), Density::Affine { slope: 1.4, intercept: 0.0 }, vec![(0.5, 0.3)], 16).unwrap();
    let d = lrn_decompose(&nu, &leb, &DEFAULT_SCHEDULE).unwrap();
    assert!((d.singular_part.total() - 0.3).abs() <= 1e-6);
    let grid: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
    // The grid avoids the atom at 0.5, a Lebesgue-null point.
    let err = grid.iter().map(|&s| (d.derivative.eval(s) - 1.4 * s).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-3, "sup error {err}");
    for w in d.chain.windows(2) {
        assert!(w[1].partition.refines(&w[0].partition, 1e-12));
        for &s in &grid {
            assert!(w[1].upper_at(s) <= w[0].upper_at(s) + 1e-12, "upper at {s}");
            assert!(w[1].lower_at(s) >= w[0].lower_at(s) - 1e-12, "lower at {s}");
        }
    }
}

#[test]
fn pair_product_limits() {
    let leb = Measure1D::lebesgue(unit());
    let (v, r) = pair_product_limit(&linear(1.0, 0.0), &linear(1.0, 0.0), &leb, 1e-6).unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-4, "{v}");
    assert!(r.upper_nonincreasing(1e-12));
    let (v, r) = pair_product_limit(&linear(1.0, 0.0), &linear(-1.0, 1.0), &leb, 1e-6).unwrap();
    assert!((v - 1.0 / 6.0).abs() < 1e-4, "{v}");
    assert!(r.upper_nonincreasing(1e-12));
    assert!(r.levels.iter().all(|l| l.lower <= l.value + 1e-12 && l.value <= l.upper + 1e-12));
}

#[test]
fn pair_product_limit_of_gaussians() {
    let sp = Interval::new(-4.0, 4.0).unwrap();
    let phi = Measure1D::with_density(sp, Density::gaussian(0.0, 1.0)).unwrap();
    let leb = Measure1D::lebesgue(sp);
    let (v, _) = pair_product_limit(&phi, &phi, &leb, 1e-7).unwrap();
    // ∫ φ² = P(|N(0, 1/2)| ≤ 4) / (2√π).
    let half = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    let exact = (half.cdf(4.0) - half.cdf(-4.0)) / (2.0 * std::f64::consts::PI.sqrt());
    assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
}

#[test]
fn pair_product_limit_of_atoms() {
    let atoms = |w: [f64; 2]| Measure1D::new(unit(), Density::Zero, vec![(0.25, w[0]), (0.75, w[1])], 16).unwrap();
    let (v, _) = pair_product_limit(&atoms([0.2, 0.8]), &atoms([0.6, 0.4]), &atoms([0.5, 0.5]), 1e-9).unwrap();
    assert!((v - 0.88).abs() < 1e-14);
}

#[test]
fn partitions_refine_under_join() {
    let a = IntervalPartition::dyadic(unit(), 3);
    let b = IntervalPartition::new(vec![0.0, 0.3, 1.0]).unwrap();
    let j = a.join(&b, 1e-12);
    assert!(j.refines(&a, 1e-12) && j.refines(&b, 1e-12));
    assert!(!a.refines(&b, 1e-12));
}
