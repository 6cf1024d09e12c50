#![allow(dead_code)]

use jdist::interval::Interval;
use jdist::joint::{JointMeasure2D, Rect};
use jdist::kernel::{pushforward, KernelFamily};
use jdist::measure::{Density, Measure1D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub fn space() -> Interval {
    Interval::new(-8.0, 8.0).unwrap()
}

pub fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

pub fn gaussian(mean: f64, var: f64) -> Measure1D {
    Measure1D::with_density(space(), Density::gaussian(mean, var)).unwrap()
}

/// `s ↦ N(s, var)` on `[-8, 8]`.
pub fn shift(var: f64) -> KernelFamily {
    KernelFamily::gaussian(1.0, 0.0, var, space(), space()).unwrap()
}

/// Joints of the chain `x ~ N(0,1)`, then each step adds `N(0, 1)` noise.
pub fn gaussian_chain(steps: usize) -> Vec<JointMeasure2D> {
    let mut base = gaussian(0.0, 1.0);
    let mut out = Vec::new();
    for _ in 0..steps {
        let k = shift(1.0);
        let next = pushforward(&base, &k).unwrap();
        out.push(JointMeasure2D::kernel(base, k).unwrap());
        base = next;
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_interval(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Interval {
    let a = r.random_range(lo..hi);
    let b = r.random_range(lo..hi);
    iv(a.min(b), a.max(b) + 1e-3)
}

pub fn random_rects(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<Rect> {
    let mut r = rng(seed);
    (0..n).map(|_| Rect::new(random_interval(&mut r, lo, hi), random_interval(&mut r, lo, hi))).collect()
}

/// `P(X ∈ A, X + E ∈ C)` for `X ~ N(0, vx)`, `E ~ N(0, ve)` independent, by
/// composite Simpson over `A`.
pub fn gaussian_pair_rect(vx: f64, ve: f64, a: Interval, c: Interval) -> f64 {
    let x = Normal::new(0.0, vx.sqrt()).unwrap();
    let e = Normal::new(0.0, ve.sqrt()).unwrap();
    let k = 2000;
    let h = a.len() / k as f64;
    let mut s = 0.0;
    for i in 0..=k {
        let t = a.lo + h * i as f64;
        let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * x.pdf(t) * (e.cdf(c.hi - t) - e.cdf(c.lo - t));
    }
    s * h / 3.0
}
