//! Finite measures on a real interval: a density part plus finitely many atoms.

mod approx;
mod density;

pub use approx::{
    approximants, level_set_partition, level_set_partition_with, lrn_decompose,
    lrn_decompose_with, pair_product_limit, pair_product_limit_with, ratio_bounds,
    ApproximantPair, Carrier, ChainConfig, LebesgueDecomposition, LimitOutcome, PointCell,
    StepFunction, ThresholdScheme,
    DEFAULT_SCHEDULE, LEVEL_CAP,
};
pub use density::{Density, PiecewiseConstant, PiecewiseLinear};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval::{Interval, IntervalSet};
use crate::quadrature::gauss_legendre;
use crate::sum::{csum, NeumaierSum};

pub const DEFAULT_QUADRATURE: usize = 16;

fn default_quadrature() -> usize {
    DEFAULT_QUADRATURE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMeasure {
    support: Interval,
    density: Density,
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    #[serde(default = "default_quadrature")]
    quadrature: usize,
}

/// Finite measure on a closed interval.
///
/// Atoms are counted with half-open membership, except that an atom at the
/// right end of the support belongs to every set closed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct Measure1D {
    support: Interval,
    density: Density,
    atoms: Vec<(f64, f64)>,
    quadrature: usize,
}

impl TryFrom<RawMeasure> for Measure1D {
    type Error = Error;

    fn try_from(r: RawMeasure) -> Result<Self> {
        Measure1D::new(r.support, r.density, r.atoms, r.quadrature)
    }
}

impl From<Measure1D> for RawMeasure {
    fn from(m: Measure1D) -> Self {
        RawMeasure { support: m.support, density: m.density, atoms: m.atoms, quadrature: m.quadrature }
    }
}

impl Measure1D {
    pub fn new(support: Interval, density: Density, atoms: Vec<(f64, f64)>, quadrature: usize) -> Result<Self> {
        if !(support.lo.is_finite() && support.hi.is_finite() && support.lo < support.hi) {
            return Err(invalid(format!("support [{}, {}] must be a finite nondegenerate interval", support.lo, support.hi)));
        }
        if quadrature == 0 {
            return Err(invalid("quadrature must be positive"));
        }
        density.validate(&support)?;
        let mut atoms = atoms;
        for &(loc, mass) in &atoms {
            if !(loc >= support.lo && loc <= support.hi) {
                return Err(invalid(format!("atom at {loc} lies outside the support")));
            }
            if !(mass.is_finite() && mass >= 0.0) {
                return Err(invalid(format!("atom mass {mass} is not a nonnegative real")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (loc, mass) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == loc => last.1 += mass,
                _ => merged.push((loc, mass)),
            }
        }
        merged.retain(|a| a.1 > 0.0);
        Ok(Measure1D { support, density, atoms: merged, quadrature })
    }

    pub fn with_density(support: Interval, density: Density) -> Result<Self> {
        Self::new(support, density, Vec::new(), DEFAULT_QUADRATURE)
    }

    pub fn lebesgue(support: Interval) -> Self {
        Self::with_density(support, Density::constant(1.0)).expect("valid")
    }

    pub fn zero(support: Interval) -> Self {
        Self::with_density(support, Density::Zero).expect("valid")
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    /// Atoms sorted by location, with distinct locations and positive masses.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature
    }

    pub fn with_quadrature(mut self, quadrature: usize) -> Result<Self> {
        if quadrature == 0 {
            return Err(invalid("quadrature must be positive"));
        }
        self.quadrature = quadrature;
        Ok(self)
    }

    pub fn with_atoms(self, atoms: Vec<(f64, f64)>) -> Result<Self> {
        let mut all = self.atoms;
        all.extend(atoms);
        Self::new(self.support, self.density, all, self.quadrature)
    }

    /// Density value at `s`; zero off the support.
    pub fn density_at(&self, s: f64) -> f64 {
        if s < self.support.lo || s > self.support.hi {
            0.0
        } else {
            self.density.eval(s)
        }
    }

    /// Left limit of the density at `s`.
    pub fn density_left(&self, s: f64) -> f64 {
        if s <= self.support.lo || s > self.support.hi {
            0.0
        } else {
            self.density.eval_left(s)
        }
    }

    pub fn atom_at(&self, s: f64) -> f64 {
        match self.atoms.binary_search_by(|a| a.0.total_cmp(&s)) {
            Ok(i) => self.atoms[i].1,
            Err(_) => 0.0,
        }
    }

    /// Atoms in `[lo, hi)` (closed at the support's right end).
    pub fn atoms_in(&self, lo: f64, hi: f64) -> &[(f64, f64)] {
        let start = self.atoms.partition_point(|a| a.0 < lo);
        let end = if hi >= self.support.hi {
            self.atoms.partition_point(|a| a.0 <= hi)
        } else {
            self.atoms.partition_point(|a| a.0 < hi)
        };
        if start >= end {
            &[]
        } else {
            &self.atoms[start..end]
        }
    }

    /// Density integral over `[lo, hi]`, clipped to the support.
    pub fn density_mass(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.support.lo);
        let hi = hi.min(self.support.hi);
        self.density.integral(lo, hi)
    }

    /// Mass of `[lo, hi)` clipped to the support, without range checks.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let a = lo.max(self.support.lo);
        let b = hi.min(self.support.hi);
        if b < a {
            return 0.0;
        }
        let mut s = NeumaierSum::new();
        s.add(self.density.integral(a, b));
        for &(_, m) in self.atoms_in(a, b) {
            s.add(m);
        }
        s.value()
    }

    pub fn total(&self) -> f64 {
        self.mass_in(self.support.lo, self.support.hi)
    }

    fn check_within(&self, iv: &Interval) -> Result<()> {
        let tol = 1e-12 * (1.0 + self.support.len());
        if !iv.within(&self.support, tol) {
            return Err(Error::OutOfSupport {
                lo: iv.lo,
                hi: iv.hi,
                support_lo: self.support.lo,
                support_hi: self.support.hi,
            });
        }
        Ok(())
    }

    pub fn measure_interval(&self, iv: &Interval) -> Result<f64> {
        self.check_within(iv)?;
        Ok(self.mass_in(iv.lo, iv.hi))
    }

    /// `m(S)` for a finite union of intervals inside the support.
    pub fn measure_of(&self, set: &IntervalSet) -> Result<f64> {
        for p in set.parts() {
            self.check_within(p)?;
        }
        Ok(csum(set.parts().iter().map(|p| self.mass_in(p.lo, p.hi))))
    }

    /// Density breakpoints and atom locations inside the support, plus the
    /// support ends, sorted.
    pub fn natural_breaks(&self) -> Vec<f64> {
        let s = self.support;
        let mut b: Vec<f64> = self
            .density
            .breakpoints()
            .into_iter()
            .chain(self.atoms.iter().map(|a| a.0))
            .filter(|&x| x > s.lo && x < s.hi)
            .collect();
        b.push(s.lo);
        b.push(s.hi);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Default panel width for integrating smooth functions against the
    /// density.
    pub fn default_panel(&self) -> f64 {
        let w = self.support.len() / 64.0;
        match self.density.scale_length() {
            Some(sd) => w.min(0.5 * sd),
            None => w,
        }
    }

    /// Quadrature nodes `(s, w)` with `Σ w g(s) ≈ ∫_lo^hi g dm_density`.
    ///
    /// The range is split at density breakpoints and into panels no wider
    /// than `max_panel`; a panel of width `w` gets
    /// `clamp(ceil(q·w/max_panel), 2, q)` Gauss–Legendre nodes.
    pub fn nodes(&self, lo: f64, hi: f64, max_panel: f64) -> Vec<(f64, f64)> {
        let lo = lo.max(self.support.lo);
        let hi = hi.min(self.support.hi);
        let mut out = Vec::new();
        if hi <= lo || matches!(self.density, Density::Zero) {
            return out;
        }
        let q = self.quadrature;
        let mut cuts: Vec<f64> = self.density.breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
        cuts.insert(0, lo);
        cuts.push(hi);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            let order = ((q as f64 * h / max_panel).ceil() as usize).clamp(2.min(q), q);
            let rule = gauss_legendre(order);
            for k in 0..panels {
                let pa = a + h * k as f64;
                let pb = if k + 1 == panels { b } else { a + h * (k + 1) as f64 };
                for (x, wt) in rule.mapped(pa, pb) {
                    let d = self.density.eval(x);
                    if d > 0.0 {
                        out.push((x, wt * d));
                    }
                }
            }
        }
        out
    }

    /// `c·m`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid(format!("scale {c} is not a nonnegative real")));
        }
        let density = match &self.density {
            Density::Zero => Density::Zero,
            Density::Gaussian { mean, var, scale } => Density::Gaussian { mean: *mean, var: *var, scale: scale * c },
            Density::Affine { slope, intercept } => Density::Affine { slope: slope * c, intercept: intercept * c },
            Density::Table(t) => Density::Table(PiecewiseLinear::new(
                t.breakpoints().to_vec(),
                t.values().iter().map(|v| v * c).collect(),
            )?),
            Density::Steps(t) => Density::Steps(PiecewiseConstant::new(
                t.breakpoints().to_vec(),
                t.values().iter().map(|v| v * c).collect(),
            )?),
            Density::Masked { base, keep } => {
                let inner = Measure1D { density: (**base).clone(), atoms: Vec::new(), ..self.clone() }.scaled(c)?;
                Density::Masked { base: Box::new(inner.density), keep: keep.clone() }
            }
        };
        Measure1D::new(self.support, density, self.atoms.iter().map(|&(l, m)| (l, m * c)).collect(), self.quadrature)
    }

    /// The measure restricted to `keep` (atoms included by membership).
    pub fn restricted(&self, keep: &IntervalSet) -> Self {
        let density = Density::Masked { base: Box::new(self.density.clone()), keep: keep.clone() };
        let atoms = self.atoms.iter().copied().filter(|a| keep.contains(a.0, self.support.hi)).collect();
        Measure1D { support: self.support, density, atoms, quadrature: self.quadrature }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn measure_of_examples() {
        let leb = Measure1D::lebesgue(unit());
        assert_eq!(leb.measure_of(&unit().into()).unwrap(), 1.0);
        let lin = Measure1D::with_density(unit(), Density::Affine { slope: 2.0, intercept: 0.0 }).unwrap();
        assert!((lin.measure_interval(&Interval::new(0.0, 0.5).unwrap()).unwrap() - 0.25).abs() < 1e-16);
        let atom = Measure1D::new(unit(), Density::Zero, vec![(0.5, 0.3)], 16).unwrap();
        assert_eq!(atom.measure_interval(&Interval::new(0.4, 0.6).unwrap()).unwrap(), 0.3);
        assert!(matches!(
            leb.measure_interval(&Interval::new(0.5, 1.5).unwrap()),
            Err(Error::OutOfSupport { .. })
        ));
    }

    #[test]
    fn atoms_half_open_closed_at_end() {
        let m = Measure1D::new(unit(), Density::Zero, vec![(0.5, 0.25), (1.0, 0.75)], 16).unwrap();
        assert_eq!(m.mass_in(0.0, 0.5), 0.0);
        assert_eq!(m.mass_in(0.5, 1.0), 1.0);
        assert_eq!(m.total(), 1.0);
    }

    #[test]
    fn nodes_integrate_smooth_functions() {
        let g = Measure1D::with_density(Interval::new(-8.0, 8.0).unwrap(), Density::gaussian(0.0, 1.0)).unwrap();
        let nodes = g.nodes(-8.0, 8.0, g.default_panel());
        let second: f64 = nodes.iter().map(|(x, w)| w * x * x).sum();
        assert!((second - 1.0).abs() < 1e-12);
        let part = g.nodes(0.0, 0.1, g.default_panel());
        let mass: f64 = part.iter().map(|(_, w)| w).sum();
        assert!((mass - g.mass_in(0.0, 0.1)).abs() < 1e-15);
    }

    #[test]
    fn scaling_and_restriction() {
        let m = Measure1D::new(unit(), Density::constant(1.0), vec![(0.5, 1.0)], 16).unwrap();
        assert!((m.scaled(0.5).unwrap().total() - 1.0).abs() < 1e-15);
        let keep = IntervalSet::from(Interval::new(0.0, 0.5).unwrap());
        let r = m.restricted(&keep);
        assert_eq!(r.total(), 0.5);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"support":[0,1],"density":{"kind":"affine","slope":1,"intercept":0},"atoms":[[0.5,0.3]]}"#;
        let m: Measure1D = serde_json::from_str(text).unwrap();
        assert_eq!(m.quadrature(), 16);
        let back: Measure1D = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, back);
        let bad = r#"{"support":[0,1],"density":{"kind":"affine","slope":-1,"intercept":0}}"#;
        assert!(serde_json::from_str::<Measure1D>(bad).is_err());
    }
}
