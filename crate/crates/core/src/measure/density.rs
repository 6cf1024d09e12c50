//! Nonnegative density functions on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::interval::{Interval, IntervalSet};
use crate::normal::{normal_mass, normal_pdf};

fn one() -> f64 {
    1.0
}

/// Density with respect to Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Density {
    Zero,
    /// `scale · N(mean, var)` density.
    Gaussian {
        mean: f64,
        var: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `slope · s + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// Piecewise linear through `(breakpoints, values)`, zero outside.
    Table(PiecewiseLinear),
    /// Piecewise constant, `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
    Steps(PiecewiseConstant),
    /// `base` restricted to `keep`.
    Masked { base: Box<Density>, keep: IntervalSet },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawTable {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

/// Cached prefix integrals plus O(1) lookup for equally spaced breakpoints.
#[derive(Debug, Clone)]
struct Grid {
    breakpoints: Vec<f64>,
    cum: Vec<f64>,
    uniform: Option<(f64, f64)>,
}

impl Grid {
    fn new(breakpoints: Vec<f64>, cell_integrals: impl Iterator<Item = f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breakpoints must be strictly increasing with at least two entries"));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(invalid("breakpoints must be finite"));
        }
        let mut cum = Vec::with_capacity(breakpoints.len());
        let mut s = crate::sum::NeumaierSum::new();
        cum.push(0.0);
        for c in cell_integrals {
            s.add(c);
            cum.push(s.value());
        }
        let n = breakpoints.len() - 1;
        let lo = breakpoints[0];
        let h = (breakpoints[n] - lo) / n as f64;
        let uniform = breakpoints
            .iter()
            .enumerate()
            .all(|(i, &b)| (b - (lo + h * i as f64)).abs() <= 1e-9 * h)
            .then_some((lo, 1.0 / h));
        Ok(Grid { breakpoints, cum, uniform })
    }

    fn cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Cell `i` with `b_i ≤ x < b_{i+1}`, for `b_0 ≤ x < b_n`.
    fn locate(&self, x: f64) -> usize {
        let n = self.cells();
        let b = &self.breakpoints;
        if let Some((lo, inv_h)) = self.uniform {
            let mut i = (((x - lo) * inv_h).floor().max(0.0) as usize).min(n - 1);
            while i > 0 && x < b[i] {
                i -= 1;
            }
            while i + 1 < n && x >= b[i + 1] {
                i += 1;
            }
            i
        } else {
            (b.partition_point(|&t| t <= x) - 1).min(n - 1)
        }
    }

    /// Cell `i` with `b_i < x ≤ b_{i+1}`, for `b_0 < x ≤ b_n`.
    fn locate_left(&self, x: f64) -> usize {
        let i = self.locate(x);
        if i > 0 && x == self.breakpoints[i] {
            i - 1
        } else {
            i
        }
    }

    fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    fn hi(&self) -> f64 {
        self.breakpoints[self.cells()]
    }
}

#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    grid: Grid,
    values: Vec<f64>,
}

impl PartialEq for PiecewiseLinear {
    fn eq(&self, other: &Self) -> bool {
        self.grid.breakpoints == other.grid.breakpoints && self.values == other.values
    }
}

impl From<PiecewiseLinear> for RawTable {
    fn from(t: PiecewiseLinear) -> Self {
        RawTable { breakpoints: t.grid.breakpoints, values: t.values }
    }
}

impl Serialize for PiecewiseLinear {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawTable::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseLinear {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        PiecewiseLinear::new(raw.breakpoints, raw.values).map_err(serde::de::Error::custom)
    }
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() {
            return Err(invalid("table needs one value per breakpoint"));
        }
        check_values(&values)?;
        let cells: Vec<f64> = breakpoints
            .windows(2)
            .zip(values.windows(2))
            .map(|(b, v)| 0.5 * (b[1] - b[0]) * (v[0] + v[1]))
            .collect();
        let grid = Grid::new(breakpoints, cells.into_iter())?;
        Ok(PiecewiseLinear { grid, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.grid.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∫_a^b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.primitive(b) - self.primitive(a)).max(0.0)
    }

    pub fn total(&self) -> f64 {
        self.grid.cum[self.grid.cells()]
    }

    fn interp(&self, i: usize, x: f64) -> f64 {
        let b = &self.grid.breakpoints;
        let t = (x - b[i]) / (b[i + 1] - b[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.grid.lo() || x > self.grid.hi() {
            0.0
        } else if x == self.grid.hi() {
            self.values[self.grid.cells()]
        } else {
            self.interp(self.grid.locate(x), x)
        }
    }

    fn eval_left(&self, x: f64) -> f64 {
        if x <= self.grid.lo() || x > self.grid.hi() {
            0.0
        } else {
            self.interp(self.grid.locate_left(x), x)
        }
    }

    pub(crate) fn primitive(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.lo() {
            return 0.0;
        }
        if x >= g.hi() {
            return g.cum[g.cells()];
        }
        let i = g.locate(x);
        g.cum[i] + 0.5 * (x - g.breakpoints[i]) * (self.values[i] + self.interp(i, x))
    }
}

#[derive(Debug, Clone)]
pub struct PiecewiseConstant {
    grid: Grid,
    values: Vec<f64>,
}

impl PartialEq for PiecewiseConstant {
    fn eq(&self, other: &Self) -> bool {
        self.grid.breakpoints == other.grid.breakpoints && self.values == other.values
    }
}

impl From<PiecewiseConstant> for RawTable {
    fn from(t: PiecewiseConstant) -> Self {
        RawTable { breakpoints: t.grid.breakpoints, values: t.values }
    }
}

impl Serialize for PiecewiseConstant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawTable::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseConstant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        PiecewiseConstant::new(raw.breakpoints, raw.values).map_err(serde::de::Error::custom)
    }
}

impl PiecewiseConstant {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() + 1 != breakpoints.len() {
            return Err(invalid("steps need one value per cell"));
        }
        check_values(&values)?;
        let cells: Vec<f64> =
            breakpoints.windows(2).zip(&values).map(|(b, v)| (b[1] - b[0]) * v).collect();
        let grid = Grid::new(breakpoints, cells.into_iter())?;
        Ok(PiecewiseConstant { grid, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.grid.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, x: f64) -> f64 {
        if x < self.grid.lo() || x > self.grid.hi() {
            0.0
        } else if x == self.grid.hi() {
            self.values[self.grid.cells() - 1]
        } else {
            self.values[self.grid.locate(x)]
        }
    }

    fn eval_left(&self, x: f64) -> f64 {
        if x <= self.grid.lo() || x > self.grid.hi() {
            0.0
        } else {
            self.values[self.grid.locate_left(x)]
        }
    }

    fn primitive(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.lo() {
            return 0.0;
        }
        if x >= g.hi() {
            return g.cum[g.cells()];
        }
        let i = g.locate(x);
        g.cum[i] + (x - g.breakpoints[i]) * self.values[i]
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(v) => Err(invalid(format!("density value {v} is not a nonnegative real"))),
        None => Ok(()),
    }
}

impl Density {
    pub fn gaussian(mean: f64, var: f64) -> Self {
        Density::Gaussian { mean, var, scale: 1.0 }
    }

    pub fn constant(c: f64) -> Self {
        Density::Affine { slope: 0.0, intercept: c }
    }

    /// Validate parameters and nonnegativity on `support`.
    pub fn validate(&self, support: &Interval) -> Result<()> {
        match self {
            Density::Zero | Density::Table(_) | Density::Steps(_) => Ok(()),
            Density::Gaussian { mean, var, scale } => {
                if !(mean.is_finite() && var.is_finite() && *var > 0.0) {
                    return Err(invalid(format!("gaussian needs finite mean and positive variance, got var {var}")));
                }
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(invalid(format!("gaussian scale {scale} is not a nonnegative real")));
                }
                Ok(())
            }
            Density::Affine { slope, intercept } => {
                if !(slope.is_finite() && intercept.is_finite()) {
                    return Err(invalid("affine density needs finite coefficients"));
                }
                let lo = slope * support.lo + intercept;
                let hi = slope * support.hi + intercept;
                if lo < -1e-15 || hi < -1e-15 {
                    return Err(invalid(format!("affine density is negative on [{}, {}]", support.lo, support.hi)));
                }
                Ok(())
            }
            Density::Masked { base, .. } => base.validate(support),
        }
    }

    /// Right-continuous value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Density::Zero => 0.0,
            Density::Gaussian { mean, var, scale } => scale * normal_pdf(x, *mean, var.sqrt()),
            Density::Affine { slope, intercept } => (slope * x + intercept).max(0.0),
            Density::Table(t) => t.eval(x),
            Density::Steps(t) => t.eval(x),
            Density::Masked { base, keep } => {
                if keep.contains(x, f64::NAN) {
                    base.eval(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Left limit at `x`.
    pub fn eval_left(&self, x: f64) -> f64 {
        match self {
            Density::Table(t) => t.eval_left(x),
            Density::Steps(t) => t.eval_left(x),
            Density::Masked { base, keep } => {
                if keep.parts().iter().any(|p| p.lo < x && x <= p.hi) {
                    base.eval_left(x)
                } else {
                    0.0
                }
            }
            _ => self.eval(x),
        }
    }

    /// `∫_a^b` of the density.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Density::Zero => 0.0,
            Density::Gaussian { mean, var, scale } => scale * normal_mass(a, b, *mean, var.sqrt()),
            Density::Affine { slope, intercept } => {
                (b - a) * (0.5 * slope * (a + b) + intercept)
            }
            Density::Table(t) => (t.primitive(b) - t.primitive(a)).max(0.0),
            Density::Steps(t) => (t.primitive(b) - t.primitive(a)).max(0.0),
            Density::Masked { base, keep } => crate::sum::csum(
                keep.parts()
                    .iter()
                    .filter_map(|p| p.intersect(&Interval { lo: a, hi: b }))
                    .map(|p| base.integral(p.lo, p.hi)),
            ),
        }
    }

    /// Points where the density may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Density::Table(t) => t.breakpoints().to_vec(),
            Density::Steps(t) => t.breakpoints().to_vec(),
            Density::Masked { base, keep } => {
                let mut b = base.breakpoints();
                b.extend(keep.boundaries());
                b.sort_by(f64::total_cmp);
                b.dedup();
                b
            }
            _ => Vec::new(),
        }
    }

    /// Characteristic length of variation, if any (used to size panels).
    pub fn scale_length(&self) -> Option<f64> {
        match self {
            Density::Gaussian { var, .. } => Some(var.sqrt()),
            Density::Masked { base, .. } => base.scale_length(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_exact_integrals() {
        let t = Density::Table(PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap());
        assert_eq!(t.integral(0.0, 3.0), 3.0);
        assert!((t.integral(0.0, 0.5) - 0.25).abs() < 1e-16);
        assert!((t.integral(2.0, 10.0) - 0.5).abs() < 1e-16);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval_left(0.0), 0.0);
        assert_eq!(t.eval(3.0), 0.0);
    }

    #[test]
    fn uniform_lookup_matches_search() {
        let n = 100;
        let b: Vec<f64> = (0..=n).map(|i| -8.0 + 16.0 * i as f64 / n as f64).collect();
        let v: Vec<f64> = b.iter().map(|x| (-x * x / 2.0f64).exp()).collect();
        let t = PiecewiseLinear::new(b.clone(), v).unwrap();
        assert!(t.grid.uniform.is_some());
        for k in 0..1000 {
            let x = -8.0 + 16.0 * k as f64 / 1000.0;
            let i = b.partition_point(|&t| t <= x) - 1;
            assert_eq!(t.grid.locate(x), i.min(n - 1));
        }
    }

    #[test]
    fn steps_one_sided() {
        let s = Density::Steps(PiecewiseConstant::new(vec![0.0, 0.5, 1.0], vec![1.0, 3.0]).unwrap());
        assert_eq!(s.eval(0.5), 3.0);
        assert_eq!(s.eval_left(0.5), 1.0);
        assert_eq!(s.eval(1.0), 3.0);
        assert_eq!(s.integral(0.25, 0.75), 0.25 + 0.75);
    }

    #[test]
    fn masked_restricts() {
        let keep = IntervalSet::from_parts(vec![Interval::new(0.0, 0.25).unwrap(), Interval::new(0.5, 1.0).unwrap()]);
        let m = Density::Masked { base: Box::new(Density::constant(2.0)), keep };
        assert_eq!(m.integral(0.0, 1.0), 1.5);
        assert_eq!(m.eval(0.3), 0.0);
        assert_eq!(m.eval_left(0.25), 2.0);
        assert_eq!(m.breakpoints(), vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn json_kinds() {
        let d: Density = serde_json::from_str(r#"{"kind":"gaussian","mean":0,"var":2}"#).unwrap();
        assert_eq!(d, Density::gaussian(0.0, 2.0));
        let t: Density =
            serde_json::from_str(r#"{"kind":"table","breakpoints":[0,1],"values":[1,1]}"#).unwrap();
        let back: Density = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, back);
        assert!(serde_json::from_str::<Density>(r#"{"kind":"table","breakpoints":[1,0],"values":[1,1]}"#).is_err());
    }
}
