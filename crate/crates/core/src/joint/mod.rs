//! Joint measures on products of real intervals.

mod compose;

pub use compose::{
    additivity_check, compose, compose_with, shrink_to_empty_check, ComposeConfig, ComposeOutcome,
};

use serde::{Deserialize, Serialize};

use crate::discrete::DiscreteJoint;
use crate::error::{invalid, Error, Result};
use crate::interval::{uniform_breaks, Interval, IntervalPartition, IntervalSet};
use crate::kernel::{pushforward, KernelFamily};
use crate::matrix::Matrix;
use crate::measure::{Density, Measure1D, PiecewiseConstant};
use crate::sum::NeumaierSum;

/// Axis-aligned rectangle `x × y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: Interval,
    pub y: Interval,
}

impl Rect {
    pub fn new(x: Interval, y: Interval) -> Self {
        Rect { x, y }
    }

    pub fn area(&self) -> f64 {
        self.x.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty() || self.y.is_empty()
    }

    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        Some(Rect { x: self.x.intersect(&o.x)?, y: self.y.intersect(&o.y)? })
    }

    pub fn within(&self, o: &Rect, tol: f64) -> bool {
        self.x.within(&o.x, tol) && self.y.within(&o.y, tol)
    }

    pub fn transpose(&self) -> Rect {
        Rect { x: self.y, y: self.x }
    }
}

/// Cell masses on a product grid, spread uniformly within each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridJoint {
    x: IntervalPartition,
    y: IntervalPartition,
    cells: Matrix,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    x: IntervalPartition,
    y: IntervalPartition,
    cells: Matrix,
}

impl TryFrom<RawGrid> for GridJoint {
    type Error = Error;

    fn try_from(r: RawGrid) -> Result<Self> {
        GridJoint::new(r.x, r.y, r.cells)
    }
}

impl From<GridJoint> for RawGrid {
    fn from(g: GridJoint) -> Self {
        RawGrid { x: g.x, y: g.y, cells: g.cells }
    }
}

impl GridJoint {
    pub fn new(x: IntervalPartition, y: IntervalPartition, cells: Matrix) -> Result<Self> {
        if cells.shape() != (x.len(), y.len()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} cells", x.len(), y.len()),
                found: format!("{}x{}", cells.rows(), cells.cols()),
            });
        }
        if let Some(v) = cells.data().iter().find(|v| **v < 0.0) {
            return Err(invalid(format!("cell mass {v} is negative")));
        }
        Ok(GridJoint { x, y, cells })
    }

    pub fn x(&self) -> &IntervalPartition {
        &self.x
    }

    pub fn y(&self) -> &IntervalPartition {
        &self.y
    }

    /// Cell masses.
    pub fn cells(&self) -> &Matrix {
        &self.cells
    }

    /// Mass density inside the cell containing `(s, t)`.
    pub fn density_at(&self, s: f64, t: f64) -> f64 {
        match (self.x.locate(s), self.y.locate(t)) {
            (Some(i), Some(j)) => self.cells[(i, j)] / (self.x.cell(i).len() * self.y.cell(j).len()),
            _ => 0.0,
        }
    }

    fn strip(&self, rows: &[f64], cols: &[f64]) -> Matrix {
        let ox = overlaps(self.x.breaks(), rows);
        let oy = overlaps(self.y.breaks(), cols);
        let mut out = Matrix::zeros(rows.len() - 1, cols.len() - 1);
        for (a, xs) in ox.iter().enumerate() {
            for &(i, fx) in xs {
                let row = self.cells.row(a);
                for (b, ys) in oy.iter().enumerate() {
                    let m = row[b] * fx;
                    if m == 0.0 {
                        continue;
                    }
                    for &(j, fy) in ys {
                        out[(i, j)] += m * fy;
                    }
                }
            }
        }
        out
    }

    fn marginal(support: Interval, part: &IntervalPartition, masses: Vec<f64>) -> Measure1D {
        let values = masses.iter().zip(part.cells()).map(|(m, c)| m / c.len()).collect();
        let d = PiecewiseConstant::new(part.breaks().to_vec(), values).expect("valid grid");
        Measure1D::with_density(support, Density::Steps(d)).expect("valid grid")
    }
}

/// For each cell of `src`, the cells of `dst` it overlaps and the fraction
/// of its length inside each.
fn overlaps(src: &[f64], dst: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); src.len() - 1];
    let mut j = 0;
    for (a, o) in out.iter_mut().enumerate() {
        let (lo, hi) = (src[a], src[a + 1]);
        let len = hi - lo;
        while j + 1 < dst.len() && dst[j + 1] <= lo {
            j += 1;
        }
        let mut k = j;
        while k + 1 < dst.len() && dst[k] < hi {
            let l = lo.max(dst[k]);
            let h = hi.min(dst[k + 1]);
            if h > l {
                o.push((k, (h - l) / len));
            }
            k += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscreteEmbed", into = "RawDiscreteEmbed")]
pub struct DiscreteEmbed {
    grid: GridJoint,
    joint: DiscreteJoint,
}

#[derive(Serialize, Deserialize)]
struct RawDiscreteEmbed {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<IntervalPartition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<IntervalPartition>,
    joint: DiscreteJoint,
}

impl TryFrom<RawDiscreteEmbed> for DiscreteEmbed {
    type Error = Error;

    fn try_from(r: RawDiscreteEmbed) -> Result<Self> {
        let (n, m) = r.joint.shape();
        let unit = |k: usize| IntervalPartition::uniform(Interval { lo: 0.0, hi: k as f64 }, k);
        DiscreteEmbed::new(r.x.unwrap_or_else(|| unit(n)), r.y.unwrap_or_else(|| unit(m)), r.joint)
    }
}

impl From<DiscreteEmbed> for RawDiscreteEmbed {
    fn from(d: DiscreteEmbed) -> Self {
        RawDiscreteEmbed { x: Some(d.grid.x), y: Some(d.grid.y), joint: d.joint }
    }
}

impl DiscreteEmbed {
    /// Mass of cell `(i, j)` spread uniformly over `x_i × y_j`.
    pub fn new(x: IntervalPartition, y: IntervalPartition, joint: DiscreteJoint) -> Result<Self> {
        let grid = GridJoint::new(x, y, joint.cells().clone())?;
        Ok(DiscreteEmbed { grid, joint })
    }

    pub fn joint(&self) -> &DiscreteJoint {
        &self.joint
    }

    pub fn grid(&self) -> &GridJoint {
        &self.grid
    }
}

/// Rectangle-evaluable joint measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum JointMeasure2D {
    Density(GridJoint),
    /// `θ(A×C) = ∫_A P(s, C) dμ(s)`.
    Kernel { base: Measure1D, kernel: KernelFamily },
    /// `θ(A×C) = μ(A∩C)`.
    Diagonal { base: Measure1D },
    Discrete(DiscreteEmbed),
    /// `θ†(C×A) = θ(A×C)`.
    Dagger { inner: Box<JointMeasure2D> },
}

impl JointMeasure2D {
    pub fn kernel(base: Measure1D, kernel: KernelFamily) -> Result<Self> {
        let (s, src) = (base.support(), kernel.source());
        if !s.within(&src, 1e-9 * (1.0 + src.len())) {
            return Err(Error::DimensionMismatch {
                expected: format!("base within kernel source [{}, {}]", src.lo, src.hi),
                found: format!("support [{}, {}]", s.lo, s.hi),
            });
        }
        kernel.validate()?;
        Ok(JointMeasure2D::Kernel { base, kernel })
    }

    pub fn diagonal(base: Measure1D) -> Self {
        JointMeasure2D::Diagonal { base }
    }

    pub fn discrete(x: IntervalPartition, y: IntervalPartition, joint: DiscreteJoint) -> Result<Self> {
        Ok(JointMeasure2D::Discrete(DiscreteEmbed::new(x, y, joint)?))
    }

    pub fn grid(x: IntervalPartition, y: IntervalPartition, cells: Matrix) -> Result<Self> {
        Ok(JointMeasure2D::Density(GridJoint::new(x, y, cells)?))
    }

    /// Validate payload invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            JointMeasure2D::Kernel { base, kernel } => Self::kernel(base.clone(), kernel.clone()).map(|_| ()),
            JointMeasure2D::Dagger { inner } => inner.validate(),
            _ => Ok(()),
        }
    }

    pub fn x_support(&self) -> Interval {
        match self {
            JointMeasure2D::Density(g) => g.x.support(),
            JointMeasure2D::Discrete(d) => d.grid.x.support(),
            JointMeasure2D::Kernel { base, .. } | JointMeasure2D::Diagonal { base } => base.support(),
            JointMeasure2D::Dagger { inner } => inner.y_support(),
        }
    }

    pub fn y_support(&self) -> Interval {
        match self {
            JointMeasure2D::Density(g) => g.y.support(),
            JointMeasure2D::Discrete(d) => d.grid.y.support(),
            JointMeasure2D::Kernel { kernel, .. } => kernel.target(),
            JointMeasure2D::Diagonal { base } => base.support(),
            JointMeasure2D::Dagger { inner } => inner.x_support(),
        }
    }

    /// `θ†`: unwraps an existing dagger; diagonals are self-adjoint.
    pub fn dagger(&self) -> JointMeasure2D {
        match self {
            JointMeasure2D::Dagger { inner } => (**inner).clone(),
            JointMeasure2D::Diagonal { .. } => self.clone(),
            _ => JointMeasure2D::Dagger { inner: Box::new(self.clone()) },
        }
    }

    /// True for the identity joint `J𝟙` (also as a kernel joint or dagger).
    pub fn is_identity(&self) -> bool {
        match self {
            JointMeasure2D::Diagonal { .. } => true,
            JointMeasure2D::Kernel { base, kernel } => kernel.is_identity() && kernel.source() == base.support(),
            JointMeasure2D::Dagger { inner } => inner.is_identity(),
            _ => false,
        }
    }

    /// Grid lines of piecewise-constant variants along each axis.
    pub fn grid_breaks(&self) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        match self {
            JointMeasure2D::Density(g) => (Some(g.x.breaks().to_vec()), Some(g.y.breaks().to_vec())),
            JointMeasure2D::Discrete(d) => (Some(d.grid.x.breaks().to_vec()), Some(d.grid.y.breaks().to_vec())),
            JointMeasure2D::Dagger { inner } => {
                let (a, b) = inner.grid_breaks();
                (b, a)
            }
            _ => (None, None),
        }
    }

    /// `M[i][j] = θ([r_i, r_{i+1}) × [c_j, c_{j+1}))` for increasing breaks.
    pub fn strip_matrix(&self, rows: &[f64], cols: &[f64]) -> Matrix {
        assert!(rows.len() >= 2 && cols.len() >= 2, "strip needs at least one row and one column");
        match self {
            JointMeasure2D::Density(g) => g.strip(rows, cols),
            JointMeasure2D::Discrete(d) => d.grid.strip(rows, cols),
            JointMeasure2D::Dagger { inner } => inner.strip_matrix(cols, rows).transpose(),
            JointMeasure2D::Diagonal { base } => {
                let mut out = Matrix::zeros(rows.len() - 1, cols.len() - 1);
                let ov = overlaps(rows, cols);
                for (i, js) in ov.iter().enumerate() {
                    for &(j, _) in js {
                        let lo = rows[i].max(cols[j]);
                        let hi = rows[i + 1].min(cols[j + 1]);
                        out[(i, j)] = base.mass_in(lo, hi);
                    }
                }
                out
            }
            JointMeasure2D::Kernel { base, kernel } => {
                let nc = cols.len() - 1;
                let mut out = Matrix::zeros(rows.len() - 1, nc);
                let panel = base.default_panel();
                let mut buf = vec![0.0; nc];
                let mut acc: Vec<NeumaierSum> = vec![NeumaierSum::new(); nc];
                for i in 0..rows.len() - 1 {
                    let (lo, hi) = (rows[i], rows[i + 1]);
                    acc.iter_mut().for_each(|a| *a = NeumaierSum::new());
                    let mut nodes = base.nodes(lo, hi, panel);
                    nodes.extend(base.atoms_in(lo, hi).iter().copied());
                    for (x, w) in nodes {
                        kernel.masses(x, cols, &mut buf);
                        for (a, b) in acc.iter_mut().zip(&buf) {
                            if *b != 0.0 {
                                a.add(w * b);
                            }
                        }
                    }
                    for (o, a) in out.row_mut(i).iter_mut().zip(&acc) {
                        *o = a.value();
                    }
                }
                out
            }
        }
    }

    fn check_rect(&self, r: &Rect) -> Result<()> {
        let (sx, sy) = (self.x_support(), self.y_support());
        for (iv, s) in [(r.x, sx), (r.y, sy)] {
            if !iv.within(&s, 1e-12 * (1.0 + s.len())) {
                return Err(Error::OutOfSupport { lo: iv.lo, hi: iv.hi, support_lo: s.lo, support_hi: s.hi });
            }
        }
        Ok(())
    }

    pub fn rect(&self, r: &Rect) -> Result<f64> {
        self.check_rect(r)?;
        if r.is_empty() {
            return Ok(0.0);
        }
        Ok(self.strip_matrix(&[r.x.lo, r.x.hi], &[r.y.lo, r.y.hi])[(0, 0)])
    }

    /// `θ(A × C)` for finite unions of intervals.
    pub fn rect_measure(&self, a: &IntervalSet, c: &IntervalSet) -> Result<f64> {
        let mut s = NeumaierSum::new();
        for x in a.parts() {
            for y in c.parts() {
                s.add(self.rect(&Rect { x: *x, y: *y })?);
            }
        }
        Ok(s.value())
    }

    pub fn total(&self) -> f64 {
        let (x, y) = (self.x_support(), self.y_support());
        self.strip_matrix(&[x.lo, x.hi], &[y.lo, y.hi])[(0, 0)]
    }

    /// Left marginal `θ(· × Y)`.
    pub fn left_marginal(&self) -> Result<Measure1D> {
        match self {
            JointMeasure2D::Kernel { base, .. } | JointMeasure2D::Diagonal { base } => Ok(base.clone()),
            JointMeasure2D::Density(g) => Ok(GridJoint::marginal(g.x.support(), &g.x, g.cells.row_sums())),
            JointMeasure2D::Discrete(d) => Ok(GridJoint::marginal(d.grid.x.support(), &d.grid.x, d.grid.cells.row_sums())),
            JointMeasure2D::Dagger { inner } => inner.right_marginal(),
        }
    }

    /// Right marginal `θ(X × ·)`.
    pub fn right_marginal(&self) -> Result<Measure1D> {
        match self {
            JointMeasure2D::Kernel { base, kernel } => pushforward(base, kernel),
            JointMeasure2D::Diagonal { base } => Ok(base.clone()),
            JointMeasure2D::Density(g) => Ok(GridJoint::marginal(g.y.support(), &g.y, g.cells.col_sums())),
            JointMeasure2D::Discrete(d) => Ok(GridJoint::marginal(d.grid.y.support(), &d.grid.y, d.grid.cells.col_sums())),
            JointMeasure2D::Dagger { inner } => inner.left_marginal(),
        }
    }

    pub fn marginals(&self) -> Result<(Measure1D, Measure1D)> {
        Ok((self.left_marginal()?, self.right_marginal()?))
    }

    /// Masses of the right marginal on the cells of `breaks`.
    pub fn right_masses(&self, breaks: &[f64]) -> Vec<f64> {
        let x = self.x_support();
        self.strip_matrix(&[x.lo, x.hi], breaks).row(0).to_vec()
    }

    /// Masses of the left marginal on the cells of `breaks`.
    pub fn left_masses(&self, breaks: &[f64]) -> Vec<f64> {
        let y = self.y_support();
        self.strip_matrix(breaks, &[y.lo, y.hi]).row_sums()
    }

    /// Default uniform breaks along the left axis.
    pub fn uniform_x(&self, cells: usize) -> Vec<f64> {
        uniform_breaks(self.x_support(), cells)
    }
}
