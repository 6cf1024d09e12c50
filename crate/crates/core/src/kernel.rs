//! Markov kernels between real intervals.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval::{uniform_breaks, Interval, IntervalSet};
use crate::measure::{Density, Measure1D, PiecewiseLinear};
use crate::normal::{normal_mass, normal_pdf};

/// Target cells of a materialized pushforward.
pub const PUSHFORWARD_CELLS: usize = 1 << 12;
/// Source nodes of a composed kernel.
pub const COMPOSE_SOURCE_NODES: usize = 513;
/// Target cells of a composed kernel.
pub const COMPOSE_TARGET_CELLS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineMap {
    pub fn apply(&self, s: f64) -> f64 {
        self.slope * s + self.intercept
    }
}

/// Kernel whose rows are piecewise-linear densities on a shared target grid,
/// linearly interpolated between source nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    source_nodes: Vec<f64>,
    rows: Vec<PiecewiseLinear>,
}

#[derive(Serialize, Deserialize)]
struct RawTableKernel {
    source_nodes: Vec<f64>,
    target_breakpoints: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl Serialize for TableKernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawTableKernel {
            source_nodes: self.source_nodes.clone(),
            target_breakpoints: self.rows[0].breakpoints().to_vec(),
            rows: self.rows.iter().map(|r| r.values().to_vec()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TableKernel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTableKernel::deserialize(d)?;
        TableKernel::new(raw.source_nodes, raw.target_breakpoints, raw.rows).map_err(serde::de::Error::custom)
    }
}

impl TableKernel {
    pub fn new(source_nodes: Vec<f64>, target_breakpoints: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if source_nodes.len() < 2 || source_nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("source nodes must be strictly increasing with at least two entries"));
        }
        if rows.len() != source_nodes.len() {
            return Err(invalid("table kernel needs one row per source node"));
        }
        let rows = rows
            .into_iter()
            .map(|r| PiecewiseLinear::new(target_breakpoints.clone(), r))
            .collect::<Result<Vec<_>>>()?;
        Ok(TableKernel { source_nodes, rows })
    }

    pub fn source_nodes(&self) -> &[f64] {
        &self.source_nodes
    }

    pub fn target_breakpoints(&self) -> &[f64] {
        self.rows[0].breakpoints()
    }

    pub fn rows(&self) -> &[PiecewiseLinear] {
        &self.rows
    }

    /// Row index and interpolation weight for `s`, clamped to the nodes.
    fn bracket(&self, s: f64) -> (usize, f64) {
        let n = &self.source_nodes;
        if s <= n[0] {
            return (0, 0.0);
        }
        if s >= n[n.len() - 1] {
            return (n.len() - 2, 1.0);
        }
        let i = n.partition_point(|&x| x <= s) - 1;
        (i, (s - n[i]) / (n[i + 1] - n[i]))
    }
}

fn default_space() -> Interval {
    Interval { lo: -8.0, hi: 8.0 }
}

/// Parametric kernel families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelFamily {
    /// `N(slope·s + intercept, var)` truncated to `target` and renormalized.
    Gaussian {
        mean: AffineMap,
        var: f64,
        #[serde(default = "default_space")]
        source: Interval,
        #[serde(default = "default_space")]
        target: Interval,
    },
    Table(TableKernel),
    /// `P(s, ·) = δ_s`.
    Identity { space: Interval },
    /// `P(s, ·) = 𝟙_A(s)·inner(s, ·)`.
    Restricted { set: IntervalSet, inner: Box<KernelFamily> },
}

impl KernelFamily {
    pub fn gaussian(slope: f64, intercept: f64, var: f64, source: Interval, target: Interval) -> Result<Self> {
        let k = KernelFamily::Gaussian { mean: AffineMap { slope, intercept }, var, source, target };
        k.validate()?;
        Ok(k)
    }

    pub fn identity(space: Interval) -> Self {
        KernelFamily::Identity { space }
    }

    /// Subidentity kernel of `set` on `space`.
    pub fn restrict(space: Interval, set: IntervalSet) -> Self {
        KernelFamily::Restricted { set, inner: Box::new(KernelFamily::identity(space)) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelFamily::Gaussian { mean, var, source, target } => {
                if !(var.is_finite() && *var > 0.0) {
                    return Err(invalid(format!("kernel variance {var} must be positive")));
                }
                if !(mean.slope.is_finite() && mean.intercept.is_finite()) {
                    return Err(invalid("kernel mean must be finite"));
                }
                if source.is_empty() || target.is_empty() {
                    return Err(invalid("kernel source and target must be nondegenerate"));
                }
                Ok(())
            }
            KernelFamily::Table(_) => Ok(()),
            KernelFamily::Identity { space } => {
                if space.is_empty() {
                    return Err(invalid("identity space must be nondegenerate"));
                }
                Ok(())
            }
            KernelFamily::Restricted { inner, .. } => inner.validate(),
        }
    }

    pub fn source(&self) -> Interval {
        match self {
            KernelFamily::Gaussian { source, .. } => *source,
            KernelFamily::Table(t) => {
                let n = t.source_nodes();
                Interval { lo: n[0], hi: n[n.len() - 1] }
            }
            KernelFamily::Identity { space } => *space,
            KernelFamily::Restricted { inner, .. } => inner.source(),
        }
    }

    pub fn target(&self) -> Interval {
        match self {
            KernelFamily::Gaussian { target, .. } => *target,
            KernelFamily::Table(t) => {
                let b = t.target_breakpoints();
                Interval { lo: b[0], hi: b[b.len() - 1] }
            }
            KernelFamily::Identity { space } => *space,
            KernelFamily::Restricted { inner, .. } => inner.target(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, KernelFamily::Identity { .. })
    }

    /// Mean, standard deviation and normalizer of a gaussian row.
    fn gaussian_row(mean: &AffineMap, var: f64, target: &Interval, s: f64) -> (f64, f64, f64) {
        let m = mean.apply(s);
        let sd = var.sqrt();
        (m, sd, normal_mass(target.lo, target.hi, m, sd))
    }

    /// `P(s, [lo, hi))`, closed at the target's right end.
    pub fn mass(&self, s: f64, lo: f64, hi: f64) -> f64 {
        let mut out = [0.0];
        self.masses(s, &[lo, hi], &mut out);
        out[0]
    }

    /// `out[j] = P(s, [b_j, b_{j+1}))` for increasing breakpoints `b`.
    pub fn masses(&self, s: f64, b: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len() + 1, b.len());
        match self {
            KernelFamily::Gaussian { mean, var, target, .. } => {
                let (m, sd, z) = Self::gaussian_row(mean, *var, target, s);
                if !(z > 0.0) {
                    let p = m.clamp(target.lo, target.hi);
                    point_masses(p, target.hi, b, out);
                    return;
                }
                // One erfc per breakpoint: each stores its smaller tail.
                let tails: Vec<(f64, bool)> = b
                    .iter()
                    .map(|&x| {
                        let x = x.clamp(target.lo, target.hi);
                        if x >= m {
                            (normal_mass(x, f64::INFINITY, m, sd), true)
                        } else {
                            (normal_mass(f64::NEG_INFINITY, x, m, sd), false)
                        }
                    })
                    .collect();
                for j in 0..out.len() {
                    let ((ta, ua), (tb, ub)) = (tails[j], tails[j + 1]);
                    let v = match (ua, ub) {
                        (true, true) => ta - tb,
                        (false, false) => tb - ta,
                        (false, true) => 1.0 - ta - tb,
                        (true, false) => 0.0,
                    };
                    out[j] = (v / z).max(0.0);
                }
            }
            KernelFamily::Table(t) => {
                let (i, lam) = t.bracket(s);
                let (r0, r1) = (&t.rows[i], &t.rows[i + 1]);
                let mut p0 = r0.primitive(b[0]);
                let mut p1 = r1.primitive(b[0]);
                for j in 0..out.len() {
                    let q0 = r0.primitive(b[j + 1]);
                    let q1 = r1.primitive(b[j + 1]);
                    out[j] = ((1.0 - lam) * (q0 - p0) + lam * (q1 - p1)).max(0.0);
                    p0 = q0;
                    p1 = q1;
                }
            }
            KernelFamily::Identity { space } => point_masses(s, space.hi, b, out),
            KernelFamily::Restricted { set, inner } => {
                if set.contains(s, inner.source().hi) {
                    inner.masses(s, b, out);
                } else {
                    out.fill(0.0);
                }
            }
        }
    }

    /// `P(s, ·)` as a measure on the target.
    pub fn at(&self, s: f64) -> Result<Measure1D> {
        let target = self.target();
        match self {
            KernelFamily::Gaussian { mean, var, .. } => {
                let (m, sd, z) = Self::gaussian_row(mean, *var, &target, s);
                if !(z > 0.0) {
                    return Measure1D::new(target, Density::Zero, vec![(m.clamp(target.lo, target.hi), 1.0)], 16);
                }
                Measure1D::with_density(target, Density::Gaussian { mean: m, var: sd * sd, scale: 1.0 / z })
            }
            KernelFamily::Table(t) => {
                let (i, lam) = t.bracket(s);
                let values: Vec<f64> = t.rows[i]
                    .values()
                    .iter()
                    .zip(t.rows[i + 1].values())
                    .map(|(a, b)| (1.0 - lam) * a + lam * b)
                    .collect();
                Measure1D::with_density(target, Density::Table(PiecewiseLinear::new(t.target_breakpoints().to_vec(), values)?))
            }
            KernelFamily::Identity { .. } => Measure1D::new(target, Density::Zero, vec![(s, 1.0)], 16),
            KernelFamily::Restricted { set, inner } => {
                if set.contains(s, inner.source().hi) {
                    inner.at(s)
                } else {
                    Ok(Measure1D::zero(target))
                }
            }
        }
    }
}

fn point_masses(p: f64, closed_at: f64, b: &[f64], out: &mut [f64]) {
    for j in 0..out.len() {
        let iv = Interval { lo: b[j], hi: b[j + 1] };
        out[j] = if iv.contains(p, closed_at) { 1.0 } else { 0.0 };
    }
}

fn check_source(mu: &Measure1D, p: &KernelFamily) -> Result<()> {
    let (s, src) = (mu.support(), p.source());
    let tol = 1e-9 * (1.0 + src.len());
    if !s.within(&src, tol) {
        return Err(Error::DimensionMismatch {
            expected: format!("measure within kernel source [{}, {}]", src.lo, src.hi),
            found: format!("support [{}, {}]", s.lo, s.hi),
        });
    }
    Ok(())
}

/// Density values of `μ∘P` at `breaks`, plus any atoms of the result.
fn push_values(mu: &Measure1D, p: &KernelFamily, breaks: &[f64]) -> Result<(Vec<f64>, Vec<(f64, f64)>)> {
    let mut values = vec![0.0; breaks.len()];
    let mut atoms = Vec::new();
    let nodes = || {
        // Integrands here are smooth in s; panels of four default widths suffice.
        let mut n = mu.nodes(mu.support().lo, mu.support().hi, 4.0 * mu.default_panel());
        n.extend(mu.atoms().iter().copied());
        n
    };
    match p {
        KernelFamily::Gaussian { mean, var, target, .. } => {
            let sd = var.sqrt();
            let mut acc: Vec<crate::sum::NeumaierSum> = vec![Default::default(); breaks.len()];
            for (x, w) in nodes() {
                let (m, _, z) = KernelFamily::gaussian_row(mean, *var, target, x);
                if !(z > 0.0) {
                    atoms.push((m.clamp(target.lo, target.hi), w));
                    continue;
                }
                let c = w / z;
                for (a, &t) in acc.iter_mut().zip(breaks) {
                    if (t - m).abs() <= 40.0 * sd {
                        a.add(c * normal_pdf(t, m, sd));
                    }
                }
            }
            for (v, a) in values.iter_mut().zip(acc) {
                *v = a.value();
            }
        }
        KernelFamily::Table(t) => {
            let mut weights = vec![0.0; t.rows.len()];
            for (x, w) in nodes() {
                let (i, lam) = t.bracket(x);
                weights[i] += (1.0 - lam) * w;
                weights[i + 1] += lam * w;
            }
            for (i, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    for (v, &x) in values.iter_mut().zip(breaks) {
                        *v += w * t.rows[i].eval(x);
                    }
                }
            }
        }
        KernelFamily::Identity { .. } => {
            for (v, &x) in values.iter_mut().zip(breaks) {
                *v = mu.density_at(x);
            }
            atoms.extend(mu.atoms().iter().copied());
        }
        KernelFamily::Restricted { set, inner } => return push_values(&mu.restricted(set), inner, breaks),
    }
    Ok((values, atoms))
}

/// `(μ∘P)(B) = ∫ P(s, B) dμ(s)`, materialized as a piecewise-linear density
/// on a uniform grid of [`PUSHFORWARD_CELLS`] target cells.
///
/// Identity and subidentity kernels are applied exactly.
pub fn pushforward(mu: &Measure1D, p: &KernelFamily) -> Result<Measure1D> {
    pushforward_cells(mu, p, PUSHFORWARD_CELLS)
}

pub fn pushforward_cells(mu: &Measure1D, p: &KernelFamily, cells: usize) -> Result<Measure1D> {
    check_source(mu, p)?;
    match p {
        KernelFamily::Identity { .. } => return Ok(mu.clone()),
        KernelFamily::Restricted { set, inner } if inner.is_identity() => return Ok(mu.restricted(set)),
        KernelFamily::Restricted { set, inner } => return pushforward_cells(&mu.restricted(set), inner, cells),
        _ => {}
    }
    let target = p.target();
    let breaks = uniform_breaks(target, cells);
    let (values, atoms) = push_values(mu, p, &breaks)?;
    Measure1D::new(target, Density::Table(PiecewiseLinear::new(breaks, values)?), atoms, mu.quadrature())
}

/// `(P;Q)(s, C) = ∫ Q(t, C) P(s, dt)` as a table family.
pub fn compose_kernels(p: &KernelFamily, q: &KernelFamily) -> Result<KernelFamily> {
    compose_kernels_with(p, q, COMPOSE_SOURCE_NODES, COMPOSE_TARGET_CELLS)
}

pub fn compose_kernels_with(
    p: &KernelFamily,
    q: &KernelFamily,
    source_nodes: usize,
    target_cells: usize,
) -> Result<KernelFamily> {
    let (pt, qs) = (p.target(), q.source());
    let tol = 1e-9 * (1.0 + qs.len());
    if !pt.within(&qs, tol) {
        return Err(Error::DimensionMismatch {
            expected: format!("kernel target within [{}, {}]", qs.lo, qs.hi),
            found: format!("target [{}, {}]", pt.lo, pt.hi),
        });
    }
    if source_nodes < 2 || target_cells < 1 {
        return Err(invalid("composed kernel needs at least two source nodes and one target cell"));
    }
    match (p, q) {
        (KernelFamily::Identity { .. }, _) => return Ok(q.clone()),
        (_, KernelFamily::Identity { .. }) => return Ok(p.clone()),
        (KernelFamily::Restricted { set, inner }, _) => {
            let inner = compose_kernels_with(inner, q, source_nodes, target_cells)?;
            return Ok(KernelFamily::Restricted { set: set.clone(), inner: Box::new(inner) });
        }
        _ => {}
    }
    use rayon::prelude::*;
    let nodes = uniform_breaks(p.source(), source_nodes - 1);
    let breaks = uniform_breaks(q.target(), target_cells);
    let rows = nodes
        .par_iter()
        .map(|&s| {
            let (values, atoms) = push_values(&p.at(s)?, q, &breaks)?;
            if !atoms.is_empty() {
                return Err(Error::Unsupported("composed kernel rows with atoms".into()));
            }
            Ok(values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelFamily::Table(TableKernel::new(nodes, breaks, rows)?))
}
