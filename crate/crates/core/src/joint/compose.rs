//! Composition of joint measures through a shared middle space.

use rayon::prelude::*;

use super::{JointMeasure2D, Rect};
use crate::error::{invalid, Error, Result};
use crate::interval::{dedup_sorted, merge_preferring, uniform_breaks, Interval, IntervalPartition};
use crate::matrix::Matrix;
use crate::report::{ConvergenceReport, LevelRecord};
use crate::sum::{neumaier_add, NeumaierSum};

/// Deepest level used for bracket subcells.
const BRACKET_DEPTH_CAP: u32 = 15;
const MARGINAL_CELLS: usize = 64;

#[derive(Debug, Clone)]
pub struct ComposeConfig {
    /// Stop once the cumulative masses of two successive levels differ by
    /// less than this everywhere on the output grid.
    pub tol: f64,
    pub max_depth: u32,
    pub min_depth: u32,
    /// Uniform output cells along an axis without natural grid lines.
    pub output_cells: usize,
    /// Allowed cumulative difference between the shared marginals.
    pub marginal_tol: f64,
    /// Rectangle whose value and brackets are traced per level (default: all).
    pub probe: Option<Rect>,
    pub extra_left_breaks: Vec<f64>,
    pub extra_right_breaks: Vec<f64>,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            tol: 1e-3,
            max_depth: 14,
            min_depth: 2,
            output_cells: 256,
            marginal_tol: 1e-4,
            probe: None,
            extra_left_breaks: Vec::new(),
            extra_right_breaks: Vec::new(),
        }
    }
}

impl ComposeConfig {
    pub fn with_tol(tol: f64, max_depth: u32) -> Self {
        ComposeConfig { tol, max_depth, min_depth: 2.min(max_depth), ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid(format!("tolerance {} must be positive", self.tol)));
        }
        if !(1..=24).contains(&self.max_depth) {
            return Err(invalid(format!("max depth {} outside [1, 24]", self.max_depth)));
        }
        if self.min_depth > self.max_depth {
            return Err(invalid("min depth exceeds max depth"));
        }
        if self.output_cells == 0 {
            return Err(invalid("output grid needs at least one cell"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ComposeOutcome {
    pub joint: JointMeasure2D,
    pub report: ConvergenceReport,
}

/// `(θ∘η)(A×C) = lim Σ_{B, ν(B)>0} θ(A×B)·η(B×C)/ν(B)`, with `ν` the shared
/// marginal; returns an error if the chain does not converge.
pub fn compose(theta: &JointMeasure2D, eta: &JointMeasure2D, cfg: &ComposeConfig) -> Result<(JointMeasure2D, ConvergenceReport)> {
    let out = compose_with(theta, eta, cfg)?;
    if !out.report.converged {
        return Err(Error::NonConvergence {
            levels: out.report.levels.len(),
            achieved: out.report.achieved_tol,
            tolerance: cfg.tol,
        });
    }
    Ok((out.joint, out.report))
}

/// As [`compose`], but returns the last level with `converged = false`
/// instead of failing when `max_depth` is reached.
///
/// The mediating partition at depth `d` is the dyadic grid with `2^d` cells
/// merged with the grid lines of piecewise-constant arguments. `ν(B)` is the
/// mean of `θ(X×B)` and `η(B×Z)`, which keeps the construction symmetric
/// under transposition. The result is a grid joint on the output grid.
pub fn compose_with(theta: &JointMeasure2D, eta: &JointMeasure2D, cfg: &ComposeConfig) -> Result<ComposeOutcome> {
    cfg.validate()?;
    let shared = theta.y_support();
    let other = eta.x_support();
    let tol_s = 1e-9 * (1.0 + shared.len());
    if (shared.lo - other.lo).abs() > tol_s || (shared.hi - other.hi).abs() > tol_s {
        return Err(Error::DimensionMismatch {
            expected: format!("middle space [{}, {}]", shared.lo, shared.hi),
            found: format!("[{}, {}]", other.lo, other.hi),
        });
    }
    check_marginals(theta, eta, shared, cfg.marginal_tol)?;

    let mut report = ConvergenceReport::new();
    if eta.is_identity() || theta.is_identity() {
        report.converged = true;
        report.achieved_tol = 0.0;
        let joint = if eta.is_identity() { theta.clone() } else { eta.clone() };
        return Ok(ComposeOutcome { joint, report });
    }

    let (tx, ty) = theta.grid_breaks();
    let (ex, ez) = eta.grid_breaks();
    let xs = output_breaks(theta.x_support(), tx, &cfg.extra_left_breaks, cfg.output_cells);
    let zs = output_breaks(eta.y_support(), ez, &cfg.extra_right_breaks, cfg.output_cells);
    let mut natural: Vec<f64> = ty.into_iter().flatten().chain(ex.into_iter().flatten()).collect();
    natural.sort_by(f64::total_cmp);
    let natural = dedup_sorted(natural, 1e-12 * shared.len());
    let mediating = |d: u32| merge_preferring(&uniform_breaks(shared, 1usize << d), &natural, 1e-12 * shared.len());


    let mut previous: Option<Matrix> = None;
    let mut zeta = Matrix::zeros(xs.len() - 1, zs.len() - 1);
    for d in cfg.min_depth..=cfg.max_depth {
        let bs = mediating(d);
        let l = theta.strip_matrix(&xs, &bs);
        let r = eta.strip_matrix(&bs, &zs);
        let left = l.col_sums();
        let right = r.row_sums();
        let nu: Vec<f64> = left.iter().zip(&right).map(|(a, b)| 0.5 * (a + b)).collect();
        zeta = mediate(&l, &r, &nu);
        let cdf = cumulative(&zeta);
        report.levels.push(LevelRecord { level: d as usize, epsilon: None, cells: bs.len() - 1, value: 0.0, lower: 0.0, upper: 0.0 });
        if let Some(prev) = &previous {
            report.achieved_tol = cdf.max_abs_diff(prev);
            if report.achieved_tol < cfg.tol {
                report.converged = true;
                break;
            }
        }
        previous = Some(cdf);
    }
    // Brackets of every level share the subcells one level below the last,
    // which keeps the upper brackets nonincreasing.
    let deepest = report.levels.last().map_or(cfg.min_depth, |r| r.level as u32);
    let fine = mediating((deepest + 1).min(BRACKET_DEPTH_CAP).max(deepest));
    let probe = cfg.probe.unwrap_or(Rect { x: theta.x_support(), y: eta.y_support() });
    let brackets = Brackets::new(theta, eta, &probe, &fine);
    for r in &mut report.levels {
        (r.value, r.lower, r.upper) = brackets.at(&mediating(r.level as u32));
    }
    let joint = JointMeasure2D::grid(IntervalPartition::new(xs)?, IntervalPartition::new(zs)?, zeta)?;
    Ok(ComposeOutcome { joint, report })
}

fn check_marginals(theta: &JointMeasure2D, eta: &JointMeasure2D, shared: Interval, tol: f64) -> Result<()> {
    let b = uniform_breaks(shared, MARGINAL_CELLS);
    let r = theta.right_masses(&b);
    let l = eta.left_masses(&b);
    let (mut a, mut c) = (NeumaierSum::new(), NeumaierSum::new());
    let mut defect: f64 = 0.0;
    for (x, y) in r.iter().zip(&l) {
        a.add(*x);
        c.add(*y);
        defect = defect.max((a.value() - c.value()).abs());
    }
    if defect > tol {
        return Err(Error::MarginalMismatch { max_defect: defect, tolerance: tol });
    }
    Ok(())
}

fn output_breaks(support: Interval, grid: Option<Vec<f64>>, extra: &[f64], cells: usize) -> Vec<f64> {
    let base = grid.unwrap_or_else(|| uniform_breaks(support, cells));
    let extra: Vec<f64> = extra.iter().copied().filter(|&x| x > support.lo && x < support.hi).collect();
    merge_preferring(&base, &extra, 1e-12 * support.len())
}

/// `ζ = L · diag(1/ν) · R`, skipping `ν(B) ≤ 0`; each entry is a compensated
/// sum in mediating-cell order.
fn mediate(l: &Matrix, r: &Matrix, nu: &[f64]) -> Matrix {
    let (nx, nb) = l.shape();
    let nz = r.cols();
    let rows: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let mut s = vec![0.0; nz];
            let mut c = vec![0.0; nz];
            let li = l.row(i);
            for b in 0..nb {
                if !(nu[b] > 0.0) || li[b] == 0.0 {
                    continue;
                }
                let coef = li[b] / nu[b];
                for ((sk, ck), rk) in s.iter_mut().zip(c.iter_mut()).zip(r.row(b)) {
                    neumaier_add(sk, ck, coef * rk);
                }
            }
            s.iter().zip(&c).map(|(a, b)| a + b).collect()
        })
        .collect();
    Matrix::from_vec(nx, nz, rows.concat()).expect("shape")
}

fn cumulative(m: &Matrix) -> Matrix {
    let (n, k) = m.shape();
    let mut out = Matrix::zeros(n, k);
    for i in 0..n {
        let mut run = NeumaierSum::new();
        for j in 0..k {
            run.add(m[(i, j)]);
            out[(i, j)] = run.value() + if i > 0 { out[(i - 1, j)] } else { 0.0 };
        }
    }
    out
}

/// Probe-rectangle ratios on the finest subcells, aggregated to each level.
struct Brackets {
    fine: Vec<f64>,
    /// `θ(A×B')`, `η(B'×C)` and `ν(B')` per fine cell.
    f: Vec<f64>,
    g: Vec<f64>,
    nu: Vec<f64>,
}

impl Brackets {
    fn new(theta: &JointMeasure2D, eta: &JointMeasure2D, probe: &Rect, fine: &[f64]) -> Self {
        let (x, z) = (theta.x_support(), eta.y_support());
        let f = theta.strip_matrix(&[probe.x.lo, probe.x.hi], fine).row(0).to_vec();
        let g = eta.strip_matrix(fine, &[probe.y.lo, probe.y.hi]).row_sums();
        let left = if probe.x == x { f.clone() } else { theta.strip_matrix(&[x.lo, x.hi], fine).row(0).to_vec() };
        let right = if probe.y == z { g.clone() } else { eta.strip_matrix(fine, &[z.lo, z.hi]).row_sums() };
        let nu = left.iter().zip(&right).map(|(a, b)| 0.5 * (a + b)).collect();
        Brackets { fine: fine.to_vec(), f, g, nu }
    }

    /// `(Σ θ(A×B)η(B×C)/ν(B), Σ inf f·inf g·ν(B), Σ sup f·sup g·ν(B))`
    /// over the cells `B` of `breaks`, with `f = θ(A×·)/ν` and
    /// `g = η(·×C)/ν` bounded over the fine subcells of each `B`.
    fn at(&self, breaks: &[f64]) -> (f64, f64, f64) {
        let (mut value, mut lower, mut upper) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
        let mut k = 0;
        for w in breaks.windows(2) {
            let (mut tf, mut tg, mut tn) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
            let (mut fmin, mut fmax, mut gmin, mut gmax) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
            while k + 1 < self.fine.len() && self.fine[k + 1] <= w[1] {
                if self.nu[k] > 0.0 {
                    let (rf, rg) = (self.f[k] / self.nu[k], self.g[k] / self.nu[k]);
                    fmin = fmin.min(rf);
                    fmax = fmax.max(rf);
                    gmin = gmin.min(rg);
                    gmax = gmax.max(rg);
                }
                tf.add(self.f[k]);
                tg.add(self.g[k]);
                tn.add(self.nu[k]);
                k += 1;
            }
            let n = tn.value();
            if n > 0.0 {
                value.add(tf.value() * tg.value() / n);
                lower.add(fmin * gmin * n);
                upper.add(fmax * gmax * n);
            }
        }
        (value.value(), lower.value(), upper.value())
    }
}

fn check_disjoint(rects: &[Rect]) -> Result<()> {
    for (i, a) in rects.iter().enumerate() {
        for b in &rects[i + 1..] {
            if a.intersect(b).is_some_and(|r| r.area() > 0.0) {
                return Err(invalid("rectangles in a family must be pairwise disjoint"));
            }
        }
    }
    Ok(())
}

/// `|ζ(U) − Σ ζ(Rᵢ)|` for disjoint rectangles `Rᵢ` tiling the rectangle `U`.
pub fn additivity_check(zeta: &JointMeasure2D, family: &[Rect], union: Option<&Rect>) -> Result<f64> {
    let union = match union {
        None if family.is_empty() => return Ok(0.0),
        None => return Err(invalid("a nonempty family needs its union")),
        Some(u) => u,
    };
    check_disjoint(family)?;
    let tol = 1e-12 * (1.0 + union.area());
    if family.iter().any(|r| !r.within(union, tol)) {
        return Err(invalid("rectangle outside the union"));
    }
    let area: f64 = family.iter().map(Rect::area).sum();
    if (area - union.area()).abs() > 1e-9 * (1.0 + union.area()) {
        return Err(invalid("family does not cover its union"));
    }
    let mut s = NeumaierSum::new();
    for r in family {
        s.add(zeta.rect(r)?);
    }
    Ok((zeta.rect(union)? - s.value()).abs())
}

/// True when the values of a decreasing sequence of disjoint rectangle
/// unions drop below `10·tol`.
pub fn shrink_to_empty_check(zeta: &JointMeasure2D, seq: &[Vec<Rect>], tol: f64) -> Result<bool> {
    for w in seq.windows(2) {
        let nested = w[1].iter().all(|r| w[0].iter().any(|o| r.within(o, 1e-12)));
        if !nested {
            return Err(invalid("sequence is not decreasing"));
        }
    }
    for u in seq {
        check_disjoint(u)?;
        let mut s = NeumaierSum::new();
        for r in u {
            s.add(zeta.rect(r)?);
        }
        if s.value() < 10.0 * tol {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{compose_joints, DiscreteJoint};
    use crate::measure::Measure1D;

    fn part(n: usize) -> IntervalPartition {
        IntervalPartition::uniform(Interval::new(0.0, n as f64).unwrap(), n)
    }

    #[test]
    fn discrete_embeds_compose_exactly() {
        let a = DiscreteJoint::from_rows(&[vec![0.1, 0.2, 0.0], vec![0.3, 0.1, 0.3]]).unwrap();
        let y = a.right_marginal();
        let b = DiscreteJoint::from_rows(&[
            vec![0.4 * y.weights()[0], 0.6 * y.weights()[0]],
            vec![0.5 * y.weights()[1], 0.5 * y.weights()[1]],
            vec![0.2 * y.weights()[2], 0.8 * y.weights()[2]],
        ])
        .unwrap();
        let t = JointMeasure2D::discrete(part(2), part(3), a.clone()).unwrap();
        let e = JointMeasure2D::discrete(part(3), part(2), b.clone()).unwrap();
        let (z, rep) = compose(&t, &e, &ComposeConfig::default()).unwrap();
        let oracle = compose_joints(&a, &b).unwrap();
        let JointMeasure2D::Density(g) = z else { panic!() };
        assert!(g.cells().max_abs_diff(oracle.cells()) < 1e-15);
        assert!(rep.converged);
    }

    #[test]
    fn identity_short_circuit() {
        let a = DiscreteJoint::from_rows(&[vec![0.5, 0.0], vec![0.25, 0.25]]).unwrap();
        let t = JointMeasure2D::discrete(part(2), part(2), a).unwrap();
        let nu = t.right_marginal().unwrap();
        let id = JointMeasure2D::diagonal(nu);
        let (z, _) = compose(&t, &id, &ComposeConfig::default()).unwrap();
        assert_eq!(z, t);
    }

    #[test]
    fn mismatch_is_reported() {
        let a = DiscreteJoint::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let b = DiscreteJoint::from_rows(&[vec![0.9], vec![0.1]]).unwrap();
        let t = JointMeasure2D::discrete(part(1), part(2), a).unwrap();
        let e = JointMeasure2D::discrete(part(2), part(1), b).unwrap();
        match compose(&t, &e, &ComposeConfig::default()) {
            Err(Error::MarginalMismatch { max_defect, .. }) => assert!((max_defect - 0.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn family_checks() {
        let leb = Measure1D::lebesgue(Interval::new(0.0, 1.0).unwrap());
        let z = JointMeasure2D::diagonal(leb);
        assert_eq!(additivity_check(&z, &[], None).unwrap(), 0.0);
        let u = Rect::new(Interval::new(0.0, 1.0).unwrap(), Interval::new(0.0, 1.0).unwrap());
        let halves = [
            Rect::new(Interval::new(0.0, 0.5).unwrap(), u.y),
            Rect::new(Interval::new(0.5, 1.0).unwrap(), u.y),
        ];
        assert!(additivity_check(&z, &halves, Some(&u)).unwrap() < 1e-15);
        assert!(additivity_check(&z, &[halves[0], halves[0]], Some(&u)).is_err());
        assert!(shrink_to_empty_check(&z, &[vec![], vec![]], 1e-3).unwrap());
        assert!(shrink_to_empty_check(&z, &[vec![halves[0]], vec![u]], 1e-3).is_err());
    }
}
