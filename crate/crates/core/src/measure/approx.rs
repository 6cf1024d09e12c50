//! Ratio sets, level-set partitions, step-function approximants of the
//! Radon–Nikodym derivative, the Lebesgue decomposition and pair-product
//! limits along refinement chains.
//!
//! Inside refinement chains every atom location of the measures involved is
//! its own point cell; interval cells are understood with those points
//! removed, so their masses are density masses only.

use serde::{Deserialize, Serialize};

use super::{Density, Measure1D};
use crate::error::{invalid, Error, Result};
use crate::interval::{dedup_sorted, Interval, IntervalPartition, IntervalSet};
use crate::report::{ConvergenceReport, LevelRecord};
use crate::sum::NeumaierSum;

/// Hard limit on thresholds per level-set partition.
pub const LEVEL_CAP: usize = 1 << 16;
/// Under [`ThresholdScheme::Auto`], logarithmic thresholds are used while
/// their count stays within this bound.
const AUTO_LOG_LIMIT: usize = 4096;
const GOLDEN_STEPS: usize = 48;
const SCAN_MIN: usize = 64;

pub const DEFAULT_SCHEDULE: [f64; 12] = [
    0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125,
    0.0009765625, 0.00048828125, 0.000244140625,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdScheme {
    /// `ε·ln k`, k ≥ 2: both spread bounds hold.
    Logarithmic,
    /// `ε·k`, k ≥ 1: only the first spread bound holds.
    Linear,
    /// Logarithmic when it needs at most 4096 thresholds, else linear.
    Auto,
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub schedule: Vec<f64>,
    pub scheme: ThresholdScheme,
    /// Partition joined into every level.
    pub base: Option<IntervalPartition>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { schedule: DEFAULT_SCHEDULE.to_vec(), scheme: ThresholdScheme::Auto, base: None }
    }
}

impl ChainConfig {
    pub fn with_schedule(schedule: Vec<f64>) -> Self {
        ChainConfig { schedule, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::EmptySchedule);
        }
        if self.schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(invalid("schedule entries must be positive"));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("schedule must be strictly decreasing"));
        }
        Ok(())
    }
}

fn same_support(a: &Measure1D, b: &Measure1D) -> Result<Interval> {
    let (s, t) = (a.support(), b.support());
    if s != t {
        return Err(Error::DimensionMismatch {
            expected: format!("support [{}, {}]", s.lo, s.hi),
            found: format!("support [{}, {}]", t.lo, t.hi),
        });
    }
    Ok(s)
}

fn samples_per_piece(nu: &Measure1D, mu: &Measure1D) -> usize {
    nu.quadrature().max(mu.quadrature()).max(2)
}

/// Density ratio from one-sided density values; `None` where both vanish.
fn ratio(nd: f64, md: f64) -> Option<f64> {
    if md > 0.0 {
        Some(nd / md)
    } else if nd > 0.0 {
        Some(f64::INFINITY)
    } else {
        None
    }
}

fn density_cuts(nu: &Measure1D, mu: &Measure1D, lo: f64, hi: f64) -> Vec<f64> {
    let mut cuts: Vec<f64> = nu
        .density()
        .breakpoints()
        .into_iter()
        .chain(mu.density().breakpoints())
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

#[derive(Debug, Clone, Copy)]
struct Extrema {
    inf: f64,
    sup: f64,
}

impl Extrema {
    fn empty() -> Self {
        Extrema { inf: f64::INFINITY, sup: f64::NEG_INFINITY }
    }

    fn push(&mut self, r: f64) {
        self.inf = self.inf.min(r);
        self.sup = self.sup.max(r);
    }

    fn is_empty(&self) -> bool {
        self.inf > self.sup
    }
}

fn golden(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // Maximizes f on [lo, hi]; returns the best value seen.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.max(fd);
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
            best = best.max(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
            best = best.max(fd);
        }
    }
    best
}

/// Extrema of the density ratio over `[lo, hi]` where `μ` has density mass.
///
/// Returns `None` when `μ` has no density mass there. `sup = +∞` when `ν`
/// has density mass on a part where `μ`'s density vanishes.
fn density_extrema(nu: &Measure1D, mu: &Measure1D, lo: f64, hi: f64) -> Option<Extrema> {
    if !(mu.density_mass(lo, hi) > 0.0) {
        return None;
    }
    let k = samples_per_piece(nu, mu);
    let mut ext = Extrema::empty();
    let cuts = density_cuts(nu, mu, lo, hi);
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if !(mu.density_mass(u, v) > 0.0) {
            if nu.density_mass(u, v) > 0.0 {
                ext.push(f64::INFINITY);
            }
            continue;
        }
        let at = |j: usize| -> (f64, Option<f64>) {
            if j == 0 {
                (u, ratio(nu.density_at(u), mu.density_at(u)))
            } else if j == k {
                (v, ratio(nu.density_left(v), mu.density_left(v)))
            } else {
                let x = u + (v - u) * j as f64 / k as f64;
                (x, ratio(nu.density_at(x), mu.density_at(x)))
            }
        };
        let pts: Vec<(f64, Option<f64>)> = (0..=k).map(at).collect();
        let mut arg_max = None;
        let mut arg_min = None;
        for (j, (_, r)) in pts.iter().enumerate() {
            if let Some(r) = *r {
                if arg_max.is_none_or(|i: usize| r > pts[i].1.unwrap()) {
                    arg_max = Some(j);
                }
                if arg_min.is_none_or(|i: usize| r < pts[i].1.unwrap()) {
                    arg_min = Some(j);
                }
                ext.push(r);
            }
        }
        let interior_ratio = |x: f64| ratio(nu.density_at(x), mu.density_at(x));
        if let Some(j) = arg_max.filter(|&j| j > 0 && j < k) {
            if ext.sup.is_finite() {
                let best = golden(pts[j - 1].0, pts[j + 1].0, |x| interior_ratio(x).unwrap_or(f64::NEG_INFINITY));
                ext.push(best);
            }
        }
        if let Some(j) = arg_min.filter(|&j| j > 0 && j < k) {
            let best = -golden(pts[j - 1].0, pts[j + 1].0, |x| interior_ratio(x).map_or(f64::NEG_INFINITY, |r| -r));
            if best.is_finite() {
                ext.push(best);
            }
        }
    }
    (!ext.is_empty()).then_some(ext)
}

/// Bounds `(inf, sup)` of `{ν(C)/μ(C) : C ⊆ B, μ(C) > 0}`.
///
/// The density part is handled by sampling the density ratio on a grid with
/// golden-section refinement around interior extrema. A `μ` atom contributes
/// its atom ratio; singular mass of `ν` in `B` makes the supremum infinite
/// unless `μ` is purely atomic on `B`.
pub fn ratio_bounds(nu: &Measure1D, mu: &Measure1D, b: &Interval) -> Result<(f64, f64)> {
    same_support(nu, mu)?;
    let (lo, hi) = (b.lo, b.hi);
    if !(mu.mass_in(lo, hi) > 0.0) {
        return Err(Error::EmptyRatioSet { lo, hi });
    }
    let mut ext = Extrema::empty();
    let mut singular = NeumaierSum::new();
    for &(p, m) in nu.atoms_in(lo, hi) {
        if mu.atom_at(p) == 0.0 {
            singular.add(m);
        }
    }
    let dens = density_extrema(nu, mu, lo, hi);
    let mu_has_density = dens.is_some();
    match dens {
        Some(e) => {
            ext.push(e.inf);
            ext.push(e.sup);
        }
        None => singular.add(nu.density_mass(lo, hi)),
    }
    let singular = singular.value();
    for &(p, m) in mu.atoms_in(lo, hi) {
        let a = nu.atom_at(p);
        ext.push(a / m);
        if singular > 0.0 && !mu_has_density {
            ext.push((a + singular) / m);
        }
    }
    if singular > 0.0 && mu_has_density {
        ext.push(f64::INFINITY);
    }
    Ok((ext.inf, ext.sup))
}

/// Level-set partition with logarithmic thresholds `ε·ln k`.
pub fn level_set_partition(nu: &Measure1D, mu: &Measure1D, eps: f64) -> Result<IntervalPartition> {
    level_set_partition_with(nu, mu, eps, ThresholdScheme::Logarithmic).map(|(p, _)| p)
}

/// Level-set partition for the chosen scheme; also returns the scheme used.
///
/// Cells are bounded by density and atom breakpoints of both measures and by
/// the points where the density ratio crosses a threshold (found by
/// bisection between scan points). Each carrier cell is then checked
/// against the spread bounds and bisected until it satisfies them.
pub fn level_set_partition_with(
    nu: &Measure1D,
    mu: &Measure1D,
    eps: f64,
    scheme: ThresholdScheme,
) -> Result<(IntervalPartition, ThresholdScheme)> {
    let support = same_support(nu, mu)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(format!("epsilon {eps} must be positive")));
    }
    let mut forced: Vec<f64> = nu.natural_breaks();
    forced.extend(mu.natural_breaks());
    forced.sort_by(f64::total_cmp);
    forced.dedup();

    // Scan each smooth piece and collect ratio extrema.
    let k = samples_per_piece(nu, mu);
    let len = support.len();
    let mut scans: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut range = Extrema::empty();
    let cuts = density_cuts(nu, mu, support.lo, support.hi);
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if !(mu.density_mass(u, v) > 0.0) {
            continue;
        }
        if let Some(e) = density_extrema(nu, mu, u, v) {
            range.push(e.inf);
            range.push(e.sup);
        }
        let g = ((SCAN_MIN.max(4 * k) as f64) * (v - u) / len).ceil().max(k as f64) as usize;
        let nudge = 1e-9 * (v - u);
        let mut scan = Vec::with_capacity(g + 1);
        for j in 0..=g {
            let x = if j == g { v } else { u + (v - u) * j as f64 / g as f64 };
            let r = if j == 0 {
                ratio(nu.density_at(x), mu.density_at(x))
            } else if j == g {
                ratio(nu.density_left(x), mu.density_left(x))
            } else {
                ratio(nu.density_at(x), mu.density_at(x))
            };
            let r = match r {
                Some(r) if r.is_finite() => r,
                _ if j == 0 || j == g => {
                    let y = if j == 0 { x + nudge } else { x - nudge };
                    match ratio(nu.density_at(y), mu.density_at(y)) {
                        Some(r) if r.is_finite() => r,
                        _ => continue,
                    }
                }
                Some(_) => {
                    return Err(Error::RootFinding(format!("density ratio is infinite at {x}")));
                }
                None => continue,
            };
            scan.push((x, r));
        }
        scans.push(scan);
    }
    if !range.is_empty() && !range.sup.is_finite() {
        return Err(Error::RootFinding("density ratio is unbounded".into()));
    }
    let (thresholds, used) = if range.is_empty() {
        (Vec::new(), scheme)
    } else {
        thresholds(range.inf, range.sup, eps, scheme)?
    };

    let mut breaks = forced;
    let ratio_at = |x: f64| ratio(nu.density_at(x), mu.density_at(x)).unwrap_or(0.0);
    for scan in &scans {
        for w in scan.windows(2) {
            let ((x0, r0), (x1, r1)) = (w[0], w[1]);
            if r0 == r1 {
                continue;
            }
            let (lo_r, hi_r) = if r0 < r1 { (r0, r1) } else { (r1, r0) };
            let first = thresholds.partition_point(|&t| t <= lo_r);
            let last = thresholds.partition_point(|&t| t <= hi_r);
            for &t in &thresholds[first..last] {
                breaks.push(bisect(x0, x1, r0 < r1, t, &ratio_at));
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    let tol = 1e-13 * len;
    let breaks = dedup_sorted(breaks, tol);

    // A posteriori check; bisect offending cells.
    let check_second = used == ThresholdScheme::Logarithmic;
    let slack = 1e-9;
    let ok = |a: f64, b: f64| -> bool {
        match density_extrema(nu, mu, a, b) {
            None => true,
            Some(e) => {
                let spread = e.sup - e.inf;
                spread <= eps * (1.0 + slack) && (!check_second || spread * e.sup <= eps * eps * (1.0 + slack))
            }
        }
    };
    let mut out = Vec::with_capacity(breaks.len());
    out.push(breaks[0]);
    for w in breaks.windows(2) {
        let mut stack = vec![(w[0], w[1])];
        while let Some((a, b)) = stack.pop() {
            if b - a > 64.0 * tol && !ok(a, b) {
                let m = 0.5 * (a + b);
                stack.push((m, b));
                stack.push((a, m));
            } else {
                out.push(b);
            }
        }
    }
    Ok((IntervalPartition::new(out)?, used))
}

fn thresholds(rmin: f64, rmax: f64, eps: f64, scheme: ThresholdScheme) -> Result<(Vec<f64>, ThresholdScheme)> {
    let log_count = || -> f64 {
        let hi = (rmax / eps).exp().floor();
        let lo = (rmin / eps).exp().ceil().max(2.0);
        (hi - lo + 1.0).max(0.0)
    };
    let lin_count = || -> f64 {
        let hi = (rmax / eps).floor();
        let lo = (rmin / eps).ceil().max(1.0);
        (hi - lo + 1.0).max(0.0)
    };
    // Indices `k` of `ε·ln k` stay exact below 2^53 ≈ e^36.7.
    let log_exact = rmax / eps <= 36.0;
    let used = match scheme {
        ThresholdScheme::Auto => {
            if log_exact && log_count() <= AUTO_LOG_LIMIT as f64 {
                ThresholdScheme::Logarithmic
            } else {
                ThresholdScheme::Linear
            }
        }
        s => s,
    };
    if used == ThresholdScheme::Logarithmic && !log_exact {
        return Err(Error::TooManyLevels { count: log_count(), limit: LEVEL_CAP });
    }
    let count = if used == ThresholdScheme::Logarithmic { log_count() } else { lin_count() };
    if !(count <= LEVEL_CAP as f64) {
        return Err(Error::TooManyLevels { count, limit: LEVEL_CAP });
    }
    let t: Vec<f64> = if used == ThresholdScheme::Logarithmic {
        let lo = (rmin / eps).exp().ceil().max(2.0) as u64;
        (lo..lo + count as u64).map(|k| eps * (k as f64).ln()).collect()
    } else {
        let lo = (rmin / eps).ceil().max(1.0) as u64;
        (lo..lo + count as u64).map(|k| eps * k as f64).collect()
    };
    Ok((t, used))
}

/// Point in `[x0, x1]` where the ratio crosses `t`.
fn bisect(x0: f64, x1: f64, increasing: bool, t: f64, r: &impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (x0, x1);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let above = r(m) >= t;
        if above == increasing {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

/// Per-cell values of the upper and lower approximants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCell {
    pub loc: f64,
    pub upper: f64,
    pub lower: f64,
    pub carrier: bool,
}

/// Step functions `f⁺`, `f⁻` on a partition, with the carrier flags.
///
/// `points` holds degenerate cells at atom locations; interval cells are
/// taken with those points removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximantPair {
    pub partition: IntervalPartition,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub carrier: Vec<bool>,
    #[serde(default)]
    pub points: Vec<PointCell>,
}

impl ApproximantPair {
    fn point(&self, s: f64) -> Option<&PointCell> {
        self.points
            .binary_search_by(|p| p.loc.total_cmp(&s))
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn upper_at(&self, s: f64) -> f64 {
        if let Some(p) = self.point(s) {
            return p.upper;
        }
        self.partition.locate(s).map_or(0.0, |i| self.upper[i])
    }

    pub fn lower_at(&self, s: f64) -> f64 {
        if let Some(p) = self.point(s) {
            return p.lower;
        }
        self.partition.locate(s).map_or(0.0, |i| self.lower[i])
    }

    pub fn in_carrier(&self, s: f64) -> bool {
        if let Some(p) = self.point(s) {
            return p.carrier;
        }
        self.partition.locate(s).is_some_and(|i| self.carrier[i])
    }

    pub fn carrier_cells(&self) -> usize {
        self.carrier.iter().filter(|c| **c).count()
    }
}

/// Approximants on an interval partition, with values from [`ratio_bounds`]
/// on every cell of positive `μ` measure and zero elsewhere.
pub fn approximants(nu: &Measure1D, mu: &Measure1D, part: &IntervalPartition) -> Result<ApproximantPair> {
    let support = same_support(nu, mu)?;
    if part.support() != support {
        return Err(invalid("partition must span the measures' support"));
    }
    let n = part.len();
    let (mut upper, mut lower, mut carrier) = (vec![0.0; n], vec![0.0; n], vec![false; n]);
    for (i, c) in part.cells().enumerate() {
        if mu.mass_in(c.lo, c.hi) > 0.0 {
            let (inf, sup) = ratio_bounds(nu, mu, &c)?;
            upper[i] = sup;
            lower[i] = inf;
            carrier[i] = true;
        }
    }
    Ok(ApproximantPair { partition: part.clone(), upper, lower, carrier, points: Vec::new() })
}

/// Approximants with every atom location of `points` split off.
fn approximants_split(nu: &Measure1D, mu: &Measure1D, part: &IntervalPartition, points: &[f64]) -> ApproximantPair {
    let n = part.len();
    let (mut upper, mut lower, mut carrier) = (vec![0.0; n], vec![0.0; n], vec![false; n]);
    for (i, c) in part.cells().enumerate() {
        if let Some(e) = density_extrema(nu, mu, c.lo, c.hi) {
            upper[i] = e.sup;
            lower[i] = e.inf;
            carrier[i] = true;
        }
    }
    let points = points
        .iter()
        .map(|&p| {
            let m = mu.atom_at(p);
            let r = if m > 0.0 { nu.atom_at(p) / m } else { 0.0 };
            PointCell { loc: p, upper: r, lower: r, carrier: m > 0.0 }
        })
        .collect();
    ApproximantPair { partition: part.clone(), upper, lower, carrier, points }
}

fn atom_points(ms: &[&Measure1D]) -> Vec<f64> {
    let mut p: Vec<f64> = ms.iter().flat_map(|m| m.atoms().iter().map(|a| a.0)).collect();
    p.sort_by(f64::total_cmp);
    p.dedup();
    p
}

/// `D_n = D_{n−1} ⊔ L(ν_i, μ, ε_n)` for every numerator `ν_i`.
fn chain(nus: &[&Measure1D], mu: &Measure1D, cfg: &ChainConfig) -> Result<Vec<(f64, IntervalPartition)>> {
    cfg.validate()?;
    let support = mu.support();
    for nu in nus {
        same_support(nu, mu)?;
    }
    let tol = 1e-13 * support.len();
    let mut current = match &cfg.base {
        Some(b) if b.support() != support => return Err(invalid("base partition must span the support")),
        Some(b) => b.clone(),
        None => IntervalPartition::trivial(support),
    };
    let mut out = Vec::with_capacity(cfg.schedule.len());
    for &eps in &cfg.schedule {
        for nu in nus {
            let (l, _) = level_set_partition_with(nu, mu, eps, cfg.scheme)?;
            current = current.join(&l, tol);
        }
        out.push((eps, current.clone()));
    }
    Ok(out)
}

/// Finite union of intervals plus isolated points, minus excluded points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Carrier {
    pub intervals: IntervalSet,
    /// Atom locations of `μ` (always in the carrier).
    pub points: Vec<f64>,
    /// Atom locations of `ν` where `μ` has no atom.
    pub excluded: Vec<f64>,
}

impl Carrier {
    pub fn contains(&self, s: f64) -> bool {
        if self.points.contains(&s) {
            return true;
        }
        !self.excluded.contains(&s) && self.intervals.contains(s, f64::NAN)
    }
}

/// Step function with point overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub partition: IntervalPartition,
    pub values: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn eval(&self, s: f64) -> f64 {
        if let Ok(i) = self.points.binary_search_by(|p| p.0.total_cmp(&s)) {
            return self.points[i].1;
        }
        self.partition.locate(s).map_or(0.0, |i| self.values[i])
    }

    /// `∫_lo^hi f dμ`.
    pub fn integrate(&self, mu: &Measure1D, lo: f64, hi: f64) -> f64 {
        let mut s = NeumaierSum::new();
        for (i, c) in self.partition.cells().enumerate() {
            if let Some(x) = c.intersect(&Interval { lo, hi }) {
                if self.values[i] != 0.0 {
                    s.add(self.values[i] * mu.density_mass(x.lo, x.hi));
                }
            }
        }
        for &(p, m) in mu.atoms_in(lo, hi) {
            s.add(self.eval(p) * m);
        }
        s.value()
    }
}

#[derive(Debug, Clone)]
pub struct LebesgueDecomposition {
    /// `ν₀ = ν` restricted to the carrier.
    pub ac_part: Measure1D,
    /// `ν₁ = ν` restricted to the complement of the carrier.
    pub singular_part: Measure1D,
    pub carrier: Carrier,
    /// Final upper approximant (zero off the carrier).
    pub derivative: StepFunction,
    /// Approximants along the chain, coarse to fine.
    pub chain: Vec<ApproximantPair>,
    pub schedule: Vec<f64>,
}

/// Lebesgue decomposition of `ν` with respect to `μ` and the
/// Radon–Nikodym derivative of its absolutely continuous part, along the
/// level-set chain for `schedule`.
pub fn lrn_decompose(nu: &Measure1D, mu: &Measure1D, schedule: &[f64]) -> Result<LebesgueDecomposition> {
    lrn_decompose_with(nu, mu, &ChainConfig::with_schedule(schedule.to_vec()))
}

pub fn lrn_decompose_with(nu: &Measure1D, mu: &Measure1D, cfg: &ChainConfig) -> Result<LebesgueDecomposition> {
    let support = same_support(nu, mu)?;
    let parts = chain(&[nu], mu, cfg)?;
    let points = atom_points(&[nu, mu]);
    let pairs: Vec<ApproximantPair> =
        parts.iter().map(|(_, p)| approximants_split(nu, mu, p, &points)).collect();
    let last = pairs.last().expect("schedule is nonempty");

    let carrier_parts: Vec<Interval> = last
        .partition
        .cells()
        .zip(&last.carrier)
        .filter(|(_, c)| **c)
        .map(|(cell, _)| cell)
        .collect();
    let intervals = IntervalSet::from_parts(carrier_parts);
    let null_set = intervals.complement_within(&support);
    let mu_points: Vec<f64> = mu.atoms().iter().map(|a| a.0).collect();
    let excluded: Vec<f64> = nu.atoms().iter().map(|a| a.0).filter(|&p| mu.atom_at(p) == 0.0).collect();

    let masked = |keep: &IntervalSet| Density::Masked { base: Box::new(nu.density().clone()), keep: keep.clone() };
    let ac_atoms = nu.atoms().iter().copied().filter(|a| mu.atom_at(a.0) > 0.0).collect();
    let sing_atoms = nu.atoms().iter().copied().filter(|a| mu.atom_at(a.0) == 0.0).collect();
    let ac_part = Measure1D::new(support, masked(&intervals), ac_atoms, nu.quadrature())?;
    let singular_part = Measure1D::new(support, masked(&null_set), sing_atoms, nu.quadrature())?;

    let derivative = StepFunction {
        partition: last.partition.clone(),
        values: last.upper.clone(),
        points: last.points.iter().map(|p| (p.loc, if p.carrier { p.upper } else { 0.0 })).collect(),
    };
    Ok(LebesgueDecomposition {
        ac_part,
        singular_part,
        carrier: Carrier { intervals, points: mu_points, excluded },
        derivative,
        chain: pairs,
        schedule: cfg.schedule.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct LimitOutcome {
    pub value: f64,
    pub report: ConvergenceReport,
}

/// `lim Σ_{μ(B)>0} ν(B)·ξ(B)/μ(B)` along the level-set chain of both ratios,
/// stopping once successive levels differ by less than `tol`.
pub fn pair_product_limit(nu: &Measure1D, xi: &Measure1D, mu: &Measure1D, tol: f64) -> Result<(f64, ConvergenceReport)> {
    let out = pair_product_limit_with(nu, xi, mu, tol, &ChainConfig::default())?;
    if !out.report.converged {
        return Err(Error::NonConvergence {
            levels: out.report.levels.len(),
            achieved: out.report.achieved_tol,
            tolerance: tol,
        });
    }
    Ok((out.value, out.report))
}

/// As [`pair_product_limit`], but a chain that runs out before converging
/// returns its report with `converged = false`.
pub fn pair_product_limit_with(
    nu: &Measure1D,
    xi: &Measure1D,
    mu: &Measure1D,
    tol: f64,
    cfg: &ChainConfig,
) -> Result<LimitOutcome> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(invalid(format!("tolerance {tol} must be positive")));
    }
    cfg.validate()?;
    let points = atom_points(&[nu, xi, mu]);
    let mut report = ConvergenceReport::new();
    let mut previous: Option<f64> = None;
    let tol_join = 1e-13 * mu.support().len();
    let mut current = match &cfg.base {
        Some(b) => b.clone(),
        None => IntervalPartition::trivial(mu.support()),
    };
    same_support(nu, mu)?;
    same_support(xi, mu)?;
    for (level, &eps) in cfg.schedule.iter().enumerate() {
        for m in [nu, xi] {
            let (l, _) = level_set_partition_with(m, mu, eps, cfg.scheme)?;
            current = current.join(&l, tol_join);
        }
        let f = approximants_split(nu, mu, &current, &points);
        let g = approximants_split(xi, mu, &current, &points);
        let (mut value, mut lower, mut upper) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
        let mut upper_inf = false;
        for (i, c) in current.cells().enumerate() {
            let m = mu.density_mass(c.lo, c.hi);
            if !(m > 0.0) {
                continue;
            }
            value.add(nu.density_mass(c.lo, c.hi) * xi.density_mass(c.lo, c.hi) / m);
            lower.add(f.lower[i] * g.lower[i] * m);
            let u = f.upper[i] * g.upper[i];
            if u.is_finite() {
                upper.add(u * m);
            } else {
                upper_inf = true;
            }
        }
        for &p in &points {
            let m = mu.atom_at(p);
            if m > 0.0 {
                let (a, b) = (nu.atom_at(p), xi.atom_at(p));
                value.add(a * b / m);
                lower.add(a * b / m);
                upper.add(a * b / m);
            }
        }
        let value = value.value();
        report.levels.push(LevelRecord {
            level,
            epsilon: Some(eps),
            cells: current.len() + points.len(),
            value,
            lower: lower.value(),
            upper: if upper_inf { f64::INFINITY } else { upper.value() },
        });
        if let Some(prev) = previous {
            report.achieved_tol = (value - prev).abs();
            if report.achieved_tol < tol {
                report.converged = true;
                break;
            }
        }
        previous = Some(value);
    }
    if report.levels.iter().all(|r| r.upper.is_infinite()) {
        return Err(Error::UnboundedBracket);
    }
    let value = report.last().map_or(0.0, |r| r.value);
    Ok(LimitOutcome { value, report })
}
