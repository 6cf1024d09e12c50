use serde::Serialize;

use super::{MeanExpr, Predicate, Program};
use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalSet};
use crate::joint::{compose_with, ComposeConfig, JointMeasure2D, Rect};
use crate::kernel::{compose_kernels, pushforward, KernelFamily};
use crate::measure::{Density, Measure1D};
use crate::normal::normal_mass;
use crate::report::ConvergenceReport;

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub tol: f64,
    pub max_depth: u32,
    pub quadrature: usize,
    /// Working interval half-width in cumulative standard deviations.
    pub width: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { tol: 1e-3, max_depth: 14, quadrature: 16, width: 8.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub probability: f64,
    /// Mass of the observation event (1 without an observation).
    pub denominator: f64,
    pub converged: bool,
    /// Largest gaussian mass cut off by a working interval.
    pub truncation: f64,
    #[serde(serialize_with = "levels_json")]
    pub levels: ConvergenceReport,
}

fn levels_json<S: serde::Serializer>(r: &ConvergenceReport, s: S) -> std::result::Result<S::Ok, S::Error> {
    r.levels.serialize(s)
}

/// Per-variable working intervals, marginals and connecting kernels.
struct Chain {
    spaces: Vec<Interval>,
    marginals: Vec<Measure1D>,
    /// `kernels[i]` maps variable `i` to variable `i + 1`.
    kernels: Vec<KernelFamily>,
    truncation: f64,
}

fn build_chain(p: &Program, cfg: &EvalConfig) -> Result<Chain> {
    let moments = p.moments();
    let spaces: Vec<Interval> = moments
        .iter()
        .map(|&(m, v)| Interval::new(m - cfg.width * v.sqrt(), m + cfg.width * v.sqrt()))
        .collect::<Result<_>>()?;
    let truncation = moments
        .iter()
        .zip(&spaces)
        .map(|(&(m, v), s)| 1.0 - normal_mass(s.lo, s.hi, m, v.sqrt()))
        .fold(0.0, f64::max);
    let first = &p.assignments[0];
    let MeanExpr::Literal(m0) = first.mean else { unreachable!("first mean is a literal") };
    let mut marginals = vec![Measure1D::with_density(spaces[0], Density::gaussian(m0, first.variance))?.with_quadrature(cfg.quadrature)?];
    let mut kernels = Vec::new();
    for (i, a) in p.assignments.iter().enumerate().skip(1) {
        let (slope, intercept) = match a.mean {
            MeanExpr::Literal(c) => (0.0, c),
            MeanExpr::Var(_) => (1.0, 0.0),
        };
        let k = KernelFamily::gaussian(slope, intercept, a.variance, spaces[i - 1], spaces[i])?;
        marginals.push(pushforward(&marginals[i - 1], &k)?);
        kernels.push(k);
    }
    Ok(Chain { spaces, marginals, kernels, truncation })
}

struct Events {
    query: usize,
    observed: usize,
    q: IntervalSet,
    o: IntervalSet,
}

fn events(p: &Program, chain: &Chain) -> Events {
    let query = p.index_of(&p.query.var).expect("query bound");
    let observed = p.observation.as_ref().map_or(query, |o| p.index_of(&o.var).expect("observation bound"));
    let q = p.query.event(chain.spaces[query]);
    let o = p.observation.as_ref().map_or_else(
        || IntervalSet::from_parts(vec![chain.spaces[query]]),
        |o: &Predicate| o.event(chain.spaces[observed]),
    );
    Events { query, observed, q, o }
}

fn check_denominator(den: f64, tol: f64) -> Result<()> {
    if den <= 10.0 * tol {
        return Err(Error::ZeroMeasureObservation { denominator: den });
    }
    Ok(())
}

fn hull(set: &IntervalSet) -> Option<Interval> {
    let parts = set.parts();
    Some(Interval { lo: parts.first()?.lo, hi: parts.last()?.hi })
}

/// `P(query | observation)` through joint composition: the joints of the
/// kernels between the queried and the observed variable are composed,
/// transposed, and the rectangle `observation × query` is divided by the
/// mass of the observation.
pub fn evaluate(p: &Program, cfg: &EvalConfig) -> Result<Evaluation> {
    let chain = build_chain(p, cfg)?;
    let ev = events(p, &chain);
    let mut report = ConvergenceReport::new();
    report.converged = true;
    if ev.query == ev.observed {
        let mu = &chain.marginals[ev.query];
        let den = mu.measure_of(&ev.o)?;
        check_denominator(den, cfg.tol)?;
        let num = mu.measure_of(&ev.o.intersect_set(&ev.q))?;
        return Ok(Evaluation { probability: (num / den).clamp(0.0, 1.0), denominator: den, converged: true, truncation: chain.truncation, levels: report });
    }
    let joints: Vec<JointMeasure2D> = (ev.query..ev.observed)
        .map(|i| JointMeasure2D::kernel(chain.marginals[i].clone(), chain.kernels[i].clone()))
        .collect::<Result<_>>()?;
    let mut zeta = joints[0].clone();
    let last = joints.len() - 1;
    for (k, eta) in joints.iter().enumerate().skip(1) {
        let mut cc = ComposeConfig::with_tol(cfg.tol, cfg.max_depth);
        cc.extra_left_breaks = ev.q.boundaries();
        if k == last {
            cc.extra_right_breaks = ev.o.boundaries();
            if let (Some(x), Some(z)) = (hull(&ev.q), hull(&ev.o)) {
                cc.probe = Some(Rect::new(x, z));
            }
        }
        let out = compose_with(&zeta, eta, &cc)?;
        report.converged &= out.report.converged;
        report.achieved_tol = out.report.achieved_tol;
        report.levels = out.report.levels;
        zeta = out.joint;
    }
    let dag = zeta.dagger();
    let full = IntervalSet::from_parts(vec![chain.spaces[ev.query]]);
    let den = dag.rect_measure(&ev.o, &full)?;
    check_denominator(den, cfg.tol)?;
    let num = dag.rect_measure(&ev.o, &ev.q)?;
    if !report.converged {
        return Err(Error::NonConvergence { levels: report.levels.len(), achieved: report.achieved_tol, tolerance: cfg.tol });
    }
    Ok(Evaluation {
        probability: (num / den).clamp(0.0, 1.0),
        denominator: den,
        converged: report.converged,
        truncation: chain.truncation,
        levels: report,
    })
}

/// `P(query | observation)` through kernels only: the queried marginal is
/// restricted to the query event, pushed through the composite kernel, and
/// measured on the observation event.
pub fn evaluate_kernel_route(p: &Program, cfg: &EvalConfig) -> Result<f64> {
    let chain = build_chain(p, cfg)?;
    let ev = events(p, &chain);
    let mu = &chain.marginals[ev.query];
    if ev.query == ev.observed {
        let den = mu.measure_of(&ev.o)?;
        check_denominator(den, cfg.tol)?;
        return Ok((mu.measure_of(&ev.o.intersect_set(&ev.q))? / den).clamp(0.0, 1.0));
    }
    let mut k = chain.kernels[ev.query].clone();
    for next in &chain.kernels[ev.query + 1..ev.observed] {
        k = compose_kernels(&k, next)?;
    }
    let den = pushforward(mu, &k)?.measure_of(&ev.o)?;
    check_denominator(den, cfg.tol)?;
    let num = pushforward(&mu.restricted(&ev.q), &k)?.measure_of(&ev.o)?;
    Ok((num / den).clamp(0.0, 1.0))
}
