//! A small language of gaussian chains with one observation and one query:
//!
//! ```text
//! x := normal(0,1);
//! y := normal(x,1);
//! observe (y > 0.5);
//! return (x > 1);
//! ```

mod eval;
mod parse;

pub use eval::{evaluate, evaluate_kernel_route, EvalConfig, Evaluation};
pub use parse::parse;

use serde::{Deserialize, Serialize};

use crate::interval::{Interval, IntervalSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Lt => value < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeanExpr {
    Literal(f64),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub name: String,
    pub mean: MeanExpr,
    pub variance: f64,
}

/// `var > threshold` or `var < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub var: String,
    pub cmp: Comparator,
    pub threshold: f64,
}

impl Predicate {
    /// The half-line of the predicate cut to `within`.
    pub fn event(&self, within: Interval) -> IntervalSet {
        let (lo, hi) = match self.cmp {
            Comparator::Gt => (self.threshold.max(within.lo), within.hi),
            Comparator::Lt => (within.lo, self.threshold.min(within.hi)),
        };
        if lo < hi {
            IntervalSet::from_parts(vec![Interval { lo, hi }])
        } else {
            IntervalSet::empty()
        }
    }
}

/// A parsed program. Each mean refers to a literal or to the variable
/// assigned just before it, so the variables form a Markov chain; the
/// observation, if any, is on the last variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub assignments: Vec<Assignment>,
    pub observation: Option<Predicate>,
    pub query: Predicate,
}

impl Program {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.assignments.iter().position(|a| a.name == name)
    }

    /// `(mean, cumulative variance)` of every variable.
    pub fn moments(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(self.assignments.len());
        for a in &self.assignments {
            let m = match &a.mean {
                MeanExpr::Literal(c) => (*c, a.variance),
                MeanExpr::Var(_) => {
                    let (m, v) = *out.last().expect("chain validated at parse time");
                    (m, v + a.variance)
                }
            };
            out.push(m);
        }
        out
    }
}
