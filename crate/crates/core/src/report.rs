//! Per-level convergence traces.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    /// Threshold spacing of the level-set partition, when the chain has one.
    pub epsilon: Option<f64>,
    pub cells: usize,
    pub value: f64,
    pub lower: f64,
    /// `+∞` when the level's upper bracket is unbounded (serialized as null).
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelRecord>,
    pub converged: bool,
    /// Difference between the last two levels.
    pub achieved_tol: f64,
}

impl ConvergenceReport {
    pub fn new() -> Self {
        ConvergenceReport { levels: Vec::new(), converged: false, achieved_tol: f64::INFINITY }
    }

    pub fn last(&self) -> Option<&LevelRecord> {
        self.levels.last()
    }

    /// Upper brackets never increase by more than `slack` (relative).
    pub fn upper_nonincreasing(&self, slack: f64) -> bool {
        self.levels.windows(2).all(|w| {
            let (a, b) = (w[0].upper, w[1].upper);
            a.is_infinite() || b <= a + slack * a.abs().max(1.0)
        })
    }

    /// `level,epsilon,cells,partial_sum,lower_bracket,upper_bracket`.
    pub fn limit_csv(&self) -> String {
        let mut out = String::from("level,epsilon,cells,partial_sum,lower_bracket,upper_bracket\n");
        for r in &self.levels {
            let eps = r.epsilon.map(|e| format!("{e:e}")).unwrap_or_default();
            writeln!(out, "{},{},{},{:e},{:e},{:e}", r.level, eps, r.cells, r.value, r.lower, r.upper).unwrap();
        }
        out
    }

    /// `level,cells,value,lower,upper`.
    pub fn compose_csv(&self) -> String {
        let mut out = String::from("level,cells,value,lower,upper\n");
        for r in &self.levels {
            writeln!(out, "{},{},{:e},{:e},{:e}", r.level, r.cells, r.value, r.lower, r.upper).unwrap();
        }
        out
    }
}

impl Default for ConvergenceReport {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_and_rows() {
        let mut r = ConvergenceReport::new();
        r.levels.push(LevelRecord { level: 0, epsilon: Some(0.5), cells: 7, value: 0.25, lower: 0.1, upper: f64::INFINITY });
        let csv = r.limit_csv();
        assert_eq!(csv.lines().next().unwrap(), "level,epsilon,cells,partial_sum,lower_bracket,upper_bracket");
        assert_eq!(csv.lines().nth(1).unwrap(), "0,5e-1,7,2.5e-1,1e-1,inf");
        assert!(r.upper_nonincreasing(0.0));
    }
}
