//! Intervals, finite unions of intervals, and interval partitions.
//!
//! All intervals are half-open `[lo, hi)`. A point equal to the right end of
//! the ambient support is treated as belonging to the last interval, so that
//! partition cells cover the closed support exactly once.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(iv: Interval) -> Self {
        [iv.lo, iv.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(invalid(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Membership in `[lo, hi)`; `closed_at` extends the interval to include
    /// `hi` when `hi` equals it (the right end of the ambient support).
    pub fn contains(&self, x: f64, closed_at: f64) -> bool {
        (self.lo <= x && x < self.hi) || (x == self.hi && self.hi == closed_at && self.lo <= x)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    /// Overlap length divided by own length.
    pub fn overlap_fraction(&self, other: &Interval) -> f64 {
        match self.intersect(other) {
            Some(x) if self.len() > 0.0 => x.len() / self.len(),
            _ => 0.0,
        }
    }

    pub fn within(&self, outer: &Interval, tol: f64) -> bool {
        self.lo >= outer.lo - tol && self.hi <= outer.hi + tol
    }
}

/// Finite disjoint union of half-open intervals, kept sorted and merged.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl TryFrom<Vec<Interval>> for IntervalSet {
    type Error = Error;

    fn try_from(parts: Vec<Interval>) -> Result<Self> {
        Ok(IntervalSet::from_parts(parts))
    }
}

impl From<IntervalSet> for Vec<Interval> {
    fn from(s: IntervalSet) -> Self {
        s.parts
    }
}

impl From<Interval> for IntervalSet {
    fn from(iv: Interval) -> Self {
        IntervalSet::from_parts(vec![iv])
    }
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_parts(mut parts: Vec<Interval>) -> Self {
        parts.retain(|p| !p.is_empty());
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for p in parts {
            match merged.last_mut() {
                Some(last) if p.lo <= last.hi => last.hi = last.hi.max(p.hi),
                _ => merged.push(p),
            }
        }
        IntervalSet { parts: merged }
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn len(&self) -> f64 {
        self.parts.iter().map(Interval::len).sum()
    }

    pub fn contains(&self, x: f64, closed_at: f64) -> bool {
        self.parts.iter().any(|p| p.contains(x, closed_at))
    }

    pub fn intersect(&self, iv: &Interval) -> IntervalSet {
        IntervalSet {
            parts: self.parts.iter().filter_map(|p| p.intersect(iv)).collect(),
        }
    }

    pub fn intersect_set(&self, other: &IntervalSet) -> IntervalSet {
        let parts = other.parts.iter().flat_map(|iv| self.intersect(iv).parts).collect();
        IntervalSet::from_parts(parts)
    }

    /// `support ∖ self`.
    pub fn complement_within(&self, support: &Interval) -> IntervalSet {
        let mut out = Vec::new();
        let mut cursor = support.lo;
        for p in &self.parts {
            if p.lo > cursor {
                out.push(Interval { lo: cursor, hi: p.lo.min(support.hi) });
            }
            cursor = cursor.max(p.hi);
        }
        if cursor < support.hi {
            out.push(Interval { lo: cursor, hi: support.hi });
        }
        IntervalSet::from_parts(out)
    }

    pub fn within(&self, outer: &Interval, tol: f64) -> bool {
        self.parts.iter().all(|p| p.within(outer, tol))
    }

    /// Interior boundary points.
    pub fn boundaries(&self) -> Vec<f64> {
        self.parts.iter().flat_map(|p| [p.lo, p.hi]).collect()
    }
}

/// A partition of `[a, b]` into consecutive cells `[t_i, t_{i+1})`, the last
/// one closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct IntervalPartition {
    breaks: Vec<f64>,
}

impl TryFrom<Vec<f64>> for IntervalPartition {
    type Error = Error;

    fn try_from(breaks: Vec<f64>) -> Result<Self> {
        IntervalPartition::new(breaks)
    }
}

impl From<IntervalPartition> for Vec<f64> {
    fn from(p: IntervalPartition) -> Self {
        p.breaks
    }
}

impl IntervalPartition {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(invalid("a partition needs at least two breakpoints"));
        }
        if breaks.iter().any(|x| !x.is_finite()) {
            return Err(invalid("breakpoints must be finite"));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        Ok(IntervalPartition { breaks })
    }

    pub fn trivial(support: Interval) -> Self {
        IntervalPartition { breaks: vec![support.lo, support.hi] }
    }

    pub fn uniform(support: Interval, cells: usize) -> Self {
        IntervalPartition { breaks: uniform_breaks(support, cells) }
    }

    pub fn dyadic(support: Interval, depth: u32) -> Self {
        Self::uniform(support, 1usize << depth)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn support(&self) -> Interval {
        Interval { lo: self.breaks[0], hi: *self.breaks.last().unwrap() }
    }

    pub fn len(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, i: usize) -> Interval {
        Interval { lo: self.breaks[i], hi: self.breaks[i + 1] }
    }

    pub fn cells(&self) -> impl Iterator<Item = Interval> + '_ {
        self.breaks.windows(2).map(|w| Interval { lo: w[0], hi: w[1] })
    }

    /// Index of the cell containing `x` (half-open, last closed).
    pub fn locate(&self, x: f64) -> Option<usize> {
        let n = self.len();
        if x < self.breaks[0] || x > self.breaks[n] {
            return None;
        }
        if x == self.breaks[n] {
            return Some(n - 1);
        }
        Some(self.breaks.partition_point(|&t| t <= x) - 1)
    }

    /// `self ⊒ coarser`: every breakpoint of `coarser` appears in `self`
    /// (matched within `tol`).
    pub fn refines(&self, coarser: &IntervalPartition, tol: f64) -> bool {
        coarser.breaks.iter().all(|&t| {
            let k = self.breaks.partition_point(|&s| s < t - tol);
            k < self.breaks.len() && (self.breaks[k] - t).abs() <= tol
        })
    }

    /// Least common refinement; breakpoints closer than `tol` are merged.
    pub fn join(&self, other: &IntervalPartition, tol: f64) -> IntervalPartition {
        let mut all: Vec<f64> = self.breaks.iter().chain(&other.breaks).copied().collect();
        all.sort_by(f64::total_cmp);
        IntervalPartition { breaks: dedup_sorted(all, tol) }
    }

    /// Add breakpoints (clipped to the support).
    pub fn with_breaks(&self, extra: &[f64], tol: f64) -> IntervalPartition {
        let s = self.support();
        let extra: Vec<f64> = extra.iter().copied().filter(|&x| x > s.lo && x < s.hi).collect();
        let other = IntervalPartition { breaks: [&[s.lo][..], &extra, &[s.hi]].concat() };
        let mut sorted = other.breaks;
        sorted.sort_by(f64::total_cmp);
        self.join(&IntervalPartition { breaks: dedup_sorted(sorted, tol) }, tol)
    }
}

/// `cells + 1` equally spaced points. Dyadic levels produce bit-identical
/// shared points: `lo + (len * k) / n` scales exactly under `k -> 2k, n -> 2n`.
pub fn uniform_breaks(support: Interval, cells: usize) -> Vec<f64> {
    let len = support.len();
    let n = cells as f64;
    (0..=cells)
        .map(|k| if k == cells { support.hi } else { support.lo + (len * k as f64) / n })
        .collect()
}

/// Drop entries within `tol` of their predecessor (keeps the first of each
/// cluster, and always keeps the final point).
pub fn dedup_sorted(sorted: Vec<f64>, tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    let last = sorted.last().copied();
    for x in sorted {
        match out.last() {
            Some(&p) if x - p <= tol => {}
            _ => out.push(x),
        }
    }
    if let (Some(l), Some(o)) = (last, out.last_mut()) {
        if *o != l && l - *o <= tol {
            *o = l;
        }
    }
    out
}

/// Union of `grid` and `preferred` where grid points within `tol` of a
/// preferred point are dropped, so `preferred` always survives verbatim.
pub fn merge_preferring(grid: &[f64], preferred: &[f64], tol: f64) -> Vec<f64> {
    let mut pref: Vec<f64> = preferred.to_vec();
    pref.sort_by(f64::total_cmp);
    pref.dedup();
    let mut out: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&g| {
            let k = pref.partition_point(|&p| p < g - tol);
            !(k < pref.len() && (pref[k] - g).abs() <= tol)
        })
        .collect();
    out.extend(pref);
    out.sort_by(f64::total_cmp);
    out
}
