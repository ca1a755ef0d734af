//! Closed time intervals and finite unions of them.
//!
//! A [`SegmentSet`] keeps its segments exactly as given (order, overlaps and
//! duplicates included). Set-algebraic operations work on a canonical form
//! (sorted, disjoint, touching pieces merged) that is computed on demand and
//! never written back.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::IntervalError;

/// Absolute tolerance used for every floating-point comparison on seconds.
pub const EPS: f64 = 1e-9;

/// A closed interval `[start, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct TimeInterval {
    start: f64,
    end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self, IntervalError> {
        if !start.is_finite() || !end.is_finite() {
            return Err(IntervalError::NonFinite { start, end });
        }
        if start < 0.0 || end < 0.0 {
            return Err(IntervalError::Negative { start, end });
        }
        if start > end {
            return Err(IntervalError::Reversed { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    /// Length of the overlap with `other` (0 when disjoint or touching).
    pub fn overlap(&self, other: &TimeInterval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }

    /// Ordering by start, then end. Used wherever segments are sorted.
    pub fn cmp_start(&self, other: &TimeInterval) -> Ordering {
        self.start
            .total_cmp(&other.start)
            .then(self.end.total_cmp(&other.end))
    }
}

impl TryFrom<[f64; 2]> for TimeInterval {
    type Error = IntervalError;

    fn try_from([start, end]: [f64; 2]) -> Result<Self, Self::Error> {
        Self::new(start, end)
    }
}

impl From<TimeInterval> for [f64; 2] {
    fn from(iv: TimeInterval) -> Self {
        [iv.start, iv.end]
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// The smallest interval covering both `a` and `b`.
pub fn span(a: &TimeInterval, b: &TimeInterval) -> TimeInterval {
    TimeInterval {
        start: a.start.min(b.start),
        end: a.end.max(b.end),
    }
}

/// An ordered list of intervals, possibly overlapping.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentSet {
    segments: Vec<TimeInterval>,
}

impl SegmentSet {
    pub fn new(segments: Vec<TimeInterval>) -> Self {
        Self { segments }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a set from raw `(start, end)` pairs, validating each one.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, IntervalError>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        pairs
            .into_iter()
            .map(|(s, e)| TimeInterval::new(s, e))
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[TimeInterval] {
        &self.segments
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TimeInterval> {
        self.segments.iter()
    }

    pub fn push(&mut self, iv: TimeInterval) {
        self.segments.push(iv);
    }

    /// Indices of the segments sorted by start, then end, then position.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.segments.len()).collect();
        // stable sort keeps original position as the final tie-break
        idx.sort_by(|&a, &b| self.segments[a].cmp_start(&self.segments[b]));
        idx
    }

    /// Sorted, pairwise-disjoint intervals covering the same points.
    /// Intervals that touch (within [`EPS`]) are merged.
    pub fn canonical(&self) -> Vec<TimeInterval> {
        merge_sorted(self.sorted_indices().into_iter().map(|i| self.segments[i]))
    }

    pub fn is_canonical(&self) -> bool {
        self.segments
            .windows(2)
            .all(|w| w[1].start > w[0].end + EPS)
    }

    /// Lebesgue measure of the union of all segments.
    pub fn measure(&self) -> f64 {
        self.canonical().iter().map(TimeInterval::length).sum()
    }

    pub fn union(&self, other: &SegmentSet) -> SegmentSet {
        let mut all: Vec<TimeInterval> = self
            .segments
            .iter()
            .chain(&other.segments)
            .copied()
            .collect();
        all.sort_by(TimeInterval::cmp_start);
        SegmentSet::new(merge_sorted(all))
    }

    pub fn intersection(&self, other: &SegmentSet) -> SegmentSet {
        let a = self.canonical();
        let b = other.canonical();
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = a[i].start.max(b[j].start);
            let hi = a[i].end.min(b[j].end);
            if hi >= lo - EPS {
                out.push(TimeInterval {
                    start: lo,
                    end: hi.max(lo),
                });
            }
            if a[i].end < b[j].end {
                i += 1;
            } else {
                j += 1;
            }
        }
        // pieces from neighbouring inputs can touch after clipping
        SegmentSet::new(merge_sorted(out))
    }

    /// Endpoints of every segment in list order.
    pub fn endpoints(&self) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|s| [s.start, s.end])
            .collect()
    }
}

impl FromIterator<TimeInterval> for SegmentSet {
    fn from_iter<T: IntoIterator<Item = TimeInterval>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a SegmentSet {
    type Item = &'a TimeInterval;
    type IntoIter = std::slice::Iter<'a, TimeInterval>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.iter()
    }
}

/// Free-function form of [`SegmentSet::measure`].
pub fn measure(s: &SegmentSet) -> f64 {
    s.measure()
}

/// Free-function form of [`SegmentSet::intersection`].
pub fn intersection(a: &SegmentSet, b: &SegmentSet) -> SegmentSet {
    a.intersection(b)
}

/// Free-function form of [`SegmentSet::union`].
pub fn union(a: &SegmentSet, b: &SegmentSet) -> SegmentSet {
    a.union(b)
}

fn merge_sorted<I: IntoIterator<Item = TimeInterval>>(sorted: I) -> Vec<TimeInterval> {
    let mut out: Vec<TimeInterval> = Vec::new();
    for iv in sorted {
        match out.last_mut() {
            Some(last) if iv.start <= last.end + EPS => {
                last.end = last.end.max(iv.end);
            }
            _ => out.push(iv),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pairs: &[(f64, f64)]) -> SegmentSet {
        SegmentSet::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn pairs(s: &SegmentSet) -> Vec<(f64, f64)> {
        s.iter().map(|iv| (iv.start(), iv.end())).collect()
    }

    /// Sweep-merge oracle written independently of `merge_sorted`.
    fn sweep_measure(raw: &[(f64, f64)]) -> f64 {
        let mut v = raw.to_vec();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut total = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (s, e) in v {
            cur = match cur {
                None => Some((s, e)),
                Some((cs, ce)) if s <= ce => Some((cs, ce.max(e))),
                Some((cs, ce)) => {
                    total += ce - cs;
                    Some((s, e))
                }
            };
        }
        if let Some((cs, ce)) = cur {
            total += ce - cs;
        }
        total
    }

    #[test]
    fn rejects_invalid_intervals() {
        assert!(matches!(
            TimeInterval::new(3.0, 1.0),
            Err(IntervalError::Reversed { .. })
        ));
        assert!(matches!(
            TimeInterval::new(-1.0, 1.0),
            Err(IntervalError::Negative { .. })
        ));
        assert!(matches!(
            TimeInterval::new(0.0, f64::NAN),
            Err(IntervalError::NonFinite { .. })
        ));
        assert!(matches!(
            TimeInterval::new(0.0, f64::INFINITY),
            Err(IntervalError::NonFinite { .. })
        ));
        assert!(TimeInterval::new(2.0, 2.0).is_ok());
    }

    #[test]
    fn measure_examples() {
        assert_eq!(SegmentSet::empty().measure(), 0.0);
        let raw = [(0.0, 2.0), (1.0, 3.0)];
        assert_eq!(set(&raw).measure(), 3.0);
        assert_eq!(sweep_measure(&raw), 3.0);
        let raw = [(0.0, 1.0), (5.0, 6.0)];
        assert_eq!(set(&raw).measure(), 2.0);
        assert_eq!(sweep_measure(&raw), 2.0);
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(
            pairs(&set(&[(0.0, 4.0)]).intersection(&set(&[(2.0, 6.0)]))),
            vec![(2.0, 4.0)]
        );
        assert!(set(&[(0.0, 1.0)])
            .intersection(&set(&[(2.0, 3.0)]))
            .is_empty());
        assert_eq!(
            pairs(&set(&[(0.0, 4.0)]).intersection(&set(&[(0.0, 4.0)]))),
            vec![(0.0, 4.0)]
        );
    }

    #[test]
    fn touching_closed_intervals_share_a_point() {
        let i = set(&[(0.0, 1.0)]).intersection(&set(&[(1.0, 2.0)]));
        assert_eq!(pairs(&i), vec![(1.0, 1.0)]);
        assert_eq!(i.measure(), 0.0);
    }

    #[test]
    fn union_examples() {
        assert_eq!(
            pairs(&set(&[(0.0, 2.0)]).union(&set(&[(1.0, 3.0)]))),
            vec![(0.0, 3.0)]
        );
        assert_eq!(
            pairs(&SegmentSet::empty().union(&set(&[(1.0, 2.0)]))),
            vec![(1.0, 2.0)]
        );
        assert_eq!(
            pairs(&set(&[(0.0, 1.0)]).union(&set(&[(0.0, 1.0)]))),
            vec![(0.0, 1.0)]
        );
        // touching pieces merge
        assert_eq!(
            pairs(&set(&[(0.0, 2.0)]).union(&set(&[(2.0, 4.0)]))),
            vec![(0.0, 4.0)]
        );
    }

    #[test]
    fn span_examples() {
        let iv = |s, e| TimeInterval::new(s, e).unwrap();
        let c = span(&iv(0.0, 2.0), &iv(4.0, 6.0));
        assert_eq!((c.start(), c.end()), (0.0, 6.0));
        // covering property
        for t in [0.0, 1.0, 2.0, 4.0, 5.5, 6.0] {
            assert!(c.contains(t));
        }
        assert_eq!(span(&iv(1.0, 3.0), &iv(1.0, 3.0)), iv(1.0, 3.0));
        assert_eq!(span(&iv(0.0, 5.0), &iv(1.0, 2.0)), iv(0.0, 5.0));
    }

    #[test]
    fn stored_list_is_not_canonicalized() {
        let s = set(&[(3.0, 4.0), (0.0, 2.0), (1.0, 3.0)]);
        let _ = s.measure();
        assert_eq!(s.len(), 3);
        assert_eq!(s.segments()[0].start(), 3.0);
        assert!(!s.is_canonical());
    }

    #[test]
    fn serde_pair_form() {
        let s = set(&[(1.0, 2.5)]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[[1.0,2.5]]");
        let back: SegmentSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<SegmentSet>("[[2.0,1.0]]").is_err());
    }

    fn arb_set() -> impl Strategy<Value = SegmentSet> {
        prop::collection::vec((0.0f64..100.0, 0.0f64..30.0), 0..8).prop_map(|v| {
            v.into_iter()
                .map(|(s, l)| TimeInterval::new(s, s + l).unwrap())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn inclusion_exclusion(a in arb_set(), b in arb_set()) {
            let lhs = a.union(&b).measure() + a.intersection(&b).measure();
            let rhs = a.measure() + b.measure();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn measure_matches_sweep(a in arb_set()) {
            prop_assert!((a.measure() - sweep_measure(&pairs(&a))).abs() < 1e-9);
        }

        #[test]
        fn measure_ignores_order_and_splits(a in arb_set(), split in 0.0f64..1.0) {
            let mut rev: Vec<TimeInterval> = a.segments().to_vec();
            rev.reverse();
            let mut pieces = Vec::new();
            for iv in &rev {
                let m = iv.start() + split * iv.length();
                pieces.push(TimeInterval::new(iv.start(), m).unwrap());
                pieces.push(TimeInterval::new(m, iv.end()).unwrap());
            }
            prop_assert!((SegmentSet::new(rev).measure() - a.measure()).abs() < 1e-9);
            prop_assert!((SegmentSet::new(pieces).measure() - a.measure()).abs() < 1e-9);
        }

        #[test]
        fn algebra_commutes_and_associates(a in arb_set(), b in arb_set(), c in arb_set()) {
            prop_assert_eq!(a.union(&b), b.union(&a));
            prop_assert_eq!(a.intersection(&b), b.intersection(&a));
            prop_assert_eq!(a.union(&b).union(&c), a.union(&b.union(&c)));
            let l = a.intersection(&b).intersection(&c);
            let r = a.intersection(&b.intersection(&c));
            prop_assert_eq!(l.len(), r.len());
            for (x, y) in l.iter().zip(r.iter()) {
                prop_assert!((x.start() - y.start()).abs() < 1e-9 && (x.end() - y.end()).abs() < 1e-9);
            }
            prop_assert!(a.union(&b).is_canonical());
            prop_assert!(a.intersection(&b).is_canonical());
        }
    }
}
