//! Segment matching reward: global overlap ratio, NGIoU pairing and their
//! average.
//!
//! Ground truth and prediction are compared twice. The global term looks at
//! the two segment lists as whole sets; the local term pairs segments one to
//! one (unpaired segments meet the empty segment and score 0), which is what
//! penalizes predicting the wrong number of segments.

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_assignment;
use crate::interval::{span, SegmentSet, TimeInterval, EPS};

/// How ground-truth and predicted segments are paired for the local term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingStrategy {
    /// Pair the k-th segments after sorting both sides by start time.
    #[default]
    Sequential,
    /// Pair to maximize total NGIoU.
    #[serde(alias = "maximum")]
    MaximumWeight,
    /// No local term; the matching reward is the global term alone.
    #[serde(alias = "global")]
    GlobalOnly,
}

impl std::str::FromStr for MatchingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" => Ok(Self::Sequential),
            "maximum" | "maximum_weight" => Ok(Self::MaximumWeight),
            "global" | "global_only" => Ok(Self::GlobalOnly),
            other => Err(format!(
                "unknown matching strategy `{other}` (expected sequential, maximum or global)"
            )),
        }
    }
}

/// One-to-one pairing between ground-truth and predicted indices.
/// `None` on either side stands for the empty segment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PairAssignment {
    pub pairs: Vec<(Option<usize>, Option<usize>)>,
}

impl PairAssignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks that every real index on each side appears exactly once and
    /// that there are `max(n_gt, n_pred)` pairs.
    pub fn is_consistent(&self, n_gt: usize, n_pred: usize) -> bool {
        if self.pairs.len() != n_gt.max(n_pred) {
            return false;
        }
        let mut seen_gt = vec![false; n_gt];
        let mut seen_pred = vec![false; n_pred];
        for &(g, p) in &self.pairs {
            if g.is_none() && p.is_none() {
                return false;
            }
            for (idx, seen) in [(g, &mut seen_gt), (p, &mut seen_pred)] {
                if let Some(i) = idx {
                    if i >= seen.len() || seen[i] {
                        return false;
                    }
                    seen[i] = true;
                }
            }
        }
        seen_gt.into_iter().all(|s| s) && seen_pred.into_iter().all(|s| s)
    }
}

/// Normalized generalized IoU, `(1 + GIoU) / 2`, in `[0, 1]`.
pub fn ngiou(g: &TimeInterval, p: &TimeInterval) -> f64 {
    let cover = span(g, p).length();
    if cover <= EPS {
        // two identical zero-length intervals
        return 1.0;
    }
    let inter = g.overlap(p);
    let union = g.length() + p.length() - inter;
    let iou = if union > EPS { inter / union } else { 0.0 };
    let gap = (cover - union).max(0.0);
    (0.5 * (1.0 + iou - gap / cover)).clamp(0.0, 1.0)
}

/// [`ngiou`] with the empty segment on either side scoring 0.
pub fn ngiou_padded(g: Option<&TimeInterval>, p: Option<&TimeInterval>) -> f64 {
    match (g, p) {
        (Some(g), Some(p)) => ngiou(g, p),
        _ => 0.0,
    }
}

/// Summed pairwise overlap divided by the measure of the joint union.
///
/// The numerator sums `|G_i ∩ P_j|` over every pair without merging either
/// side first, so overlapping predictions can push it past the union; the
/// result is clamped to `[0, 1]`.
pub fn global_matching_reward(gt: &SegmentSet, pred: &SegmentSet) -> f64 {
    match (gt.is_empty(), pred.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let overlap: f64 = gt
        .iter()
        .flat_map(|g| pred.iter().map(move |p| g.overlap(p)))
        .sum();
    let joint = gt.union(pred).measure();
    if joint <= EPS {
        // only zero-length segments: reward exact agreement of the point sets
        return if gt.union(&SegmentSet::empty()) == pred.union(&SegmentSet::empty()) {
            1.0
        } else {
            0.0
        };
    }
    (overlap / joint).clamp(0.0, 1.0)
}

/// Pairs the k-th ground truth with the k-th prediction after sorting both
/// by start (ties: earlier end, then original position).
pub fn sequential_assignment(gt: &SegmentSet, pred: &SegmentSet) -> PairAssignment {
    let g = gt.sorted_indices();
    let p = pred.sorted_indices();
    let n = g.len().max(p.len());
    let pairs = (0..n)
        .map(|k| (g.get(k).copied(), p.get(k).copied()))
        .collect();
    PairAssignment { pairs }
}

/// Exact maximum-weight one-to-one pairing under NGIoU weights.
///
/// The weight matrix is padded to square with zeros; a real index paired
/// with a padding index becomes a pair with the empty segment.
pub fn maximum_assignment(gt: &SegmentSet, pred: &SegmentSet) -> PairAssignment {
    let (ng, np) = (gt.len(), pred.len());
    let n = ng.max(np);
    let weights: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (gt.segments().get(i), pred.segments().get(j)) {
                    (Some(g), Some(p)) => ngiou(g, p),
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let cols = max_weight_assignment(&weights);
    let pairs = cols
        .into_iter()
        .enumerate()
        .map(|(i, j)| ((i < ng).then_some(i), (j < np).then_some(j)))
        .collect();
    PairAssignment { pairs }
}

/// Mean NGIoU over the pairs of `assignment`; 0 when there are no pairs.
pub fn local_matching_reward(
    assignment: &PairAssignment,
    gt: &SegmentSet,
    pred: &SegmentSet,
) -> f64 {
    if assignment.is_empty() {
        return 0.0;
    }
    let total: f64 = assignment
        .pairs
        .iter()
        .map(|&(g, p)| {
            ngiou_padded(
                g.and_then(|i| gt.segments().get(i)),
                p.and_then(|j| pred.segments().get(j)),
            )
        })
        .sum();
    total / assignment.len() as f64
}

/// Global and local terms plus the combined matching reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingScores {
    pub global: f64,
    /// `None` under [`MatchingStrategy::GlobalOnly`].
    pub local: Option<f64>,
    pub matching: f64,
}

pub fn matching_scores(
    gt: &SegmentSet,
    pred: &SegmentSet,
    strategy: MatchingStrategy,
) -> MatchingScores {
    let global = global_matching_reward(gt, pred);
    let local = match strategy {
        MatchingStrategy::GlobalOnly => None,
        MatchingStrategy::Sequential => Some(local_matching_reward(
            &sequential_assignment(gt, pred),
            gt,
            pred,
        )),
        MatchingStrategy::MaximumWeight => Some(local_matching_reward(
            &maximum_assignment(gt, pred),
            gt,
            pred,
        )),
    };
    let matching = match local {
        // both sides empty: the vacuous local term is skipped
        _ if gt.is_empty() && pred.is_empty() => global,
        Some(l) => 0.5 * (global + l),
        None => global,
    };
    MatchingScores {
        global,
        local,
        matching,
    }
}

/// `(r_G + r_L) / 2`, or `r_G` alone under [`MatchingStrategy::GlobalOnly`].
pub fn segment_matching_reward(
    gt: &SegmentSet,
    pred: &SegmentSet,
    strategy: MatchingStrategy,
) -> f64 {
    matching_scores(gt, pred, strategy).matching
}
