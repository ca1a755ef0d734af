//! Benchmark scoring: mIoU for single-segment grounding and F1 averaged over
//! IoU thresholds for multi-segment grounding.
//!
//! F1 matching is greedy and one-to-one: candidate pairs are taken in order of
//! descending IoU (ties: lower ground-truth index, then lower prediction
//! index) and a matched pair is a true positive when its IoU reaches the
//! threshold.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::interval::{SegmentSet, TimeInterval, EPS};

pub const F1_THRESHOLDS: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub gt: SegmentSet,
    pub pred: SegmentSet,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub miou: Option<f64>,
    /// Keyed by the threshold printed with one decimal, e.g. `"0.5"`.
    pub f1_per_threshold: BTreeMap<String, f64>,
    pub f1_mean: Option<f64>,
    pub n_records: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordScore {
    pub id: String,
    pub score: f64,
}

/// Plain IoU of two intervals. Two identical zero-length intervals score 1.
pub fn interval_iou(g: &TimeInterval, p: &TimeInterval) -> f64 {
    let inter = g.overlap(p);
    let union = g.length() + p.length() - inter;
    if union <= EPS {
        return if g == p { 1.0 } else { 0.0 };
    }
    inter / union
}

/// IoU of the first ground-truth and first predicted segment.
pub fn record_iou(record: &EvalRecord) -> f64 {
    match (record.gt.segments().first(), record.pred.segments().first()) {
        (Some(g), Some(p)) => interval_iou(g, p),
        _ => 0.0,
    }
}

pub fn miou(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(records.iter().map(record_iou).sum::<f64>() / records.len() as f64)
}

/// Single-segment report: mIoU plus a warning for every record whose ground
/// truth or prediction carries more than one segment.
pub fn evaluate_single(records: &[EvalRecord]) -> Result<MetricReport, MetricsError> {
    let miou = miou(records)?;
    let warnings = records
        .iter()
        .filter(|r| r.gt.len() > 1 || r.pred.len() > 1)
        .map(|r| {
            format!(
                "record {}: {} gt / {} pred segments, scoring the first of each",
                r.id,
                r.gt.len(),
                r.pred.len()
            )
        })
        .collect();
    Ok(MetricReport {
        miou: Some(miou),
        n_records: records.len(),
        warnings,
        ..MetricReport::default()
    })
}

/// Greedy one-to-one matching; returns `(gt, pred, iou)` for matched pairs
/// with positive IoU, best first.
pub fn greedy_matches(gt: &SegmentSet, pred: &SegmentSet) -> Vec<(usize, usize, f64)> {
    let mut candidates: Vec<(usize, usize, f64)> = gt
        .iter()
        .enumerate()
        .flat_map(|(i, g)| {
            pred.iter()
                .enumerate()
                .map(move |(j, p)| (i, j, interval_iou(g, p)))
        })
        .filter(|&(_, _, iou)| iou > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut used_gt = vec![false; gt.len()];
    let mut used_pred = vec![false; pred.len()];
    let mut out = Vec::new();
    for (i, j, iou) in candidates {
        if !used_gt[i] && !used_pred[j] {
            used_gt[i] = true;
            used_pred[j] = true;
            out.push((i, j, iou));
        }
    }
    out
}

/// True positives at threshold `tau` under greedy matching. IoU values
/// within 1e-9 below `tau` still count, so exact ratios such as 1/2 are not
/// lost to round-off.
pub fn greedy_true_positives(gt: &SegmentSet, pred: &SegmentSet, tau: f64) -> usize {
    greedy_matches(gt, pred)
        .into_iter()
        .filter(|&(_, _, iou)| iou + EPS >= tau)
        .count()
}

/// `2·TP / (|pred| + |gt|)`; 1 when both sides are empty.
pub fn f1_at_threshold(gt: &SegmentSet, pred: &SegmentSet, tau: f64) -> f64 {
    match (gt.is_empty(), pred.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let tp = greedy_true_positives(gt, pred, tau);
    2.0 * tp as f64 / (gt.len() + pred.len()) as f64
}

/// Mean F1 over the fixed thresholds for a single record.
pub fn record_f1_mean(record: &EvalRecord) -> f64 {
    F1_THRESHOLDS
        .iter()
        .map(|&tau| f1_at_threshold(&record.gt, &record.pred, tau))
        .sum::<f64>()
        / F1_THRESHOLDS.len() as f64
}

pub fn multi_segment_f1(records: &[EvalRecord]) -> Result<MetricReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len() as f64;
    let per_threshold: Vec<(f64, f64)> = F1_THRESHOLDS
        .iter()
        .map(|&tau| {
            let mean = records
                .iter()
                .map(|r| f1_at_threshold(&r.gt, &r.pred, tau))
                .sum::<f64>()
                / n;
            (tau, mean)
        })
        .collect();
    let f1_mean = per_threshold.iter().map(|(_, f)| f).sum::<f64>() / per_threshold.len() as f64;
    Ok(MetricReport {
        miou: None,
        f1_per_threshold: per_threshold
            .into_iter()
            .map(|(tau, f)| (format!("{tau:.1}"), f))
            .collect(),
        f1_mean: Some(f1_mean),
        n_records: records.len(),
        warnings: Vec::new(),
    })
}

/// Writes `id,score` rows with a header.
pub fn write_scores_csv<W: Write>(out: W, scores: &[RecordScore]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in scores {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pairs: &[(f64, f64)]) -> SegmentSet {
        SegmentSet::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn rec(id: &str, gt: &[(f64, f64)], pred: &[(f64, f64)]) -> EvalRecord {
        EvalRecord {
            id: id.into(),
            gt: set(gt),
            pred: set(pred),
        }
    }

    #[test]
    fn miou_examples() {
        assert_eq!(
            miou(&[rec("a", &[(0.0, 10.0)], &[(0.0, 10.0)])]).unwrap(),
            1.0
        );
        let v = miou(&[rec("a", &[(0.0, 10.0)], &[(5.0, 15.0)])]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        let v = miou(&[
            rec("a", &[(0.0, 1.0)], &[(0.0, 1.0)]),
            rec("b", &[(0.0, 1.0)], &[(2.0, 3.0)]),
        ])
        .unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(miou(&[]), Err(MetricsError::Empty));
        assert_eq!(miou(&[rec("a", &[(0.0, 1.0)], &[])]).unwrap(), 0.0);
    }

    #[test]
    fn single_report_warns_on_multi_segment_records() {
        let r = evaluate_single(&[rec("m", &[(0.0, 1.0), (2.0, 3.0)], &[(0.0, 1.0)])]).unwrap();
        assert_eq!(r.miou, Some(1.0));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn f1_examples() {
        // best IoUs 0.8 and 0.2
        let gt = set(&[(0.0, 10.0), (20.0, 30.0)]);
        let pred = set(&[(0.0, 8.0), (20.0, 22.0)]);
        let ious: Vec<f64> = greedy_matches(&gt, &pred).iter().map(|m| m.2).collect();
        assert!((ious[0] - 0.8).abs() < 1e-12);
        // [20,30] vs [20,22]: 2 / 10
        assert_eq!(ious[1], 0.2);
        assert_eq!(f1_at_threshold(&gt, &pred, 0.1), 1.0);
        for tau in [0.3, 0.5, 0.7] {
            assert_eq!(f1_at_threshold(&gt, &pred, tau), 0.5);
        }
        assert_eq!(f1_at_threshold(&gt, &gt, 0.7), 1.0);
        assert_eq!(f1_at_threshold(&gt, &SegmentSet::empty(), 0.5), 0.0);
        assert_eq!(
            f1_at_threshold(&SegmentSet::empty(), &SegmentSet::empty(), 0.5),
            1.0
        );
    }

    #[test]
    fn exact_half_counts_at_half() {
        // IoU exactly 1/2
        assert_eq!(
            f1_at_threshold(&set(&[(0.0, 2.0)]), &set(&[(0.0, 1.0)]), 0.5),
            1.0
        );
    }

    #[test]
    fn multi_report() {
        let r = multi_segment_f1(&[rec(
            "w",
            &[(0.0, 10.0), (20.0, 30.0)],
            &[(0.0, 8.0), (20.0, 22.0)],
        )])
        .unwrap();
        assert_eq!(r.f1_mean, Some(0.625));
        assert_eq!(r.f1_per_threshold["0.1"], 1.0);
        assert_eq!(r.f1_per_threshold["0.7"], 0.5);
        let perfect = multi_segment_f1(&[rec(
            "p",
            &[(1.0, 2.0), (3.0, 4.0)],
            &[(1.0, 2.0), (3.0, 4.0)],
        )])
        .unwrap();
        assert!(perfect.f1_per_threshold.values().all(|&v| v == 1.0));
        let none = multi_segment_f1(&[rec("n", &[(1.0, 2.0)], &[])]).unwrap();
        assert!(none.f1_per_threshold.values().all(|&v| v == 0.0));
        assert_eq!(none.f1_mean, Some(0.0));
        assert_eq!(multi_segment_f1(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_scores_csv(
            &mut buf,
            &[RecordScore {
                id: "a".into(),
                score: 0.5,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,score\na,0.5\n");
    }

    fn arb_set() -> impl Strategy<Value = SegmentSet> {
        prop::collection::vec((0.0f64..100.0, 0.0f64..20.0), 0..6).prop_map(|v| {
            v.into_iter()
                .map(|(s, l)| TimeInterval::new(s, s + l).unwrap())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn f1_non_increasing_in_tau(gt in arb_set(), pred in arb_set(), a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f1_at_threshold(&gt, &pred, hi) <= f1_at_threshold(&gt, &pred, lo));
        }

        #[test]
        fn identical_sets_score_one(gt in arb_set(), tau in 0.01f64..=1.0) {
            prop_assume!(!gt.is_empty());
            prop_assert_eq!(f1_at_threshold(&gt, &gt, tau), 1.0);
        }
    }
}
