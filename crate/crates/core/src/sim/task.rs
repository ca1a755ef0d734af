use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::interval::{SegmentSet, TimeInterval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingTask {
    pub video_duration: f64,
    pub gt: SegmentSet,
    pub multi_segment: bool,
}

/// Draws a task: single- or multi-segment with equal probability (always
/// single when `max_segments == 1`), non-overlapping sorted ground truth.
///
/// The video is split into equal slots, one per segment; each segment sits
/// inside its slot, starts in the slot's first half and covers 20-50% of it.
pub fn generate_task<R: Rng + ?Sized>(
    rng: &mut R,
    duration_range: (f64, f64),
    max_segments: usize,
) -> GroundingTask {
    let (lo, hi) = duration_range;
    let duration = if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    };
    let max_segments = max_segments.max(1);
    let multi = max_segments >= 2 && rng.random_bool(0.5);
    let count = if multi {
        rng.random_range(2..=max_segments)
    } else {
        1
    };

    let slot = duration / count as f64;
    let gt = (0..count)
        .map(|k| {
            let slot_start = k as f64 * slot;
            let start = slot_start + rng.random_range(0.0..0.5) * slot;
            let len = rng.random_range(0.2..0.5) * slot;
            TimeInterval::new(start, (start + len).min(duration)).expect("segment inside video")
        })
        .collect();
    GroundingTask {
        video_duration: duration,
        gt,
        multi_segment: multi,
    }
}
