//! Tabular stand-in for the generating model.
//!
//! A rollout picks a segment count from a softmax row selected by the task's
//! ground-truth count and perturbs ground-truth endpoints with centered
//! uniform noise bounded by `offset_scale + noise_floor`. Only the scale part
//! is learnable.
//!
//! Each endpoint may be mentioned in the reasoning (a draft). Mentioned
//! endpoints carry `1 - mention_gain` of the noise. A mentioned endpoint may
//! then be refined: the answer moves a further `refine_gain` of the way to the
//! target, but no longer equals the draft the reasoning printed, so refining
//! trades the timestamp reward for matching accuracy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::interval::{SegmentSet, TimeInterval};
use crate::parser::serialize_answer;
use crate::sim::task::GroundingTask;

const MIN_OFFSET_SCALE: f64 = 1e-3;
const MAX_LOGIT: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    /// `count_logits[g - 1][c - 1]`: preference for predicting `c` segments
    /// when the ground truth has `g`.
    pub count_logits: Vec<Vec<f64>>,
    pub offset_scale: f64,
    mention_logit: f64,
    refine_logit: f64,
}

/// Environment constants shared by every rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutEnv {
    pub mention_gain: f64,
    pub noise_floor: f64,
    pub refine_gain: f64,
}

impl TabularPolicy {
    /// `bins` count bins, each row peaked at the matching count with logits
    /// falling by `sharpness` per step of distance.
    pub fn new(
        bins: usize,
        sharpness: f64,
        offset_scale: f64,
        timestamp_mention_prob: f64,
        refine_prob: f64,
    ) -> Self {
        let bins = bins.max(1);
        let count_logits = (0..bins)
            .map(|g| {
                (0..bins)
                    .map(|c| -sharpness * (g as f64 - c as f64).abs())
                    .collect()
            })
            .collect();
        Self {
            count_logits,
            offset_scale: offset_scale.max(MIN_OFFSET_SCALE),
            mention_logit: logit(timestamp_mention_prob),
            refine_logit: logit(refine_prob),
        }
    }

    pub fn bins(&self) -> usize {
        self.count_logits.len()
    }

    pub fn timestamp_mention_prob(&self) -> f64 {
        sigmoid(self.mention_logit)
    }

    pub fn refine_prob(&self) -> f64 {
        sigmoid(self.refine_logit)
    }

    fn row(&self, gt_count: usize) -> usize {
        gt_count.clamp(1, self.bins()) - 1
    }

    /// Count distribution for a task with `gt_count` segments; entry `c - 1`
    /// is the probability of predicting `c`.
    pub fn count_probs(&self, gt_count: usize) -> Vec<f64> {
        softmax(&self.count_logits[self.row(gt_count)])
    }

    pub fn sample_count<R: Rng + ?Sized>(&self, gt_count: usize, rng: &mut R) -> usize {
        let probs = self.count_probs(gt_count);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return c + 1;
            }
        }
        probs.len()
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln().clamp(-MAX_LOGIT, MAX_LOGIT)
}

/// A sampled output with the bookkeeping the update rule needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub raw: String,
    pub gt_count: usize,
    pub count: usize,
    /// Mean of `|noise| / noise_bound` over perturbed endpoints, in `[0, 1]`;
    /// 0.5 in expectation.
    pub noise_usage: f64,
    pub timestamps: usize,
    pub mentioned: usize,
    /// Mentioned endpoints whose answer was revised away from the draft.
    pub refined: usize,
}

/// Noise and mention settings for one sampled prediction.
#[derive(Debug, Clone, Copy)]
pub struct SampleSpec {
    pub count: usize,
    pub offset_scale: f64,
    pub mention_prob: f64,
    pub mention_gain: f64,
    pub noise_floor: f64,
    pub refine_prob: f64,
    pub refine_gain: f64,
}

/// Builds one prediction for `task` and renders it as a model output.
///
/// With fewer segments than the ground truth, consecutive ground-truth
/// segments are grouped and each group is predicted by its covering span.
/// Segments beyond the ground-truth count are placed uniformly at random.
pub fn sample_output<R: Rng + ?Sized>(
    task: &GroundingTask,
    spec: SampleSpec,
    rng: &mut R,
) -> Rollout {
    let duration = task.video_duration;
    let sorted: Vec<TimeInterval> = task
        .gt
        .sorted_indices()
        .into_iter()
        .map(|i| task.gt.segments()[i])
        .collect();
    let m = sorted.len();
    let count = spec.count.max(1);

    let mut targets: Vec<(f64, f64, bool)> = Vec::with_capacity(count);
    if m > 0 {
        let groups = count.min(m);
        let (base, extra) = (m / groups, m % groups);
        let mut at = 0;
        for k in 0..groups {
            let size = base + usize::from(k < extra);
            let (first, last) = (sorted[at], sorted[at + size - 1]);
            targets.push((first.start(), last.end(), true));
            at += size;
        }
    }
    while targets.len() < count {
        let start = rng.random_range(0.0..duration);
        let len = rng.random_range(0.05..0.2) * duration;
        targets.push((start, (start + len).min(duration), false));
    }

    let mut segments = SegmentSet::empty();
    let mut think = String::from("I scan the video for the described events.");
    let mut usage_sum = 0.0;
    let mut usage_n = 0usize;
    let mut mentioned = 0usize;
    let mut refined = 0usize;
    let mut endpoint = |centre: f64, perturb: bool, rng: &mut R| -> Endpoint {
        let mention = rng.random_bool(spec.mention_prob.clamp(0.0, 1.0));
        let refine = mention && perturb && rng.random_bool(spec.refine_prob.clamp(0.0, 1.0));
        if !perturb {
            return Endpoint {
                answer: centre,
                draft: mention.then_some(centre),
                refined: false,
            };
        }
        let z: f64 = rng.random_range(-1.0..=1.0);
        usage_sum += z.abs();
        usage_n += 1;
        let base = z * (spec.offset_scale + spec.noise_floor);
        let clamp = |err: f64| (centre + err).clamp(0.0, duration);
        if !mention {
            return Endpoint {
                answer: clamp(base),
                draft: None,
                refined: false,
            };
        }
        let draft_err = base * (1.0 - spec.mention_gain);
        let answer_err = if refine {
            draft_err * (1.0 - spec.refine_gain)
        } else {
            draft_err
        };
        Endpoint {
            answer: clamp(answer_err),
            draft: Some(clamp(draft_err)),
            refined: refine,
        }
    };
    for (start, end, perturb) in targets {
        let mut a = endpoint(start, perturb, rng);
        let mut b = endpoint(end, perturb, rng);
        if a.answer > b.answer {
            std::mem::swap(&mut a, &mut b);
        }
        for e in [&a, &b] {
            if let Some(draft) = e.draft {
                think.push_str(&format!(" A boundary appears near {draft:.2} seconds."));
                mentioned += 1;
                refined += usize::from(e.refined);
            }
        }
        segments.push(TimeInterval::new(a.answer, b.answer).expect("clamped endpoints"));
    }

    let raw = format!(
        "<think>{think}</think><answer>{}</answer>",
        serialize_answer(&segments)
    );
    Rollout {
        raw,
        gt_count: m,
        count,
        noise_usage: if usage_n > 0 {
            usage_sum / usage_n as f64
        } else {
            0.5
        },
        timestamps: 2 * count,
        mentioned,
        refined,
    }
}

struct Endpoint {
    answer: f64,
    /// Value written into the reasoning, if the endpoint is mentioned.
    draft: Option<f64>,
    refined: bool,
}

/// Samples one output for `task` from `policy`.
pub fn sample_rollout<R: Rng + ?Sized>(
    policy: &TabularPolicy,
    task: &GroundingTask,
    env: RolloutEnv,
    rng: &mut R,
) -> Rollout {
    let count = policy.sample_count(task.gt.len(), rng);
    let spec = SampleSpec {
        count,
        offset_scale: policy.offset_scale,
        mention_prob: policy.timestamp_mention_prob(),
        mention_gain: env.mention_gain,
        noise_floor: env.noise_floor,
        refine_prob: policy.refine_prob(),
        refine_gain: env.refine_gain,
    };
    sample_output(task, spec, rng)
}

/// Samples `group_size` outputs for one task.
///
/// `rng_for` supplies an independent stream per rollout index so the group
/// can be generated in any order (or in parallel) with identical results.
pub fn rollout_group<R, F>(
    policy: &TabularPolicy,
    task: &GroundingTask,
    group_size: usize,
    env: RolloutEnv,
    mut rng_for: F,
) -> Vec<Rollout>
where
    R: Rng,
    F: FnMut(usize) -> R,
{
    (0..group_size)
        .map(|i| sample_rollout(policy, task, env, &mut rng_for(i)))
        .collect()
}

/// Group-normalized advantages `(r - mean) / std` with population std;
/// all zeros when the group has no spread.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, SimError> {
    if rewards.len() < 2 {
        return Err(SimError::DegenerateGroup(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// One score-function step on the tabular policy.
///
/// Count rows move along `A·(onehot(c) - p)`. The offset scale moves in log
/// space along `A·(noise_usage - 1/2)`, so rollouts that got lucky with small
/// noise and scored above the group pull the scale down. The mention logit
/// moves along the Bernoulli score `A·(mentioned - p·timestamps)` and the
/// refine logit along `A·(refined - q·mentioned)`, each normalized by its
/// number of trials. Every term is averaged over the rollouts.
pub fn policy_update(
    policy: &TabularPolicy,
    rollouts: &[Rollout],
    advantages: &[f64],
    learning_rate: f64,
) -> Result<TabularPolicy, SimError> {
    if rollouts.len() != advantages.len() {
        return Err(SimError::LengthMismatch {
            rollouts: rollouts.len(),
            advantages: advantages.len(),
        });
    }
    let mut next = policy.clone();
    if rollouts.is_empty() {
        return Ok(next);
    }
    let n = rollouts.len() as f64;
    let p_mention = policy.timestamp_mention_prob();
    let mut scale_grad = 0.0;
    let mut mention_grad = 0.0;
    let mut refine_grad = 0.0;
    let q_refine = policy.refine_prob();
    for (r, &a) in rollouts.iter().zip(advantages) {
        if a == 0.0 {
            continue;
        }
        let row = policy.row(r.gt_count);
        let probs = policy.count_probs(r.gt_count);
        let chosen = r.count.clamp(1, policy.bins()) - 1;
        for (c, p) in probs.iter().enumerate() {
            let indicator = if c == chosen { 1.0 } else { 0.0 };
            next.count_logits[row][c] += learning_rate * a * (indicator - p) / n;
        }
        scale_grad += a * (r.noise_usage - 0.5);
        if r.timestamps > 0 {
            mention_grad +=
                a * (r.mentioned as f64 - p_mention * r.timestamps as f64) / r.timestamps as f64;
        }
        if r.mentioned > 0 {
            refine_grad +=
                a * (r.refined as f64 - q_refine * r.mentioned as f64) / r.mentioned as f64;
        }
    }
    next.offset_scale =
        (policy.offset_scale * (learning_rate * scale_grad / n).exp()).max(MIN_OFFSET_SCALE);
    next.mention_logit =
        (policy.mention_logit + learning_rate * mention_grad / n).clamp(-MAX_LOGIT, MAX_LOGIT);
    next.refine_logit =
        (policy.refine_logit + learning_rate * refine_grad / n).clamp(-MAX_LOGIT, MAX_LOGIT);
    Ok(next)
}
