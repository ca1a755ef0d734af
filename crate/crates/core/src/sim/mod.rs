//! Desk-scale group-relative policy optimization on synthetic grounding tasks.
//!
//! Each step draws `tasks_per_step` tasks, samples a group of outputs per task
//! from a [`TabularPolicy`], scores them with the phased reward, normalizes
//! rewards within each group and applies one update. Every task and rollout
//! draws from its own ChaCha stream keyed by `(seed, step, task, rollout)`,
//! so logs do not depend on evaluation order.

mod policy;
mod task;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};
use crate::schedule::{compute_reward, Phase, RewardConfig};

pub use policy::{
    group_advantages, policy_update, rollout_group, sample_output, sample_rollout, Rollout,
    RolloutEnv, SampleSpec, TabularPolicy,
};
pub use task::{generate_task, GroundingTask};

/// When the timestamp reward is active during a simulated run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampSchedule {
    /// Follow `RewardConfig::phase_switch_step`.
    #[default]
    Phased,
    /// Phase 1 for the whole run.
    Always,
    /// Phase 2 from the first step.
    Never,
}

impl TimestampSchedule {
    pub fn apply(self, cfg: &RewardConfig) -> RewardConfig {
        let phase_switch_step = match self {
            TimestampSchedule::Phased => cfg.phase_switch_step,
            TimestampSchedule::Always => u64::MAX,
            TimestampSchedule::Never => 0,
        };
        RewardConfig {
            phase_switch_step,
            ..cfg.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub steps: u64,
    pub group_size: usize,
    pub tasks_per_step: usize,
    pub learning_rate: f64,
    pub count_bins: usize,
    pub max_segments: usize,
    pub duration_range: [f64; 2],
    /// Initial per-row logit drop per unit of count distance.
    pub count_sharpness: f64,
    pub initial_offset_scale: f64,
    pub initial_mention_prob: f64,
    /// Noise reduction on endpoints whose timestamp is echoed in reasoning.
    pub mention_gain: f64,
    /// Noise bound, in seconds, that training cannot shrink.
    pub noise_floor: f64,
    pub initial_refine_prob: f64,
    /// Fraction of the remaining error removed by refining a mentioned endpoint.
    pub refine_gain: f64,
    pub schedule: TimestampSchedule,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            steps: 600,
            group_size: 8,
            tasks_per_step: 4,
            learning_rate: 0.1,
            count_bins: 6,
            max_segments: 4,
            duration_range: [20.0, 60.0],
            count_sharpness: 1.0,
            initial_offset_scale: 4.0,
            initial_mention_prob: 0.1,
            mention_gain: 0.3,
            noise_floor: 1.0,
            initial_refine_prob: 0.2,
            refine_gain: 0.7,
            schedule: TimestampSchedule::Phased,
        }
    }
}

impl SimParams {
    pub const KEYS: [&'static str; 15] = [
        "steps",
        "group_size",
        "tasks_per_step",
        "learning_rate",
        "count_bins",
        "max_segments",
        "duration_range",
        "count_sharpness",
        "initial_offset_scale",
        "initial_mention_prob",
        "mention_gain",
        "noise_floor",
        "initial_refine_prob",
        "refine_gain",
        "schedule",
    ];

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Simulation(m.to_owned()));
        if self.group_size < 2 {
            return fail("group_size must be at least 2");
        }
        if self.tasks_per_step == 0 {
            return fail("tasks_per_step must be positive");
        }
        if self.count_bins == 0 || self.max_segments == 0 {
            return fail("count_bins and max_segments must be positive");
        }
        if self.max_segments > self.count_bins {
            return fail("max_segments cannot exceed count_bins");
        }
        let [lo, hi] = self.duration_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
            return fail("duration_range must be positive and ordered");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail("learning_rate must be finite and non-negative");
        }
        if !(self.initial_offset_scale.is_finite() && self.initial_offset_scale > 0.0) {
            return fail("initial_offset_scale must be positive");
        }
        if !(0.0..=1.0).contains(&self.initial_mention_prob)
            || !(0.0..=1.0).contains(&self.mention_gain)
        {
            return fail("initial_mention_prob and mention_gain must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.initial_refine_prob)
            || !(0.0..=1.0).contains(&self.refine_gain)
        {
            return fail("initial_refine_prob and refine_gain must lie in [0, 1]");
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return fail("noise_floor must be finite and non-negative");
        }
        Ok(())
    }

    pub fn initial_policy(&self) -> TabularPolicy {
        TabularPolicy::new(
            self.count_bins,
            self.count_sharpness,
            self.initial_offset_scale,
            self.initial_mention_prob,
            self.initial_refine_prob,
        )
    }

    pub fn rollout_env(&self) -> RolloutEnv {
        RolloutEnv {
            mention_gain: self.mention_gain,
            noise_floor: self.noise_floor,
            refine_gain: self.refine_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub phase: Phase,
    pub mean_r_match: f64,
    pub mean_r_timestamp: f64,
    pub mean_r_format: f64,
    /// Mean `|#pred - #gt|` over rollouts on multi-segment tasks; empty when
    /// the step drew none.
    pub mean_count_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<StepRecord>,
}

impl TrainingLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn last(&self, window: usize) -> &[StepRecord] {
        &self.records[self.records.len().saturating_sub(window)..]
    }

    fn first(&self, window: usize) -> &[StepRecord] {
        &self.records[..window.min(self.records.len())]
    }

    pub fn final_mean_r_match(&self, window: usize) -> f64 {
        mean(self.last(window).iter().map(|r| r.mean_r_match))
    }

    pub fn initial_mean_r_match(&self, window: usize) -> f64 {
        mean(self.first(window).iter().map(|r| r.mean_r_match))
    }

    pub fn final_mean_count_gap(&self, window: usize) -> f64 {
        mean(self.last(window).iter().filter_map(|r| r.mean_count_gap))
    }

    pub fn final_mean_r_timestamp(&self, window: usize) -> f64 {
        mean(self.last(window).iter().map(|r| r.mean_r_timestamp))
    }

    /// Headered CSV: `step,phase,mean_r_match,mean_r_timestamp,mean_r_format,mean_count_gap`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean<I: Iterator<Item = f64>>(it: I) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Independent stream for `(seed, step, task slot, rollout)`.
pub fn stream_rng(seed: u64, step: u64, slot: u64, rollout: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, step, slot, rollout]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

const TASK_STREAM: u64 = u64::MAX;

/// Runs the simulation. Steps are numbered from 1, so the phase switch at
/// step `k` keeps the timestamp reward for exactly `k` steps.
pub fn run_simulation(
    cfg: &RewardConfig,
    params: &SimParams,
    seed: u64,
) -> Result<TrainingLog, SimError> {
    let cfg = params.schedule.apply(cfg);
    let mut policy = params.initial_policy();
    let mut log = TrainingLog::default();
    let [lo, hi] = params.duration_range;

    for step in 1..=params.steps {
        let phase = cfg.phase_at(step);
        let mut rollouts = Vec::with_capacity(params.tasks_per_step * params.group_size);
        let mut advantages = Vec::with_capacity(rollouts.capacity());
        let (mut sum_match, mut sum_ts, mut sum_fmt, mut n) = (0.0, 0.0, 0.0, 0usize);
        let (mut gap_sum, mut gap_n) = (0.0, 0usize);

        for slot in 0..params.tasks_per_step as u64 {
            let task = generate_task(
                &mut stream_rng(seed, step, slot, TASK_STREAM),
                (lo, hi),
                params.max_segments,
            );
            let group = rollout_group(
                &policy,
                &task,
                params.group_size,
                params.rollout_env(),
                |i| stream_rng(seed, step, slot, i as u64),
            );
            let rewards: Vec<_> = group
                .iter()
                .map(|r| compute_reward(&task.gt, &r.raw, step, &cfg))
                .collect();
            let totals: Vec<f64> = rewards.iter().map(|b| b.total).collect();
            advantages.extend(group_advantages(&totals)?);

            for (b, r) in rewards.iter().zip(&group) {
                sum_match += b.r_match;
                sum_ts += b.r_timestamp;
                sum_fmt += b.r_format;
                n += 1;
                if task.multi_segment {
                    gap_sum += (r.count as f64 - r.gt_count as f64).abs();
                    gap_n += 1;
                }
            }
            rollouts.extend(group);
        }

        policy = policy_update(&policy, &rollouts, &advantages, params.learning_rate)?;
        let n = n as f64;
        log.records.push(StepRecord {
            step,
            phase,
            mean_r_match: sum_match / n,
            mean_r_timestamp: sum_ts / n,
            mean_r_format: sum_fmt / n,
            mean_count_gap: (gap_n > 0).then(|| gap_sum / gap_n as f64),
        });
    }
    Ok(log)
}
