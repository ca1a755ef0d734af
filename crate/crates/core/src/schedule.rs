//! Phased reward composition.
//!
//! Phase 1 (steps `1..=phase_switch_step`) mixes timestamp and format rewards
//! with weight `beta` and adds `alpha` times the matching reward. Phase 2 drops
//! the timestamp term.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::interval::SegmentSet;
use crate::matching::{matching_scores, MatchingStrategy};
use crate::parser::{
    format_reward, parse_output, timestamp_reward, ModelOutput, TimestampDirection,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    pub phase_switch_step: u64,
    pub timestamp_tolerance: f64,
    pub strategy: MatchingStrategy,
    pub timestamp_direction: TimestampDirection,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 0.4,
            phase_switch_step: 400,
            timestamp_tolerance: 0.005,
            strategy: MatchingStrategy::Sequential,
            timestamp_direction: TimestampDirection::AnswerInReasoning,
        }
    }
}

impl RewardConfig {
    pub const KEYS: [&'static str; 6] = [
        "alpha",
        "beta",
        "phase_switch_step",
        "timestamp_tolerance",
        "strategy",
        "timestamp_direction",
    ];

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(ConfigError::Beta(self.beta));
        }
        if !(self.timestamp_tolerance.is_finite() && self.timestamp_tolerance >= 0.0) {
            return Err(ConfigError::Tolerance(self.timestamp_tolerance));
        }
        Ok(())
    }

    pub fn phase_at(&self, step: u64) -> Phase {
        if step <= self.phase_switch_step {
            Phase::One
        } else {
            Phase::Two
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Phase {
    One,
    Two,
}

impl From<Phase> for u8 {
    fn from(p: Phase) -> u8 {
        match p {
            Phase::One => 1,
            Phase::Two => 2,
        }
    }
}

impl TryFrom<u8> for Phase {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Phase::One),
            2 => Ok(Phase::Two),
            other => Err(format!("phase must be 1 or 2, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_global: f64,
    /// Absent under [`MatchingStrategy::GlobalOnly`].
    pub r_local: Option<f64>,
    pub r_match: f64,
    pub r_timestamp: f64,
    pub r_format: f64,
    pub total: f64,
    pub phase: Phase,
}

/// Combines component rewards under the phase formula.
pub fn compose_total(
    phase: Phase,
    r_timestamp: f64,
    r_format: f64,
    r_match: f64,
    cfg: &RewardConfig,
) -> f64 {
    match phase {
        Phase::One => cfg.beta * r_timestamp + (1.0 - cfg.beta) * r_format + cfg.alpha * r_match,
        Phase::Two => r_format + cfg.alpha * r_match,
    }
}

/// Scores an already parsed output. A malformed output predicts no segments.
pub fn reward_for_parsed(
    gt: &SegmentSet,
    output: &ModelOutput,
    step: u64,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let empty = SegmentSet::empty();
    let pred = match (&output.answer_segments, output.well_formed) {
        (Some(segments), true) => segments,
        _ => &empty,
    };
    let scores = matching_scores(gt, pred, cfg.strategy);
    let r_format = format_reward(output);
    let r_timestamp = timestamp_reward(output, cfg.timestamp_tolerance, cfg.timestamp_direction);
    let phase = cfg.phase_at(step);
    RewardBreakdown {
        r_global: scores.global,
        r_local: scores.local,
        r_match: scores.matching,
        r_timestamp,
        r_format,
        total: compose_total(phase, r_timestamp, r_format, scores.matching, cfg),
        phase,
    }
}

/// Parses `raw_output` and computes every reward component for `step`.
pub fn compute_reward(
    gt: &SegmentSet,
    raw_output: &str,
    step: u64,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    reward_for_parsed(gt, &parse_output(raw_output), step, cfg)
}
