//! The fast/slow switching mechanism: a reward-distribution escalation
//! check and a threshold rule over (best reward, uncertainty).

use serde::{Deserialize, Serialize};

pub use crate::config::SwitchConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pathway {
    Fast,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionReason {
    HighRewardLowUncertainty,
    LowReward,
    HighUncertainty,
    UniformlyLowDistribution,
    Cooldown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayDecision {
    pub pathway: Pathway,
    pub reason: DecisionReason,
}

impl PathwayDecision {
    /// Fast is only ever justified by the threshold rule or cooldown.
    pub fn is_consistent(&self) -> bool {
        match self.pathway {
            Pathway::Fast => matches!(
                self.reason,
                DecisionReason::HighRewardLowUncertainty | DecisionReason::Cooldown
            ),
            Pathway::Slow => !matches!(
                self.reason,
                DecisionReason::HighRewardLowUncertainty | DecisionReason::Cooldown
            ),
        }
    }
}

/// Escalation flag: true when candidate rewards are uniformly low (the
/// bottom `low_reward_quantile` fraction all fall below tau_reward) or
/// the whole distribution is flat below threshold.
pub fn reward_distribution_check(rewards: &[f64], cfg: &SwitchConfig) -> Result<bool> {
    if rewards.is_empty() {
        return Err(Error::InvalidArgument(
            "reward distribution check needs a non-empty list".into(),
        ));
    }
    let mut sorted = rewards.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = ((cfg.low_reward_quantile * rewards.len() as f64).ceil() as usize)
        .clamp(1, rewards.len());
    let uniformly_low = sorted[..m].iter().all(|&r| r < cfg.tau_reward);
    let max = sorted[sorted.len() - 1];
    let flat_low = max - sorted[0] < cfg.epsilon_flat && max < cfg.tau_reward;
    Ok(uniformly_low || flat_low)
}

/// Pick the pathway for this tick.
///
/// Fast iff best_reward > tau_reward, u < tau_uncertainty, and the
/// distribution flag is clear; a recent slow activation forces Fast for
/// `slow_cooldown_ticks`. Slow reasons report the first failing condition
/// in priority order: distribution flag, low reward, high uncertainty.
pub fn decide(
    best_reward: f64,
    u: f64,
    dist_flag: bool,
    cfg: &SwitchConfig,
    ticks_since_slow: Option<u32>,
) -> PathwayDecision {
    let cooldown_active =
        ticks_since_slow.is_some_and(|t| t < cfg.slow_cooldown_ticks);
    let fast_ok = best_reward > cfg.tau_reward && u < cfg.tau_uncertainty && !dist_flag;
    if fast_ok {
        return PathwayDecision {
            pathway: Pathway::Fast,
            reason: DecisionReason::HighRewardLowUncertainty,
        };
    }
    if cooldown_active {
        return PathwayDecision {
            pathway: Pathway::Fast,
            reason: DecisionReason::Cooldown,
        };
    }
    let reason = if dist_flag {
        DecisionReason::UniformlyLowDistribution
    } else if best_reward <= cfg.tau_reward {
        DecisionReason::LowReward
    } else {
        DecisionReason::HighUncertainty
    };
    PathwayDecision {
        pathway: Pathway::Slow,
        reason,
    }
}
