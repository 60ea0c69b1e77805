use serde::{Deserialize, Serialize};

use super::policy::response_text;
use super::{MockPolicy, RolloutError};
use crate::par::*;
use crate::reward::{RewardDispatcher, Sample};

pub(crate) const STREAM_FILTER: u64 = 0xf117;

/// A response passes when its accuracy reaches this value.
pub const PASS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub id: String,
    pub passes: usize,
    pub k: usize,
    pub kept: bool,
}

impl PassRate {
    pub fn rate(&self) -> f64 {
        self.passes as f64 / self.k as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    /// One entry per input sample, in input order.
    pub rates: Vec<PassRate>,
}

impl FilterReport {
    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.rates.len()).filter(|&i| self.rates[i].kept).collect()
    }

    pub fn kept<'a>(&self, samples: &'a [Sample]) -> Vec<&'a Sample> {
        self.kept_indices().into_iter().map(|i| &samples[i]).collect()
    }
}

fn count_passes(
    sample: &Sample,
    policy: &MockPolicy,
    k: usize,
    rewards: &RewardDispatcher,
) -> Result<PassRate, RolloutError> {
    let head = policy.head(&sample.id)?;
    let mut passes = 0;
    for slot in 0..k {
        let action = policy.sample_action(&sample.id, slot as u64, STREAM_FILTER)?;
        let score = rewards.dispatch(sample, &response_text(&head.answers[action]))?;
        passes += usize::from(score.accuracy >= PASS_THRESHOLD);
    }
    Ok(PassRate {
        id: sample.id.clone(),
        passes,
        k,
        kept: passes > 0 && passes < k,
    })
}

/// Draws `k` responses per sample and keeps samples with `0 < passes < k`.
pub fn pass_rate_filter(
    samples: &[Sample],
    policy: &MockPolicy,
    k: usize,
    rewards: &RewardDispatcher,
) -> Result<FilterReport, RolloutError> {
    if k < 2 {
        return Err(RolloutError::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    let rates = samples
        .par_iter()
        .map(|s| count_passes(s, policy, k, rewards))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FilterReport { rates })
}
