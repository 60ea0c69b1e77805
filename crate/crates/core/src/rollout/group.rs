use serde::{Deserialize, Serialize};

use super::{MockPolicy, RolloutError};
use crate::reward::{RewardDispatcher, Sample};

use super::policy::response_text;

/// Pre-collected response attached to a training sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineTrajectory {
    #[serde(alias = "text")]
    pub response_text: String,
    pub quality: f64,
}

impl OfflineTrajectory {
    pub fn validate(&self) -> Result<(), RolloutError> {
        if (0.0..=1.0).contains(&self.quality) {
            Ok(())
        } else {
            Err(RolloutError::InvalidInput(format!(
                "trajectory quality {} outside [0, 1]",
                self.quality
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MixPolicyConfig {
    pub enable_mix_policy: bool,
    pub quality_threshold: f64,
}

impl MixPolicyConfig {
    pub fn validate(&self) -> Result<(), RolloutError> {
        if (0.0..=1.0).contains(&self.quality_threshold) {
            Ok(())
        } else {
            Err(RolloutError::InvalidInput(format!(
                "quality_threshold {} outside [0, 1]",
                self.quality_threshold
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClipConfig {
    pub eps_low: f64,
    pub eps_high: f64,
    pub advantage_eps: f64,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self {
            eps_low: 0.2,
            eps_high: 0.28,
            advantage_eps: 1e-6,
        }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<(), RolloutError> {
        let open = |e: f64| e > 0.0 && e < 1.0;
        if !open(self.eps_low) || !open(self.eps_high) {
            return Err(RolloutError::InvalidInput(format!(
                "clip epsilons must lie in (0, 1), got {} / {}",
                self.eps_low, self.eps_high
            )));
        }
        if !(self.advantage_eps >= 0.0 && self.advantage_eps.is_finite()) {
            return Err(RolloutError::InvalidInput("advantage_eps must be >= 0".into()));
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        1.0 - self.eps_low
    }

    pub fn upper(&self) -> f64 {
        1.0 + self.eps_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Onpolicy,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub text: String,
    pub origin: Origin,
    /// Index into the sample's policy head.
    pub action: usize,
    pub logprob_old: f64,
}

/// Why an enabled mix-policy group ended up fully on-policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Fallback {
    MissingTrajectory,
    BelowThreshold { quality: f64, threshold: f64 },
    /// The trajectory's answer is not in the mock policy's vocabulary, so it
    /// has no log-probability.
    OutOfVocabulary,
    ZeroProbability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GroupMeta {
    pub offline_slot: Option<usize>,
    pub fallback: Option<Fallback>,
    /// Set when the offline slot's old log-probability was taken from the
    /// current policy rather than the unknown behaviour policy.
    pub offline_logprob_from_current_policy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub sample_id: String,
    pub responses: Vec<ResponseRecord>,
    pub rewards: Vec<f64>,
    /// Accuracy component of each reward, kept for logging.
    pub accuracies: Vec<f64>,
    pub advantages: Vec<f64>,
    pub meta: GroupMeta,
}

impl RolloutGroup {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn offline_count(&self) -> usize {
        self.responses
            .iter()
            .filter(|r| r.origin == Origin::Offline)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub group_size: usize,
    pub mix: MixPolicyConfig,
    pub clip: ClipConfig,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            mix: MixPolicyConfig::default(),
            clip: ClipConfig::default(),
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.group_size < 2 {
            return Err(RolloutError::InvalidInput("group_size must be at least 2".into()));
        }
        self.mix.validate()?;
        self.clip.validate()
    }
}

/// Group-relative advantages `(r - mean) / (std_pop + eps)`.
///
/// A group whose rewards are all equal gets all-zero advantages.
pub fn compute_advantages(rewards: &[f64], cfg: &ClipConfig) -> Result<Vec<f64>, RolloutError> {
    if rewards.len() < 2 {
        return Err(RolloutError::InvalidInput("advantages need at least 2 rewards".into()));
    }
    if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(RolloutError::NonFinite { what: "reward", index: i });
    }
    if rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + cfg.advantage_eps;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

fn on_policy_slot(
    sample: &Sample,
    policy: &MockPolicy,
    slot: usize,
    stream: u64,
) -> Result<ResponseRecord, RolloutError> {
    let action = policy.sample_action(&sample.id, slot as u64, stream)?;
    let head = policy.head(&sample.id)?;
    Ok(ResponseRecord {
        text: response_text(&head.answers[action]),
        origin: Origin::Onpolicy,
        action,
        logprob_old: policy.log_prob(&sample.id, action)?,
    })
}

fn finish(
    sample: &Sample,
    responses: Vec<ResponseRecord>,
    meta: GroupMeta,
    clip: &ClipConfig,
    rewards: &RewardDispatcher,
) -> Result<RolloutGroup, RolloutError> {
    let mut r = Vec::with_capacity(responses.len());
    let mut acc = Vec::with_capacity(responses.len());
    for resp in &responses {
        let score = rewards.dispatch(sample, &resp.text)?;
        r.push(score.overall);
        acc.push(score.accuracy);
    }
    let advantages = compute_advantages(&r, clip)?;
    Ok(RolloutGroup {
        sample_id: sample.id.clone(),
        responses,
        rewards: r,
        accuracies: acc,
        advantages,
        meta,
    })
}

/// `n` fully on-policy responses. This is the reference a disabled mix-policy
/// run must reproduce.
pub fn generate_on_policy_group(
    sample: &Sample,
    policy: &MockPolicy,
    n: usize,
    clip: &ClipConfig,
    rewards: &RewardDispatcher,
    stream: u64,
) -> Result<RolloutGroup, RolloutError> {
    if n < 2 {
        return Err(RolloutError::InvalidInput("group size must be at least 2".into()));
    }
    let responses = (0..n)
        .map(|slot| on_policy_slot(sample, policy, slot, stream))
        .collect::<Result<Vec<_>, _>>()?;
    finish(sample, responses, GroupMeta::default(), clip, rewards)
}

/// Builds one rollout group, substituting the final slot with the offline
/// trajectory when mix-policy is on and the trajectory qualifies.
///
/// `stream` separates draws of different training steps.
pub fn generate_group(
    sample: &Sample,
    offline: Option<&OfflineTrajectory>,
    policy: &MockPolicy,
    cfg: &RolloutConfig,
    rewards: &RewardDispatcher,
    stream: u64,
) -> Result<RolloutGroup, RolloutError> {
    let n = cfg.group_size;
    if !cfg.mix.enable_mix_policy {
        return generate_on_policy_group(sample, policy, n, &cfg.clip, rewards, stream);
    }
    if n < 2 {
        return Err(RolloutError::InvalidInput("group size must be at least 2".into()));
    }
    let mut meta = GroupMeta::default();
    let substitute = match offline {
        None => {
            meta.fallback = Some(Fallback::MissingTrajectory);
            None
        }
        Some(t) => {
            t.validate()?;
            if t.quality < cfg.mix.quality_threshold {
                meta.fallback = Some(Fallback::BelowThreshold {
                    quality: t.quality,
                    threshold: cfg.mix.quality_threshold,
                });
                None
            } else {
                match policy.action_of_response(&sample.id, &t.response_text)? {
                    None => {
                        meta.fallback = Some(Fallback::OutOfVocabulary);
                        None
                    }
                    Some(a) => {
                        let lp = policy.log_prob(&sample.id, a)?;
                        if lp == f64::NEG_INFINITY {
                            meta.fallback = Some(Fallback::ZeroProbability);
                            None
                        } else {
                            Some(ResponseRecord {
                                text: t.response_text.clone(),
                                origin: Origin::Offline,
                                action: a,
                                logprob_old: lp,
                            })
                        }
                    }
                }
            }
        }
    };
    let on_policy = if substitute.is_some() { n - 1 } else { n };
    let mut responses = (0..on_policy)
        .map(|slot| on_policy_slot(sample, policy, slot, stream))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(rec) = substitute {
        meta.offline_slot = Some(n - 1);
        meta.offline_logprob_from_current_policy = true;
        responses.push(rec);
    }
    finish(sample, responses, meta, &cfg.clip, rewards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{GroundTruth, RewardConfig, TaskType};
    use crate::rollout::PolicyConfig;
    use proptest::prelude::*;

    fn setup() -> (Sample, MockPolicy, RewardDispatcher) {
        let s = Sample {
            id: "v1".into(),
            problem_type: TaskType::MultipleChoice,
            data_type: Default::default(),
            prompt: "which?".into(),
            media_ref: None,
            ground_truth: GroundTruth::Choice('D'),
        };
        let p = MockPolicy::for_samples(PolicyConfig { seed: 3, ..Default::default() }, [&s]).unwrap();
        (s, p, RewardDispatcher::new(RewardConfig::default()).unwrap())
    }

    fn good_trajectory(q: f64) -> OfflineTrajectory {
        OfflineTrajectory {
            response_text: response_text("D"),
            quality: q,
        }
    }

    fn enabled(th: f64) -> RolloutConfig {
        RolloutConfig {
            mix: MixPolicyConfig {
                enable_mix_policy: true,
                quality_threshold: th,
            },
            ..Default::default()
        }
    }

    #[test]
    fn advantage_closed_forms() {
        let cfg = ClipConfig { advantage_eps: 0.0, ..Default::default() };
        let mut r = vec![0.0; 8];
        r[0] = 1.0;
        let a = compute_advantages(&r, &cfg).unwrap();
        assert!((a[0] - 7f64.sqrt()).abs() < 1e-12);
        for x in &a[1..] {
            assert!((x + 1.0 / 7f64.sqrt()).abs() < 1e-12);
        }
        assert_eq!(compute_advantages(&[0.5; 8], &cfg).unwrap(), vec![0.0; 8]);
        assert_eq!(compute_advantages(&[1.0, 0.0], &cfg).unwrap(), vec![1.0, -1.0]);
        assert!(compute_advantages(&[1.0], &cfg).is_err());
        assert!(compute_advantages(&[1.0, f64::NAN], &cfg).is_err());
    }

    #[test]
    fn eligible_trajectory_takes_final_slot() {
        let (s, p, d) = setup();
        let t = good_trajectory(0.9);
        let g = generate_group(&s, Some(&t), &p, &enabled(0.5), &d, 1).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.offline_count(), 1);
        assert_eq!(g.responses[7].origin, Origin::Offline);
        assert_eq!(g.meta.offline_slot, Some(7));
        assert!(g.meta.offline_logprob_from_current_policy);
        let action = p.head("v1").unwrap().position("D").unwrap();
        assert_eq!(g.responses[7].logprob_old, p.log_prob("v1", action).unwrap());
    }

    #[test]
    fn low_quality_falls_back() {
        let (s, p, d) = setup();
        let t = good_trajectory(0.3);
        let g = generate_group(&s, Some(&t), &p, &enabled(0.5), &d, 1).unwrap();
        assert_eq!(g.offline_count(), 0);
        assert_eq!(g.len(), 8);
        assert!(matches!(g.meta.fallback, Some(Fallback::BelowThreshold { .. })));

        let g = generate_group(&s, None, &p, &enabled(0.0), &d, 1).unwrap();
        assert_eq!(g.meta.fallback, Some(Fallback::MissingTrajectory));

        let odd = OfflineTrajectory { response_text: response_text("Q?"), quality: 1.0 };
        let g = generate_group(&s, Some(&odd), &p, &enabled(0.0), &d, 1).unwrap();
        assert_eq!(g.meta.fallback, Some(Fallback::OutOfVocabulary));
    }

    #[test]
    fn disabled_matches_pure_on_policy() {
        let (s, p, d) = setup();
        let t = good_trajectory(1.0);
        let cfg = RolloutConfig::default();
        for stream in 0..20 {
            let g = generate_group(&s, Some(&t), &p, &cfg, &d, stream).unwrap();
            let base = generate_on_policy_group(&s, &p, 8, &cfg.clip, &d, stream).unwrap();
            assert_eq!(serde_json::to_vec(&g).unwrap(), serde_json::to_vec(&base).unwrap());
        }
    }

    #[test]
    fn enabled_prefix_matches_disabled() {
        let (s, p, d) = setup();
        let t = good_trajectory(1.0);
        let on = generate_group(&s, Some(&t), &p, &enabled(0.0), &d, 4).unwrap();
        let off = generate_group(&s, Some(&t), &p, &RolloutConfig::default(), &d, 4).unwrap();
        assert_eq!(on.responses[..7], off.responses[..7]);
    }

    proptest! {
        #[test]
        fn advantages_center_and_keep_order(
            r in prop::collection::vec(0.0f64..1.0, 2..16),
            c in 0.01f64..100.0,
        ) {
            let cfg = ClipConfig::default();
            let a = compute_advantages(&r, &cfg).unwrap();
            let mean = a.iter().sum::<f64>() / a.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            let scaled: Vec<f64> = r.iter().map(|x| x * c).collect();
            let b = compute_advantages(&scaled, &cfg).unwrap();
            for i in 0..r.len() {
                for j in 0..r.len() {
                    if r[i] < r[j] {
                        prop_assert!(b[i] <= b[j]);
                    }
                }
            }
        }
    }
}
