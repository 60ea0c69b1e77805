use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    generate_group, groups_surrogate, mixed_modality_forward, policy_gradient_step,
    validate_placeholder_alignment, BatchItem, ClipConfig, MicroBatch, MixPolicyConfig,
    MockEncoder, MockPolicy, OfflineTrajectory, PolicyConfig, RolloutConfig, RolloutError,
    RolloutGroup,
};
use crate::config::ConfigDoc;
use crate::frame_cache::GridTHW;
use crate::par::*;
use crate::reward::{RewardDispatcher, Sample};
use crate::seed;

const STREAM_FEATURES: u64 = 0xfea7;
const NOMINAL_GRID: GridTHW = GridTHW { t: 2, h: 4, w: 4 };

pub const METRICS_SCHEMA: &str = "evr1.train-metrics";
pub const METRICS_VERSION: u32 = 1;

/// One line of a training manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    #[serde(flatten)]
    pub sample: Sample,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offline_trajectory: Option<OfflineTrajectory>,
    /// Visual placeholder tokens in the prompt; defaults to the feature count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placeholder_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_thw: Option<[usize; 3]>,
}

impl TrainSample {
    pub fn grid(&self) -> GridTHW {
        self.grid_thw
            .map(|[t, h, w]| GridTHW { t, h, w })
            .unwrap_or(NOMINAL_GRID)
    }
}

/// Parses JSONL training records. Any bad line or duplicate id aborts.
pub fn parse_train_manifest(text: &str) -> Result<Vec<TrainSample>, RolloutError> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: TrainSample = serde_json::from_str(line).map_err(|e| RolloutError::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(t) = &rec.offline_trajectory {
            t.validate().map_err(|e| RolloutError::Manifest { line: i + 1, message: e.to_string() })?;
        }
        if !ids.insert(rec.sample.id.clone()) {
            return Err(RolloutError::Manifest {
                line: i + 1,
                message: format!("duplicate id {}", rec.sample.id),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// The `[train]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub group_size: usize,
    pub lr: f64,
    pub ppo_epochs: usize,
    pub micro_batch_size: usize,
    pub merge_size: usize,
    pub feature_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 10,
            group_size: 8,
            lr: 0.5,
            ppo_epochs: 2,
            micro_batch_size: 4,
            merge_size: 2,
            feature_dim: 8,
        }
    }
}

/// Everything a simulated training run needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSetup {
    pub train: TrainConfig,
    pub mix: MixPolicyConfig,
    pub clip: ClipConfig,
    pub policy: PolicyConfig,
}

impl TrainSetup {
    /// Reads `[train]`, `[mix_policy]`, `[clip]` and `[policy]`.
    pub fn from_config(doc: &ConfigDoc) -> Result<Self, crate::config::ConfigError> {
        Ok(Self {
            train: doc.section("train")?,
            mix: doc.section("mix_policy")?,
            clip: doc.section("clip")?,
            policy: doc.section("policy")?,
        })
    }

    pub fn rollout(&self) -> RolloutConfig {
        RolloutConfig {
            group_size: self.train.group_size,
            mix: self.mix.clone(),
            clip: self.clip,
        }
    }

    pub fn validate(&self) -> Result<(), RolloutError> {
        self.rollout().validate()?;
        self.policy.validate()?;
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return Err(RolloutError::InvalidInput(format!("lr must be positive, got {}", t.lr)));
        }
        if t.ppo_epochs == 0 || t.micro_batch_size == 0 || t.merge_size == 0 || t.feature_dim == 0 {
            return Err(RolloutError::InvalidInput(
                "ppo_epochs, micro_batch_size, merge_size and feature_dim must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_accuracy: f64,
    pub loss: f64,
    pub clip_fraction: f64,
    pub adv_mean: f64,
    pub adv_std: f64,
    pub adv_min: f64,
    pub adv_max: f64,
    pub offline_slots: usize,
    pub fallbacks: usize,
    pub params_touched: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: Vec<StepMetrics>,
    pub policy: MockPolicy,
}

#[derive(Serialize)]
struct Header<'a> {
    record: &'static str,
    schema: &'static str,
    version: u32,
    samples: usize,
    seed: u64,
    train: &'a TrainConfig,
}

#[derive(Serialize)]
struct StepLine<'a> {
    record: &'static str,
    #[serde(flatten)]
    metrics: &'a StepMetrics,
}

fn micro_batches(
    samples: &[TrainSample],
    setup: &TrainSetup,
) -> Result<Vec<MicroBatch>, RolloutError> {
    let items = samples
        .iter()
        .map(|s| {
            let grid = s.grid();
            let mut rng = seed::rng_for(setup.policy.seed, &s.sample.id, 0, STREAM_FEATURES);
            let features = (0..setup.train.feature_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut item = BatchItem::from_grid(
                s.sample.id.clone(),
                s.sample.data_type,
                features,
                0,
                grid,
                setup.train.merge_size,
            )?;
            item.placeholder_count = s.placeholder_count.unwrap_or(item.visual_feature_count);
            Ok(item)
        })
        .collect::<Result<Vec<_>, RolloutError>>()?;
    Ok(items
        .chunks(setup.train.micro_batch_size)
        .map(|c| MicroBatch { items: c.to_vec() })
        .collect())
}

fn stats(groups: &[RolloutGroup]) -> (f64, f64, f64, f64, f64, f64) {
    let rewards: Vec<f64> = groups.iter().flat_map(|g| g.rewards.iter().copied()).collect();
    let accs: Vec<f64> = groups.iter().flat_map(|g| g.accuracies.iter().copied()).collect();
    let adv: Vec<f64> = groups.iter().flat_map(|g| g.advantages.iter().copied()).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let am = mean(&adv);
    let var = mean(&adv.iter().map(|a| (a - am).powi(2)).collect::<Vec<_>>());
    let min = adv.iter().copied().fold(f64::INFINITY, f64::min);
    let max = adv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fix = |x: f64| if x.is_finite() { x } else { 0.0 };
    (mean(&rewards), mean(&accs), am, var.sqrt(), fix(min), fix(max))
}

/// Runs the rollout / update loop and writes one metrics line per step
/// after a header line.
pub fn train_sim<W: Write>(
    samples: &[TrainSample],
    setup: &TrainSetup,
    rewards: &RewardDispatcher,
    sink: &mut W,
) -> Result<TrainSummary, RolloutError> {
    setup.validate()?;
    let mut policy = MockPolicy::for_samples(setup.policy.clone(), samples.iter().map(|s| &s.sample))?;
    let encoder = MockEncoder::random(setup.train.feature_dim, 4, setup.policy.seed);
    let batches = micro_batches(samples, setup)?;
    let rollout = setup.rollout();

    let header = Header {
        record: "header",
        schema: METRICS_SCHEMA,
        version: METRICS_VERSION,
        samples: samples.len(),
        seed: setup.policy.seed,
        train: &setup.train,
    };
    serde_json::to_writer(&mut *sink, &header).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;

    let mut history = Vec::with_capacity(setup.train.steps);
    for step in 0..setup.train.steps {
        let mut touched = 1.0f64;
        for b in &batches {
            validate_placeholder_alignment(b)?;
            let fwd = mixed_modality_forward(&encoder, b)?;
            touched = touched.min(fwd.participation.touched_fraction());
        }

        let snapshot = &policy;
        let groups = samples
            .par_iter()
            .map(|s| {
                generate_group(
                    &s.sample,
                    s.offline_trajectory.as_ref(),
                    snapshot,
                    &rollout,
                    rewards,
                    step as u64 + 1,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut loss = 0.0;
        let mut clip = 0.0;
        for epoch in 0..setup.train.ppo_epochs {
            let s = groups_surrogate(&policy, &groups, &setup.clip)?;
            if epoch == 0 {
                loss = s.loss;
            }
            clip += s.clip_fraction;
            policy = policy_gradient_step(&policy, &groups, setup.train.lr, &setup.clip)?;
        }

        let (mean_reward, mean_accuracy, adv_mean, adv_std, adv_min, adv_max) = stats(&groups);
        let m = StepMetrics {
            step,
            mean_reward,
            mean_accuracy,
            loss,
            clip_fraction: clip / setup.train.ppo_epochs as f64,
            adv_mean,
            adv_std,
            adv_min,
            adv_max,
            offline_slots: groups.iter().map(|g| g.offline_count()).sum(),
            fallbacks: groups.iter().filter(|g| g.meta.fallback.is_some()).count(),
            params_touched: if batches.is_empty() { 0.0 } else { touched },
        };
        serde_json::to_writer(&mut *sink, &StepLine { record: "step", metrics: &m })
            .map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
        history.push(m);
    }
    Ok(TrainSummary { steps: history, policy })
}
