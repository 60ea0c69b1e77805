//! Rollout groups, group-relative advantages and the clipped surrogate over
//! a mock categorical policy.

mod filter;
mod group;
mod loss;
mod modality;
mod policy;
mod train;

pub use filter::{pass_rate_filter, FilterReport, PassRate, PASS_THRESHOLD};
pub use group::{
    compute_advantages, generate_group, generate_on_policy_group, ClipConfig, Fallback,
    GroupMeta, MixPolicyConfig, OfflineTrajectory, Origin, ResponseRecord, RolloutConfig,
    RolloutGroup,
};
pub use loss::{
    clipped_objective, dapo_surrogate_loss, groups_surrogate, policy_gradient_step,
    surrogate_gradient, Surrogate,
};
pub use modality::{
    forward_without_dummy, mixed_modality_forward, validate_placeholder_alignment, BatchItem,
    Branch, ForwardOutput, MicroBatch, MockEncoder, Participation,
};
pub use policy::{
    candidate_answers, log_softmax, response_text, softmax, MockPolicy, PolicyConfig, PolicyHead,
};
pub use train::{
    parse_train_manifest, train_sim, StepMetrics, TrainConfig, TrainSample, TrainSetup,
    TrainSummary, METRICS_SCHEMA, METRICS_VERSION,
};

use crate::reward::RewardError;

#[derive(Debug, thiserror::Error)]
pub enum RolloutError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no policy head for sample {0}")]
    UnknownSample(String),
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("sample {sample_id}: {placeholders} placeholder tokens but {features} visual features")]
    PlaceholderMismatch {
        sample_id: String,
        placeholders: usize,
        features: usize,
    },
    #[error("sample {sample_id}: zero visual features")]
    DegenerateSample { sample_id: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
