//! Task-aware verifiable rewards.
//!
//! A [`RewardDispatcher`] routes each `(sample, response)` pair by the
//! sample's [`TaskType`] to an independent scorer. Scorers are pure
//! functions; Code and Preference tasks go through pluggable
//! [`ExternalHandler`]s (an LLM judge client, a sandboxed executor) and
//! score zero with an "unavailable" flag when none is registered.

mod dispatch;
mod extract;
mod format;
mod judge;
mod metrics;
mod types;

pub use dispatch::{
    DispatcherBuilder, ExternalHandler, OcrMode, RewardConfig, RewardDispatcher, TaskOverride,
};
pub use extract::{answer_span, extract_answer, parse_ground_truth, Extracted};
pub use format::format_reward;
pub use judge::{CannedJudge, JudgeClient, JudgeHandler, JudgeReply, JudgeRequest};
pub use metrics::{
    bbox_iou, lcs_len, rouge_l_f1, score_boolean, score_exact_match, score_math, score_numerical,
    st_combine, st_grounding_score, temporal_iou, tokenize, wer_accuracy, word_edit_distance,
};
pub use types::{BBox, DataType, GroundTruth, Interval, RewardScore, Sample, TaskType, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error("sample {sample_id}: task {task} expects a {expected} ground truth, found {found}")]
    VariantMismatch {
        sample_id: String,
        task: TaskType,
        expected: &'static str,
        found: &'static str,
    },
    #[error("no reward route registered for task {0}")]
    MissingRoute(TaskType),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("external handler failed: {0}")]
    Handler(String),
}
