use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ExternalHandler, GroundTruth, RewardError, Sample};

/// Wire request to an external judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub sample_id: String,
    pub prompt: String,
    pub response: String,
    pub rubric: String,
}

/// Wire reply from an external judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeReply {
    pub score: f64,
    pub rationale: String,
}

/// Transport to an LLM judge. Implementations own the network details.
pub trait JudgeClient: Send + Sync {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeReply, RewardError>;
}

/// Offline judge answering from a fixed table.
#[derive(Debug, Clone, Default)]
pub struct CannedJudge {
    replies: HashMap<String, JudgeReply>,
    fallback: Option<JudgeReply>,
}

impl CannedJudge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reply(mut self, sample_id: impl Into<String>, score: f64, rationale: &str) -> Self {
        self.replies.insert(
            sample_id.into(),
            JudgeReply {
                score,
                rationale: rationale.to_string(),
            },
        );
        self
    }

    pub fn with_fallback(mut self, score: f64, rationale: &str) -> Self {
        self.fallback = Some(JudgeReply {
            score,
            rationale: rationale.to_string(),
        });
        self
    }
}

impl JudgeClient for CannedJudge {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeReply, RewardError> {
        self.replies
            .get(&request.sample_id)
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| RewardError::Handler(format!("no canned reply for {}", request.sample_id)))
    }
}

/// Adapts a [`JudgeClient`] into a reward route. The rubric is the sample's
/// reference text.
pub struct JudgeHandler<C> {
    client: C,
}

impl<C: JudgeClient> JudgeHandler<C> {
    pub fn new(client: C) -> Self {
        Self { client }
    }
}

impl<C: JudgeClient> ExternalHandler for JudgeHandler<C> {
    fn evaluate(&self, sample: &Sample, response: &str) -> Result<f64, RewardError> {
        let rubric = match &sample.ground_truth {
            GroundTruth::Text(t) => t.clone(),
            other => other.answer_text(),
        };
        let reply = self.client.judge(&JudgeRequest {
            sample_id: sample.id.clone(),
            prompt: sample.prompt.clone(),
            response: response.to_string(),
            rubric,
        })?;
        if !reply.score.is_finite() {
            return Err(RewardError::Handler(format!("non-finite judge score {}", reply.score)));
        }
        Ok(reply.score.clamp(0.0, 1.0))
    }
}
